//! Reconstruction quality metric.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Reported ceiling: relative errors below `1e-15` are round-off, not signal.
pub const SNR_CAP_DB: f64 = 300.0;

/// Reconstruction signal-to-noise ratio `20·log₁₀(‖X‖_F / ‖X − X̂‖_F)` in dB,
/// capped at [`SNR_CAP_DB`] once the error falls below `1e-15·‖X‖_F`.
pub fn snr_rec(x_true: &DenseMatrix, x_hat: &DenseMatrix) -> Result<f64> {
    if x_true.shape() != x_hat.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            x_true.shape(),
            x_hat.shape()
        )));
    }
    let signal = x_true.norm();
    if signal == 0.0 {
        return Err(Error::Domain(
            "reconstruction SNR of a zero ground truth is undefined".into(),
        ));
    }
    let err = (x_true - x_hat).norm();
    if err <= 1e-15 * signal {
        return Ok(SNR_CAP_DB);
    }
    Ok(20.0 * (signal / err).log10())
}
