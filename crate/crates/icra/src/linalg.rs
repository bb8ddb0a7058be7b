//! Dense decompositions with deterministic ordering and sign conventions.
//!
//! Everything downstream (surrogate gradients, thresholding, null-space
//! sampling) consumes singular values or eigenvalues through this module, so
//! the conventions are fixed here once: values sorted descending, left
//! singular vectors signed so their first nonzero entry is positive, and
//! eigenvalues of nearly-PSD inputs clamped at zero.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type DenseMatrix = DMatrix<f64>;

/// Values below `RANK_REL_TOL * leading` count as zero for rank purposes.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Eigenvalues of a PSD-within-roundoff matrix below `-PSD_CLAMP_REL * λ₁`
/// indicate a genuinely indefinite input; anything above is clamped to 0.
pub const PSD_CLAMP_REL: f64 = 1e-10;

/// Thin SVD `M = U diag(σ) Vᵀ` with `σ` descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// n1 × n, orthonormal columns, first nonzero entry of each column ≥ 0.
    pub u: DenseMatrix,
    /// Length n = min(n1, n2), nonnegative, descending.
    pub sigma: DVector<f64>,
    /// n2 × n, orthonormal columns.
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> DenseMatrix {
        &self.u * DMatrix::from_diagonal(&self.sigma) * self.v.transpose()
    }

    /// Number of singular values above the relative rank threshold.
    pub fn rank(&self) -> usize {
        rank_from_values(self.sigma.as_slice())
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.sigma.sum()
    }
}

/// Symmetric EVD `S = Q diag(λ) Qᵀ` with `λ` descending.
#[derive(Debug, Clone)]
pub struct EvdResult {
    /// n × n orthogonal.
    pub q: DenseMatrix,
    /// Length n, descending.
    pub lambda: DVector<f64>,
}

impl EvdResult {
    pub fn reconstruct(&self) -> DenseMatrix {
        &self.q * DMatrix::from_diagonal(&self.lambda) * self.q.transpose()
    }

    pub fn rank(&self) -> usize {
        rank_from_values(self.lambda.as_slice())
    }
}

pub fn all_finite(m: &DenseMatrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Count entries whose magnitude exceeds `RANK_REL_TOL` times the largest.
pub fn rank_from_values(values: &[f64]) -> usize {
    let lead = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if lead == 0.0 {
        return 0;
    }
    let tol = RANK_REL_TOL * lead;
    values.iter().filter(|v| v.abs() > tol).count()
}

/// `(M + Mᵀ)/2`, used to scrub roundoff off matrices that are symmetric by
/// construction.
/// Relative change `‖next − prev‖_F / ‖prev‖_F`, the stopping measure of the
/// iterative loops; 0 when both are zero, +∞ when only `prev` is.
pub fn rel_change(next: &DenseMatrix, prev: &DenseMatrix) -> f64 {
    let denom = prev.norm();
    if denom > 0.0 {
        (next - prev).norm() / denom
    } else if next.norm() == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn symmetrize(m: &DenseMatrix) -> DenseMatrix {
    (m + m.transpose()) * 0.5
}

/// Assemble the block matrix `[[Y, X], [Xᵀ, Z]]`.
pub fn block_embed(y: &DenseMatrix, x: &DenseMatrix, z: &DenseMatrix) -> DenseMatrix {
    let (n1, n2) = (x.nrows(), x.ncols());
    assert_eq!(y.nrows(), n1);
    assert_eq!(y.ncols(), n1);
    assert_eq!(z.nrows(), n2);
    assert_eq!(z.ncols(), n2);
    let mut b = DMatrix::zeros(n1 + n2, n1 + n2);
    b.view_mut((0, 0), (n1, n1)).copy_from(y);
    b.view_mut((0, n1), (n1, n2)).copy_from(x);
    b.view_mut((n1, 0), (n2, n1)).copy_from(&x.transpose());
    b.view_mut((n1, n1), (n2, n2)).copy_from(z);
    b
}

fn check_finite(m: &DenseMatrix, what: &str) -> Result<()> {
    if all_finite(m) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} contains non-finite entries")))
    }
}

/// A decomposition is accepted only if it reproduces its input to this
/// relative tolerance — orders of magnitude above round-off (observed
/// ≤ 1e-14) and below the smallest errors of a mispaired factorization.
const RECON_REL_TOL: f64 = 1e-12;

/// Cyclic-sweep cap for the Jacobi fallbacks; convergence is quadratic and
/// typically done within a dozen sweeps.
const JACOBI_MAX_SWEEPS: usize = 60;

/// Sort a matched thin decomposition descending and fix column signs: the
/// first nonzero entry of each left vector is made positive, flipping the
/// matching right vector to preserve the product.
fn order_and_sign(u_in: &DenseMatrix, s_in: &DVector<f64>, v_in: &DenseMatrix) -> SvdResult {
    let n = s_in.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s_in[b].partial_cmp(&s_in[a]).unwrap());

    let mut u = DMatrix::zeros(u_in.nrows(), n);
    let mut v = DMatrix::zeros(v_in.nrows(), n);
    let mut sigma = DVector::zeros(n);
    for (k, &src) in order.iter().enumerate() {
        sigma[k] = s_in[src].max(0.0);
        u.column_mut(k).copy_from(&u_in.column(src));
        v.column_mut(k).copy_from(&v_in.column(src));
    }
    for k in 0..n {
        let lead = u.column(k).iter().find(|x| x.abs() > 1e-12).copied();
        if let Some(x) = lead {
            if x < 0.0 {
                u.column_mut(k).neg_mut();
                v.column_mut(k).neg_mut();
            }
        }
    }
    SvdResult { u, sigma, v }
}

/// One-sided (Hestenes) Jacobi SVD: rotate column pairs until mutual
/// orthogonality. Slower than the bidiagonalization path but unconditionally
/// accurate, including on rank-deficient inputs and for small singular
/// values. Returns an unsorted matched thin triple.
fn jacobi_svd(m: &DenseMatrix) -> (DenseMatrix, DVector<f64>, DenseMatrix) {
    let (n1, n2) = (m.nrows(), m.ncols());
    if n1 < n2 {
        let (u, s, v) = jacobi_svd(&m.transpose());
        return (v, s, u);
    }
    let k = n2;
    let mut a = m.clone();
    let mut v = DMatrix::identity(k, k);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in (p + 1)..k {
                let cp = a.column(p).clone_owned();
                let cq = a.column(q).clone_owned();
                let (app, aqq, apq) = (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq));
                if apq == 0.0 || apq.abs() <= f64::EPSILON * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                a.set_column(p, &(&cp * c - &cq * s));
                a.set_column(q, &(&cp * s + &cq * c));
                let vp = v.column(p).clone_owned();
                let vq = v.column(q).clone_owned();
                v.set_column(p, &(&vp * c - &vq * s));
                v.set_column(q, &(&vp * s + &vq * c));
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma = DVector::zeros(k);
    let mut u = DMatrix::zeros(n1, k);
    for j in 0..k {
        sigma[j] = a.column(j).norm();
        if sigma[j] > 0.0 {
            u.set_column(j, &(a.column(j) / sigma[j]));
        }
    }
    // Exactly-zero columns get orthonormal-complement directions: the
    // standard basis vector with the largest residual, projected twice.
    for j in 0..k {
        if sigma[j] > 0.0 {
            continue;
        }
        let mut best = DVector::zeros(n1);
        let mut best_norm = 0.0;
        for i in 0..n1 {
            let mut e = DVector::zeros(n1);
            e[i] = 1.0;
            for _ in 0..2 {
                for jj in 0..k {
                    if jj != j && (sigma[jj] > 0.0 || jj < j) {
                        let proj = u.column(jj).dot(&e);
                        e -= u.column(jj) * proj;
                    }
                }
            }
            let nn = e.norm();
            if nn > best_norm {
                best_norm = nn;
                best = e;
            }
        }
        u.set_column(j, &(best / best_norm));
    }
    (u, sigma, v)
}

/// Thin SVD with descending singular values and deterministic signs.
///
/// The fast bidiagonalization path silently mispairs singular vectors on
/// some (near-)rank-deficient inputs, so every result is checked against its
/// input and rebuilt by Jacobi rotations when it does not reproduce it.
pub fn svd(m: &DenseMatrix) -> Result<SvdResult> {
    check_finite(m, "svd input")?;
    let accept = |res: SvdResult| -> std::result::Result<SvdResult, ()> {
        let err = (res.reconstruct() - m).norm();
        let scale = res.sigma.iter().fold(0.0f64, |a, &s| a.max(s));
        if err <= RECON_REL_TOL * scale.max(f64::MIN_POSITIVE) {
            Ok(res)
        } else {
            Err(())
        }
    };
    if let Some(dec) = nalgebra::linalg::SVD::try_new(m.clone(), true, true, f64::EPSILON, 0) {
        let u = dec.u.expect("u requested");
        let v = dec.v_t.expect("v_t requested").transpose();
        if let Ok(res) = accept(order_and_sign(&u, &dec.singular_values, &v)) {
            return Ok(res);
        }
    }
    let (u, s, v) = jacobi_svd(m);
    accept(order_and_sign(&u, &s, &v))
        .map_err(|()| Error::DecompositionFailure("svd failed to reproduce its input".into()))
}

/// Classical two-sided Jacobi eigensolver for a symmetric matrix; the
/// robust fallback mirror of [`jacobi_svd`]. Returns an unsorted pair.
fn jacobi_evd(s0: &DenseMatrix) -> (DenseMatrix, DVector<f64>) {
    let n = s0.nrows();
    let mut a = s0.clone();
    let mut q = DMatrix::identity(n, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for r in (p + 1)..n {
                let apq = a[(p, r)];
                let (app, aqq) = (a[(p, p)], a[(r, r)]);
                if apq == 0.0 || apq.abs() <= f64::EPSILON * 0.5 * (app.abs() + aqq.abs()) {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // A ← Jᵀ A J applied as a column then a row rotation.
                for i in 0..n {
                    let (aip, air) = (a[(i, p)], a[(i, r)]);
                    a[(i, p)] = c * aip - s * air;
                    a[(i, r)] = s * aip + c * air;
                }
                for j in 0..n {
                    let (apj, arj) = (a[(p, j)], a[(r, j)]);
                    a[(p, j)] = c * apj - s * arj;
                    a[(r, j)] = s * apj + c * arj;
                }
                a[(p, r)] = 0.0;
                a[(r, p)] = 0.0;
                for i in 0..n {
                    let (qip, qir) = (q[(i, p)], q[(i, r)]);
                    q[(i, p)] = c * qip - s * qir;
                    q[(i, r)] = s * qip + c * qir;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (q, a.diagonal())
}

/// EVD of a symmetric matrix, descending eigenvalues.
///
/// Inputs that are PSD up to roundoff get tiny negative eigenvalues clamped
/// to zero; genuinely indefinite spectra are returned untouched. As with
/// [`svd`], the fast path is only trusted once it reproduces its input, with
/// Jacobi rotations as the fallback.
pub fn evd_sym(s: &DenseMatrix) -> Result<EvdResult> {
    check_finite(s, "evd input")?;
    if s.nrows() != s.ncols() {
        return Err(Error::Contract(format!(
            "evd_sym needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let scale = s.norm();
    let asym = (s - s.transpose()).norm();
    if asym > 1e-12 * scale.max(1.0) {
        return Err(Error::Contract(format!(
            "evd_sym input asymmetric: ‖S−Sᵀ‖={asym:.3e} vs ‖S‖={scale:.3e}"
        )));
    }

    let n = s.nrows();
    let finish = |q_in: &DenseMatrix, l_in: &DVector<f64>| -> EvdResult {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| l_in[b].partial_cmp(&l_in[a]).unwrap());
        let mut q = DMatrix::zeros(n, n);
        let mut lambda = DVector::zeros(n);
        for (k, &src) in order.iter().enumerate() {
            lambda[k] = l_in[src];
            q.column_mut(k).copy_from(&q_in.column(src));
        }
        for k in 0..n {
            let lead = q.column(k).iter().find(|x| x.abs() > 1e-12).copied();
            if let Some(x) = lead {
                if x < 0.0 {
                    q.column_mut(k).neg_mut();
                }
            }
        }
        EvdResult { q, lambda }
    };
    // Verification runs on the raw spectrum; the PSD round-off clamp comes
    // after acceptance so it cannot trip the reconstruction gate.
    let accept = |res: EvdResult| -> std::result::Result<EvdResult, ()> {
        let err = (res.reconstruct() - s).norm();
        let lmax = res.lambda.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
        if err <= RECON_REL_TOL * lmax.max(f64::MIN_POSITIVE) {
            Ok(res)
        } else {
            Err(())
        }
    };
    let clamp = |mut res: EvdResult| -> EvdResult {
        let lead = res.lambda[0].max(0.0);
        if n > 0 && res.lambda[n - 1] < 0.0 && res.lambda[n - 1] >= -PSD_CLAMP_REL * lead.max(1e-300)
        {
            for v in res.lambda.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        res
    };

    if let Some(dec) = nalgebra::linalg::SymmetricEigen::try_new(symmetrize(s), f64::EPSILON, 0) {
        if let Ok(res) = accept(finish(&dec.eigenvectors, &dec.eigenvalues)) {
            return Ok(clamp(res));
        }
    }
    let (q, lambda) = jacobi_evd(&symmetrize(s));
    accept(finish(&q, &lambda)).map(clamp).map_err(|()| {
        Error::DecompositionFailure("symmetric eigen failed to reproduce its input".into())
    })
}

/// Apply a scalar function to the spectrum of a PSD matrix:
/// `g(S) = Q diag(g(λ₁),…,g(λₙ)) Qᵀ`.
pub fn sym_matrix_function<F: Fn(f64) -> f64>(s: &DenseMatrix, g: F) -> Result<DenseMatrix> {
    let dec = evd_sym(s)?;
    let lead = dec.lambda[0].max(0.0);
    if dec.lambda[dec.lambda.len() - 1] < -PSD_CLAMP_REL * lead.max(1e-300) {
        return Err(Error::Domain(format!(
            "sym_matrix_function input not PSD: λ_min = {:.3e}",
            dec.lambda[dec.lambda.len() - 1]
        )));
    }
    let mut gvals = DVector::zeros(dec.lambda.len());
    for (i, &l) in dec.lambda.iter().enumerate() {
        let gl = g(l.max(0.0));
        if !gl.is_finite() {
            return Err(Error::Domain(format!(
                "scalar function non-finite at eigenvalue {l:.6e}"
            )));
        }
        gvals[i] = gl;
    }
    Ok(&dec.q * DMatrix::from_diagonal(&gvals) * dec.q.transpose())
}
