//! Fixed-scale majorize-minimize pass: linearize the concave spectral
//! objective at the current `(Y, Z)`, solve the resulting weighted
//! nuclear-norm subproblem, re-embed, and repeat until the iterate settles.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::nnm::{self, SplitSolverConfig};
use crate::operators::MeasurementOperator;
use crate::ua::{self, Delta, UaFamily};

/// Tolerance scale for the block-PSD and feasibility state invariants.
pub const MM_INVARIANT_TOL: f64 = 1e-8;

/// Per-side cap on the condition number of a reweighting matrix: gradient
/// eigenvalues are floored at `λ_max(∇)/cap²` before the square root. Late
/// continuation stages drive the true gradient ratio through hundreds of
/// orders of magnitude, which the transformed subproblem's normal matrix
/// cannot absorb; a 1:cap² penalty split already pins the same minimizer as
/// a zero weight, because the weighted nuclear norm is nonsmooth there.
const WEIGHT_COND_CAP: f64 = 3e2;

/// Relative slack for PSD checks on Gram-formed inputs, whose trailing
/// eigenvalues can sit a round-off below zero.
const PSD_EIG_SLACK: f64 = 1e-10;

/// A subproblem iterate whose relative residuals sit below this level is
/// still usable even when the splitting solver flagged a stall (degenerate
/// optimal faces give splitting methods an arbitrarily slow tail): it is far
/// below the 1e-2 relative-change thresholds the surrogate loops act on.
const SUBPROBLEM_ACCEPT_RES: f64 = 1e-5;

/// Classifier for reweighted subproblem outcomes: `Ok` when converged or
/// stalled inside the acceptance band. Callers treat `Err` as an *inexact*
/// step and fall back to the surrogate-descent test instead of failing.
pub(crate) fn accept_subproblem(sol: &nnm::NnmSolution, step: usize) -> Result<()> {
    if !sol.converged && sol.primal_res.max(sol.dual_res) > SUBPROBLEM_ACCEPT_RES {
        return Err(Error::Solver(format!(
            "weighted subproblem stalled at step {step} (primal {:.3e}, dual {:.3e})",
            sol.primal_res, sol.dual_res
        )));
    }
    Ok(())
}

/// Descent test with round-off slack, used to accept inexact subproblem
/// steps: the iterate is feasible by construction, so the surrogate not
/// rising is the one invariant at stake.
pub(crate) fn descended(before: f64, after: f64) -> bool {
    after <= before + 1e-9 * before.abs().max(1.0)
}

/// Which concave spectral objective drives the reweighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReweightRule {
    /// Smoothed-rank objective `F_δ(Y) + F_δ(Z)`; weights are the square
    /// roots of the gradients on the PSD cone.
    Ua { family: UaFamily, delta: Delta },
    /// Log-det objective `Σ ln(λᵢ(Y)+α) + Σ ln(λᵢ(Z)+α)`; weights are
    /// `(Y+αI)^{-1/2}` and `(Z+αI)^{-1/2}`.
    LogDet { alpha: f64 },
}

impl ReweightRule {
    pub fn ua(family: UaFamily, delta: Delta) -> Self {
        ReweightRule::Ua { family, delta }
    }

    pub fn log_det(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(ReweightRule::LogDet { alpha })
        } else {
            Err(Error::Domain(format!(
                "log-det shift must be positive, got {alpha}"
            )))
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReweightRule::Ua { family, .. } => {
                if let UaFamily::Rational { x0 } = family {
                    if !(-1.0..0.0).contains(x0) {
                        return Err(Error::Domain(format!(
                            "rational family offset must lie in (-1, 0), got {x0}"
                        )));
                    }
                }
                Ok(())
            }
            ReweightRule::LogDet { alpha } => {
                if alpha.is_finite() && *alpha > 0.0 {
                    Ok(())
                } else {
                    Err(Error::Domain(format!(
                        "log-det shift must be positive, got {alpha}"
                    )))
                }
            }
        }
    }

    /// The concave objective value this rule drives down.
    pub fn surrogate(&self, y: &DenseMatrix, z: &DenseMatrix) -> Result<f64> {
        match self {
            ReweightRule::Ua { family, delta } => {
                Ok(ua::surrogate_psd(*family, *delta, y)? + ua::surrogate_psd(*family, *delta, z)?)
            }
            ReweightRule::LogDet { alpha } => {
                Ok(log_det_value(y, *alpha)? + log_det_value(z, *alpha)?)
            }
        }
    }
}

fn log_det_value(y: &DenseMatrix, alpha: f64) -> Result<f64> {
    let dec = linalg::evd_sym(y)?;
    let n = dec.lambda.len();
    let scale = dec.lambda.get(0).copied().unwrap_or(0.0).max(1.0);
    if n > 0 && dec.lambda[n - 1] < -PSD_EIG_SLACK * scale {
        return Err(Error::Domain(format!(
            "log-det objective expects a PSD matrix, found eigenvalue {:.6e}",
            dec.lambda[n - 1]
        )));
    }
    Ok(dec.lambda.iter().map(|&l| (l.max(0.0) + alpha).ln()).sum())
}

/// Weight from one PSD block: eigenvalues mapped through the rule's
/// gradient, floored, and square-rooted in the eigenbasis.
fn weight_from(rule: ReweightRule, s: &DenseMatrix, what: &str) -> Result<DenseMatrix> {
    let dec = linalg::evd_sym(s)?;
    let n = dec.lambda.len();
    let scale = dec.lambda.get(0).copied().unwrap_or(0.0).max(1.0);
    if n > 0 && dec.lambda[n - 1] < -PSD_EIG_SLACK * scale {
        return Err(Error::Domain(format!(
            "{what} reweighting expects a PSD matrix, found eigenvalue {:.6e}",
            dec.lambda[n - 1]
        )));
    }
    let g = match rule {
        ReweightRule::Ua { family, delta } => ua::grad_spectrum(family, delta, &dec.lambda),
        ReweightRule::LogDet { alpha } => {
            DVector::from_iterator(n, dec.lambda.iter().map(|&l| 1.0 / (l.max(0.0) + alpha)))
        }
    };
    let g_max = g.max();
    // An all-underflowed gradient collapses to the scale-free uniform weight.
    let floor = if g_max > 0.0 {
        g_max / (WEIGHT_COND_CAP * WEIGHT_COND_CAP)
    } else {
        1.0
    };
    let sqrt_g = DVector::from_iterator(n, g.iter().map(|&v| v.max(floor).sqrt()));
    Ok(linalg::symmetrize(
        &(&dec.q * DMatrix::from_diagonal(&sqrt_g) * dec.q.transpose()),
    ))
}

/// Square-root-of-gradient weights for the linearized subproblem
/// `min ‖W_l X W_r‖_*`; both outputs are symmetric positive definite.
pub fn reweight(
    rule: ReweightRule,
    y: &DenseMatrix,
    z: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    rule.validate()?;
    Ok((
        weight_from(rule, y, "left")?,
        weight_from(rule, z, "right")?,
    ))
}

/// Gram-form PSD factor `B·diag(√σ)` so that `Y = G Gᵀ` is PSD to round-off.
fn gram_psd(b: &DenseMatrix, sigma_sqrt: &DVector<f64>) -> DenseMatrix {
    let g = b * DMatrix::from_diagonal(sigma_sqrt);
    linalg::symmetrize(&(&g * g.transpose()))
}

/// Optimal PSD blocks for a given `X`: with `UΣVᵀ = svd(W_l X W_r)`, returns
/// `Y = W_l⁻¹UΣUᵀW_l⁻¹` and `Z = W_r⁻¹VΣVᵀW_r⁻¹`, which make
/// `[[Y, X],[Xᵀ, Z]]` PSD with the minimal linearized objective.
pub fn update_yz(
    x_next: &DenseMatrix,
    w_l: &DenseMatrix,
    w_r: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (wl_inv, _) = nnm::invert_weight(w_l, "left")?;
    let (wr_inv, _) = nnm::invert_weight(w_r, "right")?;
    let dec = linalg::svd(&(w_l * x_next * w_r))?;
    let sigma_sqrt = dec.sigma.map(f64::sqrt);
    let y = gram_psd(&(&wl_inv * &dec.u), &sigma_sqrt);
    let z = gram_psd(&(&wr_inv * &dec.v), &sigma_sqrt);
    Ok((y, z))
}

/// One step of the majorize-minimize iteration.
#[derive(Debug, Clone)]
pub struct MmState {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
    pub z: DenseMatrix,
    /// Current value of the rule's concave objective, `F(Y) + F(Z)`.
    pub surrogate_value: f64,
    pub inner_iter: usize,
}

impl MmState {
    /// Canonical embedding of a feasible `X`: `Y = UΣUᵀ`, `Z = VΣVᵀ` from its
    /// SVD, so the first surrogate value equals the objective applied twice
    /// to the singular spectrum of `X`.
    pub fn embed(x: DenseMatrix, rule: ReweightRule) -> Result<Self> {
        let dec = linalg::svd(&x)?;
        let sigma_sqrt = dec.sigma.map(f64::sqrt);
        let y = gram_psd(&dec.u, &sigma_sqrt);
        let z = gram_psd(&dec.v, &sigma_sqrt);
        let surrogate_value = rule.surrogate(&y, &z)?;
        Ok(MmState {
            x,
            y,
            z,
            surrogate_value,
            inner_iter: 0,
        })
    }

    /// Most-negative eigenvalue of `[[Y, X],[Xᵀ, Z]]`, as a positive
    /// violation magnitude (0 when the embedding is PSD).
    pub fn block_psd_violation(&self) -> Result<f64> {
        let blk = linalg::block_embed(&self.y, &self.x, &self.z);
        let dec = linalg::evd_sym(&blk)?;
        let n = dec.lambda.len();
        Ok((-dec.lambda[n - 1]).max(0.0))
    }

    /// Assert the two state invariants: block-PSD embedding and feasibility
    /// of `X` for the measurements, both within [`MM_INVARIANT_TOL`] scale.
    pub fn check_invariants(&self, op: &MeasurementOperator, b: &DVector<f64>) -> Result<()> {
        let scale = (self.y.trace() + self.z.trace()).max(1e-300);
        let viol = self.block_psd_violation()?;
        if viol > MM_INVARIANT_TOL * scale {
            return Err(Error::Contract(format!(
                "block embedding not PSD: violation {viol:.3e} vs scale {scale:.3e}"
            )));
        }
        let feas = (op.apply(&self.x)? - b).norm();
        if feas > MM_INVARIANT_TOL * b.norm().max(1.0) {
            return Err(Error::Contract(format!(
                "iterate infeasible: residual {feas:.3e}"
            )));
        }
        Ok(())
    }
}

/// Run the majorize-minimize loop at one fixed scale until the relative
/// change of `X` falls to `eps2` or `max_inner` steps elapse. Returns the
/// final state and the surrogate-value trace (starting with the initial
/// value), which is nonincreasing up to subproblem tolerance.
pub fn mm_solve_fixed_delta(
    op: &MeasurementOperator,
    b: &DVector<f64>,
    rule: ReweightRule,
    init: MmState,
    eps2: f64,
    max_inner: usize,
    split: &SplitSolverConfig,
) -> Result<(MmState, Vec<f64>)> {
    rule.validate()?;
    split.validate()?;
    if !(eps2.is_finite() && eps2 > 0.0) {
        return Err(Error::Config(format!(
            "inner stopping threshold must be positive, got {eps2}"
        )));
    }
    if max_inner == 0 {
        return Err(Error::Config("max_inner must be at least 1".into()));
    }

    let mut state = init;
    let mut trace = Vec::with_capacity(max_inner + 1);
    trace.push(state.surrogate_value);

    for j in 0..max_inner {
        let (w_l, w_r) = reweight(rule, &state.y, &state.z)?;
        let sol = nnm::solve_weighted_nnm_warm(op, b, &w_l, &w_r, split, Some(&state.x))?;
        let exact_step = accept_subproblem(&sol, j + 1).is_ok();
        let x_next = sol.x_hat;
        let (y_next, z_next) = update_yz(&x_next, &w_l, &w_r)?;
        let surrogate_value = rule.surrogate(&y_next, &z_next)?;
        // A residual-tight step is accepted outright; an inexact (stalled)
        // one only if it still descends the surrogate. An inexact step that
        // fails to descend ends the pass at the current state.
        if !exact_step && !descended(state.surrogate_value, surrogate_value) {
            break;
        }
        let d2 = linalg::rel_change(&x_next, &state.x);

        state = MmState {
            x: x_next,
            y: y_next,
            z: z_next,
            surrogate_value,
            inner_iter: j + 1,
        };
        trace.push(surrogate_value);
        if d2 <= eps2 {
            break;
        }
    }
    Ok((state, trace))
}
