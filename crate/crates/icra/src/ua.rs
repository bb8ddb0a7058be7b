//! Unit-step-approximating (UA) function families and the rank surrogate.
//!
//! A UA family `{f_δ}` with `f_δ(x) = f(x/δ)` squeezes toward the unit step
//! as `δ → 0⁺`, so `F_δ(X) = Σᵢ f_δ(σᵢ(X))` interpolates between the nuclear
//! norm (large δ, after `(δ/γ)` rescaling) and the rank (small δ). On the PSD
//! cone the surrogate is concave and differentiable, with gradient
//! `Q diag(f_δ′(λᵢ)) Qᵀ`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, EvdResult};

/// The two built-in UA families.
///
/// `Exponential` is `f(x) = 1 − e^{−x}`; `Rational` is `f(x) = x/(x+1)`,
/// analytic on `(x0, ∞)` for a configured `x0 ∈ (−1, 0)`. Solvers only ever
/// evaluate on `[0, ∞)` (eigenvalues of PSD iterates), so `x0` is
/// configuration rather than a runtime knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UaFamily {
    Exponential,
    Rational { x0: f64 },
}

impl UaFamily {
    /// Left edge of the analytic domain of the unscaled `f`.
    pub fn domain_min(&self) -> f64 {
        match self {
            UaFamily::Exponential => f64::NEG_INFINITY,
            UaFamily::Rational { x0 } => *x0,
        }
    }

    /// Unscaled `f(x)`. No domain check; callers go through [`ua_eval`].
    pub fn eval_raw(&self, x: f64) -> f64 {
        match self {
            UaFamily::Exponential => 1.0 - (-x).exp(),
            UaFamily::Rational { .. } => x / (x + 1.0),
        }
    }

    /// Unscaled derivative `f′(x)`.
    pub fn deriv_raw(&self, x: f64) -> f64 {
        match self {
            UaFamily::Exponential => (-x).exp(),
            UaFamily::Rational { .. } => {
                let d = x + 1.0;
                1.0 / (d * d)
            }
        }
    }

    /// `γ = f′(0)`; equals 1 exactly for both built-in families.
    pub fn gamma(&self) -> f64 {
        self.deriv_raw(0.0)
    }
}

/// Positive approximation scale δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta(f64);

impl Delta {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Delta(value))
        } else {
            Err(Error::Domain(format!("delta must be positive, got {value}")))
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// `f_δ(x) = f(x/δ)` for `x ≥ 0` (the Rational family also accepts the sliver
/// `x ≥ δ·x0` of its analytic domain below zero).
pub fn ua_eval(fam: UaFamily, delta: Delta, x: f64) -> Result<f64> {
    let lo = if fam.domain_min().is_finite() {
        delta.value() * fam.domain_min()
    } else {
        0.0
    };
    if !x.is_finite() || x < lo {
        return Err(Error::Domain(format!(
            "ua_eval argument {x} below domain edge {lo}"
        )));
    }
    Ok(fam.eval_raw(x / delta.value()))
}

/// Inverse of `f_δ` on `[0, 1)`: the unique `x ≥ 0` with `f_δ(x) = y`.
pub fn ua_inverse(fam: UaFamily, delta: Delta, y: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::Domain(format!(
            "ua_inverse argument {y} outside [0, 1)"
        )));
    }
    let x = match fam {
        UaFamily::Exponential => -(1.0 - y).ln(),
        UaFamily::Rational { .. } => y / (1.0 - y),
    };
    Ok(delta.value() * x)
}

/// Rank surrogate `F_δ = Σᵢ f_δ(σᵢ)` over a nonnegative spectrum.
pub fn rank_surrogate(fam: UaFamily, delta: Delta, sigma: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for &s in sigma {
        if s < 0.0 {
            return Err(Error::Domain(format!(
                "rank_surrogate spectrum entry {s} is negative"
            )));
        }
        total += ua_eval(fam, delta, s)?;
    }
    Ok(total)
}

/// `F_δ` of a general rectangular matrix through its singular values.
///
/// Read-only reporting aid; the surrogate is non-differentiable at
/// rank-deficient points of general matrices, so no gradient is offered here.
pub fn rank_surrogate_matrix(fam: UaFamily, delta: Delta, m: &DenseMatrix) -> Result<f64> {
    let dec = linalg::svd(m)?;
    rank_surrogate(fam, delta, dec.sigma.as_slice())
}

/// Eigenvalues of the surrogate gradient given the spectrum of the argument:
/// `f_δ′(λᵢ)`, always strictly positive.
pub(crate) fn grad_spectrum(fam: UaFamily, delta: Delta, lambda: &DVector<f64>) -> DVector<f64> {
    let d = delta.value();
    DVector::from_iterator(
        lambda.len(),
        lambda.iter().map(|&l| fam.deriv_raw(l.max(0.0) / d) / d),
    )
}

fn evd_psd(y: &DenseMatrix, what: &str) -> Result<EvdResult> {
    let mut dec = linalg::evd_sym(y)?;
    let n = dec.lambda.len();
    if n == 0 {
        return Ok(dec);
    }
    // Gram-formed inputs carry round-off a hair below zero: clamp inside a
    // relative slack, reject anything beyond it.
    let scale = dec.lambda[0].max(1.0);
    if dec.lambda[n - 1] < -1e-10 * scale {
        return Err(Error::Domain(format!(
            "{what} expects a PSD matrix, found eigenvalue {:.6e}",
            dec.lambda[n - 1]
        )));
    }
    dec.lambda = dec.lambda.map(|l| l.max(0.0));
    Ok(dec)
}

/// Gradient of `F_δ` on the PSD cone: `∇F_δ(Y) = Q diag(f_δ′(λᵢ)) Qᵀ`.
///
/// Symmetric positive definite because `f′ > 0` on `[0, ∞)` for both
/// families; for the Exponential family this is `(1/δ)·Q diag(e^{−λᵢ/δ}) Qᵀ`.
pub fn grad_f_psd(fam: UaFamily, delta: Delta, y: &DenseMatrix) -> Result<DenseMatrix> {
    let dec = evd_psd(y, "grad_f_psd")?;
    let g = grad_spectrum(fam, delta, &dec.lambda);
    Ok(&dec.q * DMatrix::from_diagonal(&g) * dec.q.transpose())
}

/// Surrogate value on the PSD cone via eigenvalues (cheaper than an SVD and
/// exact for symmetric arguments).
pub fn surrogate_psd(fam: UaFamily, delta: Delta, y: &DenseMatrix) -> Result<f64> {
    let dec = evd_psd(y, "surrogate_psd")?;
    rank_surrogate(fam, delta, dec.lambda.as_slice())
}

/// Numeric audit of the UA property clauses on a sample grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PropertyReport {
    /// (b) strict concavity: negative second differences at spacing 1e-3.
    pub strictly_concave: bool,
    /// (c) `f(x) = 0 ⇔ x = 0` on the grid.
    pub zero_only_at_zero: bool,
    /// (d) nondecreasing on the nonnegative grid.
    pub nondecreasing: bool,
    /// (e) `f(x) → 1`: tail error shrinks and ends small.
    pub unit_limit: bool,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.strictly_concave && self.zero_only_at_zero && self.nondecreasing && self.unit_limit
    }
}

/// Check clauses (b)–(e) for an arbitrary scalar function on a grid of at
/// least 100 nonnegative points. Clause (a), analyticity, is not a numeric
/// statement and is not checked.
pub fn verify_property1_fn<F: Fn(f64) -> f64>(f: F, grid: &[f64]) -> Result<PropertyReport> {
    if grid.len() < 100 {
        return Err(Error::Contract(format!(
            "property grid needs ≥ 100 points, got {}",
            grid.len()
        )));
    }
    if grid.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::Contract("property grid must be nonnegative".into()));
    }
    let mut xs: Vec<f64> = grid.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Strict concavity via second differences at spacing 1e-3. Where the
    // function has saturated (curvature below roundoff, e.g. 1−e^{−x} at
    // large x) the sign is unresolvable, so we demand: never convex beyond
    // roundoff, and strictly concave wherever the arithmetic can tell.
    let h = 1e-3;
    let mut negative = 0usize;
    let mut convex = 0usize;
    for &x in &xs {
        let d2 = f(x + 2.0 * h) - 2.0 * f(x + h) + f(x);
        let noise = 1e-12 * (1.0 + f(x).abs());
        if d2 < -noise {
            negative += 1;
        } else if d2 > noise {
            convex += 1;
        }
    }
    let strictly_concave = convex == 0 && negative * 4 >= xs.len();
    let zero_only_at_zero = f(0.0).abs() <= 1e-12 && xs.iter().all(|&x| x == 0.0 || f(x).abs() > 0.0);
    let nondecreasing = xs.windows(2).all(|w| f(w[1]) >= f(w[0]) - 1e-12);

    // Limit proxy: over the top of the grid the gap to 1 must be shrinking,
    // and small in absolute terms by the last point.
    let hi = xs[xs.len() - 1];
    let mid = 0.5 * hi;
    let gap_hi = (f(hi) - 1.0).abs();
    let gap_mid = (f(mid) - 1.0).abs();
    let unit_limit = gap_hi <= gap_mid + 1e-12 && gap_hi <= 0.05;

    Ok(PropertyReport {
        strictly_concave,
        zero_only_at_zero,
        nondecreasing,
        unit_limit,
    })
}

/// [`verify_property1_fn`] specialised to a built-in family (unscaled, δ=1).
pub fn verify_property1(fam: UaFamily, grid: &[f64]) -> Result<PropertyReport> {
    verify_property1_fn(|x| fam.eval_raw(x), grid)
}

/// Default audit grid: 0 to 100, dense near the origin.
pub fn default_property_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=100).map(|i| i as f64).collect();
    g.extend((1..50).map(|i| i as f64 * 0.02));
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    const FAMILIES: [UaFamily; 2] = [UaFamily::Exponential, UaFamily::Rational { x0: -0.5 }];

    fn d(v: f64) -> Delta {
        Delta::new(v).unwrap()
    }

    /// Independent inversion: bisect `f_δ(x) = y` on a bracketing interval.
    fn bisect_inverse(fam: UaFamily, delta: Delta, y: f64) -> f64 {
        let mut hi = 1.0;
        while ua_eval(fam, delta, hi).unwrap() < y {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ua_eval(fam, delta, mid).unwrap() < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn eval_closed_forms() {
        assert_eq!(ua_eval(UaFamily::Exponential, d(1.0), 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            ua_eval(UaFamily::Exponential, d(1.0), 1.0).unwrap(),
            1.0 - (-1.0f64).exp(),
            epsilon = 1e-15
        );
        // Pointwise unit-step limit as δ → 0⁺.
        assert!((ua_eval(UaFamily::Exponential, d(1e-6), 1.0).unwrap() - 1.0).abs() < 1e-9);
        assert!(ua_eval(UaFamily::Exponential, d(1.0), -0.1).is_err());
        // Rational admits a sliver below zero, down to δ·x0.
        let fam = UaFamily::Rational { x0: -0.5 };
        assert!(ua_eval(fam, d(2.0), -0.9).is_ok());
        assert!(ua_eval(fam, d(2.0), -1.1).is_err());
    }

    #[test]
    fn eval_stays_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for fam in FAMILIES {
            for _ in 0..500 {
                let x: f64 = rng.random_range(0.0..200.0);
                let delta = d(rng.random_range(0.01..10.0));
                let y = ua_eval(fam, delta, x).unwrap();
                assert!((0.0..=1.0).contains(&y), "f out of [0,1]: {y}");
                // Strictly below 1 wherever the gap is representable.
                if x / delta.value() <= 30.0 {
                    assert!(y < 1.0);
                }
            }
        }
    }

    #[test]
    fn inverse_closed_forms_and_bisection() {
        for fam in FAMILIES {
            assert_eq!(ua_inverse(fam, d(3.0), 0.0).unwrap(), 0.0);
            assert!(ua_inverse(fam, d(3.0), 1.0).is_err());
        }
        for n in [2usize, 10, 30, 100] {
            let y = 1.0 - 1.0 / n as f64;
            let x = ua_inverse(UaFamily::Exponential, d(0.7), y).unwrap();
            assert_relative_eq!(x, 0.7 * (n as f64).ln(), max_relative = 1e-12);
        }
        // Roundtrip plus an independent bisection oracle.
        for fam in FAMILIES {
            for &y in &[0.1, 0.5, 0.9, 0.99] {
                let delta = d(2.0);
                let x = ua_inverse(fam, delta, y).unwrap();
                assert!((ua_eval(fam, delta, x).unwrap() - y).abs() < 1e-10);
                assert_relative_eq!(x, bisect_inverse(fam, delta, y), max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn surrogate_counts_rank_at_small_delta() {
        for fam in FAMILIES {
            assert_eq!(rank_surrogate(fam, d(1.0), &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        }
        let f = rank_surrogate(UaFamily::Exponential, d(1e-6), &[5.0, 3.0, 0.0, 0.0]).unwrap();
        assert!((f - 2.0).abs() < 1e-8);
        assert!(rank_surrogate(UaFamily::Exponential, d(1.0), &[1.0, -0.5]).is_err());
    }

    #[test]
    fn surrogate_approaches_nuclear_norm_at_large_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for fam in FAMILIES {
            for _ in 0..20 {
                let sigma: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..5.0)).collect();
                let lead = sigma.iter().cloned().fold(0.0f64, f64::max);
                let nuc: f64 = sigma.iter().sum();
                let delta = d(1e4 * lead);
                let f = rank_surrogate(fam, delta, &sigma).unwrap();
                let scaled = delta.value() / fam.gamma() * f;
                assert!(
                    (scaled - nuc).abs() <= 1e-3 * nuc,
                    "scaled surrogate {scaled} vs nuclear {nuc}"
                );
            }
        }
    }

    #[test]
    fn gamma_is_one_for_both_families() {
        for fam in FAMILIES {
            assert_eq!(fam.gamma(), 1.0);
        }
    }

    #[test]
    fn gradient_closed_forms() {
        let delta = d(0.5);
        let g = grad_f_psd(UaFamily::Exponential, delta, &DMatrix::zeros(4, 4)).unwrap();
        assert_relative_eq!(g, DMatrix::identity(4, 4) * 2.0, epsilon = 1e-12);

        let lam = DVector::from_vec(vec![2.0, 1.0, 0.0]);
        let y = DMatrix::from_diagonal(&lam);
        let g = grad_f_psd(UaFamily::Exponential, delta, &y).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_iterator(
            3,
            lam.iter().map(|&l| (-l / 0.5f64).exp() / 0.5),
        ));
        assert_relative_eq!(g, expect, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for fam in FAMILIES {
            for _ in 0..10 {
                let b = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &b * b.transpose() + DMatrix::identity(6, 6) * 0.5;
                let dir = crate::linalg::symmetrize(&DMatrix::from_fn(6, 6, |_, _| {
                    rng.sample::<f64, _>(StandardNormal)
                }));
                let delta = d(rng.random_range(0.2..3.0));
                let g = grad_f_psd(fam, delta, &y).unwrap();
                let analytic = (g.transpose() * &dir).trace();
                let h = 1e-5;
                let fp = surrogate_psd(fam, delta, &(&y + &dir * h)).unwrap();
                let fm = surrogate_psd(fam, delta, &(&y - &dir * h)).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let denom = analytic.abs().max(fd.abs()).max(1e-12);
                assert!(
                    (fd - analytic).abs() / denom <= 1e-5,
                    "directional derivative mismatch: fd={fd} analytic={analytic}"
                );
            }
        }
    }

    #[test]
    fn gradient_rejects_indefinite_input() {
        let y = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(grad_f_psd(UaFamily::Exponential, d(1.0), &y).is_err());
    }

    #[test]
    fn property_clauses() {
        let grid = default_property_grid();
        for fam in FAMILIES {
            let rep = verify_property1(fam, &grid).unwrap();
            assert!(rep.all_pass(), "family {fam:?} failed: {rep:?}");
        }
        // A linear stub grows without bound: the unit-limit clause fails.
        let rep = verify_property1_fn(|x| x, &grid).unwrap();
        assert!(!rep.unit_limit);
        // log(x + 0.5) is nonzero at the origin: the zero clause fails.
        let rep = verify_property1_fn(|x| (x + 0.5).ln(), &grid).unwrap();
        assert!(!rep.zero_only_at_zero);
    }

    #[test]
    fn growth_ratio_is_nonincreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for fam in FAMILIES {
            for _ in 0..500 {
                let x1: f64 = rng.random_range(1e-6..50.0);
                let x2: f64 = x1 + rng.random_range(1e-6..50.0);
                let r1 = fam.eval_raw(x1) / x1;
                let r2 = fam.eval_raw(x2) / x2;
                assert!(r1 >= r2 - 1e-12);
            }
        }
    }

    #[test]
    fn spectral_subadditivity() {
        // Σf(σᵢ(A−B)) ≥ |Σf(σᵢ(A)) − Σf(σᵢ(B))| for UA families.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let delta = d(1.0);
        for fam in FAMILIES {
            for _ in 0..200 {
                let n1 = rng.random_range(2..=10);
                let n2 = rng.random_range(2..=10);
                let a = DMatrix::from_fn(n1, n2, |_, _| rng.sample::<f64, _>(StandardNormal));
                let b = DMatrix::from_fn(n1, n2, |_, _| rng.sample::<f64, _>(StandardNormal));
                let fa = rank_surrogate_matrix(fam, delta, &a).unwrap();
                let fb = rank_surrogate_matrix(fam, delta, &b).unwrap();
                let fd = rank_surrogate_matrix(fam, delta, &(&a - &b)).unwrap();
                assert!(fd >= (fa - fb).abs() - 1e-9);
            }
        }
    }

    #[test]
    fn surrogate_concave_on_psd_cone() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for fam in FAMILIES {
            for _ in 0..100 {
                let b1 = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
                let b2 = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y1 = &b1 * b1.transpose();
                let y2 = &b2 * b2.transpose();
                let t: f64 = rng.random_range(0.01..0.99);
                let delta = d(rng.random_range(0.1..5.0));
                let mix = surrogate_psd(fam, delta, &(&y1 * t + &y2 * (1.0 - t))).unwrap();
                let f1 = surrogate_psd(fam, delta, &y1).unwrap();
                let f2 = surrogate_psd(fam, delta, &y2).unwrap();
                assert!(mix >= t * f1 + (1.0 - t) * f2 - 1e-9);
            }
        }
    }

    #[test]
    fn first_order_bound_majorizes() {
        // Concavity gives F_δ(Y) ≤ F_δ(Ỹ) + ⟨Y−Ỹ, ∇F_δ(Ỹ)⟩: the linearization
        // used by the MM loop really does majorize.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for fam in FAMILIES {
            for _ in 0..100 {
                let b1 = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
                let b2 = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &b1 * b1.transpose();
                let y_tilde = &b2 * b2.transpose();
                let delta = d(rng.random_range(0.1..5.0));
                let fy = surrogate_psd(fam, delta, &y).unwrap();
                let fyt = surrogate_psd(fam, delta, &y_tilde).unwrap();
                let g = grad_f_psd(fam, delta, &y_tilde).unwrap();
                let lin = fyt + ((&y - &y_tilde).transpose() * g).trace();
                assert!(fy <= lin + 1e-9);
            }
        }
    }
}
