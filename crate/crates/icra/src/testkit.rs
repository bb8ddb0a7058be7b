//! Brute-force oracles and tiny fixed instances used by tests at every
//! level. Hidden from the public API surface; not for production use.
//!
//! The central device: with a 2×2 unknown and m = 3 generic measurements the
//! feasible set `{X : A(X) = b}` is a line `X(t) = X₀ + t·W`, so any spectral
//! objective can be minimized to high accuracy by dense grid search plus
//! local refinement — an independent certificate for the iterative solvers.

#![doc(hidden)]

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::DenseMatrix;
use crate::operators::MeasurementOperator;

/// A 2×2 problem with three Gaussian measurements of a rank-1 truth,
/// deterministic per seed. The feasible set is a one-dimensional line.
pub fn tiny_dense_instance(seed: u64) -> (MeasurementOperator, DVector<f64>, DenseMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e57_0000 ^ seed);
    let xl = DMatrix::from_fn(2, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
    let xr = DMatrix::from_fn(1, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x_true = &xl * &xr;
    let op = loop {
        let a = DMatrix::from_fn(3, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(op) = MeasurementOperator::dense(2, 2, a) {
            break op;
        }
    };
    let b = op.apply(&x_true).unwrap();
    (op, b, x_true)
}

/// The feasible line of an operator with a one-dimensional null space:
/// returns (X₀, W) with X₀ the minimum-Frobenius feasible point and W the
/// unit-norm null direction.
pub fn feasible_line(
    op: &MeasurementOperator,
    b: &DVector<f64>,
) -> (DenseMatrix, DenseMatrix) {
    let ns = op.null_space_basis().unwrap();
    assert_eq!(
        ns.len(),
        1,
        "line oracle needs a one-dimensional null space, got {}",
        ns.len()
    );
    let x0 = op
        .affine_project(b, &DMatrix::zeros(op.n1(), op.n2()))
        .unwrap();
    (x0, ns.basis[0].clone())
}

/// Global minimum of `f(X₀ + t·W)` over t by dense grid search followed by
/// golden-section refinement around the best bracket.
pub fn min_on_feasible_line<F: Fn(&DenseMatrix) -> f64>(
    op: &MeasurementOperator,
    b: &DVector<f64>,
    f: F,
) -> (f64, DenseMatrix, f64) {
    let (x0, w) = feasible_line(op, b);
    // Any minimizer satisfies |t| ≤ 2‖X₀‖ + margin for coercive spectral
    // objectives; a generous bracket costs little at this scale.
    let half_width = 10.0 * (x0.norm() + 1.0);
    let grid = 20_001;
    let eval = |t: f64| f(&(&x0 + &w * t));

    let mut best_i = 0usize;
    let mut best_v = f64::INFINITY;
    for i in 0..grid {
        let t = -half_width + 2.0 * half_width * i as f64 / (grid - 1) as f64;
        let v = eval(t);
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let step = 2.0 * half_width / (grid - 1) as f64;
    let t_best = -half_width + step * best_i as f64;
    let (mut lo, mut hi) = (t_best - step, t_best + step);

    // Golden-section on the bracketing interval.
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut t1 = hi - phi * (hi - lo);
    let mut t2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (eval(t1), eval(t2));
    for _ in 0..120 {
        if f1 <= f2 {
            hi = t2;
            t2 = t1;
            f2 = f1;
            t1 = hi - phi * (hi - lo);
            f1 = eval(t1);
        } else {
            lo = t1;
            t1 = t2;
            f1 = f2;
            t2 = lo + phi * (hi - lo);
            f2 = eval(t2);
        }
    }
    let t_star = 0.5 * (lo + hi);
    let x_star = &x0 + &w * t_star;
    let v_star = eval(t_star);
    (t_star, x_star, v_star)
}

/// Minimum nuclear norm over the feasible line.
pub fn min_nuclear_on_feasible_line(op: &MeasurementOperator, b: &DVector<f64>) -> f64 {
    min_on_feasible_line(op, b, |x| crate::linalg::svd(x).unwrap().nuclear_norm()).2
}
