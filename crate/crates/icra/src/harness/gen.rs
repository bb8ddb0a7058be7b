//! Random instance generation: low-rank ground truths and measurement
//! operators, bit-reproducible per seed.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::operators::MeasurementOperator;

/// Measurement model of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    /// Matrix completion: entrywise sampling.
    Mc,
    /// Affine rank minimization: dense Gaussian measurements.
    Arm,
}

impl Problem {
    pub fn label(self) -> &'static str {
        match self {
            Problem::Mc => "MC",
            Problem::Arm => "ARM",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "MC" | "mc" => Ok(Problem::Mc),
            "ARM" | "arm" => Ok(Problem::Arm),
            other => Err(Error::Config(format!("unknown problem kind {other:?}"))),
        }
    }
}

/// Parameter count of a rank-`r` matrix in `ℝ^{n1×n2}`: the measurement
/// floor below which recovery is information-theoretically impossible.
pub fn degrees_of_freedom(n1: usize, n2: usize, r: usize) -> usize {
    r * (n1 + n2 - r)
}

/// One fully specified random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub problem: Problem,
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub m: usize,
    pub seed: u64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.r < 1 || self.r > self.n1.min(self.n2) {
            return Err(Error::Config(format!(
                "rank {} outside [1, {}]",
                self.r,
                self.n1.min(self.n2)
            )));
        }
        let d_r = degrees_of_freedom(self.n1, self.n2, self.r);
        if self.m < d_r || self.m > self.n1 * self.n2 {
            return Err(Error::Config(format!(
                "m = {} outside [d_r = {d_r}, {}]",
                self.m,
                self.n1 * self.n2
            )));
        }
        Ok(())
    }

    pub fn d_r(&self) -> usize {
        degrees_of_freedom(self.n1, self.n2, self.r)
    }
}

/// Rank-`r` ground truth `X = Xˡ·Xʳ` with iid standard normal factors.
pub fn gen_low_rank(n1: usize, n2: usize, r: usize, seed: u64) -> Result<DenseMatrix> {
    if r < 1 || r > n1.min(n2) {
        return Err(Error::Config(format!(
            "rank {r} outside [1, {}]",
            n1.min(n2)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left: DenseMatrix = DMatrix::from_fn(n1, r, |_, _| rng.sample(StandardNormal));
    let right: DenseMatrix = DMatrix::from_fn(r, n2, |_, _| rng.sample(StandardNormal));
    Ok(left * right)
}

/// Measurement operator for the given model: dense iid Gaussian rows for
/// affine rank minimization, `m` distinct uniform entries for completion.
pub fn gen_operator(
    problem: Problem,
    n1: usize,
    n2: usize,
    m: usize,
    seed: u64,
) -> Result<MeasurementOperator> {
    if m > n1 * n2 {
        return Err(Error::Config(format!(
            "m = {m} exceeds the ambient dimension {}",
            n1 * n2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match problem {
        Problem::Arm => {
            let a: DenseMatrix = DMatrix::from_fn(m, n1 * n2, |_, _| rng.sample(StandardNormal));
            MeasurementOperator::dense(n1, n2, a)
        }
        Problem::Mc => {
            let cells = rand::seq::index::sample(&mut rng, n1 * n2, m)
                .into_iter()
                .map(|idx| (idx % n1, idx / n1))
                .collect();
            MeasurementOperator::sampling(n1, n2, cells)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn low_rank_is_deterministic_and_full_rank_at_cap() {
        let a = gen_low_rank(4, 5, 4, 99).unwrap();
        let b = gen_low_rank(4, 5, 4, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(linalg::svd(&a).unwrap().rank(), 4);
        assert!(gen_low_rank(4, 5, 0, 0).is_err());
        assert!(gen_low_rank(4, 5, 5, 0).is_err());
    }

    #[test]
    fn low_rank_rank_exact_over_many_seeds() {
        for seed in 0..100 {
            let x = gen_low_rank(30, 30, 5, seed).unwrap();
            assert_eq!(linalg::svd(&x).unwrap().rank(), 5, "seed {seed}");
        }
    }

    #[test]
    fn mc_operator_samples_distinct_cells() {
        for seed in 0..50 {
            let op = gen_operator(Problem::Mc, 6, 7, 20, seed).unwrap();
            let omega = op.omega().unwrap();
            assert_eq!(omega.len(), 20);
            // The constructor sorts and rejects duplicates; re-check distinctness.
            assert!(omega.windows(2).all(|w| w[0] != w[1]), "seed {seed}");
        }
        let full = gen_operator(Problem::Mc, 3, 3, 9, 1).unwrap();
        assert_eq!(full.omega().unwrap().len(), 9);
        assert!(gen_operator(Problem::Mc, 3, 3, 10, 1).is_err());
    }

    #[test]
    fn arm_operator_has_full_row_rank() {
        let op = gen_operator(Problem::Arm, 6, 6, 30, 5).unwrap();
        let a = op.dense_matrix().unwrap();
        assert_eq!(a.nrows(), 30);
        assert_eq!(a.ncols(), 36);
        assert_eq!(a.clone().svd(false, false).rank(1e-9), 30);
        let again = gen_operator(Problem::Arm, 6, 6, 30, 5).unwrap();
        assert_eq!(a, again.dense_matrix().unwrap());
    }

    #[test]
    fn spec_validation_enforces_the_information_floor() {
        let mut spec = ProblemSpec {
            problem: Problem::Mc,
            n1: 10,
            n2: 10,
            r: 2,
            m: 36,
            seed: 0,
        };
        assert_eq!(spec.d_r(), 36);
        assert!(spec.validate().is_ok());
        spec.m = 35;
        assert!(spec.validate().is_err());
        spec.m = 101;
        assert!(spec.validate().is_err());
        spec.m = 100;
        assert!(spec.validate().is_ok());
        spec.r = 11;
        assert!(spec.validate().is_err());
    }
}
