//! Low-rank matrix recovery from affine measurements via iterative concave
//! rank approximation, with nuclear-norm and log-det baselines, analysis
//! utilities for the underlying theory, and a reproducible experiment
//! harness.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mm;
pub mod nnm;
pub mod operators;
pub mod seeding;
pub mod solver;
pub mod testkit;
pub mod ua;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use operators::MeasurementOperator;
pub use ua::{Delta, UaFamily};
