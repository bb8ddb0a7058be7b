//! Linear measurement operators `A: ℝ^{n1×n2} → ℝ^m`, their adjoints, null
//! spaces, and the projection onto the affine set `{X : A(X) = b}`.
//!
//! Two realizations: `Dense` (an explicit m × n1·n2 matrix acting on the
//! column-major vectorization, the affine-rank-minimization setting) and
//! `Sampling` (entry observation at an index set Ω, the matrix-completion
//! setting). Everything downstream — the splitting solver, the reweighted
//! loops, and the null-space analysis — goes through this interface.

use nalgebra::{DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};

/// Column-major stacking of the columns of `X`.
pub fn vec_mat(x: &DenseMatrix) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec_mat`].
pub fn unvec(n1: usize, n2: usize, v: &DVector<f64>) -> DenseMatrix {
    DMatrix::from_column_slice(n1, n2, v.as_slice())
}

#[derive(Debug, Clone)]
enum Kind {
    Dense {
        a: DenseMatrix,
        /// Cholesky factor of AAᵀ, computed once; the projection solves
        /// against it on every call.
        gram_chol: nalgebra::linalg::Cholesky<f64, Dyn>,
    },
    Sampling {
        /// Sorted by (i, j); measurement k reads X[omega[k]].
        omega: Vec<(usize, usize)>,
    },
}

/// A linear measurement operator together with its factored normal matrix.
///
/// Immutable after construction and shareable across threads. Measurements of
/// a `Sampling` operator follow a row-major scan of Ω sorted by (i, j).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "OperatorJson", into = "OperatorJson")]
pub struct MeasurementOperator {
    n1: usize,
    n2: usize,
    kind: Kind,
}

impl MeasurementOperator {
    /// Dense operator from an explicit m × n1·n2 matrix. Requires full row
    /// rank (within numerical tolerance) so that `AAᵀ` admits a Cholesky
    /// factorization.
    pub fn dense(n1: usize, n2: usize, a: DenseMatrix) -> Result<Self> {
        let (m, cols) = (a.nrows(), a.ncols());
        if cols != n1 * n2 {
            return Err(Error::DimensionMismatch(format!(
                "dense operator has {cols} columns, expected n1*n2 = {}",
                n1 * n2
            )));
        }
        if m > n1 * n2 {
            return Err(Error::Contract(format!(
                "m = {m} exceeds the ambient dimension {}",
                n1 * n2
            )));
        }
        if !linalg::all_finite(&a) {
            return Err(Error::Domain("dense operator has non-finite entries".into()));
        }
        let gram = &a * a.transpose();
        let gram_chol = nalgebra::linalg::Cholesky::new(gram)
            .ok_or_else(|| Error::RankDeficient("AAᵀ is not positive definite".into()))?;
        let diag = gram_chol.l_dirty().diagonal();
        let (lo, hi) = (diag.min(), diag.max());
        if lo <= 1e-10 * hi {
            return Err(Error::RankDeficient(format!(
                "AAᵀ nearly singular (Cholesky diagonal ratio {:.3e})",
                lo / hi
            )));
        }
        Ok(Self {
            n1,
            n2,
            kind: Kind::Dense { a, gram_chol },
        })
    }

    /// Sampling operator observing the entries in Ω (distinct, in range).
    pub fn sampling(n1: usize, n2: usize, mut omega: Vec<(usize, usize)>) -> Result<Self> {
        if omega.len() > n1 * n2 {
            return Err(Error::Contract(format!(
                "|Ω| = {} exceeds the ambient dimension {}",
                omega.len(),
                n1 * n2
            )));
        }
        omega.sort_unstable();
        if omega.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Contract("Ω contains duplicate indices".into()));
        }
        if omega.iter().any(|&(i, j)| i >= n1 || j >= n2) {
            return Err(Error::Contract("Ω index out of range".into()));
        }
        Ok(Self {
            n1,
            n2,
            kind: Kind::Sampling { omega },
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Number of measurements.
    pub fn m(&self) -> usize {
        match &self.kind {
            Kind::Dense { a, .. } => a.nrows(),
            Kind::Sampling { omega } => omega.len(),
        }
    }

    pub fn is_sampling(&self) -> bool {
        matches!(self.kind, Kind::Sampling { .. })
    }

    /// The observed index set of a sampling operator, sorted by (i, j).
    pub fn omega(&self) -> Option<&[(usize, usize)]> {
        match &self.kind {
            Kind::Sampling { omega } => Some(omega),
            Kind::Dense { .. } => None,
        }
    }

    /// The explicit matrix of a dense operator.
    pub fn dense_matrix(&self) -> Option<&DenseMatrix> {
        match &self.kind {
            Kind::Dense { a, .. } => Some(a),
            Kind::Sampling { .. } => None,
        }
    }

    fn check_dims(&self, x: &DenseMatrix) -> Result<()> {
        if x.nrows() != self.n1 || x.ncols() != self.n2 {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, operator expects {}x{}",
                x.nrows(),
                x.ncols(),
                self.n1,
                self.n2
            )));
        }
        Ok(())
    }

    /// `A(X)`.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DVector<f64>> {
        self.check_dims(x)?;
        Ok(match &self.kind {
            Kind::Dense { a, .. } => a * vec_mat(x),
            Kind::Sampling { omega } => {
                DVector::from_iterator(omega.len(), omega.iter().map(|&(i, j)| x[(i, j)]))
            }
        })
    }

    /// `A*(y)`, the adjoint under the trace inner product:
    /// `⟨A(X), y⟩ = ⟨X, A*(y)⟩`.
    pub fn adjoint(&self, y: &DVector<f64>) -> Result<DenseMatrix> {
        if y.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "vector length {} does not match m = {}",
                y.len(),
                self.m()
            )));
        }
        Ok(match &self.kind {
            Kind::Dense { a, .. } => unvec(self.n1, self.n2, &(a.transpose() * y)),
            Kind::Sampling { omega } => {
                let mut x = DMatrix::zeros(self.n1, self.n2);
                for (k, &(i, j)) in omega.iter().enumerate() {
                    x[(i, j)] = y[k];
                }
                x
            }
        })
    }

    /// Orthonormal basis (trace inner product) of `N(A) = {X : A(X) = 0}`.
    ///
    /// Dense: eigenvectors of the orthogonal projector `I − Aᵀ(AAᵀ)⁻¹A` at
    /// eigenvalue one. Sampling: indicator matrices of unobserved entries.
    pub fn null_space_basis(&self) -> Result<NullSpaceBasis> {
        let count = self.n1 * self.n2 - self.m();
        let basis = match &self.kind {
            Kind::Sampling { omega } => {
                let mut unobserved = Vec::with_capacity(count);
                let observed: std::collections::BTreeSet<_> = omega.iter().copied().collect();
                for i in 0..self.n1 {
                    for j in 0..self.n2 {
                        if !observed.contains(&(i, j)) {
                            let mut e = DMatrix::zeros(self.n1, self.n2);
                            e[(i, j)] = 1.0;
                            unobserved.push(e);
                        }
                    }
                }
                unobserved
            }
            Kind::Dense { a, gram_chol } => {
                let n = self.n1 * self.n2;
                if count == 0 {
                    Vec::new()
                } else {
                    // P = I − Aᵀ(AAᵀ)⁻¹A projects onto N(A); its unit
                    // eigenvalues carry the basis.
                    let sol = gram_chol.solve(&a.clone());
                    let p = DMatrix::identity(n, n) - a.transpose() * sol;
                    let dec = linalg::evd_sym(&linalg::symmetrize(&p))?;
                    let mut basis = Vec::with_capacity(count);
                    for k in 0..count {
                        if (dec.lambda[k] - 1.0).abs() > 1e-8 {
                            return Err(Error::RankDeficient(format!(
                                "projector eigenvalue {} ≈ {:.6e}, expected 1",
                                k, dec.lambda[k]
                            )));
                        }
                        basis.push(unvec(self.n1, self.n2, &dec.q.column(k).clone_owned()));
                    }
                    basis
                }
            }
        };
        Ok(NullSpaceBasis { basis })
    }

    /// Nearest feasible point: `argmin ‖Z − X‖_F s.t. A(Z) = b`.
    pub fn affine_project(&self, b: &DVector<f64>, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_dims(x)?;
        if b.len() != self.m() {
            return Err(Error::DimensionMismatch(format!(
                "rhs length {} does not match m = {}",
                b.len(),
                self.m()
            )));
        }
        Ok(match &self.kind {
            Kind::Sampling { omega } => {
                let mut z = x.clone();
                for (k, &(i, j)) in omega.iter().enumerate() {
                    z[(i, j)] = b[k];
                }
                z
            }
            Kind::Dense { a, gram_chol } => {
                let resid = a * vec_mat(x) - b;
                let w = gram_chol.solve(&resid);
                x - unvec(self.n1, self.n2, &(a.transpose() * w))
            }
        })
    }
}

/// Orthonormal basis of the null space of a measurement operator.
#[derive(Debug, Clone)]
pub struct NullSpaceBasis {
    pub basis: Vec<DenseMatrix>,
}

impl NullSpaceBasis {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Expand coefficients into a null-space element `Σ cₖ basisₖ`.
    pub fn expand(&self, coeffs: &DVector<f64>) -> DenseMatrix {
        assert_eq!(coeffs.len(), self.basis.len());
        let mut w = DMatrix::zeros(self.basis[0].nrows(), self.basis[0].ncols());
        for (k, e) in self.basis.iter().enumerate() {
            w += e * coeffs[k];
        }
        w
    }
}

/// Serialized form: explicit data, row-major rows for `Dense`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum OperatorJson {
    Dense {
        n1: usize,
        n2: usize,
        rows: Vec<Vec<f64>>,
    },
    Sampling {
        n1: usize,
        n2: usize,
        omega: Vec<(usize, usize)>,
    },
}

impl TryFrom<OperatorJson> for MeasurementOperator {
    type Error = Error;

    fn try_from(j: OperatorJson) -> Result<Self> {
        match j {
            OperatorJson::Dense { n1, n2, rows } => {
                let m = rows.len();
                let cols = n1 * n2;
                if rows.iter().any(|r| r.len() != cols) {
                    return Err(Error::Contract("ragged dense operator rows".into()));
                }
                let a = DMatrix::from_fn(m, cols, |i, j| rows[i][j]);
                MeasurementOperator::dense(n1, n2, a)
            }
            OperatorJson::Sampling { n1, n2, omega } => MeasurementOperator::sampling(n1, n2, omega),
        }
    }
}

impl From<MeasurementOperator> for OperatorJson {
    fn from(op: MeasurementOperator) -> Self {
        let (n1, n2) = (op.n1, op.n2);
        match op.kind {
            Kind::Dense { a, .. } => OperatorJson::Dense {
                n1,
                n2,
                rows: (0..a.nrows())
                    .map(|i| a.row(i).iter().copied().collect())
                    .collect(),
            },
            Kind::Sampling { omega } => OperatorJson::Sampling { n1, n2, omega },
        }
    }
}
