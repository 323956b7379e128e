//! Dense symmetric linear algebra and scalar proximal primitives.
//!
//! Everything here is a pure function of its inputs. [`SymMatrix`] is the
//! carrier for every p×p quantity in the crate (covariances, precisions and
//! the ADMM iterates) and keeps its entries exactly symmetric.

use std::fmt;
use std::ops::{Add, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CsadError, Result};

/// Largest `|m - mᵀ|` entry that is silently averaged away on construction.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Dense symmetric p×p real matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Validates and symmetrizes `m`.
    ///
    /// Entries must be finite. Asymmetry up to [`SYMMETRY_TOLERANCE`]
    /// (max-abs) is removed by averaging `(m + mᵀ)/2`; anything larger is
    /// rejected.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CsadError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let p = m.nrows();
        let mut max_abs: f64 = 0.0;
        for j in 0..p {
            for i in 0..p {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(CsadError::NonFinite { row: i, col: j });
                }
                max_abs = max_abs.max((v - m[(j, i)]).abs());
            }
        }
        if max_abs > SYMMETRY_TOLERANCE {
            return Err(CsadError::Asymmetric { max_abs });
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its transpose without any tolerance check. The
    /// result is exactly symmetric because floating-point addition commutes.
    pub(crate) fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let p = m.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        SymMatrix { inner: m }
    }

    pub fn from_row_slice(p: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != p * p {
            return Err(CsadError::DimensionMismatch {
                expected: p * p,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(p, p, entries))
    }

    pub fn zeros(p: usize) -> Self {
        SymMatrix {
            inner: DMatrix::zeros(p, p),
        }
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix {
            inner: DMatrix::identity(p, p),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.inner[(i, i)]).collect()
    }

    pub fn scale(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            inner: &self.inner * factor,
        }
    }

    /// Applies `f` to every entry. `f` must map equal inputs to equal
    /// outputs, which keeps the result symmetric.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        SymMatrix {
            inner: self.inner.map(f),
        }
    }

    /// Entrywise combination of two matrices of equal dimension.
    pub fn zip_map(&self, other: &SymMatrix, f: impl Fn(f64, f64) -> f64) -> Result<SymMatrix> {
        self.check_same_dim(other)?;
        Ok(SymMatrix {
            inner: self.inner.zip_map(&other.inner, f),
        })
    }

    pub fn check_same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(CsadError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Rows as nested vectors, for serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.inner
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix({}x{}) {}", self.dim(), self.dim(), self.inner)
    }
}

/// Panics on dimension mismatch; use [`SymMatrix::zip_map`] for a checked
/// variant.
impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

/// `Q Λ Qᵀ` factorization of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthogonal; column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl EigDecomposition {
    /// `Q diag(values) Qᵀ` with the stored eigenvectors, symmetrized.
    pub fn compose_with(&self, values: &DVector<f64>) -> SymMatrix {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (mut col, v) in scaled.column_iter_mut().zip(values.iter()) {
            col *= *v;
        }
        SymMatrix::symmetrized(scaled * q.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.compose_with(&self.eigenvalues)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Symmetric eigendecomposition with ascending eigenvalues.
///
/// Each eigenvector is signed so that its largest-magnitude component (first
/// one on ties) is nonnegative, making the output deterministic.
pub fn sym_eig(m: &SymMatrix) -> Result<EigDecomposition> {
    let p = m.dim();
    if p == 0 {
        return Ok(EigDecomposition {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let max_sweeps = 1000 * p;
    let raw = SymmetricEigen::try_new(m.as_matrix().clone(), f64::EPSILON, max_sweeps)
        .ok_or(CsadError::EigenFailure)?;
    if raw.eigenvalues.iter().any(|v| !v.is_finite())
        || raw.eigenvectors.iter().any(|v| !v.is_finite())
    {
        return Err(CsadError::EigenFailure);
    }

    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| raw.eigenvalues[a].total_cmp(&raw.eigenvalues[b]));

    let mut eigenvalues = DVector::zeros(p);
    let mut eigenvectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues[dst] = raw.eigenvalues[src];
        let col = raw.eigenvectors.column(src);
        let mut pivot = 0;
        for k in 1..p {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..p {
            eigenvectors[(k, dst)] = sign * col[k];
        }
    }
    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Lower-triangular square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    inner: DMatrix<f64>,
}

impl LowerTriangular {
    /// Rejects non-square input and any nonzero entry above the diagonal.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CsadError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        for j in 0..m.ncols() {
            for i in 0..j {
                if m[(i, j)] != 0.0 {
                    return Err(CsadError::InvalidConfig(format!(
                        "entry ({i}, {j}) above the diagonal is nonzero"
                    )));
                }
            }
        }
        Ok(LowerTriangular { inner: m })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    /// Solves `Lᵀ x = b` by back substitution.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        let p = self.dim();
        if b.len() != p {
            return Err(CsadError::DimensionMismatch {
                expected: p,
                found: b.len(),
            });
        }
        let l = &self.inner;
        let mut x = b.to_vec();
        for i in (0..p).rev() {
            let d = l[(i, i)];
            if d == 0.0 {
                return Err(CsadError::Singular { index: i });
            }
            let mut acc = x[i];
            for k in (i + 1)..p {
                acc -= l[(k, i)] * x[k];
            }
            x[i] = acc / d;
        }
        Ok(x)
    }
}

/// Cholesky factor `L` with `L Lᵀ = m` and a positive diagonal.
pub fn cholesky(m: &SymMatrix) -> Result<LowerTriangular> {
    let p = m.dim();
    let a = m.as_matrix();
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(CsadError::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(LowerTriangular { inner: l })
}

/// Forward substitution for `L x = b`.
pub fn solve_lower_triangular(l: &LowerTriangular, b: &[f64]) -> Result<Vec<f64>> {
    let p = l.dim();
    if b.len() != p {
        return Err(CsadError::DimensionMismatch {
            expected: p,
            found: b.len(),
        });
    }
    let lm = l.as_matrix();
    let mut x = vec![0.0; p];
    for i in 0..p {
        let d = lm[(i, i)];
        if d == 0.0 {
            return Err(CsadError::Singular { index: i });
        }
        let mut acc = b[i];
        for k in 0..i {
            acc -= lm[(i, k)] * x[k];
        }
        x[i] = acc / d;
    }
    Ok(x)
}

/// Inverse of a positive-definite matrix through its Cholesky factor.
pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    let l = cholesky(m)?;
    let p = m.dim();
    let mut inv = DMatrix::zeros(p, p);
    let mut e = vec![0.0; p];
    for j in 0..p {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let y = solve_lower_triangular(&l, &e)?;
        let x = l.solve_transpose(&y)?;
        for (i, v) in x.into_iter().enumerate() {
            inv[(i, j)] = v;
        }
    }
    Ok(SymMatrix::symmetrized(inv))
}

/// Proximal operator of `kappa·|·|`: `sign(a)·max(|a| − kappa, 0)`.
#[inline]
pub fn soft_threshold(a: f64, kappa: f64) -> f64 {
    debug_assert!(kappa >= 0.0, "soft_threshold needs kappa >= 0");
    if a > kappa {
        a - kappa
    } else if a < -kappa {
        a + kappa
    } else {
        0.0
    }
}

pub fn frobenius_norm(m: &SymMatrix) -> f64 {
    m.as_matrix().iter().map(|v| v * v).sum::<f64>().sqrt()
}
