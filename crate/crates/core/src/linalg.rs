//! Dense matrix primitives built on the singular value decomposition.
//!
//! Everything downstream depends only on singular values and on
//! basis-invariant quantities (projections, thresholds), so the arbitrary
//! choice of singular vectors for repeated singular values never leaks out.

use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default relative tolerance for [`rank_eps`].
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Dense, finite, non-empty real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T: Scalar>(DMatrix<T>);

impl<T: Scalar> Matrix<T> {
    /// Builds a matrix from row-major entries.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[T]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        if entries.len() != rows * cols {
            return Err(Error::ShapeData {
                rows,
                cols,
                len: entries.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Validates and wraps an existing `DMatrix`.
    pub fn from_dmatrix(m: DMatrix<T>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix { rows, cols });
        }
        for c in 0..cols {
            for r in 0..rows {
                if !m[(r, c)].is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(Matrix(m))
    }

    /// Wraps the output of a computation on validated inputs; reports a
    /// non-finite result as divergence.
    pub(crate) fn from_computed(m: DMatrix<T>, iteration: usize) -> Result<Self> {
        if m.iter().all(|v| v.is_finite()) {
            Ok(Matrix(m))
        } else {
            Err(Error::Diverged(iteration))
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix dimensions must be positive");
        Matrix(DMatrix::identity(n, n))
    }

    /// Square diagonal matrix.
    pub fn from_diagonal(diag: &[T]) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::EmptyMatrix { rows: 0, cols: 0 });
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Self::from_dmatrix(m)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<T> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<T> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Matrix(self.0.transpose())
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                out.push(self.0[(r, c)]);
            }
        }
        out
    }
}

impl<T: Scalar> Deref for Matrix<T> {
    type Target = DMatrix<T>;

    fn deref(&self) -> &DMatrix<T> {
        &self.0
    }
}

impl<T: Scalar> AsRef<DMatrix<T>> for Matrix<T> {
    fn as_ref(&self) -> &DMatrix<T> {
        &self.0
    }
}

impl<T: Scalar> TryFrom<DMatrix<T>> for Matrix<T> {
    type Error = Error;

    fn try_from(m: DMatrix<T>) -> Result<Self> {
        Self::from_dmatrix(m)
    }
}

impl<T: Scalar> From<Matrix<T>> for DMatrix<T> {
    fn from(m: Matrix<T>) -> Self {
        m.0
    }
}

/// Thin SVD `M = U·diag(σ)·Vᵀ` with `σ` sorted nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd<T: Scalar> {
    /// `rows × r` with orthonormal columns.
    pub u: DMatrix<T>,
    /// Length `r = min(rows, cols)`, nonincreasing, nonnegative.
    pub singular_values: Vec<T>,
    /// `cols × r` with orthonormal columns (right singular vectors, not transposed).
    pub v: DMatrix<T>,
}

impl<T: Scalar> Svd<T> {
    /// `U·diag(f(σᵢ))·Vᵀ`.
    pub fn recompose_with(&self, f: impl Fn(T) -> T) -> DMatrix<T> {
        let mut us = self.u.clone();
        for (j, &s) in self.singular_values.iter().enumerate() {
            let scale = f(s);
            us.column_mut(j).scale_mut(scale);
        }
        us * self.v.transpose()
    }

    pub fn reconstruct(&self) -> DMatrix<T> {
        self.recompose_with(|s| s)
    }
}

/// Thin singular value decomposition.
pub fn svd<T: Scalar>(m: &DMatrix<T>) -> Result<Svd<T>> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix { rows, cols });
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::SvdFailure);
    }
    let (u, s, v) = T::thin_svd(m).ok_or(Error::SvdFailure)?;
    Ok(Svd {
        u,
        singular_values: s.into_iter().map(|v| v.max(T::zero())).collect(),
        v,
    })
}

/// Singular values only, nonincreasing.
pub fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Result<Vec<T>> {
    Ok(svd(m)?.singular_values)
}

/// `σ₁(M)`.
pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    Ok(singular_values(m)?[0])
}

/// `Σᵢ σᵢ(M)`.
pub fn nuclear_norm<T: Scalar>(m: &DMatrix<T>) -> Result<T> {
    Ok(singular_values(m)?.into_iter().fold(T::zero(), |acc, s| acc + s))
}

pub fn frobenius_norm<T: Scalar>(m: &DMatrix<T>) -> T {
    m.norm()
}

/// Frobenius inner product `⟨A, B⟩ = tr(AᵀB)`.
pub fn inner<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.dot(b)
}

/// Euclidean projection onto `{N : ‖N‖₂ ≤ radius}`: clips singular values at `radius`.
pub fn project_spectral_ball<T: Scalar>(m: &DMatrix<T>, radius: T) -> Result<DMatrix<T>> {
    if !(radius > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "spectral-ball radius must be positive, got {radius}"
        )));
    }
    let dec = svd(m)?;
    if dec.singular_values[0] <= radius {
        return Ok(m.clone());
    }
    Ok(dec.recompose_with(|s| s.min(radius)))
}

/// Singular value thresholding: `U·diag(max(σᵢ − threshold, 0))·Vᵀ`, the
/// proximal map of `threshold·‖·‖_*`.
pub fn svt<T: Scalar>(m: &DMatrix<T>, threshold: T) -> Result<DMatrix<T>> {
    Ok(svt_with_norm(m, threshold)?.0)
}

/// [`svt`] together with the nuclear norm of its result.
pub(crate) fn svt_with_norm<T: Scalar>(m: &DMatrix<T>, threshold: T) -> Result<(DMatrix<T>, T)> {
    if threshold < T::zero() {
        return Err(Error::InvalidArgument(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    if threshold == T::zero() {
        return Ok((m.clone(), nuclear_norm(m)?));
    }
    let dec = svd(m)?;
    let shrunk: T = dec
        .singular_values
        .iter()
        .map(|&s| (s - threshold).max(T::zero()))
        .fold(T::zero(), |acc, s| acc + s);
    if shrunk == T::zero() {
        return Ok((DMatrix::zeros(m.nrows(), m.ncols()), T::zero()));
    }
    Ok((dec.recompose_with(|s| (s - threshold).max(T::zero())), shrunk))
}

/// Number of singular values above `tol·σ₁(M)`; zero for the zero matrix.
pub fn rank_eps<T: Scalar>(m: &DMatrix<T>, tol: T) -> Result<usize> {
    let s = singular_values(m)?;
    Ok(rank_from_singular_values(&s, tol))
}

pub fn rank_from_singular_values<T: Scalar>(s: &[T], tol: T) -> usize {
    let top = match s.first() {
        Some(&v) if v > T::zero() => v,
        _ => return 0,
    };
    s.iter().filter(|&&v| v > tol * top).count()
}

pub(crate) fn check_product_dims<T: Scalar>(
    what: &str,
    left: &DMatrix<T>,
    right: &DMatrix<T>,
) -> Result<()> {
    if left.ncols() != right.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} times {}x{}",
            left.nrows(),
            left.ncols(),
            right.nrows(),
            right.ncols()
        )));
    }
    Ok(())
}

pub(crate) fn check_same_shape<T: Scalar>(
    what: &str,
    a: &DMatrix<T>,
    b: &DMatrix<T>,
) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}
