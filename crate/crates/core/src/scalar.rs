use std::fmt::{Debug, Display};

use nalgebra::{DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the solvers and rules are generic over: `f32` or `f64`.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Display + Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).expect("f64 literal representable")
    }

    #[inline]
    fn from_count(value: usize) -> Self {
        <Self as FromPrimitive>::from_usize(value).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Thin SVD `(U, σ, V)`, `σ` nonincreasing. `None` if it fails to converge.
    fn thin_svd(m: &DMatrix<Self>) -> Option<(DMatrix<Self>, Vec<Self>, DMatrix<Self>)>;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn thin_svd(a: &DMatrix<Self>) -> Option<(DMatrix<Self>, Vec<Self>, DMatrix<Self>)> {
                let (m, n) = a.shape();
                let fa = faer::Mat::<$t>::from_fn(m, n, |i, j| a[(i, j)]);
                let d = fa.thin_svd().ok()?;
                let (u, v) = (d.U(), d.V());
                let k = m.min(n);
                let s = d.S().column_vector();
                Some((
                    DMatrix::from_fn(m, k, |i, j| u[(i, j)]),
                    (0..k).map(|i| s[i]).collect(),
                    DMatrix::from_fn(n, k, |i, j| v[(i, j)]),
                ))
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);
