//! Seeded synthetic instances `Y = XB + W`.
//!
//! Entries are drawn from `ChaCha8Rng` seeded with [`InstanceSpec::seed`],
//! using the ziggurat standard-normal sampler from `rand_distr`, in this
//! order: `X` row-major, then `B` (or its `p×k` and `k×q` factors, each
//! row-major), then `W` row-major. Draws are made in `f64` and converted.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Standard deviation of the entries of `W`.
    pub noise_std: f64,
    /// When set, `B` is a product of `p×k` and `k×q` Gaussian factors.
    pub true_rank: Option<usize>,
    pub seed: u64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            n: 100,
            p: 200,
            q: 50,
            noise_std: 0.01,
            true_rank: None,
            seed: 0,
        }
    }
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.q == 0 {
            return Err(Error::InvalidArgument("n, p, q must be positive".into()));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(Error::InvalidArgument("noise_std must be finite and nonnegative".into()));
        }
        if let Some(k) = self.true_rank {
            if k == 0 || k > self.p.min(self.q) {
                return Err(Error::InvalidArgument(format!(
                    "true_rank must lie in 1..={}, got {k}",
                    self.p.min(self.q)
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Instance<T: Scalar> {
    pub x: Matrix<T>,
    pub y: Matrix<T>,
    pub b_true: Matrix<T>,
}

/// `rows × cols` matrix of standard normal draws, filled row by row.
pub fn standard_normal<T: Scalar, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let v: f64 = rng.sample(StandardNormal);
            m[(r, c)] = T::lit(v);
        }
    }
    m
}

pub fn generate_instance<T: Scalar>(spec: &InstanceSpec) -> Result<Instance<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x: DMatrix<T> = standard_normal(&mut rng, spec.n, spec.p);
    let b: DMatrix<T> = match spec.true_rank {
        Some(k) => {
            let left: DMatrix<T> = standard_normal(&mut rng, spec.p, k);
            let right: DMatrix<T> = standard_normal(&mut rng, k, spec.q);
            left * right
        }
        None => standard_normal(&mut rng, spec.p, spec.q),
    };
    let noise: DMatrix<T> = standard_normal(&mut rng, spec.n, spec.q);
    let y = &x * &b + noise * T::lit(spec.noise_std);
    Ok(Instance {
        x: Matrix::from_dmatrix(x)?,
        y: Matrix::from_dmatrix(y)?,
        b_true: Matrix::from_dmatrix(b)?,
    })
}
