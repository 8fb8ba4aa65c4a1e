//! Two-block ADMM for the dual problem.
//!
//! The iteration runs on the unnormalized dual `C̃ = λC` of
//!
//! ```text
//! minimize ½‖C̃ − Y‖²_F − ½‖Y‖²_F + δ(‖E‖₂ ≤ λ)   s.t.  XᵀC̃ − E = 0
//! ```
//!
//! with multiplier `Z`, which converges to the primal coefficient matrix.
//! [`DualSolution::c_star`] is reported in the normalized scale
//! (`‖XᵀC‖₂ ≤ 1`).

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::primal;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct AdmmConfig<T: Scalar> {
    /// Augmented-Lagrangian penalty.
    pub sigma: T,
    /// Multiplier step length, in `(0, (1+√5)/2)`.
    pub tau: T,
    pub max_iter: usize,
    /// Stop once both residuals fall below `tol·(1 + ‖Y‖_F)`.
    pub tol: T,
}

impl<T: Scalar> Default for AdmmConfig<T> {
    fn default() -> Self {
        Self {
            sigma: T::one(),
            tau: T::lit(1.618),
            max_iter: 5000,
            tol: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> AdmmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let golden = (T::one() + T::lit(5.0).sqrt()) / T::lit(2.0);
        if !(self.tau > T::zero() && self.tau < golden) {
            return Err(Error::InvalidArgument(format!(
                "tau must lie in (0, (1+√5)/2), got {}",
                self.tau
            )));
        }
        if !(self.sigma > T::zero()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Iterate of the ADMM, in the unnormalized dual scale.
#[derive(Clone, Debug)]
pub struct AdmmState<T: Scalar> {
    /// `n × q` dual iterate.
    pub c: DMatrix<T>,
    /// `p × q` spectral-ball variable.
    pub e: DMatrix<T>,
    /// `p × q` multiplier.
    pub z: DMatrix<T>,
    pub iter: usize,
    /// `‖XᵀC − E‖_F`
    pub primal_residual: T,
    /// `σ‖X(Eᵏ − Eᵏ⁻¹)‖_F`
    pub dual_residual: T,
}

impl<T: Scalar> AdmmState<T> {
    pub fn max_residual(&self) -> T {
        self.primal_residual.max(self.dual_residual)
    }
}

#[derive(Clone, Debug)]
pub struct DualSolution<T: Scalar> {
    pub lambda: T,
    /// `C*(λ)` in the normalized scale.
    pub c_star: Matrix<T>,
    /// Final multiplier `Z`, the primal estimate.
    pub b_star: Matrix<T>,
    pub iterations: usize,
    pub final_primal_residual: T,
    pub final_dual_residual: T,
    pub duality_gap: T,
    pub converged: bool,
    /// `max(primal, dual)` residual after every iteration.
    pub residual_history: Vec<T>,
}

/// Stepwise ADMM driver. The `n × n` factorization of `I + σXXᵀ` is built
/// once in [`DualSolver::new`].
pub struct DualSolver<'a, T: Scalar> {
    x: &'a DMatrix<T>,
    y: &'a DMatrix<T>,
    lambda: T,
    config: AdmmConfig<T>,
    factor: Cholesky<T, Dyn>,
    state: AdmmState<T>,
    stop_threshold: T,
}

impl<'a, T: Scalar> DualSolver<'a, T> {
    pub fn new(x: &'a DMatrix<T>, y: &'a DMatrix<T>, lambda: T, config: AdmmConfig<T>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        config.validate()?;
        let n = x.nrows();
        let system = DMatrix::<T>::identity(n, n) + (x * x.transpose()) * config.sigma;
        let factor = Cholesky::new(system).ok_or(Error::Factorization)?;
        // C̃⁰ = Y (i.e. C⁰ = Y/λ), E⁰ = XᵀC̃⁰, Z⁰ = 0.
        let c = y.clone();
        let e = x.transpose() * &c;
        let z = DMatrix::zeros(x.ncols(), y.ncols());
        let stop_threshold = config.tol * (T::one() + y.norm());
        Ok(Self {
            x,
            y,
            lambda,
            config,
            factor,
            state: AdmmState {
                c,
                e,
                z,
                iter: 0,
                primal_residual: T::zero(),
                dual_residual: T::zero(),
            },
            stop_threshold,
        })
    }

    pub fn state(&self) -> &AdmmState<T> {
        &self.state
    }

    /// `C ← (I + σXXᵀ)⁻¹(σXE + Y − XZ)`
    pub fn c_update(&mut self) {
        let s = &mut self.state;
        let rhs = (self.x * &s.e) * self.config.sigma + self.y - self.x * &s.z;
        s.c = self.factor.solve(&rhs);
    }

    /// `E ← Π_{‖·‖₂≤λ}(XᵀC + Z/σ)`; returns the previous `E`.
    pub fn e_update(&mut self) -> Result<DMatrix<T>> {
        let s = &mut self.state;
        let target = self.x.transpose() * &s.c + &s.z / self.config.sigma;
        let projected = linalg::project_spectral_ball(&target, self.lambda)?;
        Ok(std::mem::replace(&mut s.e, projected))
    }

    /// `Z ← Z + τσ(XᵀC − E)`; returns `XᵀC − E`.
    pub fn z_update(&mut self) -> DMatrix<T> {
        let s = &mut self.state;
        let gap = self.x.transpose() * &s.c - &s.e;
        s.z += &gap * (self.config.tau * self.config.sigma);
        gap
    }

    /// One full sweep; returns whether the stopping rule is met.
    pub fn step(&mut self) -> Result<bool> {
        self.c_update();
        let previous_e = self.e_update()?;
        let gap = self.z_update();
        let s = &mut self.state;
        s.iter += 1;
        s.primal_residual = gap.norm();
        s.dual_residual = (self.x * (&s.e - previous_e)).norm() * self.config.sigma;
        if !s.primal_residual.is_finite() || !s.dual_residual.is_finite() {
            return Err(Error::Diverged(s.iter));
        }
        Ok(s.max_residual() <= self.stop_threshold)
    }

    /// Iterates until convergence or `max_iter`.
    pub fn run(mut self) -> Result<DualSolution<T>> {
        let mut history = Vec::new();
        let mut converged = false;
        while self.state.iter < self.config.max_iter {
            let done = self.step()?;
            history.push(self.state.max_residual());
            if done {
                converged = true;
                break;
            }
        }
        let s = self.state;
        let c_star = Matrix::from_computed(&s.c / self.lambda, s.iter)?;
        let b_star = Matrix::from_computed(s.z, s.iter)?;
        let duality_gap = primal::duality_gap(self.x, self.y, &b_star, &c_star, self.lambda)?;
        Ok(DualSolution {
            lambda: self.lambda,
            c_star,
            b_star,
            iterations: s.iter,
            final_primal_residual: s.primal_residual,
            final_dual_residual: s.dual_residual,
            duality_gap,
            converged,
            residual_history: history,
        })
    }
}

/// Solves the dual at `lambda`. Non-convergence is reported through
/// [`DualSolution::converged`], not as an error.
pub fn solve_dual<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    lambda: T,
    config: &AdmmConfig<T>,
) -> Result<DualSolution<T>> {
    DualSolver::new(x, y, lambda, config.clone())?.run()
}

/// The primal estimate carried by a dual solve (the final multiplier).
pub fn recover_primal<T: Scalar>(solution: &DualSolution<T>) -> Matrix<T> {
    solution.b_star.clone()
}
