//! Proximal-gradient solver for the primal problem and the KKT / duality-gap
//! diagnostics used to cross-check the dual solver and the screening rules.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, check_product_dims, check_same_shape, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct PgConfig<T: Scalar> {
    pub max_iter: usize,
    /// Relative objective-change stopping tolerance.
    pub tol: T,
    /// FISTA momentum with function-value restart.
    pub use_acceleration: bool,
}

impl<T: Scalar> Default for PgConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: T::lit(1e-10),
            use_acceleration: true,
        }
    }
}

impl<T: Scalar> PgConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PrimalSolution<T: Scalar> {
    pub b: Matrix<T>,
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at every iterate, starting with the initial point.
    pub objective_history: Vec<T>,
}

/// Diagnostics of the optimality system `XᵀC ∈ ∂‖B‖_*`, `Y − XB − λC = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport<T: Scalar> {
    /// `max(0, ‖XᵀC‖₂ − 1)`
    pub dual_norm_excess: T,
    /// `|⟨XᵀC, B⟩ − ‖B‖_*|`
    pub subgradient_alignment_gap: T,
    /// `‖Y − XB − λC‖_F`
    pub residual_feasibility: T,
}

impl<T: Scalar> KktReport<T> {
    pub fn max_violation(&self) -> T {
        self.dual_norm_excess
            .max(self.subgradient_alignment_gap)
            .max(self.residual_feasibility)
    }

    pub fn is_kkt_point(&self, tol: T) -> bool {
        self.max_violation() <= tol
    }
}

fn check_problem<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>, lambda: T) -> Result<()> {
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
    Ok(())
}

/// `½‖Y − XB‖²_F + λ‖B‖_*`
pub fn primal_objective<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    b: &DMatrix<T>,
    lambda: T,
) -> Result<T> {
    check_product_dims("X·B", x, b)?;
    let resid = y - x * b;
    Ok(T::lit(0.5) * resid.norm_squared() + lambda * linalg::nuclear_norm(b)?)
}

/// `(λ²/2)‖C − Y/λ‖²_F − ½‖Y‖²_F`
pub fn dual_objective<T: Scalar>(y: &DMatrix<T>, c: &DMatrix<T>, lambda: T) -> T {
    let half = T::lit(0.5);
    let diff = c - y / lambda;
    half * lambda * lambda * diff.norm_squared() - half * y.norm_squared()
}

/// `primal(B) + dual(C)`; nonnegative for a dual-feasible `C`, zero at optimality.
pub fn duality_gap<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    lambda: T,
) -> Result<T> {
    check_problem(x, y, lambda)?;
    check_same_shape("C vs Y", c, y)?;
    Ok(primal_objective(x, y, b, lambda)? + dual_objective(y, c, lambda))
}

/// KKT residuals for a candidate pair with `C` in the normalized dual scale.
pub fn kkt_residuals<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    b: &DMatrix<T>,
    c: &DMatrix<T>,
    lambda: T,
) -> Result<KktReport<T>> {
    check_problem(x, y, lambda)?;
    check_product_dims("X·B", x, b)?;
    check_same_shape("C vs Y", c, y)?;
    if b.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "B has {} columns but Y has {}",
            b.ncols(),
            y.ncols()
        )));
    }
    let xtc = x.transpose() * c;
    let dual_norm_excess = (linalg::spectral_norm(&xtc)? - T::one()).max(T::zero());
    let subgradient_alignment_gap = (linalg::inner(&xtc, b) - linalg::nuclear_norm(b)?).abs();
    let residual_feasibility = (y - x * b - c * lambda).norm();
    Ok(KktReport {
        dual_norm_excess,
        subgradient_alignment_gap,
        residual_feasibility,
    })
}

/// Dual point `(Y − XB)/λ` implied by a primal solution.
pub fn dual_certificate<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    b: &DMatrix<T>,
    lambda: T,
) -> Result<Matrix<T>> {
    check_problem(x, y, lambda)?;
    check_product_dims("X·B", x, b)?;
    Matrix::from_computed((y - x * b) / lambda, 0)
}

/// [`dual_certificate`] scaled down onto `{C : ‖XᵀC‖₂ ≤ 1}` when it lies outside.
pub fn feasible_dual_certificate<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    b: &DMatrix<T>,
    lambda: T,
) -> Result<Matrix<T>> {
    let c = dual_certificate(x, y, b, lambda)?.into_dmatrix();
    let norm = linalg::spectral_norm(&(x.transpose() * &c))?;
    let c = if norm > T::one() { c / norm } else { c };
    Matrix::from_computed(c, 0)
}

/// Solves the primal problem from `B = 0`.
pub fn solve_primal<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    lambda: T,
    config: &PgConfig<T>,
) -> Result<PrimalSolution<T>> {
    let init = DMatrix::zeros(x.ncols(), y.ncols());
    solve_primal_from(x, y, lambda, config, &init)
}

/// Proximal gradient with step `1/‖X‖₂²` and singular value thresholding as
/// the prox, optionally accelerated.
pub fn solve_primal_from<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    lambda: T,
    config: &PgConfig<T>,
    init: &DMatrix<T>,
) -> Result<PrimalSolution<T>> {
    check_problem(x, y, lambda)?;
    config.validate()?;
    if init.shape() != (x.ncols(), y.ncols()) {
        return Err(Error::DimensionMismatch(format!(
            "initial B is {}x{}, expected {}x{}",
            init.nrows(),
            init.ncols(),
            x.ncols(),
            y.ncols()
        )));
    }
    let lipschitz = {
        let s = linalg::spectral_norm(x)?;
        s * s
    };
    let half = T::lit(0.5);
    if lipschitz == T::zero() {
        // X = 0: every B has the same loss, the nuclear norm picks B = 0.
        let b = DMatrix::zeros(x.ncols(), y.ncols());
        let objective = half * y.norm_squared();
        return Ok(PrimalSolution {
            b: Matrix::from_computed(b, 0)?,
            objective,
            iterations: 0,
            converged: true,
            objective_history: vec![objective],
        });
    }
    let step = T::one() / lipschitz;
    let threshold = lambda * step;
    let xt = x.transpose();
    let xty = &xt * y;
    let xtx = &xt * x;

    let mut current = init.clone();
    let mut objective = primal_objective(x, y, &current, lambda)?;
    let mut history = vec![objective];
    let mut momentum_point = current.clone();
    let mut t = T::one();
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_iter {
        iterations = k;
        let grad = &xtx * &momentum_point - &xty;
        let (next, next_nuclear) = linalg::svt_with_norm(&(&momentum_point - grad * step), threshold)?;
        let next_objective = half * (y - x * &next).norm_squared() + lambda * next_nuclear;
        if !next_objective.is_finite() {
            return Err(Error::Diverged(k));
        }
        history.push(next_objective);

        let change = (objective - next_objective).abs();
        let scale = next_objective.abs().max(T::default_epsilon());
        let increased = next_objective > objective;

        if config.use_acceleration {
            if increased {
                t = T::one();
                momentum_point = next.clone();
            } else {
                let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) * half;
                let beta = (t - T::one()) / t_next;
                momentum_point = &next + (&next - &current) * beta;
                t = t_next;
            }
        } else {
            momentum_point = next.clone();
        }
        let step_norm = (&next - &current).norm();
        let step_scale = next.norm().max(T::one());
        current = next;
        objective = next_objective;

        // A small objective change alone can occur mid-oscillation under
        // momentum, so the iterate must also have settled.
        if !increased && change <= config.tol * scale && step_norm <= config.tol * step_scale {
            converged = true;
            break;
        }
    }

    Ok(PrimalSolution {
        b: Matrix::from_computed(current, iterations)?,
        objective,
        iterations,
        converged,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        Matrix::from_diagonal(d).unwrap().into_dmatrix()
    }

    #[test]
    fn identity_design_gives_svt() {
        let x = DMatrix::<f64>::identity(3, 3);
        let y = DMatrix::from_row_slice(3, 2, &[2.0, 0.5, -1.0, 1.0, 0.3, 0.7]);
        let sol = solve_primal(&x, &y, 0.6, &PgConfig::default()).unwrap();
        let expect = linalg::svt(&y, 0.6).unwrap();
        assert!((sol.b.as_dmatrix() - expect).norm() < 1e-10);
        assert!(sol.converged);
    }

    #[test]
    fn above_lambda_max_gives_zero() {
        let x = DMatrix::<f64>::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.3, 1.0]);
        let y = DMatrix::<f64>::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 2.0, -1.0, 1.0]);
        let lmax = linalg::spectral_norm(&(x.transpose() * &y)).unwrap();
        let sol = solve_primal(&x, &y, lmax * 1.0001, &PgConfig::default()).unwrap();
        assert_eq!(sol.b.norm(), 0.0);
    }

    #[test]
    fn kkt_at_lambda_max_point() {
        let x = DMatrix::<f64>::identity(2, 2);
        let y = diag(&[2.0, 1.0]);
        let lambda = 3.0;
        let b = DMatrix::zeros(2, 2);
        let c = &y / lambda;
        let rep = kkt_residuals(&x, &y, &b, &c, lambda).unwrap();
        assert_eq!(rep.dual_norm_excess, 0.0);
        assert_eq!(rep.subgradient_alignment_gap, 0.0);
        assert!(rep.residual_feasibility < 1e-15);
        let gap = duality_gap(&x, &y, &b, &c, lambda).unwrap();
        assert!(gap.abs() < 1e-14);
    }

    #[test]
    fn residual_grows_with_perturbation() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.3, 1.0]);
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 2.0, -1.0, 1.0]);
        let lambda = 0.2;
        let sol = solve_primal(&x, &y, lambda, &PgConfig::default()).unwrap();
        let c = dual_certificate(&x, &y, &sol.b, lambda).unwrap();
        let mut delta = DMatrix::from_row_slice(2, 2, &[0.3, -0.5, 0.6, 0.2]);
        delta /= delta.norm();
        let perturbed = sol.b.as_dmatrix() + &delta;
        let rep = kkt_residuals(&x, &y, &perturbed, &c, lambda).unwrap();
        assert!(rep.residual_feasibility >= (&x * &delta).norm() - 1e-12);
    }

    #[test]
    fn weak_duality_for_zero_primal() {
        let x = DMatrix::<f64>::from_row_slice(3, 2, &[1.0, 2.0, -1.0, 0.5, 0.3, 1.0]);
        let y = DMatrix::<f64>::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 2.0, -1.0, 1.0]);
        let lmax = linalg::spectral_norm(&(x.transpose() * &y)).unwrap();
        let lambda = 0.1 * lmax;
        let sol = solve_primal(&x, &y, lambda, &PgConfig::default()).unwrap();
        let c = feasible_dual_certificate(&x, &y, &sol.b, lambda).unwrap();
        let gap_opt = duality_gap(&x, &y, &sol.b, &c, lambda).unwrap();
        assert!(gap_opt.abs() < 1e-6, "gap {gap_opt} conv {} it {}", sol.converged, sol.iterations);
        let gap_zero = duality_gap(&x, &y, &DMatrix::zeros(2, 2), &c, lambda).unwrap();
        assert!(gap_zero > 0.0);
    }

    #[test]
    fn plain_gradient_objective_is_monotone() {
        let x = DMatrix::<f64>::from_row_slice(4, 3, &[1.0, 2.0, -1.0, 0.5, 0.3, 1.0, 0.2, -0.7, 1.1, 0.9, 0.4, -0.3]);
        let y = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, 2.0, -1.0, 1.0, 0.3, 0.1]);
        let cfg = PgConfig {
            use_acceleration: false,
            ..PgConfig::default()
        };
        let sol = solve_primal(&x, &y, 0.3, &cfg).unwrap();
        for w in sol.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let x = DMatrix::<f64>::identity(2, 2);
        let y = DMatrix::<f64>::zeros(3, 1);
        assert!(matches!(
            solve_primal(&x, &y, 1.0, &PgConfig::default()),
            Err(Error::DimensionMismatch(_))
        ));
        let y = DMatrix::<f64>::zeros(2, 1);
        assert!(solve_primal(&x, &y, 0.0, &PgConfig::default()).is_err());
        let bad = PgConfig { max_iter: 0, ..PgConfig::default() };
        assert!(solve_primal(&x, &y, 1.0, &bad).is_err());
    }
}
