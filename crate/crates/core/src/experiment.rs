//! Experiment harnesses: rule certificates for a data set, the safety sweep
//! that checks certificates against the primal oracle, and low-rank image
//! recovery.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admm::{self, AdmmConfig};
use crate::error::{Error, Result};
use crate::instance::standard_normal;
use crate::linalg::{self, Matrix, DEFAULT_RANK_TOL};
use crate::primal::{self, PgConfig};
use crate::rules::{lambda_max, ReferenceSolution, RuleCertificate, RuleKind, Screener};
use crate::scalar::Scalar;

pub const DEFAULT_GRID_POINTS: usize = 50;
/// The sweep covers `(10^-GRID_DECADES · λ_max, λ_max]`.
pub const GRID_DECADES: f64 = 3.0;

/// `λ_max · 10^(−3(1 − k/G))` for `k = 1..=G`, ascending, ending at `λ_max`.
pub fn lambda_grid<T: Scalar>(lambda_max: T, points: usize) -> Vec<T> {
    (1..=points)
        .map(|k| {
            let exponent = -GRID_DECADES * (1.0 - k as f64 / points as f64);
            lambda_max * T::lit(10f64.powf(exponent))
        })
        .collect()
}

fn check_fraction(frac: f64) -> Result<()> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda0 fraction must lie in (0, 1], got {frac}"
        )));
    }
    Ok(())
}

/// Reference dual solution at `λ₀ = frac · λ_max` from the ADMM.
pub fn reference_at_fraction<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    frac: f64,
    admm: &AdmmConfig<T>,
) -> Result<ReferenceSolution<T>> {
    check_fraction(frac)?;
    let lmax = lambda_max(x, y)?;
    if frac == 1.0 {
        return ReferenceSolution::at_lambda_max(x, y);
    }
    ReferenceSolution::from_admm(x, y, lmax * T::lit(frac), admm)
}

/// Certificates for each of `rules` from a reference at `frac · λ_max`.
/// `Y` with `XᵀY = 0` yields empty certificates.
pub fn certify<T: Scalar>(
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    frac: f64,
    rules: &[RuleKind],
    admm: &AdmmConfig<T>,
) -> Result<Vec<RuleCertificate<T>>> {
    check_fraction(frac)?;
    let lmax = lambda_max(x, y)?;
    if lmax == T::zero() {
        return Ok(rules.iter().map(|&r| RuleCertificate::empty(r, T::zero())).collect());
    }
    if frac == 1.0 {
        if let Some(&rule) = rules.iter().find(|r| r.needs_interior_reference()) {
            return Err(Error::RequiresInteriorReference { rule });
        }
    }
    let reference = reference_at_fraction(x, y, frac, admm)?;
    let screener = Screener::new(x, y, &reference)?;
    rules.iter().map(|&r| screener.certificate(r)).collect()
}

/// `rule,lambda0,lower,upper,rank_bound,non_monotone,tied`, one row per interval.
pub fn write_certificates_csv<T: Scalar, W: Write>(certs: &[RuleCertificate<T>], mut out: W) -> Result<()> {
    writeln!(out, "rule,lambda0,lower,upper,rank_bound,non_monotone,tied")?;
    for cert in certs {
        for iv in &cert.intervals {
            let index = iv.rank_bound + 1;
            let non_monotone = cert.non_monotone[index - 1];
            let tied = cert
                .tied
                .iter()
                .any(|&j| cert.envelope[j - 1] == Some(iv.lower));
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                cert.rule, cert.lambda0, iv.lower, iv.upper, iv.rank_bound, non_monotone, tied
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SweepRow<T: Scalar> {
    pub lambda: T,
    /// Certified bound per rule, in the report's rule order.
    pub bounds: Vec<Option<usize>>,
    pub oracle_rank: usize,
    pub duality_gap: T,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation<T: Scalar> {
    pub lambda: T,
    pub rule: RuleKind,
    pub bound: usize,
    pub oracle_rank: usize,
}

#[derive(Clone, Debug)]
pub struct SweepReport<T: Scalar> {
    pub lambda_max: T,
    pub lambda0: T,
    pub rules: Vec<RuleKind>,
    /// Ascending in `λ`.
    pub rows: Vec<SweepRow<T>>,
    /// Converged rows whose oracle rank exceeds a certified bound.
    pub violations: Vec<Violation<T>>,
    /// Grid steps where the oracle rank increases with `λ`.
    pub trend_breaks: usize,
    pub unconverged: usize,
}

impl<T: Scalar> SweepReport<T> {
    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["lambda".to_string()];
        header.extend(self.rules.iter().map(|r| format!("bound_{r}")));
        header.extend(["oracle_rank", "duality_gap", "converged"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rows {
            let mut fields = vec![row.lambda.to_string()];
            fields.extend(row.bounds.iter().map(|b| b.map_or(String::new(), |v| v.to_string())));
            fields.push(row.oracle_rank.to_string());
            fields.push(row.duality_gap.to_string());
            fields.push(row.converged.to_string());
            writeln!(out, "{}", fields.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig<T: Scalar> {
    pub lambda0_frac: f64,
    pub rules: Vec<RuleKind>,
    pub grid_points: usize,
    pub admm: AdmmConfig<T>,
    pub pg: PgConfig<T>,
}

impl<T: Scalar> Default for SweepConfig<T> {
    fn default() -> Self {
        Self {
            lambda0_frac: 0.5,
            rules: RuleKind::ALL.to_vec(),
            grid_points: DEFAULT_GRID_POINTS,
            admm: AdmmConfig::default(),
            pg: PgConfig::default(),
        }
    }
}

/// Numerical rank of an oracle solution.
pub fn oracle_rank<T: Scalar>(b: &DMatrix<T>) -> Result<usize> {
    linalg::rank_eps(b, T::lit(DEFAULT_RANK_TOL))
}

/// Solves the primal at every grid point (warm-started from the next larger
/// `λ`) and compares the oracle rank with every rule's certificate.
pub fn sweep<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>, config: &SweepConfig<T>) -> Result<SweepReport<T>> {
    if config.grid_points == 0 {
        return Err(Error::InvalidArgument("grid must have at least one point".into()));
    }
    let lmax = lambda_max(x, y)?;
    if lmax == T::zero() {
        return Err(Error::InvalidArgument("λ_max = 0 (XᵀY = 0): nothing to sweep".into()));
    }
    let certs = certify(x, y, config.lambda0_frac, &config.rules, &config.admm)?;
    let grid = lambda_grid(lmax, config.grid_points);

    let mut rows = Vec::with_capacity(grid.len());
    let mut warm = DMatrix::zeros(x.ncols(), y.ncols());
    for &lambda in grid.iter().rev() {
        let sol = primal::solve_primal_from(x, y, lambda, &config.pg, &warm)?;
        let c = primal::feasible_dual_certificate(x, y, &sol.b, lambda)?;
        let duality_gap = primal::duality_gap(x, y, &sol.b, &c, lambda)?;
        rows.push(SweepRow {
            lambda,
            bounds: certs.iter().map(|c| c.bound_at(lambda)).collect(),
            oracle_rank: oracle_rank(&sol.b)?,
            duality_gap,
            converged: sol.converged,
        });
        warm = sol.b.into_dmatrix();
    }
    rows.reverse();

    let mut violations = Vec::new();
    for row in rows.iter().filter(|r| r.converged) {
        for (rule, bound) in config.rules.iter().zip(&row.bounds) {
            if let Some(bound) = *bound {
                if row.oracle_rank > bound {
                    violations.push(Violation {
                        lambda: row.lambda,
                        rule: *rule,
                        bound,
                        oracle_rank: row.oracle_rank,
                    });
                }
            }
        }
    }
    let trend_breaks = rows.windows(2).filter(|w| w[1].oracle_rank > w[0].oracle_rank).count();
    let unconverged = rows.iter().filter(|r| !r.converged).count();
    Ok(SweepReport {
        lambda_max: lmax,
        lambda0: certs.first().map_or(lmax * T::lit(config.lambda0_frac), |c| c.lambda0),
        rules: config.rules.clone(),
        rows,
        violations,
        trend_breaks,
        unconverged,
    })
}

/// `‖B − Z‖²_F / (pq)`
pub fn mse<T: Scalar>(truth: &DMatrix<T>, estimate: &DMatrix<T>) -> Result<T> {
    linalg::check_same_shape("estimate vs truth", estimate, truth)?;
    Ok((truth - estimate).norm_squared() / T::from_count(truth.len()))
}

/// `U·Vᵀ/rank` with `U`, `V` uniform on `[0, 1]`: a `rows × cols` image with
/// intensities in `[0, 1]` and rank `rank` (almost surely).
pub fn synthetic_image<T: Scalar>(rows: usize, cols: usize, rank: usize, seed: u64) -> Result<Matrix<T>> {
    if rank == 0 || rank > rows.min(cols) {
        return Err(Error::InvalidArgument(format!(
            "rank must lie in 1..={}, got {rank}",
            rows.min(cols)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |r: usize, c: usize| DMatrix::<T>::from_fn(r, c, |_, _| T::lit(rng.random::<f64>()));
    let u = uniform(rows, rank);
    let v = uniform(cols, rank);
    Matrix::from_computed(u * v.transpose() / T::from_count(rank), 0)
}

#[derive(Clone, Debug)]
pub struct ImageRecovery<T: Scalar> {
    pub recovered: Matrix<T>,
    pub lambda: T,
    pub lambda_max: T,
    pub iterations: usize,
    pub seconds: f64,
    pub mse: T,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct ImageConfig<T: Scalar> {
    /// Number of observations (rows of `X`).
    pub n: usize,
    pub noise_std: f64,
    /// Absolute `λ`; when `None`, `lambda_frac · λ_max` is used.
    pub lambda: Option<T>,
    pub lambda_frac: f64,
    pub seed: u64,
    pub admm: AdmmConfig<T>,
}

impl<T: Scalar> Default for ImageConfig<T> {
    fn default() -> Self {
        Self {
            n: 128,
            noise_std: 0.01,
            lambda: None,
            lambda_frac: 1e-3,
            seed: 0,
            admm: AdmmConfig::default(),
        }
    }
}

/// Treats `image` as `B`, draws `X` (`n × p`) and `W`, forms `Y = XB + W`
/// and recovers `B` with the dual ADMM.
pub fn recover_image<T: Scalar>(image: &DMatrix<T>, config: &ImageConfig<T>) -> Result<ImageRecovery<T>> {
    if config.n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(config.noise_std >= 0.0) || !config.noise_std.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise_std must be nonnegative, got {}",
            config.noise_std
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let x = standard_normal::<T, _>(&mut rng, config.n, image.nrows());
    let w = standard_normal::<T, _>(&mut rng, config.n, image.ncols());
    let y = &x * image + w * T::lit(config.noise_std);
    let lmax = lambda_max(&x, &y)?;
    let lambda = match config.lambda {
        Some(l) => l,
        None => lmax * T::lit(config.lambda_frac),
    };
    let start = Instant::now();
    let sol = admm::solve_dual(&x, &y, lambda, &config.admm)?;
    let seconds = start.elapsed().as_secs_f64();
    let recovered = admm::recover_primal(&sol);
    Ok(ImageRecovery {
        mse: mse(image, recovered.as_dmatrix())?,
        recovered,
        lambda,
        lambda_max: lmax,
        iterations: sol.iterations,
        seconds,
        converged: sol.converged,
    })
}
