//! Tuning-parameter selection rules.
//!
//! Given a reference dual solution `C*(λ₀)`, each rule builds a Frobenius
//! ball that must contain `C*(λ)` for `λ < λ₀` and certifies
//! `rank(B*(λ)) ≤ i − 1` whenever every `C` in the ball has
//! `σᵢ(XᵀC) < 1`. Using `σᵢ(XᵀC) ≤ σᵢ(XᵀD) + ‖X‖₂‖C − D‖_F` around the
//! ball center `D` gives the four predicates:
//!
//! | rule  | ball | center                 | radius          |
//! |-------|------|------------------------|-----------------|
//! | PSR   | Ω    | `C₀`                   | `u‖Y‖_F`        |
//! | PSRi  | Ω₁   | `C₀`                   | `‖V₃‖_F`        |
//! | PSRfn | Ω₂   | `C₀ + ½uY`             | `½u‖Y‖_F`       |
//! | PSR+  | Ω₃   | `C₀ + ½V₃`             | `½‖V₃‖_F`       |
//!
//! with `u = 1/λ − 1/λ₀`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::admm::{self, AdmmConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::primal::{self, PgConfig};
use crate::scalar::Scalar;

/// Margin applied to strict inequalities `σ < 1`, evaluated as `σ ≤ 1 − margin`.
pub const STRICT_MARGIN: f64 = 1e-9;
/// A reference computed by a solver with tolerance `tol` carries slack `C0_SLACK_FACTOR·tol`.
pub const C0_SLACK_FACTOR: f64 = 10.0;
/// Allowed excess of `‖XᵀC₀‖₂` over 1.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Points in the geometric pre-scan over `(GRID_FLOOR·λ₀, λ₀)`.
pub const GRID_POINTS: usize = 64;
pub const GRID_FLOOR: f64 = 1e-6;
/// Default bisection width relative to `λ₀`.
pub const DEFAULT_BISECT_REL_TOL: f64 = 1e-6;

const LAMBDA_MAX_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Psr,
    Psri,
    Psrfn,
    PsrPlus,
}

impl RuleKind {
    pub const ALL: [RuleKind; 4] = [RuleKind::Psr, RuleKind::Psri, RuleKind::Psrfn, RuleKind::PsrPlus];

    /// Rules whose ball is built from `V₁`, which is only available for `λ₀ < λ_max`.
    pub fn needs_interior_reference(self) -> bool {
        matches!(self, RuleKind::Psri | RuleKind::PsrPlus)
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleKind::Psr => "PSR",
            RuleKind::Psri => "PSRi",
            RuleKind::Psrfn => "PSRfn",
            RuleKind::PsrPlus => "PSR+",
        })
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "psr" => Ok(RuleKind::Psr),
            "psri" => Ok(RuleKind::Psri),
            "psrfn" => Ok(RuleKind::Psrfn),
            "psr+" | "psrplus" => Ok(RuleKind::PsrPlus),
            other => Err(Error::InvalidArgument(format!("unknown rule '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceSource {
    Admm,
    PrimalKkt,
    ClosedFormLambdaMax,
}

/// `λ_max = ‖XᵀY‖₂`, the smallest `λ` with `B*(λ) = 0`.
pub fn lambda_max<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<T> {
    if x.nrows() != y.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    linalg::spectral_norm(&(x.transpose() * y))
}

/// A known dual solution `C*(λ₀)` (normalized scale) anchoring the rules.
#[derive(Clone, Debug)]
pub struct ReferenceSolution<T: Scalar> {
    pub lambda0: T,
    pub lambda_max: T,
    pub c0: Matrix<T>,
    pub source: ReferenceSource,
    /// Subtracted from the right-hand side of every rule inequality to
    /// absorb the error in a computed `C₀`.
    pub c0_slack: T,
}

impl<T: Scalar> ReferenceSolution<T> {
    pub fn new(
        x: &DMatrix<T>,
        y: &DMatrix<T>,
        lambda0: T,
        c0: Matrix<T>,
        source: ReferenceSource,
        c0_slack: T,
    ) -> Result<Self> {
        let lmax = lambda_max(x, y)?;
        if c0.shape() != y.shape() {
            return Err(Error::DimensionMismatch(format!(
                "C₀ is {}x{} but Y is {}x{}",
                c0.nrows(),
                c0.ncols(),
                y.nrows(),
                y.ncols()
            )));
        }
        if !(lambda0 > T::zero()) || lambda0 > lmax * (T::one() + T::lit(LAMBDA_MAX_REL_TOL)) {
            return Err(Error::InvalidArgument(format!(
                "λ₀ must lie in (0, λ_max = {lmax}], got {lambda0}"
            )));
        }
        if c0_slack < T::zero() {
            return Err(Error::InvalidArgument("C₀ slack must be nonnegative".into()));
        }
        let norm = linalg::spectral_norm(&(x.transpose() * c0.as_dmatrix()))?;
        if norm > T::one() + T::lit(FEASIBILITY_TOL) {
            return Err(Error::InfeasibleReference { norm: norm.as_f64() });
        }
        Ok(Self {
            lambda0,
            lambda_max: lmax,
            c0,
            source,
            c0_slack,
        })
    }

    /// `λ₀ = λ_max`, where `C*(λ_max) = Y/λ_max` exactly.
    pub fn at_lambda_max(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<Self> {
        let lmax = lambda_max(x, y)?;
        if lmax == T::zero() {
            return Err(Error::InvalidArgument("λ_max = 0 (XᵀY = 0): no reference point".into()));
        }
        let c0 = Matrix::from_computed(y / lmax, 0)?;
        Ok(Self {
            lambda0: lmax,
            lambda_max: lmax,
            c0,
            source: ReferenceSource::ClosedFormLambdaMax,
            c0_slack: T::zero(),
        })
    }

    /// `C₀` from the dual ADMM at `λ₀`. Falls back to the closed form when `λ₀` is `λ_max`.
    pub fn from_admm(x: &DMatrix<T>, y: &DMatrix<T>, lambda0: T, config: &AdmmConfig<T>) -> Result<Self> {
        let lmax = lambda_max(x, y)?;
        if lambda0 >= lmax * (T::one() - T::lit(LAMBDA_MAX_REL_TOL)) && lambda0 <= lmax * (T::one() + T::lit(LAMBDA_MAX_REL_TOL)) {
            return Self::at_lambda_max(x, y);
        }
        let sol = admm::solve_dual(x, y, lambda0, config)?;
        if !sol.converged {
            return Err(Error::NotConverged {
                iterations: sol.iterations,
            });
        }
        Self::new(x, y, lambda0, sol.c_star, ReferenceSource::Admm, T::lit(C0_SLACK_FACTOR) * config.tol)
    }

    /// `C₀ = (Y − XB*)/λ₀` from the proximal-gradient oracle.
    pub fn from_primal(x: &DMatrix<T>, y: &DMatrix<T>, lambda0: T, config: &PgConfig<T>) -> Result<Self> {
        let lmax = lambda_max(x, y)?;
        if lambda0 >= lmax * (T::one() - T::lit(LAMBDA_MAX_REL_TOL)) && lambda0 <= lmax * (T::one() + T::lit(LAMBDA_MAX_REL_TOL)) {
            return Self::at_lambda_max(x, y);
        }
        let sol = primal::solve_primal(x, y, lambda0, config)?;
        if !sol.converged {
            return Err(Error::NotConverged {
                iterations: sol.iterations,
            });
        }
        let c0 = primal::feasible_dual_certificate(x, y, &sol.b, lambda0)?;
        Self::new(x, y, lambda0, c0, ReferenceSource::PrimalKkt, T::lit(C0_SLACK_FACTOR) * config.tol)
    }

    pub fn is_at_lambda_max(&self) -> bool {
        self.lambda0 >= self.lambda_max * (T::one() - T::lit(LAMBDA_MAX_REL_TOL))
    }
}

fn check_inside<T: Scalar>(lambda: T, lambda0: T) -> Result<()> {
    if !(lambda > T::zero() && lambda < lambda0) {
        return Err(Error::InvalidArgument(format!("λ must lie in (0, λ₀ = {lambda0}), got {lambda}")));
    }
    Ok(())
}

/// `V₁(λ₀) = Y/λ₀ − C*(λ₀)`, defined for `λ₀ < λ_max`.
pub fn v1<T: Scalar>(reference: &ReferenceSolution<T>, y: &DMatrix<T>) -> Result<DMatrix<T>> {
    if reference.is_at_lambda_max() {
        return Err(Error::ReferenceAtLambdaMax);
    }
    linalg::check_same_shape("Y vs C₀", y, reference.c0.as_dmatrix())?;
    Ok(y / reference.lambda0 - reference.c0.as_dmatrix())
}

/// `V₂(λ, λ₀) = Y/λ − C*(λ₀)`.
pub fn v2<T: Scalar>(lambda: T, reference: &ReferenceSolution<T>, y: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_inside(lambda, reference.lambda0)?;
    linalg::check_same_shape("Y vs C₀", y, reference.c0.as_dmatrix())?;
    Ok(y / lambda - reference.c0.as_dmatrix())
}

/// `V₃ = V₂ − (⟨V₁, V₂⟩/‖V₁‖²_F)·V₁`, the part of `V₂` orthogonal to `V₁`.
pub fn v3<T: Scalar>(lambda: T, reference: &ReferenceSolution<T>, y: &DMatrix<T>) -> Result<DMatrix<T>> {
    let first = v1(reference, y)?;
    let second = v2(lambda, reference, y)?;
    orthogonal_part(&second, &first)
}

fn orthogonal_part<T: Scalar>(v: &DMatrix<T>, against: &DMatrix<T>) -> Result<DMatrix<T>> {
    let norm_sq = against.norm_squared();
    if norm_sq == T::zero() {
        return Err(Error::InvalidArgument("V₁ is zero".into()));
    }
    let coeff = linalg::inner(against, v) / norm_sq;
    Ok(v - against * coeff)
}

/// Frobenius ball guaranteed to contain `C*(λ)`.
#[derive(Clone, Debug)]
pub struct EstimateBall<T: Scalar> {
    pub center: Matrix<T>,
    pub radius: T,
}

impl<T: Scalar> EstimateBall<T> {
    pub fn distance_to(&self, c: &DMatrix<T>) -> T {
        (c - self.center.as_dmatrix()).norm()
    }

    pub fn contains(&self, c: &DMatrix<T>, slack: T) -> bool {
        self.distance_to(c) <= self.radius + slack
    }

    /// Ball-in-ball test: `‖c_self − c_other‖ + r_self ≤ r_other + slack`.
    pub fn is_inside(&self, other: &EstimateBall<T>, slack: T) -> bool {
        other.distance_to(self.center.as_dmatrix()) + self.radius <= other.radius + slack
    }
}

/// Outcome of a per-index threshold computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Threshold<T: Scalar> {
    /// `None` when the rule certifies nothing at this index.
    pub value: Option<T>,
    /// The pre-scan saw the predicate switch more than once.
    pub non_monotone: bool,
}

impl<T: Scalar> Threshold<T> {
    fn closed_form(value: Option<T>) -> Self {
        Self {
            value,
            non_monotone: false,
        }
    }
}

/// Certified `(lower, upper]` interval with `rank(B*(λ)) ≤ rank_bound`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertifiedInterval<T: Scalar> {
    pub lower: T,
    pub upper: T,
    pub rank_bound: usize,
}

impl<T: Scalar> CertifiedInterval<T> {
    pub fn contains(&self, lambda: T) -> bool {
        lambda > self.lower && lambda <= self.upper
    }
}

#[derive(Clone, Debug)]
pub struct RuleCertificate<T: Scalar> {
    pub rule: RuleKind,
    pub lambda0: T,
    /// Raw per-index thresholds, `thresholds[i − 1]` for index `i`.
    pub thresholds: Vec<Option<T>>,
    /// Running minimum of `thresholds` (nonincreasing in `i`).
    pub envelope: Vec<Option<T>>,
    pub non_monotone: Vec<bool>,
    /// Indices `i` whose envelope value ties with index `i − 1`.
    pub tied: Vec<usize>,
    pub intervals: Vec<CertifiedInterval<T>>,
}

impl<T: Scalar> RuleCertificate<T> {
    pub fn empty(rule: RuleKind, lambda0: T) -> Self {
        Self {
            rule,
            lambda0,
            thresholds: Vec::new(),
            envelope: Vec::new(),
            non_monotone: Vec::new(),
            tied: Vec::new(),
            intervals: Vec::new(),
        }
    }

    fn assemble(rule: RuleKind, lambda0: T, raw: Vec<Threshold<T>>) -> Self {
        let thresholds: Vec<Option<T>> = raw.iter().map(|t| t.value).collect();
        let non_monotone = raw.iter().map(|t| t.non_monotone).collect();
        let mut envelope = Vec::with_capacity(thresholds.len());
        let mut running: Option<T> = None;
        for t in &thresholds {
            running = match (running, *t) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            };
            envelope.push(running);
        }
        let mut intervals = Vec::new();
        let mut tied = Vec::new();
        let mut upper = lambda0;
        for (k, env) in envelope.iter().enumerate() {
            let Some(lower) = *env else { continue };
            if lower >= lambda0 {
                continue;
            }
            if lower < upper {
                intervals.push(CertifiedInterval {
                    lower,
                    upper,
                    rank_bound: k,
                });
                upper = lower;
            } else if k > 0 {
                tied.push(k + 1);
            }
        }
        Self {
            rule,
            lambda0,
            thresholds,
            envelope,
            non_monotone,
            tied,
            intervals,
        }
    }

    /// Tightest certified rank bound at `lambda`, if any interval covers it.
    pub fn bound_at(&self, lambda: T) -> Option<usize> {
        self.intervals
            .iter()
            .filter(|iv| iv.contains(lambda))
            .map(|iv| iv.rank_bound)
            .min()
    }
}

/// Precomputed quantities shared by all rules for one `(X, Y, C₀)`.
pub struct Screener<'a, T: Scalar> {
    x: &'a DMatrix<T>,
    y: &'a DMatrix<T>,
    reference: &'a ReferenceSolution<T>,
    x_norm: T,
    y_fro: T,
    xt_c0: DMatrix<T>,
    xt_y: DMatrix<T>,
    ref_singular_values: Vec<T>,
    v1: Option<DMatrix<T>>,
    bisect_tol: T,
}

impl<'a, T: Scalar> Screener<'a, T> {
    pub fn new(x: &'a DMatrix<T>, y: &'a DMatrix<T>, reference: &'a ReferenceSolution<T>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        linalg::check_same_shape("Y vs C₀", y, reference.c0.as_dmatrix())?;
        let xt_c0 = x.transpose() * reference.c0.as_dmatrix();
        let ref_singular_values = linalg::singular_values(&xt_c0)?;
        let v1 = if reference.is_at_lambda_max() {
            None
        } else {
            Some(v1(reference, y)?)
        };
        Ok(Self {
            x,
            y,
            reference,
            x_norm: linalg::spectral_norm(x)?,
            y_fro: y.norm(),
            xt_c0,
            xt_y: x.transpose() * y,
            ref_singular_values,
            v1,
            bisect_tol: T::lit(DEFAULT_BISECT_REL_TOL) * reference.lambda0,
        })
    }

    pub fn with_bisect_tol(mut self, bisect_tol: T) -> Result<Self> {
        if !(bisect_tol > T::zero()) {
            return Err(Error::InvalidArgument("bisect_tol must be positive".into()));
        }
        self.bisect_tol = bisect_tol;
        Ok(self)
    }

    pub fn bisect_tol(&self) -> T {
        self.bisect_tol
    }

    /// `r = min(p, q)`.
    pub fn rank_limit(&self) -> usize {
        self.ref_singular_values.len()
    }

    pub fn reference(&self) -> &ReferenceSolution<T> {
        self.reference
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.rank_limit() {
            return Err(Error::InvalidArgument(format!(
                "index must lie in 1..={}, got {i}",
                self.rank_limit()
            )));
        }
        Ok(())
    }

    fn require_interior(&self, rule: RuleKind) -> Result<&DMatrix<T>> {
        self.v1.as_ref().ok_or(Error::RequiresInteriorReference { rule })
    }

    /// `1 − ε_strict − δ_C₀`, the right-hand side strict inequalities are tested against.
    fn unit_bound(&self) -> T {
        T::one() - T::lit(STRICT_MARGIN) - self.reference.c0_slack
    }

    fn gap(&self, lambda: T) -> T {
        T::one() / lambda - T::one() / self.reference.lambda0
    }

    fn v3_at(&self, lambda: T, rule: RuleKind) -> Result<DMatrix<T>> {
        let first = self.require_interior(rule)?;
        let second = self.y / lambda - self.reference.c0.as_dmatrix();
        orthogonal_part(&second, first)
    }

    /// PSR: `λ > λ₀‖X‖₂‖Y‖_F / (λ₀ − λ₀σᵢ(XᵀC₀) + ‖X‖₂‖Y‖_F)`.
    pub fn psr_threshold(&self, i: usize) -> Result<Threshold<T>> {
        self.check_index(i)?;
        let lambda0 = self.reference.lambda0;
        let s = self.ref_singular_values[i - 1] + self.reference.c0_slack;
        let k = self.x_norm * self.y_fro;
        let denom = lambda0 - lambda0 * s + k;
        Ok(Threshold::closed_form(if denom > T::zero() {
            Some(lambda0 * k / denom)
        } else {
            None
        }))
    }

    /// PSRfn. Closed form at `λ₀ = λ_max`, otherwise the smallest `λ`
    /// satisfying `σᵢ(Xᵀ(C₀ + ½uY)) + ½u‖X‖₂‖Y‖_F < 1`, located by bisection.
    pub fn psrfn_threshold(&self, i: usize) -> Result<Threshold<T>> {
        self.check_index(i)?;
        if self.reference.is_at_lambda_max() {
            let lmax = self.reference.lambda_max;
            let g = self.ref_singular_values[i - 1] * lmax;
            let k = self.x_norm * self.y_fro;
            let two = T::lit(2.0);
            let denom = two * lmax * (T::one() - self.reference.c0_slack) - g + k;
            return Ok(Threshold::closed_form(if denom > T::zero() {
                Some(lmax * (k + g) / denom)
            } else {
                None
            }));
        }
        self.locate(|lambda| self.certifies(RuleKind::Psrfn, i, lambda))
    }

    /// PSRi: smallest `λ` with `σᵢ(XᵀC₀) < 1 − ‖X‖₂‖V₃(λ, λ₀)‖_F`.
    pub fn psri_threshold(&self, i: usize) -> Result<Threshold<T>> {
        self.check_index(i)?;
        self.require_interior(RuleKind::Psri)?;
        self.locate(|lambda| self.certifies(RuleKind::Psri, i, lambda))
    }

    /// PSR+: smallest `λ` with `σᵢ(Xᵀ(C₀ + ½V₃)) < 1 − ½‖X‖₂‖V₃‖_F`.
    pub fn psrplus_threshold(&self, i: usize) -> Result<Threshold<T>> {
        self.check_index(i)?;
        self.require_interior(RuleKind::PsrPlus)?;
        self.locate(|lambda| self.certifies(RuleKind::PsrPlus, i, lambda))
    }

    pub fn threshold(&self, rule: RuleKind, i: usize) -> Result<Threshold<T>> {
        match rule {
            RuleKind::Psr => self.psr_threshold(i),
            RuleKind::Psri => self.psri_threshold(i),
            RuleKind::Psrfn => self.psrfn_threshold(i),
            RuleKind::PsrPlus => self.psrplus_threshold(i),
        }
    }

    /// Whether `rule` certifies `rank(B*(λ)) ≤ i − 1` at `lambda ∈ (0, λ₀)`.
    pub fn certifies(&self, rule: RuleKind, i: usize, lambda: T) -> Result<bool> {
        self.check_index(i)?;
        check_inside(lambda, self.reference.lambda0)?;
        let u = self.gap(lambda);
        let half = T::lit(0.5);
        let s_ref = self.ref_singular_values[i - 1];
        let lhs = match rule {
            RuleKind::Psr => {
                return Ok(s_ref + self.reference.c0_slack + self.x_norm * self.y_fro * u < T::one());
            }
            RuleKind::Psri => {
                let v3 = self.v3_at(lambda, rule)?;
                s_ref + self.x_norm * v3.norm()
            }
            RuleKind::Psrfn => {
                let center = &self.xt_c0 + &self.xt_y * (half * u);
                nth_singular_value(&center, i)? + half * u * self.x_norm * self.y_fro
            }
            RuleKind::PsrPlus => {
                let v3 = self.v3_at(lambda, rule)?;
                let center = &self.xt_c0 + (self.x.transpose() * &v3) * half;
                nth_singular_value(&center, i)? + half * self.x_norm * v3.norm()
            }
        };
        Ok(lhs <= self.unit_bound())
    }

    /// Geometric pre-scan followed by bisection on the last false→true crossing.
    fn locate(&self, pred: impl Fn(T) -> Result<bool>) -> Result<Threshold<T>> {
        let lambda0 = self.reference.lambda0;
        let top = lambda0 - self.bisect_tol;
        let floor = T::lit(GRID_FLOOR) * lambda0;
        let none = Threshold {
            value: None,
            non_monotone: false,
        };
        if !(top > floor) || !pred(top)? {
            return Ok(none);
        }
        let n = GRID_POINTS;
        let ratio = top / floor;
        let mut grid = Vec::with_capacity(n);
        for k in 0..n {
            let point = if k + 1 == n {
                top
            } else {
                floor * ratio.powf(T::from_count(k) / T::from_count(n - 1))
            };
            grid.push((point, pred(point)?));
        }
        let Some(last_false) = grid.iter().rposition(|&(_, ok)| !ok) else {
            return Ok(Threshold {
                value: Some(grid[0].0),
                non_monotone: false,
            });
        };
        let non_monotone = grid[..last_false].iter().any(|&(_, ok)| ok);
        let (mut lo, mut hi) = (grid[last_false].0, grid[last_false + 1].0);
        while hi - lo > self.bisect_tol {
            let mid = (lo + hi) * T::lit(0.5);
            if pred(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(Threshold {
            value: Some(hi),
            non_monotone,
        })
    }

    /// Thresholds for every index, assembled into certified intervals.
    pub fn certificate(&self, rule: RuleKind) -> Result<RuleCertificate<T>> {
        if rule.needs_interior_reference() {
            self.require_interior(rule)?;
        }
        let raw = (1..=self.rank_limit())
            .map(|i| self.threshold(rule, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(RuleCertificate::assemble(rule, self.reference.lambda0, raw))
    }

    /// The estimate ball `rule` is built on, at `lambda ∈ (0, λ₀)`.
    pub fn estimate_ball(&self, rule: RuleKind, lambda: T) -> Result<EstimateBall<T>> {
        check_inside(lambda, self.reference.lambda0)?;
        let c0 = self.reference.c0.as_dmatrix();
        let u = self.gap(lambda);
        let half = T::lit(0.5);
        let (center, radius) = match rule {
            RuleKind::Psr => (c0.clone(), u * self.y_fro),
            RuleKind::Psri => {
                let v3 = self.v3_at(lambda, rule)?;
                (c0.clone(), v3.norm())
            }
            RuleKind::Psrfn => (c0 + self.y * (half * u), half * u * self.y_fro),
            RuleKind::PsrPlus => {
                let v3 = self.v3_at(lambda, rule)?;
                let r = half * v3.norm();
                (c0 + v3 * half, r)
            }
        };
        Ok(EstimateBall {
            center: Matrix::from_computed(center, 0)?,
            radius,
        })
    }
}

fn nth_singular_value<T: Scalar>(m: &DMatrix<T>, i: usize) -> Result<T> {
    Ok(linalg::singular_values(m)?[i - 1])
}

pub fn psr_threshold<T: Scalar>(
    i: usize,
    reference: &ReferenceSolution<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
) -> Result<Threshold<T>> {
    Screener::new(x, y, reference)?.psr_threshold(i)
}

pub fn psrfn_threshold<T: Scalar>(
    i: usize,
    reference: &ReferenceSolution<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
) -> Result<Threshold<T>> {
    Screener::new(x, y, reference)?.psrfn_threshold(i)
}

pub fn psri_threshold<T: Scalar>(
    i: usize,
    reference: &ReferenceSolution<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    bisect_tol: T,
) -> Result<Threshold<T>> {
    Screener::new(x, y, reference)?
        .with_bisect_tol(bisect_tol)?
        .psri_threshold(i)
}

pub fn psrplus_threshold<T: Scalar>(
    i: usize,
    reference: &ReferenceSolution<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
    bisect_tol: T,
) -> Result<Threshold<T>> {
    Screener::new(x, y, reference)?
        .with_bisect_tol(bisect_tol)?
        .psrplus_threshold(i)
}

pub fn rule_certificate<T: Scalar>(
    rule: RuleKind,
    reference: &ReferenceSolution<T>,
    x: &DMatrix<T>,
    y: &DMatrix<T>,
) -> Result<RuleCertificate<T>> {
    Screener::new(x, y, reference)?.certificate(rule)
}

/// Ball for `rule` at `lambda`; needs only `Y`, `C₀` and `λ₀`.
pub fn estimate_ball<T: Scalar>(
    rule: RuleKind,
    lambda: T,
    reference: &ReferenceSolution<T>,
    y: &DMatrix<T>,
) -> Result<EstimateBall<T>> {
    check_inside(lambda, reference.lambda0)?;
    linalg::check_same_shape("Y vs C₀", y, reference.c0.as_dmatrix())?;
    let c0 = reference.c0.as_dmatrix();
    let u = T::one() / lambda - T::one() / reference.lambda0;
    let half = T::lit(0.5);
    let (center, radius) = match rule {
        RuleKind::Psr => (c0.clone(), u * y.norm()),
        RuleKind::Psrfn => (c0 + y * (half * u), half * u * y.norm()),
        RuleKind::Psri | RuleKind::PsrPlus => {
            if reference.is_at_lambda_max() {
                return Err(Error::RequiresInteriorReference { rule });
            }
            let v3 = v3(lambda, reference, y)?;
            if rule == RuleKind::Psri {
                (c0.clone(), v3.norm())
            } else {
                let r = half * v3.norm();
                (c0 + v3 * half, r)
            }
        }
    };
    Ok(EstimateBall {
        center: Matrix::from_computed(center, 0)?,
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> DMatrix<f64> {
        Matrix::from_diagonal(d).unwrap().into_dmatrix()
    }

    fn toy() -> (DMatrix<f64>, DMatrix<f64>) {
        (DMatrix::identity(2, 2), diag(&[2.0, 1.0]))
    }

    // With X = I the dual solution is the spectral-ball projection of Y/λ₀.
    fn identity_reference(y: &DMatrix<f64>, lambda0: f64) -> ReferenceSolution<f64> {
        let x = DMatrix::identity(y.nrows(), y.nrows());
        let c0 = linalg::project_spectral_ball(&(y / lambda0), 1.0).unwrap();
        ReferenceSolution::new(&x, y, lambda0, Matrix::from_dmatrix(c0).unwrap(), ReferenceSource::Admm, 0.0)
            .unwrap()
    }

    #[test]
    fn lambda_max_cases() {
        let (x, y) = toy();
        assert_eq!(lambda_max(&x, &y).unwrap(), 2.0);
        assert_eq!(lambda_max(&x, &DMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert!(ReferenceSolution::at_lambda_max(&x, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn v_operators_on_diagonal_instance() {
        let (x, y) = toy();
        let r = identity_reference(&y, 1.0);
        assert!((r.c0.as_dmatrix() - diag(&[1.0, 1.0])).norm() < 1e-14);
        let first = v1(&r, &y).unwrap();
        assert!((&first - diag(&[1.0, 0.0])).norm() < 1e-14);
        let second = v2(0.5, &r, &y).unwrap();
        assert!((second - diag(&[3.0, 1.0])).norm() < 1e-14);
        let third = v3(0.5, &r, &y).unwrap();
        assert!((&third - diag(&[0.0, 1.0])).norm() < 1e-14);
        assert!(linalg::inner(&third, &first).abs() < 1e-14);
        // λ → λ₀ limit
        let near = v2(1.0 - 1e-12, &r, &y).unwrap();
        assert!((near - &first).norm() < 1e-10);
        assert!(v2(1.0, &r, &y).is_err());
        let _ = x;
    }

    #[test]
    fn v1_rejected_at_lambda_max() {
        let (x, y) = toy();
        let r = ReferenceSolution::at_lambda_max(&x, &y).unwrap();
        assert!(matches!(v1(&r, &y), Err(Error::ReferenceAtLambdaMax)));
        assert!(matches!(
            psri_threshold(2, &r, &x, &y, 1e-6),
            Err(Error::RequiresInteriorReference { rule: RuleKind::Psri })
        ));
        let msg = rule_certificate(RuleKind::Psri, &r, &x, &y).unwrap_err().to_string();
        assert_eq!(msg, "PSRi requires λ₀ < λ_max");
    }

    #[test]
    fn v2_with_zero_response() {
        let x = DMatrix::<f64>::identity(2, 2);
        let y = DMatrix::<f64>::zeros(2, 2);
        let c0 = Matrix::from_dmatrix(diag(&[0.5, 0.0])).unwrap();
        let r = ReferenceSolution {
            lambda0: 1.0,
            lambda_max: 0.0,
            c0: c0.clone(),
            source: ReferenceSource::Admm,
            c0_slack: 0.0,
        };
        let got = v2(0.5, &r, &y).unwrap();
        assert_eq!(got, -c0.into_dmatrix());
        let _ = x;
    }

    #[test]
    fn v3_orthogonal_projection_cases() {
        let a = diag(&[1.0, 2.0]);
        let parallel = &a * 3.5;
        assert!(orthogonal_part(&parallel, &a).unwrap().norm() < 1e-14);
        let perp = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(orthogonal_part(&perp, &a).unwrap(), perp);
        assert!(orthogonal_part(&a, &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn psr_closed_form_on_toy() {
        let (x, y) = toy();
        let r = ReferenceSolution::at_lambda_max(&x, &y).unwrap();
        let t1 = psr_threshold(1, &r, &x, &y).unwrap().value.unwrap();
        assert_eq!(t1, 2.0);
        let t2 = psr_threshold(2, &r, &x, &y).unwrap().value.unwrap();
        let expect = 2.0 * 5f64.sqrt() / (1.0 + 5f64.sqrt());
        assert!((t2 - expect).abs() < 1e-12);
    }

    #[test]
    fn psrfn_closed_form_on_toy() {
        let (x, y) = toy();
        let r = ReferenceSolution::at_lambda_max(&x, &y).unwrap();
        let t1 = psrfn_threshold(1, &r, &x, &y).unwrap().value.unwrap();
        assert!((t1 - 2.0).abs() < 1e-15);
        let t2 = psrfn_threshold(2, &r, &x, &y).unwrap().value.unwrap();
        let expect = 2.0 * (1.0 + 5f64.sqrt()) / (3.0 + 5f64.sqrt());
        assert!((t2 - expect).abs() < 1e-12);
        let psr = psr_threshold(2, &r, &x, &y).unwrap().value.unwrap();
        assert!(t2 < psr);
    }

    #[test]
    fn toy_certificate_has_single_interval() {
        let (x, y) = toy();
        let r = ReferenceSolution::at_lambda_max(&x, &y).unwrap();
        let cert = rule_certificate(RuleKind::Psr, &r, &x, &y).unwrap();
        assert_eq!(cert.intervals.len(), 1);
        let iv = cert.intervals[0];
        assert_eq!(iv.rank_bound, 1);
        assert_eq!(iv.upper, 2.0);
        assert!((iv.lower - 1.381966011250105).abs() < 1e-9);
        assert_eq!(cert.bound_at(1.5), Some(1));
        assert_eq!(cert.bound_at(1.2), None);
    }

    #[test]
    fn psri_never_certifies_saturated_index() {
        let (x, y) = toy();
        let r = identity_reference(&y, 1.0);
        let t = psri_threshold(2, &r, &x, &y, 1e-6).unwrap();
        assert_eq!(t.value, None);
    }

    #[test]
    fn psri_with_parallel_v2_reduces_to_reference_values() {
        // Rank-one Y with X = I: V₁ ∥ Y so V₃ ≡ 0.
        let y = diag(&[3.0, 0.0]);
        let x = DMatrix::<f64>::identity(2, 2);
        let r = identity_reference(&y, 1.5);
        let s = Screener::new(&x, &y, &r).unwrap();
        assert!(s.v3_at(0.3, RuleKind::Psri).unwrap().norm() < 1e-14);
        let t = s.psri_threshold(2).unwrap();
        assert_eq!(t.value, Some(GRID_FLOOR * 1.5));
        let plus = s.psrplus_threshold(2).unwrap();
        assert_eq!(plus.value, t.value);
        assert_eq!(s.psri_threshold(1).unwrap().value, None);
    }

    #[test]
    fn locate_matches_closed_form_psri() {
        // ‖V₃‖ = u‖Y⊥‖ with Y⊥ the part of Y orthogonal to V₁, so the PSRi
        // threshold solves s + ‖X‖u‖Y⊥‖ = 1 in closed form.
        let x = DMatrix::<f64>::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.1, 0.9, 0.3, 0.0, 0.4, 1.2]);
        let y = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, -0.3, 1.5, 0.2, 0.4, 0.1, 0.9]);
        let lmax = lambda_max(&x, &y).unwrap();
        let lambda0 = 0.5 * lmax;
        let r = ReferenceSolution::from_primal(&x, &y, lambda0, &PgConfig { max_iter: 200_000, ..PgConfig::default() })
            .unwrap();
        let s = Screener::new(&x, &y, &r).unwrap();
        let first = v1(&r, &y).unwrap();
        let y_perp = orthogonal_part(&y, &first).unwrap();
        let k = s.x_norm * y_perp.norm();
        for i in 1..=3 {
            let si = s.ref_singular_values[i - 1];
            let rhs = 1.0 - STRICT_MARGIN - r.c0_slack - si;
            let got = s.psri_threshold(i).unwrap().value;
            if rhs <= 0.0 {
                assert_eq!(got, None);
            } else {
                let expect = lambda0 * k / (k + lambda0 * rhs);
                let got = got.unwrap_or_else(|| panic!("i={i} rhs={rhs} k={k} l0={lambda0}"));
                assert!(got >= expect - 1e-12 && got <= expect + s.bisect_tol() * 1.0001, "{got} vs {expect}");
            }
        }
    }

    #[test]
    fn equal_singular_values_yield_no_interval() {
        // X with orthonormal columns, Y = X·G with G = 2·(rotation): XᵀY = G.
        let x = DMatrix::from_row_slice(3, 2, &[0.6, 0.0, 0.8, 0.0, 0.0, 1.0]);
        let (c, sn) = (0.6f64, 0.8f64);
        let g = DMatrix::from_row_slice(2, 2, &[c, -sn, sn, c]) * 2.0;
        let y = &x * &g;
        let r = ReferenceSolution::at_lambda_max(&x, &y).unwrap();
        for rule in [RuleKind::Psr, RuleKind::Psrfn] {
            let cert = rule_certificate(rule, &r, &x, &y).unwrap();
            assert!(cert.intervals.is_empty(), "{rule}: {:?}", cert.intervals);
        }
    }

    #[test]
    fn ball_radii_relations() {
        let x = DMatrix::<f64>::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.1, 0.9, 0.3, 0.0, 0.4, 1.2]);
        let y = DMatrix::from_row_slice(3, 2, &[2.0, 0.5, -0.3, 1.5, 0.4, 0.1]);
        let lambda0 = 0.5 * lambda_max(&x, &y).unwrap();
        let r = ReferenceSolution::from_primal(&x, &y, lambda0, &PgConfig { max_iter: 200_000, ..PgConfig::default() })
            .unwrap();
        let s = Screener::new(&x, &y, &r).unwrap();
        for frac in [0.1, 0.5, 0.9] {
            let lambda = frac * lambda0;
            let omega = s.estimate_ball(RuleKind::Psr, lambda).unwrap();
            let omega1 = s.estimate_ball(RuleKind::Psri, lambda).unwrap();
            let omega2 = s.estimate_ball(RuleKind::Psrfn, lambda).unwrap();
            let omega3 = s.estimate_ball(RuleKind::PsrPlus, lambda).unwrap();
            assert!(omega1.radius <= omega.radius);
            assert!((omega3.radius - 0.5 * omega1.radius).abs() < 1e-12 * omega1.radius.max(1.0));
            assert!((omega2.radius - 0.5 * omega.radius).abs() < 1e-12 * omega.radius);
            assert!(omega3.is_inside(&omega1, 1e-10));
            assert!(omega1.is_inside(&omega, 1e-10));
            assert!(omega2.is_inside(&omega, 1e-10));
            let free = estimate_ball(RuleKind::PsrPlus, lambda, &r, &y).unwrap();
            assert!((free.center.as_dmatrix() - omega3.center.as_dmatrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn rule_names_round_trip() {
        for rule in RuleKind::ALL {
            assert_eq!(rule.to_string().parse::<RuleKind>().unwrap(), rule);
        }
        assert_eq!("psrplus".parse::<RuleKind>().unwrap(), RuleKind::PsrPlus);
        assert!("lasso".parse::<RuleKind>().is_err());
    }

    #[test]
    fn envelope_is_running_minimum() {
        let raw = vec![
            Threshold { value: Some(2.0), non_monotone: false },
            Threshold { value: None, non_monotone: false },
            Threshold { value: Some(1.5), non_monotone: false },
            Threshold { value: Some(1.7), non_monotone: false },
            Threshold { value: Some(1.0), non_monotone: false },
        ];
        let cert = RuleCertificate::assemble(RuleKind::Psri, 1.8, raw);
        assert_eq!(
            cert.envelope,
            vec![Some(2.0), Some(2.0), Some(1.5), Some(1.5), Some(1.0)]
        );
        assert_eq!(
            cert.intervals,
            vec![
                CertifiedInterval { lower: 1.5, upper: 1.8, rank_bound: 2 },
                CertifiedInterval { lower: 1.0, upper: 1.5, rank_bound: 4 },
            ]
        );
        assert_eq!(cert.tied, vec![4]);
    }
}
