//! Nuclear-norm regularized multivariate linear regression
//!
//! ```text
//! minimize ½‖Y − XB‖²_F + λ‖B‖_*
//! ```
//!
//! together with its dual `min (λ²/2)‖C − Y/λ‖²_F − ½‖Y‖²_F  s.t. ‖XᵀC‖₂ ≤ 1`,
//! a two-block ADMM for the dual, a proximal-gradient primal oracle, and four
//! rules that certify upper bounds on `rank(B*(λ))` over intervals of `λ`
//! from a single reference dual solution.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` aliases below are what the CLI and the experiment harness use.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod error;
pub mod experiment;
pub mod instance;
pub mod io;
pub mod linalg;
pub mod primal;
pub mod rules;
pub mod scalar;

pub use admm::{recover_primal, solve_dual, AdmmConfig, AdmmState, DualSolution, DualSolver};
pub use error::{Error, Result};
pub use instance::{generate_instance, Instance, InstanceSpec};
pub use linalg::{
    frobenius_norm, nuclear_norm, project_spectral_ball, rank_eps, singular_values, spectral_norm,
    svd, svt, Matrix, Svd,
};
pub use primal::{
    duality_gap, kkt_residuals, solve_primal, KktReport, PgConfig, PrimalSolution,
};
pub use rules::{
    estimate_ball, lambda_max, psr_threshold, psrfn_threshold, psri_threshold,
    psrplus_threshold, rule_certificate, v1, v2, v3, CertifiedInterval, EstimateBall,
    ReferenceSolution, ReferenceSource, RuleCertificate, RuleKind, Screener, Threshold,
};
pub use scalar::Scalar;

pub type MatrixF64 = Matrix<f64>;
pub type MatrixF32 = Matrix<f32>;
pub type AdmmConfigF64 = AdmmConfig<f64>;
pub type DualSolutionF64 = DualSolution<f64>;
pub type PgConfigF64 = PgConfig<f64>;
pub type ReferenceSolutionF64 = ReferenceSolution<f64>;
pub type RuleCertificateF64 = RuleCertificate<f64>;
