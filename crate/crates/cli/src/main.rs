use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nmlr::experiment::{self, ImageConfig, SweepConfig};
use nmlr::io::{read_matrix_csv, read_pgm, write_matrix_csv, write_pgm};
use nmlr::{
    generate_instance, lambda_max, primal, solve_dual, solve_primal, AdmmConfig, Error, InstanceSpec, MatrixF64,
    PgConfig, RuleKind,
};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_VIOLATION: u8 = 4;

/// Nuclear-norm regularized multivariate regression with rank screening.
#[derive(Parser)]
#[command(name = "nmlr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print λ_max = ‖XᵀY‖₂.
    LambdaMax(Data),
    /// Solve the dual with ADMM; writes the recovered B.
    SolveDual(Solve),
    /// Solve the primal with accelerated proximal gradient; writes B.
    SolvePrimal(Solve),
    /// Rank certificates from a reference solution at λ₀.
    Rules(RulesArgs),
    /// Check certificates against the primal oracle on a λ grid.
    Verify(VerifyArgs),
    /// Generate a random instance into a directory (x.csv, y.csv, b_true.csv).
    Simulate(SimulateArgs),
    /// Recover a grayscale image used as the coefficient matrix.
    RecoverImage(ImageArgs),
}

#[derive(Args)]
struct Data {
    /// Design matrix CSV.
    #[arg(long)]
    x: PathBuf,
    /// Response matrix CSV.
    #[arg(long)]
    y: PathBuf,
}

#[derive(Args)]
struct SolverFlags {
    /// Stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

impl SolverFlags {
    fn admm(&self) -> AdmmConfig<f64> {
        let mut cfg = AdmmConfig::default();
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        cfg
    }

    fn pg(&self) -> PgConfig<f64> {
        let mut cfg = PgConfig::default();
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        cfg
    }
}

#[derive(Args)]
struct Solve {
    #[command(flatten)]
    data: Data,
    /// Absolute regularization parameter.
    #[arg(long, conflicts_with = "lambda0_frac")]
    lambda: Option<f64>,
    /// λ as a fraction of λ_max.
    #[arg(long)]
    lambda0_frac: Option<f64>,
    /// Output CSV for B (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct RulesArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long, default_value_t = 0.5)]
    lambda0_frac: f64,
    /// Comma-separated rules: psr, psri, psrfn, psr+.
    #[arg(long, value_delimiter = ',', default_value = "psr,psri,psrfn,psr+")]
    rules: Vec<RuleKind>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    data: Data,
    #[arg(long, default_value_t = 0.5)]
    lambda0_frac: f64,
    #[arg(long, value_delimiter = ',', default_value = "psr,psri,psrfn,psr+")]
    rules: Vec<RuleKind>,
    /// Number of geometric λ grid points.
    #[arg(long, default_value_t = experiment::DEFAULT_GRID_POINTS)]
    grid: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    p: usize,
    #[arg(long, default_value_t = 50)]
    q: usize,
    /// Rank of the true coefficient matrix (full rank if omitted).
    #[arg(long)]
    rank: Option<usize>,
    /// Standard deviation of the noise entries.
    #[arg(long, default_value_t = 0.01)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImageArgs {
    /// PGM image (P2 or P5).
    #[arg(long)]
    image: PathBuf,
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    noise_std: f64,
    #[arg(long, conflicts_with = "lambda_frac")]
    lambda: Option<f64>,
    /// λ as a fraction of λ_max.
    #[arg(long, default_value_t = 1e-3)]
    lambda_frac: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output PGM for the recovered image.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
}

enum Failure {
    Usage(String),
    /// Unreadable or malformed input file.
    Input(String),
    Lib(Error),
    NotConverged(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_) | Error::RequiresInteriorReference { .. } | Error::ReferenceAtLambdaMax => EXIT_USAGE,
        Error::NotConverged { .. } | Error::Diverged(_) | Error::SvdFailure | Error::Factorization => {
            EXIT_NOT_CONVERGED
        }
        _ => EXIT_INPUT,
    }
}

type Outcome = std::result::Result<(), Failure>;

fn load(data: &Data) -> std::result::Result<(MatrixF64, MatrixF64), Failure> {
    let x = read_matrix_csv(&data.x).map_err(|e| with_path(e, &data.x))?;
    let y = read_matrix_csv(&data.y).map_err(|e| with_path(e, &data.y))?;
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch(format!("X has {} rows but Y has {}", x.rows(), y.rows())).into());
    }
    Ok((x, y))
}

fn with_path(e: Error, path: &Path) -> Failure {
    match e {
        Error::Parse { .. } | Error::Io(_) | Error::Pgm(_) => Failure::Input(format!("{}: {e}", path.display())),
        other => Failure::Lib(other),
    }
}

/// Writes to `path`, or stdout when absent.
fn emit(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> nmlr::Result<()>) -> Outcome {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
        }
    }
    Ok(())
}

fn resolve_lambda(x: &MatrixF64, y: &MatrixF64, lambda: Option<f64>, frac: Option<f64>) -> std::result::Result<f64, Failure> {
    match (lambda, frac) {
        (Some(l), _) => Ok(l),
        (None, Some(f)) => Ok(f * lambda_max(x, y)?),
        (None, None) => Err(Failure::Usage("one of --lambda or --lambda0-frac is required".into())),
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::LambdaMax(data) => {
            let (x, y) = load(&data)?;
            println!("{}", lambda_max(&x, &y)?);
            Ok(())
        }
        Command::SolveDual(args) => {
            let (x, y) = load(&args.data)?;
            let lambda = resolve_lambda(&x, &y, args.lambda, args.lambda0_frac)?;
            let start = Instant::now();
            let sol = solve_dual(&x, &y, lambda, &args.solver.admm())?;
            let seconds = start.elapsed().as_secs_f64();
            emit(args.out.as_deref(), |w| nmlr::io::format_matrix_csv(&sol.b_star, w))?;
            eprintln!(
                "lambda={} iterations={} primal_residual={} dual_residual={} duality_gap={} time={}",
                lambda, sol.iterations, sol.final_primal_residual, sol.final_dual_residual, sol.duality_gap, seconds
            );
            if !sol.converged {
                return Err(Failure::NotConverged(format!("ADMM stopped after {} iterations", sol.iterations)));
            }
            Ok(())
        }
        Command::SolvePrimal(args) => {
            let (x, y) = load(&args.data)?;
            let lambda = resolve_lambda(&x, &y, args.lambda, args.lambda0_frac)?;
            let sol = solve_primal(&x, &y, lambda, &args.solver.pg())?;
            let c = primal::feasible_dual_certificate(&x, &y, &sol.b, lambda)?;
            let gap = primal::duality_gap(&x, &y, &sol.b, &c, lambda)?;
            emit(args.out.as_deref(), |w| nmlr::io::format_matrix_csv(&sol.b, w))?;
            eprintln!(
                "lambda={} iterations={} objective={} duality_gap={} rank={}",
                lambda,
                sol.iterations,
                sol.objective,
                gap,
                experiment::oracle_rank(sol.b.as_dmatrix())?
            );
            if !sol.converged {
                return Err(Failure::NotConverged(format!(
                    "proximal gradient stopped after {} iterations",
                    sol.iterations
                )));
            }
            Ok(())
        }
        Command::Rules(args) => {
            let (x, y) = load(&args.data)?;
            let certs = experiment::certify(&x, &y, args.lambda0_frac, &args.rules, &args.solver.admm())?;
            for cert in &certs {
                if !cert.tied.is_empty() {
                    eprintln!("{}: tied thresholds at indices {:?}", cert.rule, cert.tied);
                }
            }
            emit(args.out.as_deref(), |w| experiment::write_certificates_csv(&certs, w))
        }
        Command::Verify(args) => {
            let (x, y) = load(&args.data)?;
            let cfg = SweepConfig {
                lambda0_frac: args.lambda0_frac,
                rules: args.rules,
                grid_points: args.grid,
                admm: args.solver.admm(),
                pg: PgConfig::default(),
            };
            let report = experiment::sweep(&x, &y, &cfg)?;
            emit(args.out.as_deref(), |w| report.write_csv(w))?;
            eprintln!(
                "lambda_max={} lambda0={} rows={} violations={} trend_breaks={} unconverged={}",
                report.lambda_max,
                report.lambda0,
                report.rows.len(),
                report.violations.len(),
                report.trend_breaks,
                report.unconverged
            );
            if let Some(v) = report.violations.first() {
                return Err(Failure::Violation(format!(
                    "{} certifies rank ≤ {} at λ = {} but the oracle rank is {}",
                    v.rule, v.bound, v.lambda, v.oracle_rank
                )));
            }
            if report.unconverged > 0 {
                return Err(Failure::NotConverged(format!(
                    "{} grid points did not converge",
                    report.unconverged
                )));
            }
            Ok(())
        }
        Command::Simulate(args) => {
            let spec = InstanceSpec {
                n: args.n,
                p: args.p,
                q: args.q,
                noise_std: args.noise_std,
                true_rank: args.rank,
                seed: args.seed,
            };
            let inst = generate_instance::<f64>(&spec)?;
            fs::create_dir_all(&args.out)?;
            write_matrix_csv(&inst.x, args.out.join("x.csv"))?;
            write_matrix_csv(&inst.y, args.out.join("y.csv"))?;
            write_matrix_csv(&inst.b_true, args.out.join("b_true.csv"))?;
            Ok(())
        }
        Command::RecoverImage(args) => {
            let image: MatrixF64 = read_pgm(&args.image).map_err(|e| with_path(e, &args.image))?;
            let cfg = ImageConfig {
                n: args.n,
                noise_std: args.noise_std,
                lambda: args.lambda,
                lambda_frac: args.lambda_frac,
                seed: args.seed,
                admm: args.solver.admm(),
            };
            let out = experiment::recover_image(image.as_dmatrix(), &cfg)?;
            if let Some(path) = &args.out {
                write_pgm(&out.recovered, path)?;
            }
            println!(
                "time={} iterations={} mse={} lambda={}",
                out.seconds, out.iterations, out.mse, out.lambda
            );
            if !out.converged {
                return Err(Failure::NotConverged(format!("ADMM stopped after {} iterations", out.iterations)));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VIOLATION)
        }
    }
}
