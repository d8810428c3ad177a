//! Command-line harness: model generation, sampling, decomposition,
//! assumption checks, belief-propagation comparison, and the sample-size
//! sweep experiment.
//!
//! Exit codes: 0 on success, 1 on validation/usage errors, 2 on numerical
//! failures.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::inference::{lbp_compare, InfoModel};
use crate::matrix::SymmetricMatrix;
use crate::metrics::{composite_precision, edit_distance, linf_error};
use crate::model::{default_support_threshold, support_off, GroundTruthModel};
use crate::rng::{derive_seed, RngStream};
use crate::sampling::{sample_covariance, sample_covariance_centered, sample_gaussian};
use crate::solver::{
    decompose, regularization_schedule, ScheduleConfig, SolverOptions, EXPERIMENT_C1, EXPERIMENT_C2,
};
use crate::synth::{gen_model, metadata_pairs, SynthConfig, DEFAULT_SEED};

/// Estimation method of a sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Penalized program with the box constraint; recovers both components.
    L1Linf,
    /// Plain l1 baseline (`lambda = infinity`); the residual is always zero.
    L1Only,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::L1Linf => "l1_linf",
            Method::L1Only => "l1_only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "l1_linf" => Ok(Method::L1Linf),
            "l1_only" => Ok(Method::L1Only),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?}; expected l1_linf or l1_only"
            ))),
        }
    }

    fn index(self) -> u64 {
        match self {
            Method::L1Linf => 0,
            Method::L1Only => 1,
        }
    }
}

/// Configuration of a sample-size sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub model_dir: PathBuf,
    /// Strictly increasing sample sizes.
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub c1: f64,
    pub c2: f64,
    /// Box level used by the schedule; defaults to the model's own.
    pub lambda_star: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
    pub tol: f64,
    pub max_iterations: usize,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() {
            return Err(Error::InvalidInput("sample sizes must be nonempty".into()));
        }
        if !self.sample_sizes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "sample sizes must be strictly increasing".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("at least one method required".into()));
        }
        Ok(())
    }
}

/// One sweep cell result. Metric fields are `None` when the cell's solve
/// failed; `status` records the failure kind.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: &'static str,
    pub n: usize,
    pub replicate: usize,
    pub edit_markov: Option<usize>,
    pub edit_residual: Option<usize>,
    pub linf_jm: Option<f64>,
    pub linf_sigma_r: Option<f64>,
    pub linf_composite_precision: Option<f64>,
    pub iterations: Option<usize>,
    pub kkt_residual: Option<f64>,
    pub seed: u64,
    pub status: String,
}

pub const SWEEP_CSV_HEADER: &str = "method,n,replicate,edit_markov,edit_residual,linf_jm,\
linf_sigma_r,linf_composite_precision,iterations,kkt_residual,seed,status";

fn run_cell(
    model: &GroundTruthModel,
    j_star: &SymmetricMatrix,
    schedule: &ScheduleConfig,
    config: &SweepConfig,
    method: Method,
    n: usize,
    replicate: usize,
) -> SweepRow {
    let cell_seed = derive_seed(config.seed, &[n as u64, replicate as u64, method.index()]);
    let mut row = SweepRow {
        method: method.as_str(),
        n,
        replicate,
        edit_markov: None,
        edit_residual: None,
        linf_jm: None,
        linf_sigma_r: None,
        linf_composite_precision: None,
        iterations: None,
        kkt_residual: None,
        seed: cell_seed,
        status: "ok".into(),
    };
    let mut rng = RngStream::from_seed(cell_seed);
    let attempt = (|| -> Result<()> {
        let samples = sample_gaussian(&model.sigma, n, &mut rng)?;
        let sigma_hat = sample_covariance(&samples);
        let (gamma, mut lambda) = regularization_schedule(model.dim(), n, schedule);
        if method == Method::L1Only {
            lambda = f64::INFINITY;
        }
        let options = SolverOptions {
            gamma,
            lambda,
            tol: config.tol,
            max_iterations: config.max_iterations,
            ..SolverOptions::default()
        };
        let dec = decompose(&sigma_hat, &options)?;
        let est = &dec.estimate;
        let sup_m_est = support_off(&est.j_m_hat, default_support_threshold(&est.j_m_hat));
        let sup_r_est = support_off(
            &est.sigma_r_hat,
            default_support_threshold(&est.sigma_r_hat),
        );
        let j_hat = match method {
            Method::L1Linf => composite_precision(&est.j_m_hat, &est.sigma_r_hat)?,
            Method::L1Only => est.j_m_hat.clone(),
        };
        row.edit_markov = Some(edit_distance(&sup_m_est, &support_off(&model.j_m, 0.0))?);
        row.edit_residual = Some(edit_distance(
            &sup_r_est,
            &support_off(&model.sigma_r, 0.0),
        )?);
        row.linf_jm = Some(linf_error(&est.j_m_hat, &model.j_m)?);
        row.linf_sigma_r = Some(linf_error(&est.sigma_r_hat, &model.sigma_r)?);
        row.linf_composite_precision = Some(linf_error(&j_hat, j_star)?);
        row.iterations = Some(est.iterations);
        row.kkt_residual = Some(est.kkt_residual);
        if !dec.converged {
            row.status = "max_iterations".into();
        }
        Ok(())
    })();
    if let Err(e) = attempt {
        row.status = match e {
            Error::NotPositiveDefinite => "not_positive_definite".into(),
            Error::CompositeNotPD => "composite_not_pd".into(),
            Error::DualInfeasible(_) => "dual_infeasible".into(),
            other => format!("error: {other}"),
        };
    }
    row
}

/// Run every sweep cell and return rows in `(method, n, replicate)` order.
///
/// Cells execute concurrently up to `jobs` workers; per-cell seeds derive
/// from `(seed, n, replicate, method)`, so the output is a pure function of
/// the configuration regardless of scheduling.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let model = GroundTruthModel::load_dir(&config.model_dir)?;
    if model.dim() < 2 {
        return Err(Error::InvalidInput(
            "sweep needs a model with at least 2 nodes".into(),
        ));
    }
    let j_star = model.sigma.inverse_spd()?;
    let schedule = ScheduleConfig {
        c1: config.c1,
        c2: config.c2,
        lambda_star: config.lambda_star.unwrap_or(model.lambda_star),
    };

    let mut cells = Vec::new();
    for &method in &config.methods {
        for &n in &config.sample_sizes {
            for replicate in 0..config.replicates {
                cells.push((method, n, replicate));
            }
        }
    }

    let jobs = config.jobs.max(1).min(cells.len().max(1));
    let results: Vec<Mutex<Option<SweepRow>>> = cells.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let (method, n, replicate) = cells[i];
                let row = run_cell(&model, &j_star, &schedule, config, method, n, replicate);
                *results[i].lock().expect("result slot") = Some(row);
            });
        }
    });
    Ok(results
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot")
                .expect("cell completed")
        })
        .collect())
}

/// Serialize sweep rows as CSV (fixed header, empty fields for failed cells).
pub fn sweep_rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let opt_u = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        let opt_f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.n,
            r.replicate,
            opt_u(r.edit_markov),
            opt_u(r.edit_residual),
            opt_f(r.linf_jm),
            opt_f(r.linf_sigma_r),
            opt_f(r.linf_composite_precision),
            opt_u(r.iterations),
            opt_f(r.kkt_residual),
            r.seed,
            r.status
        );
    }
    out
}

/// Parse a sweep CSV produced by [`sweep_rows_to_csv`].
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let perr = |message: String| Error::Parse {
        path: "<sweep csv>".into(),
        message,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SWEEP_CSV_HEADER => {}
        _ => return Err(perr("missing or unexpected header".into())),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.splitn(12, ',').collect();
        if fields.len() != 12 {
            return Err(perr(format!("line {}: expected 12 fields", lineno + 2)));
        }
        let opt_u = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| perr(format!("line {}: {e}", lineno + 2)))
            }
        };
        let opt_f = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| perr(format!("line {}: {e}", lineno + 2)))
            }
        };
        rows.push(SweepRow {
            method: match Method::parse(fields[0])? {
                Method::L1Linf => "l1_linf",
                Method::L1Only => "l1_only",
            },
            n: fields[1]
                .parse()
                .map_err(|e| perr(format!("line {}: {e}", lineno + 2)))?,
            replicate: fields[2]
                .parse()
                .map_err(|e| perr(format!("line {}: {e}", lineno + 2)))?,
            edit_markov: opt_u(fields[3])?,
            edit_residual: opt_u(fields[4])?,
            linf_jm: opt_f(fields[5])?,
            linf_sigma_r: opt_f(fields[6])?,
            linf_composite_precision: opt_f(fields[7])?,
            iterations: opt_u(fields[8])?,
            kkt_residual: opt_f(fields[9])?,
            seed: fields[10]
                .parse()
                .map_err(|e| perr(format!("line {}: {e}", lineno + 2)))?,
            status: fields[11].to_string(),
        });
    }
    Ok(rows)
}

pub const LBP_TRACE_CSV_HEADER: &str =
    "iteration,mean_error_markov,var_error_markov,mean_error_composite,var_error_composite";

/// One row of a belief-propagation trace CSV; `None` fields belong to a
/// truncated (diverged) trace.
pub type LbpTraceRow = (usize, Option<f64>, Option<f64>, Option<f64>, Option<f64>);

/// Parse a trace CSV written by the `lbp` subcommand.
pub fn parse_lbp_trace_csv(text: &str) -> Result<Vec<LbpTraceRow>> {
    let perr = |message: String| Error::Parse {
        path: "<lbp trace csv>".into(),
        message,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == LBP_TRACE_CSV_HEADER => {}
        _ => return Err(perr("missing or unexpected header".into())),
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(perr(format!("line {}: expected 5 fields", lineno + 2)));
        }
        let opt_f = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|e| perr(format!("line {}: {e}", lineno + 2)))
            }
        };
        rows.push((
            fields[0]
                .parse()
                .map_err(|e| perr(format!("line {}: {e}", lineno + 2)))?,
            opt_f(fields[1])?,
            opt_f(fields[2])?,
            opt_f(fields[3])?,
            opt_f(fields[4])?,
        ));
    }
    Ok(rows)
}

#[derive(Parser, Debug)]
#[command(
    name = "covdecomp",
    about = "Decompose a covariance matrix into a sparse Markov precision component plus a sparse residual covariance",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic grid ground-truth model directory.
    Synth(SynthArgs),
    /// Draw Gaussian samples from a model and write the sample covariance.
    Sample(SampleArgs),
    /// Decompose a covariance CSV into precision and residual components.
    Decompose(DecomposeArgs),
    /// Check identifiability and incoherence conditions of a model.
    Check(CheckArgs),
    /// Run loopy belief propagation on the Markov and composite models.
    Lbp(LbpArgs),
    /// Sample-size sweep over methods, with per-cell metrics as CSV.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 8)]
    cols: usize,
    #[arg(long, default_value_t = 0.5)]
    edge_weight: f64,
    #[arg(long, default_value_t = 0.2)]
    residual_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    residual_magnitude: f64,
    #[arg(long, default_value_t = 0.25)]
    pd_margin: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output model directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Model directory to sample from.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output path for the sample covariance CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional path to also dump the raw samples (one per line).
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Subtract the sample mean (experimentation only).
    #[arg(long, default_value_t = false)]
    centered: bool,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    /// Covariance matrix CSV.
    #[arg(long)]
    cov: PathBuf,
    /// Penalty weight: a number, or `schedule` to derive it from --n.
    #[arg(long, default_value = "0")]
    gamma: String,
    /// Box bound: a number, `inf`, or `schedule` (needs --n, --lambda-star).
    #[arg(long, default_value = "inf")]
    lambda: String,
    /// Box level of the target model, used by `--lambda schedule`.
    #[arg(long)]
    lambda_star: Option<f64>,
    #[arg(long, default_value_t = EXPERIMENT_C1)]
    c1: f64,
    #[arg(long, default_value_t = EXPERIMENT_C2)]
    c2: f64,
    /// Sample count behind the covariance; required in schedule mode.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
    /// Output directory for j_m_hat.csv, sigma_r_hat.csv, diagnostics.txt.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Report file; defaults to report.txt inside the model directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LbpArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Output trace CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Optional key=value config file; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated subset of {l1_linf, l1_only}.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    lambda_star: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to COVDECOMP_JOBS or the CPU count.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

/// Entry point; returns the process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders usage/help itself; help requests are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Check(a) => cmd_check(a),
        Command::Lbp(a) => cmd_lbp(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NotPositiveDefinite
        | Error::NoConvergence(_)
        | Error::CompositeNotPD
        | Error::GenerationFailed(_)
        | Error::DualInfeasible(_)
        | Error::SingularGamma => 2,
        _ => 1,
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        rows: a.rows,
        cols: a.cols,
        edge_weight_magnitude: a.edge_weight,
        residual_fraction: a.residual_fraction,
        residual_magnitude: a.residual_magnitude,
        pd_margin: a.pd_margin,
        seed: a.seed,
    };
    let model = gen_model(&config)?;
    model.save_dir_with_metadata(&a.out, &metadata_pairs(&config))?;
    println!(
        "wrote model p={} lambda_star={} to {}",
        model.dim(),
        model.lambda_star,
        a.out.display()
    );
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    if a.n == 0 {
        return Err(Error::InvalidInput("--n must be positive".into()));
    }
    let model = GroundTruthModel::load_dir(&a.model)?;
    let mut rng = RngStream::from_seed(a.seed);
    let samples = sample_gaussian(&model.sigma, a.n, &mut rng)?;
    if let Some(path) = &a.samples {
        samples.save_csv(path)?;
    }
    let sigma_hat = if a.centered {
        sample_covariance_centered(&samples)
    } else {
        sample_covariance(&samples)
    };
    sigma_hat.save_csv(&a.out)?;
    println!("wrote sample covariance (n={}) to {}", a.n, a.out.display());
    Ok(())
}

fn parse_gamma(a: &DecomposeArgs, p: usize) -> Result<f64> {
    if a.gamma.trim() == "schedule" {
        if p < 2 {
            return Err(Error::InvalidInput(
                "schedule mode needs dimension >= 2".into(),
            ));
        }
        let n =
            a.n.ok_or_else(|| Error::InvalidInput("--gamma schedule requires --n".into()))?;
        let schedule = ScheduleConfig {
            c1: a.c1,
            c2: a.c2,
            lambda_star: 0.0,
        };
        Ok(regularization_schedule(p, n, &schedule).0)
    } else {
        let v: f64 = a
            .gamma
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad --gamma value {:?}", a.gamma)))?;
        if v < 0.0 {
            return Err(Error::InvalidInput("--gamma must be nonnegative".into()));
        }
        Ok(v)
    }
}

fn parse_lambda(a: &DecomposeArgs, p: usize) -> Result<f64> {
    match a.lambda.trim() {
        "inf" => Ok(f64::INFINITY),
        "schedule" => {
            if p < 2 {
                return Err(Error::InvalidInput(
                    "schedule mode needs dimension >= 2".into(),
                ));
            }
            let n =
                a.n.ok_or_else(|| Error::InvalidInput("--lambda schedule requires --n".into()))?;
            let lambda_star = a.lambda_star.ok_or_else(|| {
                Error::InvalidInput("--lambda schedule requires --lambda-star".into())
            })?;
            let schedule = ScheduleConfig {
                c1: a.c1,
                c2: a.c2,
                lambda_star,
            };
            Ok(regularization_schedule(p, n, &schedule).1)
        }
        other => {
            let v: f64 = other
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad --lambda value {other:?}")))?;
            if v <= 0.0 {
                return Err(Error::InvalidInput("--lambda must be positive".into()));
            }
            Ok(v)
        }
    }
}

fn cmd_decompose(a: DecomposeArgs) -> Result<()> {
    let sigma_hat = SymmetricMatrix::load_csv(&a.cov)?;
    let gamma = parse_gamma(&a, sigma_hat.dim())?;
    let lambda = parse_lambda(&a, sigma_hat.dim())?;
    let options = SolverOptions {
        gamma,
        lambda,
        tol: a.tol,
        max_iterations: a.max_iters,
        ..SolverOptions::default()
    };
    let dec = decompose(&sigma_hat, &options)?;
    std::fs::create_dir_all(&a.out)?;
    dec.estimate.j_m_hat.save_csv(&a.out.join("j_m_hat.csv"))?;
    dec.estimate
        .sigma_r_hat
        .save_csv(&a.out.join("sigma_r_hat.csv"))?;
    let mut diag = String::new();
    let _ = writeln!(diag, "gamma={gamma}");
    let _ = writeln!(diag, "lambda={lambda}");
    let _ = writeln!(diag, "iterations={}", dec.estimate.iterations);
    let _ = writeln!(diag, "converged={}", dec.converged);
    let _ = writeln!(diag, "objective={}", dec.estimate.final_objective);
    let _ = writeln!(
        diag,
        "stationarity_residual={}",
        dec.kkt.stationarity_residual
    );
    let _ = writeln!(
        diag,
        "dual_feasibility_residual={}",
        dec.kkt.dual_feasibility_residual
    );
    let _ = writeln!(diag, "box_violation={}", dec.kkt.box_violation);
    std::fs::write(a.out.join("diagnostics.txt"), diag)?;
    println!(
        "decomposed {}x{} covariance in {} iterations (converged={})",
        sigma_hat.dim(),
        sigma_hat.dim(),
        dec.estimate.iterations,
        dec.converged
    );
    Ok(())
}

fn cmd_check(a: CheckArgs) -> Result<()> {
    let model = GroundTruthModel::load_dir(&a.model)?;
    let report = crate::assumptions::check_all(&model, a.tol)?;
    let rendered = report.render();
    let out = a.out.unwrap_or_else(|| a.model.join("report.txt"));
    std::fs::write(&out, &rendered)?;
    print!("{rendered}");
    Ok(())
}

fn cmd_lbp(a: LbpArgs) -> Result<()> {
    let model = GroundTruthModel::load_dir(&a.model)?;
    let mean = model.mean.clone().unwrap_or_else(|| vec![0.0; model.dim()]);
    let markov = InfoModel::from_mean(model.j_m.clone(), &mean)?;
    let j_star = model.sigma.inverse_spd()?;
    let composite = InfoModel::from_mean(j_star, &mean)?;
    let (tm, tc) = lbp_compare(&markov, &composite, a.iters, a.tol)?;
    let mut out = String::from(LBP_TRACE_CSV_HEADER);
    out.push('\n');
    let rows = tm.iterations.max(tc.iterations);
    for i in 0..rows {
        let f = |t: &crate::inference::LbpTrace, which: usize| -> String {
            let v = if which == 0 {
                t.mean_error.get(i)
            } else {
                t.variance_error.get(i)
            };
            v.map_or(String::new(), |x| x.to_string())
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            f(&tm, 0),
            f(&tm, 1),
            f(&tc, 0),
            f(&tc, 1)
        );
    }
    std::fs::write(&a.out, out)?;
    println!(
        "markov: converged={} ({} iterations, rho_bar={:.4}); composite: converged={} ({} iterations, rho_bar={:.4})",
        tm.converged, tm.iterations, tm.rho_bar, tc.converged, tc.iterations, tc.rho_bar
    );
    Ok(())
}

fn default_jobs() -> usize {
    if let Ok(v) = std::env::var("COVDECOMP_JOBS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    // Config file first, flags override.
    let mut file: std::collections::HashMap<String, String> = Default::default();
    if let Some(path) = &a.config {
        for (k, v) in crate::model::load_metadata(path)? {
            file.insert(k, v);
        }
    }
    let from_file = |key: &str| file.get(key).cloned();
    let parse_key = |key: &str, v: &str| -> Error {
        Error::InvalidInput(format!("bad config value for {key}: {v:?}"))
    };

    let model_dir = a
        .model
        .or_else(|| from_file("model").map(PathBuf::from))
        .ok_or_else(|| Error::InvalidInput("missing --model (or config key model)".into()))?;
    let sizes_text = a
        .sizes
        .or_else(|| from_file("sizes"))
        .unwrap_or_else(|| "1000,2000,4000,8000".into());
    let sample_sizes: Vec<usize> = sizes_text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| parse_key("sizes", &sizes_text))
        })
        .collect::<Result<_>>()?;
    let replicates = match a.replicates {
        Some(r) => r,
        None => match from_file("replicates") {
            Some(v) => v.parse().map_err(|_| parse_key("replicates", &v))?,
            None => 5,
        },
    };
    let methods_text = a
        .methods
        .or_else(|| from_file("methods"))
        .unwrap_or_else(|| "l1_linf,l1_only".into());
    let mut methods = Vec::new();
    for part in methods_text.split(',') {
        let m = Method::parse(part)?;
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let get_f64 = |flag: Option<f64>, key: &str, default: f64| -> Result<f64> {
        match flag {
            Some(v) => Ok(v),
            None => match from_file(key) {
                Some(v) => v.parse().map_err(|_| parse_key(key, &v)),
                None => Ok(default),
            },
        }
    };
    let c1 = get_f64(a.c1, "c1", EXPERIMENT_C1)?;
    let c2 = get_f64(a.c2, "c2", EXPERIMENT_C2)?;
    let lambda_star = match a.lambda_star {
        Some(v) => Some(v),
        None => match from_file("lambda_star") {
            Some(v) => Some(v.parse().map_err(|_| parse_key("lambda_star", &v))?),
            None => None,
        },
    };
    let seed = match a.seed {
        Some(s) => s,
        None => match from_file("seed") {
            Some(v) => v.parse().map_err(|_| parse_key("seed", &v))?,
            None => DEFAULT_SEED,
        },
    };
    let out = a
        .out
        .or_else(|| from_file("out").map(PathBuf::from))
        .ok_or_else(|| Error::InvalidInput("missing --out (or config key out)".into()))?;
    let jobs = match a.jobs {
        Some(j) => j.max(1),
        None => match from_file("jobs") {
            Some(v) => v.parse().map_err(|_| parse_key("jobs", &v))?,
            None => default_jobs(),
        },
    };
    let tol = get_f64(a.tol, "tol", 1e-8)?;
    let max_iterations = match a.max_iters {
        Some(v) => v,
        None => match from_file("max_iters") {
            Some(v) => v.parse().map_err(|_| parse_key("max_iters", &v))?,
            None => 50_000,
        },
    };

    let config = SweepConfig {
        model_dir,
        sample_sizes,
        replicates,
        methods,
        c1,
        c2,
        lambda_star,
        seed,
        out: out.clone(),
        jobs,
        tol,
        max_iterations,
    };
    let rows = run_sweep(&config)?;
    std::fs::write(&out, sweep_rows_to_csv(&rows))?;
    let failures = rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "wrote {} sweep rows to {} ({} non-ok)",
        rows.len(),
        out.display(),
        failures
    );
    Ok(())
}
