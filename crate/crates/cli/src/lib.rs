//! Subcommand implementations for the `skorolab` binary.
//!
//! Every command writes through [`emit`], so identical inputs give
//! identical bytes. Floats use 17 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::value::RawValue;
use skorolab::cadlag::{skorohod_oracle, skorohod_upper, uniform_distance, CadlagPath, TimeDistortion};
use skorolab::experiments::{clt_experiment, lln_experiment, ExperimentReport, Mode};
use skorolab::fluctuation::fluctuation_path;
use skorolab::format::fmt_f64;
use skorolab::fpt::FptParams;
use skorolab::rng::BrownianRecord;
use skorolab::stochastic::simulate_path;
use skorolab::system::deterministic_trajectory;

pub mod config;

use config::{ConfigFile, ModeName};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical guard: {0}")]
    Numerical(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<skorolab::Error> for CliError {
    fn from(e: skorolab::Error) -> Self {
        if e.is_numerical_guard() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "skorolab", version, about = "Small-noise impulsive system laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the deterministic system and write the path and impact CSVs.
    Trajectory(TrajectoryArgs),
    /// Simulate one perturbed path and write the path and impulse CSVs.
    Simulate(SimulateArgs),
    /// Write the fluctuation process R1 driven by the seed's Brownian path.
    Fluctuation(FluctuationArgs),
    /// Tabulate the first-passage density and distribution function.
    Fpt(FptArgs),
    /// Distances between two path CSVs.
    Skorohod(SkorohodArgs),
    /// Monte Carlo rate experiment over an epsilon grid.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct Numerics {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Time step (> 0; at most alpha/100 deterministically, alpha/200 stochastically).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Horizon T, strictly between N*alpha and (N+1)*alpha for some N >= 1.
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrajectoryArgs {
    #[command(flatten)]
    pub numerics: Numerics,
    /// Path CSV; impacts go to `<stem>.impulses.csv` beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub numerics: Numerics,
    /// Radial noise scale, in [0, 1).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Angular noise exponent, > 1.
    #[arg(long)]
    pub p: Option<f64>,
    /// Angular noise switch, 0 or 1.
    #[arg(long)]
    pub sigma: Option<u8>,
    /// Angular drift scale, >= 0.
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Path CSV; impulses go to `<stem>.impulses.csv` beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FluctuationArgs {
    #[command(flatten)]
    pub numerics: Numerics,
    /// Master seed; the same seed drives `simulate`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV of R1.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FptArgs {
    /// Mean passage time alpha, > 0.
    #[arg(long)]
    pub alpha: f64,
    /// Angular noise scale eps^p, in (0, 1).
    #[arg(long = "eps-p")]
    pub eps_p: f64,
    /// `t0:t1:n`, n >= 2 evenly spaced points with 0 <= t0 < t1.
    #[arg(long)]
    pub grid: String,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SkorohodArgs {
    /// First path CSV.
    #[arg(long)]
    pub x1: PathBuf,
    /// Second path CSV.
    #[arg(long)]
    pub x2: PathBuf,
    /// Distortion knots `t:u,t:u,...` including `0:0` and `T:T` (identity when omitted).
    #[arg(long)]
    pub knots: Option<String>,
    /// Also run the brute-force oracle at this resolution (>= 8, at most 4 jumps per path).
    #[arg(long)]
    pub oracle: Option<usize>,
    /// Output JSON (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Lln,
    Clt,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Which distance to estimate; overrides `experiment.mode`.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Per-epsilon CSV; the JSON summary goes to `<stem>.summary.json`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

/// `dir/name.csv` becomes `dir/name.<suffix>`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn apply_numerics(file: &mut ConfigFile, n: &Numerics) {
    if let Some(dt) = n.dt {
        file.numerics.dt = dt;
    }
    if let Some(h) = n.horizon {
        file.numerics.horizon = h;
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Trajectory(a) => trajectory(a),
        Command::Simulate(a) => simulate(a),
        Command::Fluctuation(a) => fluctuation(a),
        Command::Fpt(a) => fpt(a),
        Command::Skorohod(a) => skorohod(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn trajectory(a: TrajectoryArgs) -> Result<(), CliError> {
    let mut file = load(a.numerics.config.as_deref())?;
    apply_numerics(&mut file, &a.numerics);
    let cfg = file.validate()?;
    let (path, schedule) = deterministic_trajectory(&cfg.spec, cfg.horizon, cfg.dt)?;
    emit(&path.to_csv(), Some(&a.out))?;
    emit(&schedule.to_csv(), Some(&sidecar(&a.out, "impulses.csv")))
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut file = load(a.numerics.config.as_deref())?;
    apply_numerics(&mut file, &a.numerics);
    let n = &mut file.noise;
    if let Some(v) = a.epsilon {
        n.epsilon = v;
    }
    if let Some(v) = a.p {
        n.p = v;
    }
    if let Some(v) = a.sigma {
        n.sigma = v;
    }
    if let Some(v) = a.zeta {
        n.zeta = v;
    }
    if let Some(v) = a.seed {
        file.numerics.seed = v;
    }
    let cfg = file.validate()?;
    let (path, schedule, _) = simulate_path(&cfg.spec, &cfg.noise, cfg.horizon, cfg.dt, cfg.seed)?;
    emit(&path.to_csv(), Some(&a.out))?;
    emit(&schedule.to_csv(), Some(&sidecar(&a.out, "impulses.csv")))
}

fn fluctuation(a: FluctuationArgs) -> Result<(), CliError> {
    let mut file = load(a.numerics.config.as_deref())?;
    apply_numerics(&mut file, &a.numerics);
    if let Some(v) = a.seed {
        file.numerics.seed = v;
    }
    let cfg = file.validate()?;
    let (det, _) = deterministic_trajectory(&cfg.spec, cfg.horizon, cfg.dt)?;
    let record = BrownianRecord::generate(cfg.dt, cfg.horizon, cfg.seed)?;
    let z = fluctuation_path(&cfg.spec, &det, &record, cfg.horizon, cfg.dt)?;
    emit(&z.r1.to_csv(), Some(&a.out))
}

/// Parses `t0:t1:n`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("--grid: expected t0:t1:n with 0 <= t0 < t1 and n >= 2, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [t0, t1, n] = parts.as_slice() else {
        return Err(bad());
    };
    let t0: f64 = t0.trim().parse().map_err(|_| bad())?;
    let t1: f64 = t1.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(t0 >= 0.0 && t1 > t0 && t1.is_finite() && n >= 2) {
        return Err(bad());
    }
    Ok((0..n)
        .map(|i| if i + 1 == n { t1 } else { t0 + (t1 - t0) * i as f64 / (n - 1) as f64 })
        .collect())
}

fn fpt(a: FptArgs) -> Result<(), CliError> {
    let params = FptParams::new(a.alpha, a.eps_p)?;
    let grid = parse_grid(&a.grid)?;
    let mut s = String::from("t,pdf,cdf\n");
    for t in grid {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_f64(t),
            fmt_f64(params.density_or_zero(t)),
            fmt_f64(params.cdf(t))
        );
    }
    emit(&s, a.out.as_deref())
}

/// Parses `t:u,t:u,...` distortion knots.
pub fn parse_knots(text: &str, horizon: f64) -> Result<TimeDistortion, CliError> {
    let mut knots = Vec::new();
    for pair in text.split(',') {
        let (t, u) = pair
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("--knots: expected t:u, got {pair:?}")))?;
        let t: f64 = t.trim().parse().map_err(|_| CliError::Config(format!("--knots: bad time {t:?}")))?;
        let u: f64 = u.trim().parse().map_err(|_| CliError::Config(format!("--knots: bad image {u:?}")))?;
        knots.push((t, u));
    }
    Ok(TimeDistortion::new(horizon, knots)?)
}

fn read_path(p: &Path) -> Result<CadlagPath, CliError> {
    let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
    CadlagPath::from_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
}

fn raw(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { fmt_f64(x) } else { "null".into() };
    RawValue::from_string(text).expect("formatted floats are valid JSON")
}

#[derive(Serialize)]
struct SkorohodSummary {
    uniform: Box<RawValue>,
    distortion_cost: Box<RawValue>,
    upper: Box<RawValue>,
    oracle: Option<Box<RawValue>>,
    oracle_resolution: Option<usize>,
}

fn skorohod(a: SkorohodArgs) -> Result<(), CliError> {
    let x1 = read_path(&a.x1)?;
    let x2 = read_path(&a.x2)?;
    let lambda = match &a.knots {
        Some(k) => parse_knots(k, x1.horizon())?,
        None => TimeDistortion::identity(x1.horizon()),
    };
    let summary = SkorohodSummary {
        uniform: raw(uniform_distance(&x1, &x2)?),
        distortion_cost: raw(lambda.cost()),
        upper: raw(skorohod_upper(&x1, &x2, &lambda)?),
        oracle: a
            .oracle
            .map(|r| skorohod_oracle(&x1, &x2, r).map(raw))
            .transpose()?,
        oracle_resolution: a.oracle,
    };
    emit(&to_json(&summary), a.out.as_deref())
}

fn to_json(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summary structs serialize");
    s.push('\n');
    s
}

/// Per-epsilon CSV of a report.
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut s = String::from("epsilon,mean_distance,stderr,bad_freq,replicas\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(r.epsilon),
            fmt_f64(r.mean_distance),
            fmt_f64(r.stderr),
            fmt_f64(r.bad_freq),
            r.replicas
        );
    }
    s
}

#[derive(Serialize)]
struct ReportSummary {
    slope: Box<RawValue>,
    intercept: Box<RawValue>,
    slope_stderr: Box<RawValue>,
    mode: &'static str,
    beta: u32,
    nu: Box<RawValue>,
    p: Box<RawValue>,
    seed: u64,
    lln_slope: Option<Box<RawValue>>,
}

/// JSON summary of a report's rate fit.
pub fn report_json(report: &ExperimentReport) -> String {
    let fit = report.fit.expect("the CLI only runs experiments with a fit");
    to_json(&ReportSummary {
        slope: raw(fit.slope),
        intercept: raw(fit.intercept),
        slope_stderr: raw(fit.slope_stderr),
        mode: report.mode.as_str(),
        beta: report.beta,
        nu: raw(report.nu),
        p: raw(report.p),
        seed: report.seed,
        lln_slope: report.lln_fit.map(|f| raw(f.slope)),
    })
}

fn experiment(a: ExperimentArgs) -> Result<(), CliError> {
    let mut file = load(a.config.as_deref())?;
    if let Some(m) = a.mode {
        file.experiment.mode = match m {
            ModeArg::Lln => ModeName::Lln,
            ModeArg::Clt => ModeName::Clt,
        };
    }
    let cfg = file.validate()?;
    if cfg.experiment.eps_grid.len() < 3 {
        return Err(CliError::Config(format!(
            "experiment.eps_grid: a rate fit needs at least 3 values, got {}",
            cfg.experiment.eps_grid.len()
        )));
    }
    let report = match cfg.mode {
        Mode::Lln => lln_experiment(&cfg.experiment, &cfg.spec)?,
        Mode::Clt => clt_experiment(&cfg.experiment, &cfg.spec)?,
    };
    emit(&report_csv(&report), Some(&a.out))?;
    emit(&report_json(&report), Some(&sidecar(&a.out, "summary.json")))
}
