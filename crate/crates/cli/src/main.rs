//! `stencil-dse`: performance prediction, tile tuning and architecture
//! codesign for time-tiled GPU stencils.
//!
//! Exit codes: 0 success, 2 infeasible or empty search space, 3 bad input,
//! 4 internal error. Failures print one JSON line on stderr.

mod commands;

use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stencil_dse::{Error, Objective, Strategy};

#[derive(Parser, Debug)]
#[command(
    name = "stencil-dse",
    version,
    about = "Design-space exploration for tiled GPU stencils"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time, energy and shared-memory footprint of one tile.
    Predict(PredictArgs),
    /// Exhaustive search over one tile grid.
    Tune(TuneArgs),
    /// Tune every strategy's grid and keep the best.
    Supertune(SupertuneArgs),
    /// Sweep architectures under an area budget and tune every kernel on each.
    Codesign(CodesignArgs),
    /// Area/performance frontier of a CSV of design points.
    Pareto(ParetoArgs),
    /// Overhead decomposition and resource slack of one tile.
    Bottleneck(BottleneckArgs),
    /// Least-squares fit of area coefficients to measured dies.
    CalibrateArea(CalibrateArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    kernel: PathBuf,
    #[arg(long)]
    arch: PathBuf,
    #[arg(long)]
    calib: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    tile: PathBuf,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ObjectiveArg {
    Time,
    Energy,
    Edp,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Time => Objective::Time,
            ObjectiveArg::Energy => Objective::Energy,
            ObjectiveArg::Edp => Objective::Edp,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StrategyArg {
    HexHybrid,
    RectWavefront,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::HexHybrid => Strategy::HexHybrid,
            StrategyArg::RectWavefront => Strategy::RectWavefront,
        }
    }
}

#[derive(Args, Debug)]
struct TuneArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "time")]
    objective: ObjectiveArg,
    /// Grid file (one grid or an array). Without it, a default grid is used.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Picks the grid of this strategy when the file holds several.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the ranked candidates as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SupertuneArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "time")]
    objective: ObjectiveArg,
    /// Grids to compete; defaults to one default grid per strategy.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CodesignArgs {
    #[arg(long)]
    suite: PathBuf,
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    /// Area coefficients; defaults to those in the calibration file.
    #[arg(long)]
    coeffs: Option<PathBuf>,
    /// Area budget in mm²; overrides the space file's budget.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "time")]
    objective: ObjectiveArg,
    /// Only evaluate this many closed-form-ranked hex tiles per kernel.
    #[arg(long)]
    prune_keep: Option<usize>,
    /// Directory for design_points.csv, pareto.csv, pareto.json and
    /// resource_allocation.csv.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ParetoArgs {
    /// CSV with at least `area_mm2` and `weighted_gflops` columns.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BottleneckArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    tile: PathBuf,
    /// Hyperthreading factors to sweep, e.g. `1..8`.
    #[arg(long, value_parser = parse_k_range)]
    sweep_k: Option<RangeInclusive<u64>>,
    /// Report area-budget slack against this budget in mm².
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// JSON array of `{arch: path, area_mm2}`.
    #[arg(long)]
    anchors: PathBuf,
    /// Comma-separated coefficients to fit.
    #[arg(long, value_delimiter = ',', required = true)]
    free: Vec<String>,
    /// Values for the coefficients held fixed; zero when omitted.
    #[arg(long)]
    fixed: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_k_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|e| format!("{e}"))?;
    if a == 0 || a > b {
        return Err("need 1 <= a <= b".into());
    }
    Ok(a..=b)
}

/// Failure of one invocation, tagged with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            kind: "invalid_input",
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Infeasible(_) => (2, "infeasible"),
            Error::EmptyFeasibleSpace => (2, "empty_feasible_space"),
            Error::EmptyDesignSpace => (2, "empty_design_space"),
            Error::Io { .. } => (3, "io"),
            Error::Parse { .. } => (3, "parse"),
            Error::Validation { .. } => (3, "validation"),
            Error::Domain(_) => (3, "domain"),
            Error::Size { .. } => (3, "size"),
            Error::Rank(_) => (3, "rank_deficient"),
            Error::NegativeCoeff { .. } => (3, "negative_coefficient"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

fn report(f: &Failure) {
    let line = serde_json::json!({ "error": f.kind, "exit_code": f.code, "message": f.message });
    eprintln!("{line}");
}

fn thread_cap() -> Result<Option<usize>, Failure> {
    match std::env::var("STENCIL_DSE_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::input(format!(
                "STENCIL_DSE_THREADS must be a positive integer, got `{v}`"
            ))),
        },
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let threads = thread_cap()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure {
            code: 4,
            kind: "internal",
            message: e.to_string(),
        })?;
    pool.install(|| match cli.command {
        Command::Predict(a) => commands::predict(a),
        Command::Tune(a) => commands::tune(a),
        Command::Supertune(a) => commands::supertune(a),
        Command::Codesign(a) => commands::codesign(a),
        Command::Pareto(a) => commands::pareto(a),
        Command::Bottleneck(a) => commands::bottleneck(a),
        Command::CalibrateArea(a) => commands::calibrate_area(a),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("bad arguments");
            report(&Failure::input(first.trim_start_matches("error: ")));
            return ExitCode::from(3);
        }
    };
    std::panic::set_hook(Box::new(|info| {
        report(&Failure {
            code: 4,
            kind: "internal",
            message: info.to_string().replace('\n', " "),
        });
    }));
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            report(&f);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(4),
    }
}
