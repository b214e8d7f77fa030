//! `bwk`: inspect instances, solve LPs, simulate single runs and run sweeps.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use bwk_core::BwkError;
use clap::{Args, Parser, Subcommand, ValueEnum};

const DEFAULTS_HELP: &str = "\
Run-configuration defaults (per entry of \"algorithms\" in the config file):
  c1 = 1, c2 = 1                estimator constants
  eps_lp = problem-dependent    largest LP accuracy keeping the Algorithm 2 guarantee (printed by `inspect`)
  mw_eps = sqrt(ln d / B)       Algorithm 1 weight-update rate (mw_eps_override)
  backend = idealized           estimator_backend; ae-analytic is the alternative
  lp_mode = exact, approx_backend = idealized

Exit codes: 0 done (an infeasible LP is an answer), 1 usage or schema error, 2 internal invariant violated.
BWK_THREADS caps the worker threads used by `sweep`.";

#[derive(Parser)]
#[command(name = "bwk", version, about = "Bandits-with-knapsacks experiments", after_help = DEFAULTS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the LP ground truth and derived constants of the configured instance.
    #[command(after_help = DEFAULTS_HELP)]
    Inspect(InspectArgs),
    /// Run one replication and write its trace.
    #[command(after_help = DEFAULTS_HELP)]
    Simulate(SimulateArgs),
    /// Run every algorithm over the horizon grid and write runs.csv and summary.csv.
    #[command(after_help = DEFAULTS_HELP)]
    Sweep(SweepArgs),
    /// Solve an LP given as JSON.
    #[command(after_help = DEFAULTS_HELP)]
    Lp(LpArgs),
}

#[derive(Args)]
struct InspectArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Horizon; defaults to the instance's own.
    #[arg(long)]
    t: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Algorithm name: alg1-quantum, alg1-classical, alg2-quantum or alg2-classical.
    /// Defaults to the first entry of "algorithms".
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    t: Option<u64>,
    /// Defaults to experiment.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the algorithm's lp_mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Output directory; defaults to output_dir or the current directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to experiment.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the planned cells and exit without running or writing anything.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LpArgs {
    /// LP file (JSON with objective, A, rhs and optional pins, geq_A, geq_rhs).
    #[arg(long, visible_alias = "config")]
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    /// Accuracy of the approximate solver in scaled units.
    #[arg(long, default_value_t = 0.02)]
    eps: f64,
    /// Right-hand-side scale S; defaults to a bound on the total of the variables
    /// derived from the all-positive rows.
    #[arg(long)]
    scale: Option<f64>,
    /// Accepted for uniformity with the other commands; both solvers are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Approx,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, config or input files.
    Usage(String),
    /// A library error; invariant violations map to exit code 2.
    Core(BwkError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<BwkError> for CliError {
    fn from(e: BwkError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(BwkError::Invariant(_)) => 2,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Inspect(a) => commands::inspect(&a.config, a.t),
        Command::Simulate(a) => commands::simulate(&commands::SimulateRequest {
            config: a.config,
            algo: a.algo,
            horizon: a.t,
            seed: a.seed,
            mode: a.mode,
            out: a.out,
        }),
        Command::Sweep(a) => commands::sweep(&a.config, a.seed, a.dry_run, a.out.as_deref()),
        Command::Lp(a) => {
            let _ = a.seed;
            commands::lp(&a.file, a.mode, a.eps, a.scale)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
