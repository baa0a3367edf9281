mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use viscomem::solver::{ConvStrategy, ProblemConfig};

/// Viscoelastic wave equation with memory: simulation, kernel analysis and decay fits.
#[derive(Debug, Parser)]
#[command(name = "viscomem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a configuration and write its energy trace.
    Run(RunArgs),
    /// Tabulate a relaxation kernel and check its assumptions.
    AnalyzeKernel(KernelArgs),
    /// Fit decay models and envelopes to an energy trace.
    Fit(FitArgs),
    /// Run a worked example end to end: gate, simulation, fit and envelope checks.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Strategy {
    Direct,
    Prony,
}

/// Settings that replace the corresponding configuration entries.
#[derive(Debug, Clone, Default, Args, Serialize)]
struct Overrides {
    /// Damping exponent.
    #[arg(long)]
    q: Option<f64>,
    /// Source exponent.
    #[arg(long)]
    p: Option<f64>,
    /// Time step.
    #[arg(long)]
    dt: Option<f64>,
    /// Number of cells; without --dt the ratio dt/h is kept.
    #[arg(long)]
    cells: Option<usize>,
    /// Final time.
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Memory evaluator.
    #[arg(long, value_enum)]
    strategy: Option<Strategy>,
    /// Record every N-th step.
    #[arg(long = "record-stride")]
    record_stride: Option<usize>,
}

impl Overrides {
    fn apply(&self, c: &mut ProblemConfig) {
        if let Some(cells) = self.cells {
            // snap the ratio so that 0.9 h stays exactly at the CFL bound
            let ratio = c.dt / (c.length / c.n_cells as f64);
            let ratio = (ratio * 1e12).round() / 1e12;
            c.n_cells = cells;
            c.dt = ratio * (c.length / cells as f64);
        }
        if let Some(dt) = self.dt {
            c.dt = dt;
        }
        if let Some(t) = self.t_end {
            c.t_end = t;
        }
        if let Some(q) = self.q {
            c.damping.q = q;
        }
        if let Some(p) = self.p {
            c.p = p;
        }
        if let Some(s) = self.strategy {
            c.conv_strategy = match s {
                Strategy::Direct => ConvStrategy::Direct,
                Strategy::Prony => ConvStrategy::Prony,
            };
        }
        if let Some(r) = self.record_stride {
            c.record_stride = r;
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Problem configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; must not exist or be empty.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Run even when the configuration violates the standing assumptions.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Kernel specification, or a problem configuration containing one (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Lower bound of the stiffness; taken from the configuration when one is given.
    #[arg(long)]
    lambda0: Option<f64>,
    /// Supremum of the memory coefficient; taken from the configuration when one is given.
    #[arg(long = "a-sup")]
    a_sup: Option<f64>,
    /// Values of delta for the M(delta) table.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01,0.001,0.0001")]
    deltas: Vec<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Energy trace (CSV).
    trace: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Damping exponent of the run, which sets the guaranteed polynomial rate.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    /// Fraction of samples, counted from the end, used for the fits.
    #[arg(long = "tail-fraction", default_value_t = 0.5)]
    tail_fraction: f64,
    /// Problem configuration of the run; adds the envelopes specific to its kernel.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    /// Example identifiers (1, 2 or 3); several require --sweep.
    #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
    ids: Vec<u8>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Run the listed examples (all three if none) concurrently into `OUT/example-ID`.
    #[arg(long)]
    sweep: bool,
}

/// How a command finished, in increasing severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Status {
    Ok,
    ChecksFailed,
    BlowUp,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::BlowUp => 2,
            Status::ChecksFailed => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => commands::run(args),
        Command::AnalyzeKernel(args) => commands::analyze_kernel(args),
        Command::Fit(args) => commands::fit(args),
        Command::Reproduce(args) => commands::reproduce(args),
    };
    match result {
        Ok(status) => ExitCode::from(status.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
