use std::path::PathBuf;
use std::process::ExitCode;

use bcm_cli::commands::{self, Selection};
use bcm_cli::config::OUT_ENV;
use bcm_cli::{AppConfig, CliError, Overrides, Seeds};
use bcm_core::Granularity;
use bcm_harness::Method;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bcm-infer", version, about = "Recover latent opinions of a bounded-confidence model from interaction data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Maximum number of runs executed in parallel.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Confidence bounds of the grid, comma separated.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    epsilons: Option<Vec<f64>>,
    /// Dynamics noise levels of the grid, comma separated.
    #[arg(long, global = true, value_delimiter = ',', num_args = 1..)]
    noise: Option<Vec<f64>>,
    /// Seed count `N` (seeds 0..N), a range `a..b`, or a list `a,b,c`.
    #[arg(long, global = true)]
    seeds: Option<Seeds>,
    /// Results directory; overrides BCM_INFER_OUT and the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate ground-truth trajectories for the grid.
    Simulate,
    /// Reconstruct the opinions up to the training cutoff.
    Infer(SelectArgs),
    /// Forecast every run whose inference finished.
    Forecast,
    /// Write aggregate.csv and the figures.
    Report(ReportArgs),
    /// simulate, infer, forecast and report in one go.
    RunAll {
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Da,
    Lbi,
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Edge,
    Node,
    Global,
    All,
}

#[derive(Args)]
struct SelectArgs {
    /// Restrict to one method; both run by default.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Observation granularity for DA; LBI is edge-only.
    #[arg(long, value_enum, default_value = "all")]
    granularity: GranularityArg,
    /// Run only the mis-specified variant, with ε swapped at inference.
    #[arg(long)]
    misspecify: bool,
}

impl SelectArgs {
    fn selection(&self) -> Selection {
        Selection {
            method: self.method.map(|m| match m {
                MethodArg::Da => Method::Da,
                MethodArg::Lbi => Method::Lbi,
            }),
            granularity: match self.granularity {
                GranularityArg::Edge => Some(Granularity::Edge),
                GranularityArg::Node => Some(Granularity::Node),
                GranularityArg::Global => Some(Granularity::Global),
                GranularityArg::All => None,
            },
            misspecify: self.misspecify,
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    /// JSON list of figure specifications; the standard set by default.
    #[arg(long, value_name = "PATH")]
    figures: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    let env_out = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
    let flags = Overrides {
        out_dir: g.out,
        workers: g.workers,
        epsilons: g.epsilons,
        noise: g.noise,
        seeds: g.seeds,
    };
    let config = AppConfig::resolve(g.config.as_deref(), env_out, flags)?;
    env_logger::Builder::new()
        .parse_filters(&config.log_level)
        .parse_env("RUST_LOG")
        .format_timestamp(None)
        .init();
    match cli.command {
        Command::Simulate => commands::simulate(&config),
        Command::Infer(select) => commands::infer(&config, select.selection()),
        Command::Forecast => commands::forecast(&config),
        Command::Report(r) => commands::report(&config, r.figures.as_deref()),
        Command::RunAll { select, report } => commands::run_all(&config, select.selection(), report.figures.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
