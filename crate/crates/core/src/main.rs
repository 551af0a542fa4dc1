use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use scldpc::cli::{
    cmd_errdist, cmd_rate, cmd_simulate, cmd_validate, load_config, CliError, Overrides,
    WORKERS_ENV,
};
use scldpc::config::RunConfig;
use scldpc::simulator::FrameFilter;

/// Doped spatially coupled LDPC codes: rates, simulation campaigns and
/// error distributions.
#[derive(Debug, Parser)]
#[command(name = "scldpc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the design rates of the configured chain.
    Rate(Common),
    /// Check a config and exit.
    Validate(Common),
    /// Run a Monte Carlo campaign and write metrics.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        /// Also write the per-block decoder trace.
        #[arg(long)]
        trace: bool,
    },
    /// Write per-block bit error histograms of selected frames.
    Errdist {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "propagation")]
        filter: Filter,
        /// Decode only these frame indices.
        #[arg(long = "frame", value_delimiter = ',')]
        frame: Vec<usize>,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(short, long)]
    config: PathBuf,
    /// Comma-separated Eb/N0 points in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Worker threads. Never changes the output.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

impl RunArgs {
    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Filter {
    All,
    Errors,
    Propagation,
}

impl From<Filter> for FrameFilter {
    fn from(f: Filter) -> Self {
        match f {
            Filter::All => FrameFilter::All,
            Filter::Errors => FrameFilter::Errors,
            Filter::Propagation => FrameFilter::Propagation,
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let overrides = Overrides {
        snr_db: common.snr.clone(),
        frames: common.frames,
        seed: common.seed,
    };
    Ok(load_config(&common.config, &overrides)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Rate(c) | Command::Validate(c) => c,
        Command::Simulate { common, .. } | Command::Errdist { common, .. } => common,
    };
    let cfg = load(common)?;
    if common.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    match &cli.command {
        Command::Rate(_) => print!("{}", cmd_rate(&cfg)?),
        Command::Validate(_) => print!("{}", cmd_validate(&cfg)?),
        Command::Simulate { run, trace, .. } => {
            print!("{}", cmd_simulate(&cfg, &run.out, run.workers(), *trace)?)
        }
        Command::Errdist {
            run, filter, frame, ..
        } => {
            let frames = (!frame.is_empty()).then_some(frame.as_slice());
            for path in cmd_errdist(&cfg, (*filter).into(), frames, &run.out, run.workers())? {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
