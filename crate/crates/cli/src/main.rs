use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ris_ee::algorithms::Scheme;
use ris_ee::validation::{Solvers, DEFAULT_VALIDATION_SEED};
use ris_ee_cli::{cmd_run, cmd_sweep, cmd_validate, CliError, Config, RunPaths};

/// Energy-efficiency optimization of RIS-assisted MIMO links under EMF
/// exposure constraints.
///
/// Configuration keys can be overridden with RIS_EE_<SECTION>_<KEY>
/// environment variables, e.g. RIS_EE_EXPOSURE_BUDGET_RATIO=0.5.
#[derive(Parser)]
#[command(name = "ris-ee", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel realization with one scheme.
    Run(RunArgs),
    /// Monte Carlo sweep over RIS size or exposure budget.
    Sweep(SweepArgs),
    /// Check the solvers against independent oracles.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// TOML config file; built-in defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long, value_name = "a-f")]
    scheme: Option<Scheme>,
    /// Channel seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Write a JSON summary here.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    dump_channel: Option<PathBuf>,
    /// Replay a dumped channel instead of sampling one.
    #[arg(long, value_name = "PATH")]
    load_channel: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Restrict to these schemes (comma separated).
    #[arg(long, value_name = "a-f", value_delimiter = ',')]
    scheme: Vec<Scheme>,
    /// Master seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, value_name = "U32")]
    trials: Option<u32>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, value_name = "U16")]
    threads: Option<u16>,
    /// Output directory for trials.csv and aggregate.csv.
    #[arg(long, value_name = "PATH", default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Instances per property.
    #[arg(long, value_name = "U32", default_value_t = 10)]
    trials: u32,
    #[arg(long, value_name = "U64", default_value_t = DEFAULT_VALIDATION_SEED)]
    seed: u64,
}

fn load(arg: &ConfigArg) -> Result<Config, CliError> {
    Ok(Config::load(arg.config.as_deref(), std::env::vars())?)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = load(&args.config)?;
            if let Some(s) = args.scheme {
                cfg.run.scheme = s;
            }
            if let Some(seed) = args.seed {
                cfg.run.seed = seed;
            }
            let paths = RunPaths {
                out: args.out,
                dump_channel: args.dump_channel,
                load_channel: args.load_channel,
            };
            cmd_run(&cfg, &paths, out)
        }
        Command::Sweep(args) => {
            let mut cfg = load(&args.config)?;
            if !args.scheme.is_empty() {
                cfg.sweep.schemes = args.scheme;
            }
            if let Some(seed) = args.seed {
                cfg.sweep.master_seed = seed;
            }
            if let Some(trials) = args.trials {
                if trials == 0 {
                    return Err(CliError::Config("--trials must be >= 1".into()));
                }
                cfg.sweep.trials = trials;
            }
            if let Some(threads) = args.threads {
                cfg.sweep.threads = (threads > 0).then_some(usize::from(threads));
            }
            cmd_sweep(&cfg, &args.out, out)
        }
        Command::Validate(args) => {
            cmd_validate(args.trials as usize, args.seed, &Solvers::default(), out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
