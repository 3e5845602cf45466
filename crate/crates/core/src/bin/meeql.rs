use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use meeql::config::RunConfig;
use meeql::{run, Error};

/// Multi-experiment equation learning for birth-death-migration models.
#[derive(Parser)]
#[command(name = "meeql", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the configuration's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the datasets described by the configuration.
    Generate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Learn one-at-a-time and/or embedded-structure models.
    Learn {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score learned models against every generated experiment.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recover rp from fresh single simulations with each model.
    Infer {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the pipeline serially and in parallel and compare artifacts.
    /// Without a config, uses the built-in noise-free five-experiment run.
    Verify {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: &PathBuf, seed: Option<u64>) -> meeql::Result<RunConfig> {
    let mut cfg = RunConfig::read(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> meeql::Result<()> {
    let jobs = cli.jobs.unwrap_or(0);
    if cli.jobs == Some(0) {
        return Err(Error::Config("--jobs must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let seed = cli.seed;
    pool.install(|| match &cli.command {
        Command::Generate { config } => {
            let dir = run::generate(&load(config, seed)?)?;
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Learn { config } => {
            let dir = run::learn(&load(config, seed)?)?;
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Evaluate { config } => {
            let dir = run::evaluate(&load(config, seed)?)?;
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Infer { config } => {
            let dir = run::infer(&load(config, seed)?)?;
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Verify { config } => {
            let mut cfg = match config {
                Some(p) => RunConfig::read(p)?,
                None => RunConfig::from_toml(run::VERIFY_CONFIG, "built-in".as_ref())?,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            print!("{}", run::verify(&cfg, cli.jobs.unwrap_or(4))?);
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                if matches!(e, Error::Precondition(_)) {
                    eprintln!("hint: see `meeql --help`; commands run in order generate, learn, evaluate, infer");
                }
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
