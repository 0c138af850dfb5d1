use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multiverse_cli::commands::{self, GridOptions, RunOptions};
use multiverse_core::{Error, Result};

/// Surrogate-driven multiverse analysis.
///
/// Exit codes: 0 success, 1 validation error, 2 evaluator or protocol
/// error, 3 numerical failure. Run directories live under
/// `$MULTIVERSE_HOME/runs/` (default: the current directory).
#[derive(Parser)]
#[command(name = "multiverse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a template config and an empty run directory.
    Init { name: String },
    /// Run the exploration loop for a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        run_dir: Option<PathBuf>,
        #[command(flatten)]
        loop_args: LoopArgs,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Continue a run from its latest saved batch.
    Resume {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        loop_args: LoopArgs,
    },
    /// Analyse a saved run.
    Analyze {
        #[command(subcommand)]
        analysis: Analysis,
    },
    /// Write grid.csv, mean.svg and variance.svg for two free dimensions.
    Grid {
        #[command(flatten)]
        target: Target,
        /// Two numeric dimensions, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        free_dims: Option<Vec<String>>,
        /// Fix a dimension, `dim=value`; repeatable.
        #[arg(long = "fix")]
        fix: Vec<String>,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Bayes factor of an additive split against a shared kernel.
    Interaction {
        #[command(flatten)]
        target: Target,
        /// Two groups, e.g. `a,b;c`. Defaults to the config's groups.
        #[arg(long)]
        groups: Option<String>,
    },
    /// Main and total Sobol indices.
    Sensitivity {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 4096)]
        n_base: usize,
        /// Evaluate the run's evaluator directly instead of the surrogate.
        #[arg(long)]
        exact_function: bool,
    },
    /// Correlations between levels of the categorical dimensions.
    Correlations {
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Args)]
struct Target {
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Locate the run directory from a config's name.
    #[arg(long, conflicts_with = "run_dir")]
    config: Option<PathBuf>,
}

impl Target {
    fn resolve(&self, root: &Path) -> Result<PathBuf> {
        match (&self.run_dir, &self.config) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(c)) => {
                let config = multiverse_cli::config::RunConfig::load(c)?;
                Ok(commands::run_dir_for(root, &config.name))
            }
            (None, None) => Err(Error::Validation("pass --run-dir or --config".into())),
        }
    }
}

#[derive(Args)]
struct LoopArgs {
    /// Concurrent evaluations (default: one per core).
    #[arg(long)]
    workers: Option<usize>,
    /// Extra attempts for failed evaluations.
    #[arg(long)]
    retries: Option<usize>,
    /// Stop after this acquisition round.
    #[arg(long)]
    until_batch: Option<usize>,
}

impl LoopArgs {
    fn options(&self, run_dir: Option<PathBuf>, seed: Option<u64>) -> RunOptions {
        RunOptions {
            run_dir,
            seed,
            workers: self.workers,
            retries: self.retries,
            until_batch: self.until_batch,
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let root = commands::home();
    match cli.command {
        Command::Init { name } => commands::cmd_init(&root, &name, out).map(drop),
        Command::Run {
            config,
            run_dir,
            loop_args,
            seed,
        } => commands::cmd_run(&root, &config, &loop_args.options(run_dir, seed), out).map(drop),
        Command::Resume { target, loop_args } => {
            let dir = target.resolve(&root)?;
            commands::cmd_resume(&dir, &loop_args.options(None, None), out).map(drop)
        }
        Command::Analyze { analysis } => match analysis {
            Analysis::Interaction { target, groups } => {
                commands::cmd_interaction(&target.resolve(&root)?, groups.as_deref(), out).map(drop)
            }
            Analysis::Sensitivity {
                target,
                n_base,
                exact_function,
            } => commands::cmd_sensitivity(&target.resolve(&root)?, n_base, exact_function, out).map(drop),
            Analysis::Correlations { target } => commands::cmd_correlations(&target.resolve(&root)?, out),
        },
        Command::Grid {
            target,
            free_dims,
            fix,
            resolution,
        } => {
            let free = match free_dims {
                Some(v) => Some(<[String; 2]>::try_from(v).map_err(|_| {
                    Error::Validation("--free-dims takes exactly two names".into())
                })?),
                None => None,
            };
            let opts = GridOptions {
                free,
                fixed: fix,
                resolution,
            };
            commands::cmd_grid(&target.resolve(&root)?, &opts, out).map(drop)
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
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match dispatch(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
