//! Argument parsing and dispatch. `run` never exits the process; it returns
//! the exit status so tests can drive it in-process.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Outcome};
use crate::config::{ExperimentConfig, Overrides};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lipcert", version, about = "Lipschitz classifiers, certificates and transport oracles")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; the invocation owns it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ConfigOverrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub widths: Option<Vec<usize>>,
    /// Robustness budgets, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one constrained network per seed.
    Train(ConfigOverrides),
    /// Clean/robust accuracy and MCR across a loss grid.
    Pareto(ConfigOverrides),
    /// Train/test gaps over dataset fractions.
    Consistency(ConfigOverrides),
    /// BCE weight growth without constraints, and the constrained control.
    Diverge(ConfigOverrides),
    /// Regress a constrained network onto the snowflake signed distance.
    SdfFit(ConfigOverrides),
    /// Certificates of a checkpoint on the task's test split.
    Certify {
        #[command(flatten)]
        overrides: ConfigOverrides,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// L2-PGD audit of a checkpoint at every budget in `eps_list`.
    Attack {
        #[command(flatten)]
        overrides: ConfigOverrides,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Exact W1 between the two distributions of a `{p, q}` file.
    Wass {
        #[arg(long)]
        input: PathBuf,
    },
    /// Koch snowflake boundary (and optionally its signed-distance grid).
    Snowflake {
        #[arg(long, default_value_t = 4)]
        iterations: usize,
        /// Outer snowflake plus the scaled inner loop.
        #[arg(long)]
        ring: bool,
        /// Also write grid.csv at this resolution.
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Lower/upper bounds on the m-packing number.
    PackBounds {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        vol_x: f64,
        #[arg(long)]
        vol_ball: f64,
    },
}

fn load(cli: &Cli, o: &ConfigOverrides) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::invalid("--config", "required by this command"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(&Overrides {
        seed: cli.seed,
        epochs: o.epochs,
        lr: o.lr,
        batch_size: o.batch_size,
        widths: o.widths.clone(),
        eps_list: o.eps.clone(),
    });
    cfg.validate()?;
    Ok(cfg)
}

/// Dispatches a parsed command.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Train(o) => commands::train_cmd(&load(cli, o)?, out),
        Command::Pareto(o) => commands::pareto_cmd(&load(cli, o)?, out),
        Command::Consistency(o) => commands::consistency_cmd(&load(cli, o)?, out),
        Command::Diverge(o) => commands::diverge_cmd(&load(cli, o)?, out),
        Command::SdfFit(o) => commands::sdf_fit_cmd(&load(cli, o)?, out),
        Command::Certify { overrides, checkpoint } => {
            commands::certify_cmd(&load(cli, overrides)?, Some(checkpoint.as_path()), out)
        }
        Command::Attack { overrides, checkpoint } => {
            commands::attack_cmd(&load(cli, overrides)?, Some(checkpoint.as_path()), out)
        }
        Command::Wass { input } => commands::wass_cmd(input, out),
        Command::Snowflake {
            iterations,
            ring,
            resolution,
        } => commands::snowflake_cmd(*iterations, *ring, *resolution, out),
        Command::PackBounds { m, n, vol_x, vol_ball } => commands::pack_bounds_cmd(*m, *n, *vol_x, *vol_ball),
    }
}

/// Parses `args`, runs, prints, and returns the exit status:
/// 0 success, 1 invalid arguments or config, 2 failure while running.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            if let Some(line) = outcome.stdout {
                let _ = writeln!(stdout, "{line}");
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
