//! `qmeter`: seeded experiments and the acceptance suite from the command line.
//!
//! Exit status: 0 when every enabled check passes, 1 when a check fails or a
//! run aborts, 2 for an invalid configuration.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qmeter::config::ExperimentConfig;
use qmeter::montecarlo::configure_threads;

#[derive(Parser, Debug)]
#[command(name = "qmeter", version, about = "Continuously monitored oscillator: simulation and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON reports
    #[arg(long, global = true, default_value = "qmeter_out")]
    out: PathBuf,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured path count
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Reduced sizes (acceptance) or at most 1000 paths (other subcommands)
    #[arg(long, global = true)]
    quick: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample Wiener paths and their functionals
    Paths,
    /// Closed-form first moments against Monte Carlo
    Expect,
    /// Closed-form covariances against Monte Carlo
    Covar,
    /// Moments of the number and pointer observables for a Fock level
    Measure {
        #[arg(long)]
        n: Option<u32>,
        /// Comma-separated output times
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
    },
    /// Pointer level separation and regime classification
    Window,
    /// Truncated Fock space checks
    FockCheck,
    /// Small-epsilon scaling limits
    Limit {
        #[arg(long, value_delimiter = ',')]
        epsilon_list: Option<Vec<f64>>,
        /// In units of 1/(|kappa|^2 t_end)
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
    },
    /// Acceptance criteria 1-8
    Acceptance,
}

pub enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        if commands::is_config_error(&e) {
            Failure::Config(e)
        } else {
            Failure::Run(e)
        }
    }
}

impl From<qmeter::Error> for Failure {
    fn from(e: qmeter::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config(anyhow::anyhow!("--config is required for this subcommand")))?;
    let mut cfg = ExperimentConfig::load(path)
        .map_err(|e| Failure::Config(anyhow::Error::from(e).context(format!("reading {}", path.display()))))?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(p) = common.paths {
        cfg.n_paths = p;
    }
    if common.quick {
        cfg.n_paths = cfg.n_paths.min(1000);
    }
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    configure_threads().map_err(|e| Failure::Config(e.into()))?;
    let c = &cli.common;
    std::fs::create_dir_all(&c.out)
        .map_err(|e| Failure::Run(anyhow::Error::from(e).context(format!("creating {}", c.out.display()))))?;
    match cli.command {
        Command::Acceptance => commands::acceptance(c),
        Command::Measure { n, t_grid } => {
            let mut cfg = load_config(c)?;
            if let Some(n) = n {
                cfg.n = n;
            }
            if t_grid.is_some() {
                cfg.t_grid = t_grid;
            }
            cfg.validate().map_err(|e| Failure::Config(e.into()))?;
            commands::measure(&cfg, &c.out)
        }
        Command::Limit {
            epsilon_list,
            lambda_grid,
        } => {
            let mut cfg = load_config(c)?;
            if epsilon_list.is_some() {
                cfg.epsilon_list = epsilon_list;
            }
            if lambda_grid.is_some() {
                cfg.lambda_grid = lambda_grid;
            }
            commands::limit(&cfg, &c.out)
        }
        Command::Paths => commands::paths(&load_config(c)?, &c.out),
        Command::Expect => commands::expect(&load_config(c)?, &c.out),
        Command::Covar => commands::covar(&load_config(c)?, &c.out),
        Command::Window => commands::window(&load_config(c)?, &c.out),
        Command::FockCheck => commands::fock_check(&load_config(c)?, &c.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("invalid configuration: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
