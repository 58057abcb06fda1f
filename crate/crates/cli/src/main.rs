//! `muntz`: solves, convergence sweeps, training and prediction for the Müntz
//! space-time spectral method.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Sweep;
use config::{parse_real_list, RawConfig};
use failure::Failure;

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "MUNTZ_THREADS";

#[derive(Debug, Parser)]
#[command(name = "muntz", version, about = "Müntz space-time spectral solver and exponent tuner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone)]
struct MuList(Vec<f64>);

fn parse_mu_list(s: &str) -> Result<MuList, String> {
    parse_real_list(s).map(MuList)
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated fractional orders overriding `problem.mu`.
    #[arg(long, value_parser = parse_mu_list)]
    mu: Option<MuList>,
    /// Output directory (default: `output.dir` from the config, else `.`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the configured problem and write `errors.csv`.
    Solve(Common),
    /// Errors versus resolution; writes `convergence.csv`.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// `N=4,8,12` (temporal sweep) or `M=8,16` (spatial sweep).
        #[arg(long)]
        sweep: Sweep,
    },
    /// Train the network from `[training]`; writes the model and `loss_history.csv`.
    Train(Common),
    /// Predict `lambda` for a list of `mu`; writes `predictions.csv`.
    Predict {
        /// Optional configuration (supplies `problem.mu` and `[models] ann` when flags are absent).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Network model file.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Spline model file (instead of `--model`).
        #[arg(long)]
        spline: Option<PathBuf>,
        #[arg(long, value_parser = parse_mu_list)]
        mu: Option<MuList>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare `lambda = 1`, spline and network `lambda` on the configured problem.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ann: Option<PathBuf>,
        #[arg(long)]
        spline: Option<PathBuf>,
    },
    /// Generate the training and validation datasets with reference errors.
    Dataset(Common),
    /// Fit the cubic-spline baseline from `[spline]`; writes `spline.json`.
    FitSpline(Common),
}

fn configure_threads() -> Result<(), Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Failure::config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
            muntz_core::exec::init_threads(Some(n));
        }
        Err(_) => muntz_core::exec::init_threads(None),
    }
    Ok(())
}

fn run(command: Command) -> Result<String, Failure> {
    configure_threads()?;
    let mu = |m: &Option<MuList>| m.as_ref().map(|l| l.0.clone());
    match command {
        Command::Solve(c) => {
            let raw = RawConfig::load(&c.config)?;
            let out = commands::output_dir(c.out.as_deref(), Some(&raw))?;
            commands::cmd_solve(&raw, mu(&c.mu).as_deref(), &out)
        }
        Command::Convergence { common: c, sweep } => {
            let raw = RawConfig::load(&c.config)?;
            let out = commands::output_dir(c.out.as_deref(), Some(&raw))?;
            commands::cmd_convergence(&raw, mu(&c.mu).as_deref(), &sweep, &out)
        }
        Command::Train(c) => {
            let raw = RawConfig::load(&c.config)?;
            let out = commands::output_dir(c.out.as_deref(), Some(&raw))?;
            commands::cmd_train(&raw, &out)
        }
        Command::Dataset(c) => {
            let raw = RawConfig::load(&c.config)?;
            let out = commands::output_dir(c.out.as_deref(), Some(&raw))?;
            commands::cmd_dataset(&raw, &out)
        }
        Command::FitSpline(c) => {
            let raw = RawConfig::load(&c.config)?;
            let out = commands::output_dir(c.out.as_deref(), Some(&raw))?;
            commands::cmd_fit_spline(&raw, &out)
        }
        Command::Predict { config, model, spline, mu: mus, out } => {
            let raw = config.as_deref().map(RawConfig::load).transpose()?;
            let mus = match (mu(&mus), &raw) {
                (Some(m), _) => m,
                (None, Some(r)) => match r.get("problem", "mu") {
                    Some(t) => parse_real_list(t).map_err(|e| Failure::config(format!("problem.mu: {e}")))?,
                    None => Vec::new(),
                },
                (None, None) => Vec::new(),
            };
            let model = model.or_else(|| raw.as_ref().and_then(|r| r.path("models", "ann")));
            let model = if spline.is_some() { None } else { model };
            let out = commands::output_dir(out.as_deref(), raw.as_ref())?;
            commands::cmd_predict(model.as_deref(), spline.as_deref(), &mus, &out)
        }
        Command::Compare { common: c, ann, spline } => {
            let raw = RawConfig::load(&c.config)?;
            let out = commands::output_dir(c.out.as_deref(), Some(&raw))?;
            commands::cmd_compare(&raw, mu(&c.mu).as_deref(), ann.as_deref(), spline.as_deref(), &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            log::debug!("{failure:?}");
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
