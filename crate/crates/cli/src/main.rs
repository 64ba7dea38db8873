use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toml::Value;

mod commands;
mod config;
mod experiment;
mod pipeline;

use config::{config_error, parse_assignment, ConfigError};

#[derive(Parser)]
#[command(name = "netcov", version, about = "Group-sparse regression on samples of weighted networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (a `run_manifest.toml` is accepted).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set solver.grid_size=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate datasets for every grid cell and replicate.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate and fit a penalized model to one dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["nbg", "ebg", "lasso"])]
        scheme: Option<String>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        grid_size: Option<usize>,
        #[arg(long)]
        min_ratio: Option<f64>,
        /// Split communities into chunks of about this size before grouping.
        #[arg(long, value_name = "SIZE")]
        split_communities: Option<usize>,
    },
    /// Fit the edge-screening baseline to one dataset.
    Cpm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Screening p-value threshold.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Score a fitted model against a dataset's test split and truth.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fit: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate, fit and evaluate over a grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn path_value(p: &PathBuf) -> Value {
    Value::String(p.display().to_string())
}

fn push<T: Into<Value>>(over: &mut Vec<(String, Value)>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        over.push((key.to_string(), v.into()));
    }
}

fn resolve(common: &Common, preset: Option<&str>, mut flags: Vec<(String, Value)>) -> anyhow::Result<config::Config> {
    let mut over = Vec::new();
    for s in &common.set {
        over.push(parse_assignment(s)?);
    }
    if let Some(seed) = common.seed {
        let seed = i64::try_from(seed).map_err(|_| config_error("seed must be below 2^63"))?;
        over.push(("seed".into(), Value::Integer(seed)));
    }
    over.append(&mut flags);
    config::load(common.config.as_deref(), preset, &over)
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("NETCOV_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| config_error(format!("NETCOV_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    match cli.command {
        Command::Simulate { common, preset, out } => {
            let mut f = Vec::new();
            push(&mut f, "paths.out", out.as_ref().map(path_value));
            let cfg = resolve(&common, preset.as_deref(), f)?;
            commands::simulate(&cfg)
        }
        Command::Fit {
            common,
            data,
            out,
            scheme,
            folds,
            grid_size,
            min_ratio,
            split_communities,
        } => {
            let mut f = Vec::new();
            push(&mut f, "paths.data", data.as_ref().map(path_value));
            push(&mut f, "paths.out", out.as_ref().map(path_value));
            push(&mut f, "fit.scheme", scheme);
            push(&mut f, "solver.folds", folds.map(|v| v as i64));
            push(&mut f, "solver.grid_size", grid_size.map(|v| v as i64));
            push(&mut f, "solver.min_ratio", min_ratio);
            push(&mut f, "fit.split_communities", split_communities.map(|v| v as i64));
            let cfg = resolve(&common, None, f)?;
            commands::fit(&cfg)
        }
        Command::Cpm { common, data, out, alpha } => {
            let mut f = Vec::new();
            push(&mut f, "paths.data", data.as_ref().map(path_value));
            push(&mut f, "paths.out", out.as_ref().map(path_value));
            push(&mut f, "cpm.alpha", alpha);
            let cfg = resolve(&common, None, f)?;
            commands::cpm(&cfg)
        }
        Command::Evaluate { common, fit, data, out } => {
            let mut f = Vec::new();
            push(&mut f, "paths.fit", fit.as_ref().map(path_value));
            push(&mut f, "paths.data", data.as_ref().map(path_value));
            push(&mut f, "paths.out", out.as_ref().map(path_value));
            let cfg = resolve(&common, None, f)?;
            commands::evaluate(&cfg)
        }
        Command::Sweep { common, preset, out } => {
            let mut f = Vec::new();
            push(&mut f, "paths.out", out.as_ref().map(path_value));
            let cfg = resolve(&common, preset.as_deref(), f)?;
            commands::sweep(&cfg)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<ConfigError>()) {
        return 2;
    }
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<netcov_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        4
    } else {
        3
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
