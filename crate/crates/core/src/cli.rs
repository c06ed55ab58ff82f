//! Command-line front end.
//!
//! Exit codes: 0 success, 1 flags raised under `--strict`, 2 configuration or
//! validation error, 3 I/O error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::dataset::Dataset;
use crate::dgp::{self, DgpSpec};
use crate::error::{Error, Result};
use crate::estimation::{self, FittedModel};
use crate::pipeline::{self, Overrides, RunConfig};
use crate::report::{self, AuditReport};
use crate::rng::derive_seed;
use crate::scenarios;

pub const SEED_ENV: &str = "FAIRAUDIT_SEED";
pub const OUT_DIR_ENV: &str = "FAIRAUDIT_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "fairaudit", version, about = "Audit probabilistic decision systems for discrimination risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a dataset from a DGP spec and write it as CSV.
    Gen {
        #[arg(long)]
        dgp: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the configured primary model and write it as JSON.
    Fit {
        #[arg(long)]
        config: PathBuf,
        /// Training data; sampled from the DGP when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the staged audit described by a config file.
    Audit {
        #[arg(long)]
        config: PathBuf,
        /// Audit data; sampled from the DGP when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Pre-fitted primary model; fitted from the config when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Exit with status 1 when the classification is not clean.
        #[arg(long)]
        strict: bool,
    },
    /// Built-in scenarios.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
    /// Report utilities.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Debug, Subcommand)]
enum ScenarioAction {
    /// List scenarios and their expected classifications.
    List,
    /// Run a scenario end to end.
    Run {
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Write a scenario's DGP spec and run config as TOML files.
    Export {
        name: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum ReportAction {
    /// Render a JSON report as markdown on stdout.
    Render { file: PathBuf },
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Error::Config(format!("{SEED_ENV}='{v}' is not a u64"))),
        Err(_) => Ok(None),
    }
}

fn env_out_dir() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

/// Flag beats environment beats config file.
fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<Option<u64>> {
    Ok(flag.or(env_seed()?).or(config))
}

fn load_run(config_path: &Path) -> Result<(RunConfig, DgpSpec)> {
    let config = RunConfig::load(config_path)?;
    let spec = DgpSpec::load(&config.dgp_path(config_path))?;
    spec.ensure_valid()?;
    Ok((config, spec))
}

fn emit(report: &AuditReport, out_dir: Option<PathBuf>, strict: bool) -> Result<i32> {
    match out_dir {
        Some(dir) => {
            report.write_to(&dir)?;
            println!("{} ({})", report.finding.classification, dir.join("report.json").display());
        }
        None => print!("{}", report.to_json()),
    }
    Ok(if strict && report.finding.classification.is_flag() { 1 } else { 0 })
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Gen { dgp: path, n, seed, out } => {
            let spec = DgpSpec::load(&path)?;
            let seed = resolve_seed(seed, None)?.unwrap_or(0);
            let data = dgp::sample(&spec, n, seed)?;
            data.write_csv(&out)?;
            println!("wrote {} rows to {}", data.n(), out.display());
            Ok(0)
        }
        Command::Fit { config: path, data, out } => {
            let (mut config, spec) = load_run(&path)?;
            if let Some(s) = env_seed()? {
                config.seed = s;
            }
            config.check()?;
            let train = match data {
                Some(p) => Dataset::read_csv(&p, &spec)?,
                None => dgp::sample(&spec, config.data.n_train, derive_seed(config.seed, "train"))?,
            };
            let model = estimation::fit(&train, &config.model.spec, &config.model.optimizer)?;
            std::fs::write(&out, model.to_json()).map_err(|e| Error::io(&out, e))?;
            println!(
                "fitted {} on {} rows (converged: {}) -> {}",
                config.model.name,
                train.n(),
                model.convergence.converged,
                out.display()
            );
            Ok(0)
        }
        Command::Audit { config: path, data, model, seed, out_dir, strict } => {
            let (mut config, spec) = load_run(&path)?;
            config.seed = resolve_seed(seed, Some(config.seed))?.unwrap_or(config.seed);
            let overrides = Overrides {
                audit_data: data.map(|p| Dataset::read_csv(&p, &spec)).transpose()?,
                primary_model: match model {
                    Some(p) => {
                        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                        Some(FittedModel::from_json(&text)?)
                    }
                    None => None,
                },
            };
            let report = pipeline::execute_with(&spec, &config, overrides)?;
            let out_dir = out_dir.or_else(env_out_dir).or_else(|| {
                config.output.dir.as_ref().map(|d| match path.parent() {
                    Some(p) if d.is_relative() => p.join(d),
                    _ => d.clone(),
                })
            });
            emit(&report, out_dir, strict)
        }
        Command::Scenario { action } => match action {
            ScenarioAction::List => {
                for s in scenarios::all() {
                    println!("{:<16} {:<26} {}", s.name, s.expected.as_str(), s.summary);
                }
                Ok(0)
            }
            ScenarioAction::Run { name, seed, out_dir, strict } => {
                let scenario = scenarios::get(&name)?;
                let report = scenario.run(resolve_seed(seed, None)?)?;
                emit(&report, out_dir.or_else(env_out_dir), strict)
            }
            ScenarioAction::Export { name, out_dir } => {
                let config = scenarios::get(&name)?.export(&out_dir)?;
                println!("{}", config.display());
                Ok(0)
            }
        },
        Command::Report { action: ReportAction::Render { file } } => {
            print!("{}", report::render_markdown(&AuditReport::load(&file)?));
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_and_usage_codes() {
        assert_eq!(run(["fairaudit", "--help"]), 0);
        assert_eq!(run(["fairaudit", "frobnicate"]), 2);
    }

    #[test]
    fn missing_config_is_config_error() {
        assert_eq!(run(["fairaudit", "audit", "--config", "/definitely/not/here.toml"]), 2);
    }
}
