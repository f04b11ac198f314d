//! Command-line front end for `gridsync`: TOML configs in, CSV trajectories
//! and JSON reports out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::{CommandName, Overrides, RunConfig, ScenarioSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gridsync::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(path: &str, reason: &str) -> Self {
        Self::Config(format!("`{path}`: {reason}"))
    }

    /// 0 success, 1 I/O, 2 configuration, 3 numerical divergence, 4 infeasible analysis.
    pub fn exit_code(&self) -> i32 {
        use gridsync::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } => 1,
            Self::Core(e) => match e.root() {
                E::Diverged { .. } | E::IllDefinedAngle | E::IntervalExit { .. } => 3,
                E::Infeasible { .. } => 4,
                E::InvalidParameter { .. }
                | E::UnknownScenario(_)
                | E::NotEquilibrium { .. }
                | E::Domain { .. }
                | E::TransferInfeasible { .. } => 2,
                E::Labeled { .. } => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gridsync", version, about = "Simulate and analyse grid-synchronizing PLLs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for Monte-Carlo sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: `out`).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Integrator step, s.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Integration horizon, s.
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one closed loop and write `trajectory.csv`.
    Simulate { config: PathBuf },
    /// Simulate a grid of initial conditions and classify their limits.
    Portrait { config: PathBuf },
    /// Region-of-attraction estimate and Monte-Carlo validation.
    Roa { config: PathBuf },
    /// Ultimate bound under bounded RoCoF.
    Bound {
        config: Option<PathBuf>,
        /// Also simulate the scenario and compare against the bound.
        #[arg(long)]
        empirical: bool,
    },
    /// Run a builtin scenario, optionally modified by a config file.
    Scenario {
        name: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check a config file without running anything.
    ValidateConfig {
        config: PathBuf,
        /// Command to validate for when the file has no `command` key.
        #[arg(long, value_parser = parse_command)]
        command: Option<CommandName>,
    },
}

fn parse_command(s: &str) -> Result<CommandName, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown command `{s}`"))
}

fn load(path: &std::path::Path, cmd: CommandName) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(path)?;
    cfg.expect_command(cmd)?;
    Ok(cfg)
}

/// Runs one invocation and returns the line printed on success.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    let ov = Overrides {
        seed: cli.seed,
        dt: cli.dt,
        t_end: cli.t_end,
    };
    let out_dir = |cfg: Option<&RunConfig>| {
        cli.out_dir
            .clone()
            .or_else(|| cfg.and_then(|c| c.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"))
    };
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = load(config, CommandName::Simulate)?;
            let out = out_dir(Some(&cfg));
            let s = commands::simulate(&cfg, &ov, &out)?;
            Ok(format!("simulate: {} rows written to {}", s.rows, out.display()))
        }
        Command::Portrait { config } => {
            let cfg = load(config, CommandName::Portrait)?;
            let out = out_dir(Some(&cfg));
            let s = commands::portrait(&cfg, &ov, &out)?;
            Ok(format!(
                "portrait: {} initial conditions, summary in {}",
                s.points.len(),
                out.display()
            ))
        }
        Command::Roa { config } => {
            let cfg = load(config, CommandName::Roa)?;
            let out = out_dir(Some(&cfg));
            let r = commands::roa(&cfg, &ov, &out)?;
            Ok(match r.validation {
                Some(v) => format!("roa: {}/{} samples converged", v.converged, v.samples),
                None => "roa: estimate only".to_string(),
            })
        }
        Command::Bound { config, empirical } => {
            let cfg = match config {
                Some(p) => load(p, CommandName::Bound)?,
                None => RunConfig::default(),
            };
            let out = out_dir(Some(&cfg));
            let r = commands::bound(&cfg, &ov, *empirical, &out)?;
            let mut line = format!("bound: derived-khalil {:.6e}", r.derived_khalil.bound);
            if let Some(e) = &r.empirical {
                line.push_str(if e.sound {
                    ", empirical check passed"
                } else {
                    ", empirical check FAILED"
                });
            }
            Ok(line)
        }
        Command::Scenario { name, config } => {
            let cfg = match config {
                Some(p) => Some(load(p, CommandName::Scenario)?),
                None => None,
            };
            let mut spec = match (&cfg, name) {
                (Some(c), _) if c.scenario.is_some() => c.scenario.clone().unwrap(),
                (_, Some(n)) => ScenarioSpec::named(n),
                _ => {
                    return Err(CliError::config(
                        "scenario",
                        "give a scenario name or a [scenario] table",
                    ))
                }
            };
            if let Some(n) = name {
                spec.name = n.clone();
            }
            let out = out_dir(cfg.as_ref());
            let r = commands::scenario(&spec, &ov, &out)?;
            Ok(format!(
                "scenario `{}`: {} runs written to {}",
                r.scenario,
                r.summaries.len(),
                out.display()
            ))
        }
        Command::ValidateConfig { config, command } => {
            let cfg = RunConfig::load(config)?;
            let cmd = match (command, cfg.command) {
                (Some(c), _) => {
                    cfg.expect_command(*c)?;
                    *c
                }
                (None, Some(c)) => c,
                (None, None) => {
                    return Err(CliError::config(
                        "command",
                        "missing; add it to the file or pass --command",
                    ))
                }
            };
            commands::validate(&cfg, cmd, &ov)?;
            Ok(format!("{}: valid `{cmd}` config", config.display()))
        }
    }
}
