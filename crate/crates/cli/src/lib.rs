//! Command-line experiments for centralizers of expansive flows and `R^d`-actions.
//!
//! `centralizer <subcommand> --config <path> [--out <path>] [--seed N] [--format json|csv]`
//!
//! Configs are strict JSON. Exit status is 0 on success, 2 on a validation error and
//! 3 on a numerical failure; nothing is written unless the run succeeds.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand as ClapSubcommand};

use config::Envelope;
use error::{CliError, CliResult};
use output::{Format, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ClapSubcommand)]
pub enum Subcommand {
    /// Singularities, spectra, non-resonance and Kopell order of a vector field.
    Spectra,
    /// Commutant of a matrix, or a seeded random suite.
    Commutant,
    /// Time change relating two commuting flows.
    Reparam,
    /// Commuting generators: homogeneity, periods and change of basis.
    Action,
    /// Suspension of a Z^d-action: normalization, chain metric, expansiveness transfer.
    Suspend,
    /// Expansiveness falsifier on sampled orbit pairs.
    Probe,
    /// Spectral report of the Lorenz singularities.
    LorenzDemo,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Spectra => "spectra",
            Subcommand::Commutant => "commutant",
            Subcommand::Reparam => "reparam",
            Subcommand::Action => "action",
            Subcommand::Suspend => "suspend",
            Subcommand::Probe => "probe",
            Subcommand::LorenzDemo => "lorenz-demo",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "centralizer", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Subcommand,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

/// Resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub seed: u64,
    pub format: Format,
    pub out: Option<PathBuf>,
}

fn settings<C: Envelope>(cfg: &C, cli: &Cli) -> RunSettings {
    let out_cfg = cfg.output();
    RunSettings {
        seed: cli.seed.or(cfg.seed()).unwrap_or(0),
        format: cli.format.or(out_cfg.and_then(|o| o.format)).unwrap_or_default(),
        out: cli.out.clone().or_else(|| out_cfg.and_then(|o| o.path.as_ref()).map(PathBuf::from)),
    }
}

fn prepare<C: Envelope + serde::de::DeserializeOwned>(text: &str, cli: &Cli) -> CliResult<(C, RunSettings)> {
    let cfg: C = config::parse(text, cli.command.name())?;
    let s = settings(&cfg, cli);
    Ok((cfg, s))
}

/// Runs one subcommand on the config text and returns the report with its settings.
pub fn execute(cli: &Cli, text: &str) -> CliResult<(Report, RunSettings)> {
    match cli.command {
        Subcommand::Spectra => {
            let (c, s) = prepare(text, cli)?;
            Ok((commands::spectra(&c)?, s))
        }
        Subcommand::Commutant => {
            let (c, s): (config::CommutantConfig, _) = prepare(text, cli)?;
            Ok((commands::commutant(&c, s.seed)?, s))
        }
        Subcommand::Reparam => {
            let (c, s) = prepare(text, cli)?;
            Ok((commands::reparam(&c)?, s))
        }
        Subcommand::Action => {
            let (c, s) = prepare(text, cli)?;
            Ok((commands::action(&c)?, s))
        }
        Subcommand::Suspend => {
            let (c, s): (config::SuspendConfig, _) = prepare(text, cli)?;
            Ok((commands::suspend(&c, s.seed)?, s))
        }
        Subcommand::Probe => {
            let (c, s): (config::ProbeConfig, _) = prepare(text, cli)?;
            Ok((commands::probe_cmd(&c, s.seed)?, s))
        }
        Subcommand::LorenzDemo => {
            let (c, s) = prepare(text, cli)?;
            Ok((commands::lorenz_demo(&c)?, s))
        }
    }
}

fn read_config(path: Option<&Path>) -> CliResult<String> {
    let path = path.ok_or_else(|| CliError::validation("--config <path> is required"))?;
    std::fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

/// Full run: read, compute, render, write. Returns the exit status.
pub fn run(cli: &Cli) -> i32 {
    let result = read_config(cli.config.as_deref()).and_then(|text| {
        let (report, s) = execute(cli, &text)?;
        let bytes = report.render(s.format)?;
        output::emit(&bytes, s.out.as_deref())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("centralizer {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
