//! `simulate`, `check` and `oracle`, with their exit-status contract.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use polyflow_core::diagnostics::{nikolskii_estimate, CSV_HEADER};
use polyflow_core::grids::field::snapshot_header;

use crate::checks::{full_suite, CheckResult};
use crate::config::{ConfigError, RunConfig};
use crate::oracles;
use crate::scenario::{simulate, BuildError, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Config = 2,
    Solver = 3,
    Invariant = 4,
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] polyflow_core::Error),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("{} invariant(s) failed", .0.len())]
    Invariant(Vec<String>),
}

impl From<BuildError> for CommandError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Config(c) => Self::Config(c),
            BuildError::Solver(s) => Self::Solver(s),
        }
    }
}

impl CommandError {
    pub fn status(&self) -> ExitStatus {
        match self {
            Self::Config(_) => ExitStatus::Config,
            Self::Solver(polyflow_core::Error::Parameter(_)) => ExitStatus::Config,
            Self::Solver(_) | Self::Output { .. } => ExitStatus::Solver,
            Self::Invariant(_) => ExitStatus::Invariant,
        }
    }
}

fn output_error(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Output { path: path.to_path_buf(), source }
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CommandError + '_ {
    move |e| CommandError::Output { path: path.to_path_buf(), source: e.into() }
}

/// Diagnostics CSV for `config`, written to `sink`.
pub fn write_diagnostics<W: Write>(config: &RunConfig, sink: W) -> Result<(), CommandError> {
    let scenario = Scenario::build(config)?;
    let label = config.output.csv_path.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(CSV_HEADER).map_err(csv_error(&label))?;
    let every = config.output.snapshot_every;
    let dir = config.output.snapshot_dir.clone().unwrap_or_else(|| PathBuf::from("snapshots"));
    if every > 0 {
        std::fs::create_dir_all(&dir).map_err(output_error(&dir))?;
    }
    let grid = scenario.problem.grid.clone();
    let cfg = scenario.problem.config.clone();
    let cells: Vec<usize> = (0..grid.ncells()).collect();
    let mut failure: Option<CommandError> = None;
    let outcome = simulate(&scenario, |state, rec| {
        let mut write = || -> Result<(), CommandError> {
            writer.write_record(rec.to_row()).map_err(csv_error(&label))?;
            if every > 0 && state.step % every == 0 {
                let path = dir.join(format!("psi_{:06}.csv", state.step));
                let mut w = csv::Writer::from_path(&path).map_err(csv_error(&path))?;
                w.write_record(snapshot_header(cfg.k())).map_err(csv_error(&path))?;
                for row in state.psi.snapshot(&grid, &cfg, &cells) {
                    let mut rec: Vec<String> = vec![row.ix.to_string(), row.iy.to_string()];
                    rec.extend(row.ir.iter().map(|v| v.to_string()));
                    rec.extend(row.itheta.iter().map(|v| v.to_string()));
                    rec.push(polyflow_core::diagnostics::format_f64(row.value));
                    w.write_record(&rec).map_err(csv_error(&path))?;
                }
                w.flush().map_err(output_error(&path))?;
            }
            Ok(())
        };
        write().map_err(|e| {
            let msg = e.to_string();
            failure = Some(e);
            polyflow_core::Error::Numerical(msg)
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let outcome = outcome?;
    writer.flush().map_err(output_error(&label))?;
    if config.output.store_trajectory && outcome.trajectory.len() >= 3 {
        let g = nikolskii_estimate(&grid, &outcome.trajectory, scenario.problem.dt(), 0.25)?;
        log::info!("Nikol'skii estimate (γ = 1/4): {g:e}");
    }
    let last = outcome.records.last().expect("initial record");
    log::info!(
        "finished {} steps: kinetic energy {:e}, relative entropy {:e}, energy ledger {:e} of {:e}",
        last.step,
        last.kinetic_energy,
        last.relative_entropy,
        last.energy_lhs,
        last.energy_rhs
    );
    Ok(())
}

pub fn command_simulate(config: &RunConfig) -> Result<(), CommandError> {
    log::info!("configuration:\n{}", config.to_toml());
    match &config.output.csv_path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(output_error(parent))?;
            }
            let file = File::create(path).map_err(output_error(path))?;
            write_diagnostics(config, file)
        }
        None => write_diagnostics(config, std::io::stdout().lock()),
    }
}

pub fn command_check(config: &RunConfig, seed: u64) -> Result<Vec<CheckResult>, CommandError> {
    let results = full_suite(config, seed)?;
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.to_string()).collect();
    if failed.is_empty() {
        Ok(results)
    } else {
        Err(CommandError::Invariant(failed))
    }
}

pub fn command_oracle(name: &str) -> Result<(), CommandError> {
    let report = oracles::run_named(name).ok_or_else(|| {
        ConfigError::Key {
            key: "oracle".into(),
            line: None,
            message: format!("unknown oracle `{name}`; known: {}", oracles::NAMES.join(", ")),
        }
    })??;
    print!("{}", report.render());
    if report.passed {
        Ok(())
    } else {
        Err(CommandError::Invariant(vec![format!("FAIL {} {}={:e}", report.name, report.metric, report.value)]))
    }
}
