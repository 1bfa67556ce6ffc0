//! Command-line harness around `ehmm-core`: data simulation, multi-chain runs with
//! per-chain trace files, ACT reports and the combined comparison table.
//!
//! Output layout under the configured `out` directory:
//!
//! ```text
//! observations.csv  latent.csv  observations.json     (simulate)
//! runs/<sampler>-L<pool>-s<scaling>/chain-<c>.{csv,json}
//! runs/<...>/act.csv  act.txt  posterior.csv            (act)
//! report.csv  report.txt  report_long.csv               (report)
//! ```

pub mod config;
pub mod data;
pub mod report;
pub mod trace;

use std::fs;
use std::path::{Path, PathBuf};

use ehmm_core::{Counters, SamplerKind};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::trace::TraceMeta;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input files.
    #[error("{0}")]
    Validation(String),
    /// Failure while running or writing output.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn run_dir(config: &RunConfig) -> PathBuf {
    config.out.join("runs").join(config.run_name())
}

pub fn default_data_path(config: &RunConfig) -> PathBuf {
    config.out.join(data::OBSERVATIONS_FILE)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub kind: SamplerKind,
    pub dir: PathBuf,
    pub chains: Vec<TraceMeta>,
    pub counters: Counters,
}

impl RunSummary {
    pub fn time_per_iteration(&self) -> f64 {
        self.chains
            .iter()
            .map(|m| m.time_per_iteration)
            .sum::<f64>()
            / self.chains.len() as f64
    }

    /// Forward/backward passes per parameter proposal.
    pub fn passes_per_iteration(&self) -> f64 {
        if self.counters.param_proposals == 0 {
            0.0
        } else {
            self.counters.full_passes / self.counters.param_proposals as f64
        }
    }

    pub fn line(&self) -> String {
        let iterations: usize = self.chains.iter().map(|m| m.iterations).sum();
        format!(
            "{}: {} chains, {} iterations, acceptance {}, {:.4} ms/iter, {:.3} passes/iter -> {}",
            self.kind,
            self.chains.len(),
            iterations,
            report::acceptance_label(self.kind, &self.counters),
            self.time_per_iteration() * 1e3,
            self.passes_per_iteration(),
            self.dir.display()
        )
    }
}

/// Runs all chains of `config` on the observations in `data`, at most `workers` at a
/// time (0 for one per core).
pub fn cmd_run(config: &RunConfig, data: &Path) -> Result<RunSummary, CliError> {
    config.validate()?;
    let z = data::read_observations(data)?;
    config
        .sampler_config()
        .validate(z.len())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let dir = run_dir(config);
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let chains = pool.install(|| {
        (0..config.chains)
            .into_par_iter()
            .map(|c| trace::run_chain_to_files(config, c, &z, data, &dir))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let counters = report::sum_counters(chains.iter().map(|m| &m.counters));
    Ok(RunSummary {
        kind: config.sampler,
        dir,
        chains,
        counters,
    })
}

pub fn cmd_simulate(config: &RunConfig) -> Result<data::SimulatedPaths, CliError> {
    config.validate()?;
    data::write_simulation(config, &config.out)
}
