//! Experiment configuration. Values are resolved as flags over file over defaults,
//! where the defaults for pool size, scaling, updates per pool and thinning depend
//! on the sampler kind.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use ehmm_core::{ParamVec, PoolParams, ProposalConfig, SamplerConfig, SamplerKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Fully resolved configuration of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sampler: SamplerKind,
    /// `(r, sigma, phi)` used to simulate data.
    pub theta_true: [f64; 3],
    pub n: usize,
    /// First observed time, 1-based.
    pub obs_start: usize,
    pub pool_size: usize,
    pub scaling: f64,
    pub updates_per_pool: usize,
    /// First time of the staged first stage, 1-based.
    pub n1: usize,
    pub iterations: usize,
    pub chains: usize,
    /// Base seed; chain `c` uses `seed + c` unless `seeds` is given.
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub pool: PoolParams,
    pub thinning: usize,
    pub burn_in: f64,
    /// Chains run at once; 0 uses one worker per core.
    pub workers: usize,
    pub out: PathBuf,
}

/// A partial configuration, as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigLayer {
    pub sampler: Option<SamplerKind>,
    pub theta_true: Option<[f64; 3]>,
    pub n: Option<usize>,
    pub obs_start: Option<usize>,
    pub pool_size: Option<usize>,
    pub scaling: Option<f64>,
    pub updates_per_pool: Option<usize>,
    pub n1: Option<usize>,
    pub iterations: Option<usize>,
    pub chains: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub pool: Option<PoolParams>,
    pub thinning: Option<usize>,
    pub burn_in: Option<f64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ConfigLayer {
    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            sampler: top.sampler.or(self.sampler),
            theta_true: top.theta_true.or(self.theta_true),
            n: top.n.or(self.n),
            obs_start: top.obs_start.or(self.obs_start),
            pool_size: top.pool_size.or(self.pool_size),
            scaling: top.scaling.or(self.scaling),
            updates_per_pool: top.updates_per_pool.or(self.updates_per_pool),
            n1: top.n1.or(self.n1),
            iterations: top.iterations.or(self.iterations),
            chains: top.chains.or(self.chains),
            seed: top.seed.or(self.seed),
            seeds: top.seeds.or(self.seeds),
            pool: top.pool.or(self.pool),
            thinning: top.thinning.or(self.thinning),
            burn_in: top.burn_in.or(self.burn_in),
            workers: top.workers.or(self.workers),
            out: top.out.or(self.out),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("reading config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("parsing config {}: {e}", path.display())))
    }
}

impl From<&RunConfig> for ConfigLayer {
    fn from(c: &RunConfig) -> Self {
        ConfigLayer {
            sampler: Some(c.sampler),
            theta_true: Some(c.theta_true),
            n: Some(c.n),
            obs_start: Some(c.obs_start),
            pool_size: Some(c.pool_size),
            scaling: Some(c.scaling),
            updates_per_pool: Some(c.updates_per_pool),
            n1: Some(c.n1),
            iterations: Some(c.iterations),
            chains: Some(c.chains),
            seed: Some(c.seed),
            seeds: c.seeds.clone(),
            pool: Some(c.pool),
            thinning: Some(c.thinning),
            burn_in: Some(c.burn_in),
            workers: Some(c.workers),
            out: Some(c.out.clone()),
        }
    }
}

pub const DEFAULT_ITERATIONS: usize = 20_000;
pub const DEFAULT_CHAINS: usize = 5;

impl RunConfig {
    pub fn defaults(sampler: SamplerKind) -> Self {
        let s = SamplerConfig::defaults(sampler);
        RunConfig {
            sampler,
            theta_true: [3.8f64.exp(), 0.15, 2.0],
            n: 100,
            obs_start: 51,
            pool_size: s.pool_size,
            scaling: s.proposal.scaling,
            updates_per_pool: s.updates_per_pool,
            n1: s.n1,
            iterations: DEFAULT_ITERATIONS,
            chains: DEFAULT_CHAINS,
            seed: 1,
            seeds: None,
            pool: s.pool,
            thinning: s.thinning,
            burn_in: 0.1,
            workers: 0,
            out: PathBuf::from("out"),
        }
    }

    /// Defaults for the layer's sampler (ensemble if unset), overlaid by the layer.
    pub fn resolve(layer: ConfigLayer) -> Result<Self, CliError> {
        let d = RunConfig::defaults(layer.sampler.unwrap_or(SamplerKind::Ensemble));
        let c = RunConfig {
            sampler: d.sampler,
            theta_true: layer.theta_true.unwrap_or(d.theta_true),
            n: layer.n.unwrap_or(d.n),
            obs_start: layer.obs_start.unwrap_or(d.obs_start),
            pool_size: layer.pool_size.unwrap_or(d.pool_size),
            scaling: layer.scaling.unwrap_or(d.scaling),
            updates_per_pool: layer.updates_per_pool.unwrap_or(d.updates_per_pool),
            n1: layer.n1.unwrap_or(d.n1),
            iterations: layer.iterations.unwrap_or(d.iterations),
            chains: layer.chains.unwrap_or(d.chains),
            seed: layer.seed.unwrap_or(d.seed),
            seeds: layer.seeds.or(d.seeds),
            pool: layer.pool.unwrap_or(d.pool),
            thinning: layer.thinning.unwrap_or(d.thinning),
            burn_in: layer.burn_in.unwrap_or(d.burn_in),
            workers: layer.workers.unwrap_or(d.workers),
            out: layer.out.unwrap_or(d.out),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Validation(msg));
        let [r, sigma, phi] = self.theta_true;
        if !(r > 0.0
            && sigma > 0.0
            && phi > 0.0
            && r.is_finite()
            && sigma.is_finite()
            && phi.is_finite())
        {
            return bad(format!(
                "theta_true must be positive and finite, got {:?}",
                self.theta_true
            ));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(1..=self.n).contains(&self.obs_start) {
            return bad(format!(
                "obs_start {} outside 1..={}",
                self.obs_start, self.n
            ));
        }
        if self.chains == 0 {
            return bad("chains must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!("burn_in must lie in [0, 1), got {}", self.burn_in));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.chains {
                return bad(format!(
                    "{} seeds given for {} chains",
                    seeds.len(),
                    self.chains
                ));
            }
        }
        let seeds = self.chain_seeds();
        if seeds.iter().collect::<HashSet<_>>().len() != seeds.len() {
            return bad("chain seeds must be distinct".into());
        }
        self.sampler_config()
            .validate(self.n)
            .map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn chain_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.chains as u64)
                .map(|c| self.seed.wrapping_add(c))
                .collect(),
        }
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            kind: self.sampler,
            pool_size: self.pool_size,
            proposal: ProposalConfig::with_scaling(self.scaling),
            updates_per_pool: self.updates_per_pool,
            n1: self.n1,
            thinning: self.thinning,
            pool: self.pool,
        }
    }

    pub fn theta_true(&self) -> ParamVec {
        let [r, sigma, phi] = self.theta_true;
        ParamVec::from_natural(r, sigma, phi)
    }

    /// Directory name of a run, e.g. `ensemble-L120-s1.4`.
    pub fn run_name(&self) -> String {
        format!(
            "{}-L{}-s{}",
            self.sampler.name(),
            self.pool_size,
            self.scaling
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Parses a configuration file and resolves it against the defaults.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let layer: ConfigLayer = serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("parsing config: {e}")))?;
        RunConfig::resolve(layer)
    }
}
