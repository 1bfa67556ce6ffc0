//! MCMC samplers for `(theta, x)`.
//!
//! Four samplers share one state type and one chain driver:
//!
//! - [`SamplerKind::Metropolis`]: single-site Metropolis over the latent states, then
//!   a random-walk update of `theta` given the sequence.
//! - [`SamplerKind::SingleSequence`]: embedded-HMM sequence updates alternating with
//!   random-walk updates of `theta` given the sequence.
//! - [`SamplerKind::Ensemble`]: updates of `theta` accepted on the ensemble density
//!   over all pool-composed sequences, reusing one pool for `M` proposals.
//! - [`SamplerKind::Staged`]: ensemble updates screened by a first stage that only
//!   looks at the observations from `n1` on.
//!
//! A chain is a sequence of *steps*, one per parameter proposal. The trace records the
//! parameters after every `thinning`-th step; one recorded step is one iteration.

mod chain;
mod ensemble;
mod metropolis;
mod proposal;
mod single;
mod staged;

pub use chain::{run_chain, ChainTrace};
pub use ensemble::ensemble_iter;
pub use metropolis::{baseline_metropolis_sweep, baseline_site_sweep, site_proposal_sd};
pub use proposal::{metropolis_param_update, propose_params};
pub use single::single_sequence_iter;
pub use staged::{
    first_stage_log_ratio, second_stage_log_ratio, staged_decision, staged_iter, StagedOutcome,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::kernel::EnsembleLogDensity;
use crate::model::{LatentSequence, ObservedSeries, ParamVec, Ricker};
use crate::pool::{initial_sequence, PoolParams, PoolSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Metropolis,
    SingleSeq,
    Ensemble,
    Staged,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::Metropolis,
        SamplerKind::SingleSeq,
        SamplerKind::Ensemble,
        SamplerKind::Staged,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Metropolis => "metropolis",
            SamplerKind::SingleSeq => "single-seq",
            SamplerKind::Ensemble => "ensemble",
            SamplerKind::Staged => "staged",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sampler kind '{s}'")))
    }
}

/// Independent Normal random-walk proposals with standard deviations
/// `scaling * base_sd`, componentwise over `(log r, log sigma, log phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalConfig {
    pub base_sd: [f64; 3],
    pub scaling: f64,
}

impl ProposalConfig {
    /// Marginal posterior standard deviations of the log parameters.
    pub const BASE_SD: [f64; 3] = [0.14, 0.36, 0.065];

    pub fn with_scaling(scaling: f64) -> Self {
        Self {
            base_sd: Self::BASE_SD,
            scaling,
        }
    }

    pub fn sd(&self) -> [f64; 3] {
        self.base_sd.map(|s| s * self.scaling)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scaling >= 0.0 && self.scaling.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "proposal scaling must be non-negative, got {}",
                self.scaling
            )));
        }
        if self.base_sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(
                "base proposal sds must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Tuning of one sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    /// Pool states per time (`L`).
    pub pool_size: usize,
    pub proposal: ProposalConfig,
    /// Parameter updates per pool (ensemble, staged) or per sequence update
    /// (single-sequence).
    pub updates_per_pool: usize,
    /// First time (1-based) used by the staged first stage.
    pub n1: usize,
    /// Record every `thinning`-th parameter update.
    pub thinning: usize,
    pub pool: PoolParams,
}

impl SamplerConfig {
    /// Tuned settings for each sampler on the Ricker problem.
    pub fn defaults(kind: SamplerKind) -> Self {
        let (pool_size, scaling, updates, thinning) = match kind {
            SamplerKind::Metropolis => (1, 0.25, 1, 1),
            SamplerKind::SingleSeq => (40, 0.25, 10, 10),
            SamplerKind::Ensemble => (120, 1.4, 5, 1),
            SamplerKind::Staged => (120, 1.8, 10, 1),
        };
        Self {
            kind,
            pool_size,
            proposal: ProposalConfig::with_scaling(scaling),
            updates_per_pool: updates,
            n1: 81,
            thinning,
            pool: PoolParams::default(),
        }
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        self.proposal.validate()?;
        self.pool.validate()?;
        if self.pool_size == 0 {
            return Err(Error::InvalidConfig("pool size must be at least 1".into()));
        }
        if self.updates_per_pool == 0 {
            return Err(Error::InvalidConfig(
                "updates per pool must be at least 1".into(),
            ));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        if self.kind == SamplerKind::Staged && !(1..=horizon).contains(&self.n1) {
            return Err(Error::InvalidConfig(format!(
                "n1 = {} outside 1..={horizon}",
                self.n1
            )));
        }
        Ok(())
    }
}

/// Acceptance and work counters. `full_passes` counts forward/backward passes, with a
/// pass over part of the sequence counted fractionally.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub full_passes: f64,
    pub pool_builds: u64,
    pub seq_updates: u64,
    pub param_proposals: u64,
    pub param_accepts: u64,
    /// Proposals outside the prior support, rejected before any lattice work.
    pub off_support: u64,
    pub stage1_proposals: u64,
    pub stage1_accepts: u64,
    pub stage2_proposals: u64,
    pub stage2_accepts: u64,
    pub site_proposals: u64,
    pub site_accepts: u64,
}

fn rate(num: u64, den: u64) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

impl Counters {
    pub fn param_acceptance(&self) -> f64 {
        rate(self.param_accepts, self.param_proposals)
    }

    /// Stage-1 acceptance among proposals inside the prior support.
    pub fn stage1_acceptance(&self) -> f64 {
        rate(self.stage1_accepts, self.stage1_proposals)
    }

    pub fn stage2_acceptance(&self) -> f64 {
        rate(self.stage2_accepts, self.stage2_proposals)
    }

    pub fn site_acceptance(&self) -> f64 {
        rate(self.site_accepts, self.site_proposals)
    }
}

/// Current point of a chain plus the cached ensemble density of the last pool.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub theta: ParamVec,
    pub seq: LatentSequence,
    /// Ensemble density at `(theta, pool)`.
    pub cached_density: Option<EnsembleLogDensity>,
    pub pool: Option<PoolSet>,
    pub counters: Counters,
}

impl ChainState {
    pub fn new(theta: ParamVec, seq: LatentSequence) -> Self {
        Self {
            theta,
            seq,
            cached_density: None,
            pool: None,
            counters: Counters::default(),
        }
    }

    /// Parameters at their prior means, latent states drawn independently from the
    /// pool distributions.
    pub fn initial<R: Rng + ?Sized>(pp: &PoolParams, z: &ObservedSeries, rng: &mut R) -> Self {
        Self::new(Ricker::prior_mean(), initial_sequence(pp, z, rng))
    }
}

/// Outcome of one parameter proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub theta: ParamVec,
    pub accepted: bool,
    /// First-stage decision for staged proposals.
    pub stage1: Option<bool>,
}

/// `ln u < log_ratio` for `u ~ Uniform(0, 1)`.
#[inline]
pub(crate) fn accept<R: Rng + ?Sized>(rng: &mut R, log_ratio: f64) -> bool {
    if log_ratio >= 0.0 {
        // still consume a uniform so the stream does not depend on the branch
        let _: f64 = rng.random();
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < log_ratio
}
