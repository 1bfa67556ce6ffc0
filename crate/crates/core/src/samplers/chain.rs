use std::time::Instant;

use rand::Rng;

use super::ensemble::ensemble_block;
use super::single::single_sequence_block;
use super::staged::staged_block;
use super::{baseline_metropolis_sweep, ChainState, Counters, SamplerConfig, SamplerKind, Step};
use crate::error::{Error, Result};
use crate::model::{ObservedSeries, ParamVec, StateSpaceModel};
use crate::pool::PoolSource;

/// Recorded parameters of one chain with its run metadata.
#[derive(Debug, Clone)]
pub struct ChainTrace {
    pub config: SamplerConfig,
    pub initial_theta: ParamVec,
    /// Parameters after each recorded step.
    pub samples: Vec<ParamVec>,
    /// Whether any proposal was accepted since the previous record.
    pub accepted: Vec<bool>,
    /// Whether any proposal passed the first stage since the previous record
    /// (staged sampler only).
    pub stage1: Vec<Option<bool>>,
    pub counters: Counters,
    pub elapsed_seconds: f64,
}

impl ChainTrace {
    pub fn kind(&self) -> SamplerKind {
        self.config.kind
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Wall-clock seconds per recorded step; zero for an empty trace.
    pub fn time_per_iteration(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.elapsed_seconds / self.samples.len() as f64
        }
    }

    /// One parameter's recorded values on log scale (0 = log r, 1 = log sigma,
    /// 2 = log phi).
    pub fn log_series(&self, param: usize) -> Vec<f64> {
        self.samples.iter().map(|p| p.to_array()[param]).collect()
    }
}

/// Runs `iterations` recorded steps of the configured sampler from `init`.
///
/// Every step is one parameter proposal. The ensemble and staged samplers build a new
/// pool every `updates_per_pool` steps; the single-sequence sampler updates the
/// sequence every `updates_per_pool` steps; the baseline sampler sweeps the latent
/// sites before every step. Parameters are recorded every `thinning` steps.
pub fn run_chain<M, P, R>(
    model: &M,
    pools: &P,
    init: ChainState,
    z: &ObservedSeries,
    cfg: &SamplerConfig,
    iterations: usize,
    rng: &mut R,
) -> Result<(ChainTrace, ChainState)>
where
    M: StateSpaceModel + ?Sized,
    P: PoolSource + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate(z.len())?;
    if init.seq.len() != z.len() {
        return Err(Error::InvalidInput(format!(
            "initial sequence has length {}, observations {}",
            init.seq.len(),
            z.len()
        )));
    }
    if !init.theta.is_finite() || init.seq.m.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidInput("initial state must be finite".into()));
    }

    let mut state = init;
    let mut trace = ChainTrace {
        config: *cfg,
        initial_theta: state.theta,
        samples: Vec::with_capacity(iterations),
        accepted: Vec::with_capacity(iterations),
        stage1: Vec::with_capacity(iterations),
        counters: state.counters,
        elapsed_seconds: 0.0,
    };

    let total = iterations * cfg.thinning;
    let mut done = 0;
    let mut any_accept = false;
    let mut any_stage1: Option<bool> = None;
    let start = Instant::now();
    while done < total {
        let block = match cfg.kind {
            SamplerKind::Metropolis => 1,
            _ => cfg.updates_per_pool.min(total - done),
        };
        let steps: Vec<Step> = match cfg.kind {
            SamplerKind::Metropolis => vec![baseline_metropolis_sweep(
                rng,
                model,
                &mut state,
                z,
                &cfg.proposal,
            )],
            SamplerKind::SingleSeq => {
                single_sequence_block(rng, model, pools, &mut state, z, cfg, block)
            }
            SamplerKind::Ensemble => ensemble_block(rng, model, pools, &mut state, z, cfg, block),
            SamplerKind::Staged => staged_block(rng, model, pools, &mut state, z, cfg, block),
        };
        for step in steps {
            done += 1;
            any_accept |= step.accepted;
            if let Some(s) = step.stage1 {
                any_stage1 = Some(any_stage1.unwrap_or(false) | s);
            }
            if done % cfg.thinning == 0 {
                trace.samples.push(step.theta);
                trace.accepted.push(any_accept);
                trace.stage1.push(any_stage1);
                any_accept = false;
                any_stage1 = None;
            }
        }
    }
    trace.elapsed_seconds = start.elapsed().as_secs_f64();
    trace.counters = state.counters;
    Ok((trace, state))
}
