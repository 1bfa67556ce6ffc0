use rand::Rng;

use super::{metropolis_param_update, ChainState, SamplerConfig, Step};
use crate::kernel::{forward, sample_sequence_backward};
use crate::model::{ObservedSeries, StateSpaceModel};
use crate::pool::PoolSource;

pub(crate) fn single_sequence_block<R, M, P>(
    rng: &mut R,
    model: &M,
    pools: &P,
    state: &mut ChainState,
    z: &ObservedSeries,
    cfg: &SamplerConfig,
    updates: usize,
) -> Vec<Step>
where
    R: Rng + ?Sized,
    M: StateSpaceModel + ?Sized,
    P: PoolSource + ?Sized,
{
    let pool = pools.build(&state.seq, z, cfg.pool_size, rng);
    state.counters.pool_builds += 1;
    let fwd = forward(model, &state.theta, &pool, z);
    state.counters.full_passes += 1.0;
    state.seq = sample_sequence_backward(rng, model, &state.theta, &fwd, &pool);
    state.counters.seq_updates += 1;
    (0..updates)
        .map(|_| metropolis_param_update(rng, model, state, z, &cfg.proposal))
        .collect()
}

/// One embedded-HMM update of the sequence followed by `cfg.updates_per_pool`
/// Metropolis updates of `theta` given that sequence.
pub fn single_sequence_iter<R, M, P>(
    rng: &mut R,
    model: &M,
    pools: &P,
    state: &mut ChainState,
    z: &ObservedSeries,
    cfg: &SamplerConfig,
) -> Vec<Step>
where
    R: Rng + ?Sized,
    M: StateSpaceModel + ?Sized,
    P: PoolSource + ?Sized,
{
    single_sequence_block(rng, model, pools, state, z, cfg, cfg.updates_per_pool)
}
