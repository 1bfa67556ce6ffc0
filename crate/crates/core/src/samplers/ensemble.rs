use rand::Rng;

use super::{accept, propose_params, ChainState, SamplerConfig, Step};
use crate::kernel::{ensemble_log_density, forward, sample_sequence_backward};
use crate::model::{ObservedSeries, StateSpaceModel};
use crate::pool::PoolSource;

pub(crate) fn ensemble_block<R, M, P>(
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
    let mut fwd = forward(model, &state.theta, &pool, z);
    state.counters.full_passes += 1.0;
    let mut rho = ensemble_log_density(model, &state.theta, &fwd);

    let mut steps = Vec::with_capacity(updates);
    for _ in 0..updates {
        let proposal = propose_params(rng, &state.theta, &cfg.proposal);
        state.counters.param_proposals += 1;
        let accepted = if model.log_prior(&proposal) == f64::NEG_INFINITY {
            state.counters.off_support += 1;
            let _: f64 = rng.random();
            false
        } else {
            let fwd_new = forward(model, &proposal, &pool, z);
            state.counters.full_passes += 1.0;
            let rho_new = ensemble_log_density(model, &proposal, &fwd_new);
            let ok = accept(rng, rho_new.value - rho.value);
            if ok {
                fwd = fwd_new;
                rho = rho_new;
                state.theta = proposal;
                state.counters.param_accepts += 1;
            }
            ok
        };
        steps.push(Step {
            theta: state.theta,
            accepted,
            stage1: None,
        });
    }

    state.seq = sample_sequence_backward(rng, model, &state.theta, &fwd, &pool);
    state.counters.seq_updates += 1;
    state.cached_density = Some(rho);
    state.pool = Some(pool);
    steps
}

/// One pool construction, `cfg.updates_per_pool` Metropolis updates of `theta` on the
/// ensemble density (`M + 1` forward passes, the density at the current `theta`
/// cached between proposals), then a sequence draw at the final `theta`.
pub fn ensemble_iter<R, M, P>(
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
    ensemble_block(rng, model, pools, state, z, cfg, cfg.updates_per_pool)
}
