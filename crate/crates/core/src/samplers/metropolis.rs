use rand::Rng;
use rand_distr::StandardNormal;

use super::{accept, metropolis_param_update, ChainState, ProposalConfig, Step};
use crate::model::{LatentSequence, ObservedSeries, ParamVec, StateSpaceModel};

/// Proposal sd for a latent site: `1 / sqrt(1/sigma^2 + y)` when a positive count is
/// observed, `0.5 sigma` otherwise.
pub fn site_proposal_sd(theta: &ParamVec, y: Option<u64>) -> f64 {
    let sigma = theta.sigma();
    match y {
        Some(y) if y > 0 => 1.0 / (1.0 / (sigma * sigma) + y as f64).sqrt(),
        _ => 0.5 * sigma,
    }
}

/// Log of the factors of the joint density that involve `m[i]`, with `m[i]` set to `v`.
fn site_log_density<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    seq: &LatentSequence,
    z: &ObservedSeries,
    i: usize,
    v: f64,
) -> f64 {
    let n = seq.len();
    let mut lp = if i == 0 {
        model.log_init(theta, v)
    } else {
        model.log_trans(theta, seq.m[i - 1], v)
    };
    if i + 1 < n {
        lp += model.log_trans(theta, v, seq.m[i + 1]);
    }
    if let Some(y) = z.y[i] {
        lp += model.log_emit(theta, y, v);
    }
    lp
}

pub(crate) fn site_sweep_with<R, M, F>(
    rng: &mut R,
    model: &M,
    state: &mut ChainState,
    z: &ObservedSeries,
    sd: F,
) where
    R: Rng + ?Sized,
    M: StateSpaceModel + ?Sized,
    F: Fn(&ParamVec, Option<u64>) -> f64,
{
    let theta = state.theta;
    for i in 0..state.seq.len() {
        let current = state.seq.m[i];
        let e: f64 = rng.sample(StandardNormal);
        let proposal = current + sd(&theta, z.y[i]) * e;
        let delta = site_log_density(model, &theta, &state.seq, z, i, proposal)
            - site_log_density(model, &theta, &state.seq, z, i, current);
        state.counters.site_proposals += 1;
        if accept(rng, delta) {
            state.seq.m[i] = proposal;
            state.counters.site_accepts += 1;
        }
    }
}

/// Sequential single-site Metropolis updates of `m_1, ..., m_N` at fixed `theta`.
pub fn baseline_site_sweep<R: Rng + ?Sized, M: StateSpaceModel + ?Sized>(
    rng: &mut R,
    model: &M,
    state: &mut ChainState,
    z: &ObservedSeries,
) {
    site_sweep_with(rng, model, state, z, site_proposal_sd);
}

/// One sweep over the latent sites followed by one Metropolis update of `theta`.
pub fn baseline_metropolis_sweep<R: Rng + ?Sized, M: StateSpaceModel + ?Sized>(
    rng: &mut R,
    model: &M,
    state: &mut ChainState,
    z: &ObservedSeries,
    pc: &ProposalConfig,
) -> Step {
    baseline_site_sweep(rng, model, state, z);
    metropolis_param_update(rng, model, state, z, pc)
}
