use rand::Rng;

use super::{accept, propose_params, ChainState, SamplerConfig, Step};
use crate::kernel::{
    backward_partial, extend_backward, extension_pass_cost, first_stage_log_density,
    full_log_density_backward, partial_pass_cost, sample_sequence_forward, LogLattice,
};
use crate::model::{ObservedSeries, StateSpaceModel};
use crate::pool::PoolSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StagedOutcome {
    FirstStageRejected,
    SecondStageRejected,
    Accepted,
}

impl StagedOutcome {
    pub fn passed_first_stage(&self) -> bool {
        !matches!(self, StagedOutcome::FirstStageRejected)
    }
}

/// Log acceptance ratio of the first stage for a symmetric proposal.
pub fn first_stage_log_ratio(rho1_current: f64, rho1_proposed: f64) -> f64 {
    rho1_proposed - rho1_current
}

/// Log acceptance ratio of the second stage for a symmetric proposal:
/// `rho(theta*) rho1(theta) / (rho(theta) rho1(theta*))`.
pub fn second_stage_log_ratio(
    rho_current: f64,
    rho1_current: f64,
    rho_proposed: f64,
    rho1_proposed: f64,
) -> f64 {
    (rho_proposed + rho1_current) - (rho_current + rho1_proposed)
}

/// Two-stage Metropolis decision. `full_at_proposal` computes the full log ensemble
/// density at the proposal and is only called when the first stage accepts.
pub fn staged_decision<R, F>(
    rng: &mut R,
    rho_current: f64,
    rho1_current: f64,
    rho1_proposed: f64,
    full_at_proposal: F,
) -> StagedOutcome
where
    R: Rng + ?Sized,
    F: FnOnce() -> f64,
{
    if !accept(rng, first_stage_log_ratio(rho1_current, rho1_proposed)) {
        return StagedOutcome::FirstStageRejected;
    }
    let rho_proposed = full_at_proposal();
    let ratio = second_stage_log_ratio(rho_current, rho1_current, rho_proposed, rho1_proposed);
    if accept(rng, ratio) {
        StagedOutcome::Accepted
    } else {
        StagedOutcome::SecondStageRejected
    }
}

pub(crate) fn staged_block<R, M, P>(
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
    let n = z.len();
    let n1 = cfg.n1 - 1;
    let pool = pools.build(&state.seq, z, cfg.pool_size, rng);
    state.counters.pool_builds += 1;

    // The full lattice at the current theta also yields the first-stage density.
    let mut lat = backward_partial(model, &state.theta, &pool, z, 0);
    state.counters.full_passes += 1.0;
    let mut rho = full_log_density_backward(model, &state.theta, &lat, &pool, z);
    let mut rho1 = first_stage_log_density(model, &state.theta, &lat, &pool, z, n1);

    let mut steps = Vec::with_capacity(updates);
    for _ in 0..updates {
        let proposal = propose_params(rng, &state.theta, &cfg.proposal);
        state.counters.param_proposals += 1;
        if model.log_prior(&proposal) == f64::NEG_INFINITY {
            state.counters.off_support += 1;
            let _: f64 = rng.random();
            steps.push(Step {
                theta: state.theta,
                accepted: false,
                stage1: Some(false),
            });
            continue;
        }

        state.counters.stage1_proposals += 1;
        let partial = backward_partial(model, &proposal, &pool, z, n1);
        state.counters.full_passes += partial_pass_cost(n, n1);
        let rho1_new = first_stage_log_density(model, &proposal, &partial, &pool, z, n1);

        let mut partial = Some(partial);
        let mut completed: Option<(LogLattice, f64)> = None;
        let outcome = staged_decision(rng, rho.value, rho1.value, rho1_new.value, || {
            let full = extend_backward(model, &proposal, partial.take().unwrap(), &pool, z);
            let v = full_log_density_backward(model, &proposal, &full, &pool, z).value;
            completed = Some((full, v));
            v
        });

        if outcome.passed_first_stage() {
            state.counters.stage1_accepts += 1;
            state.counters.stage2_proposals += 1;
            state.counters.full_passes += extension_pass_cost(n, n1);
        }
        if outcome == StagedOutcome::Accepted {
            let (full, v) = completed.expect("second stage evaluated the full density");
            state.counters.stage2_accepts += 1;
            state.counters.param_accepts += 1;
            state.theta = proposal;
            lat = full;
            rho.value = v;
            rho.theta = proposal;
            rho1 = rho1_new;
        }
        steps.push(Step {
            theta: state.theta,
            accepted: outcome == StagedOutcome::Accepted,
            stage1: Some(outcome.passed_first_stage()),
        });
    }

    state.seq = sample_sequence_forward(rng, model, &state.theta, &lat, &pool, z);
    state.counters.seq_updates += 1;
    state.cached_density = Some(rho);
    state.pool = Some(pool);
    steps
}

/// One pool construction followed by `cfg.updates_per_pool` staged updates of
/// `theta`, then a sequence draw by a stochastic forward pass at the final `theta`.
///
/// Each proposal costs a backward pass down to `n1`; only proposals that pass the
/// first stage extend it to the start of the sequence.
pub fn staged_iter<R, M, P>(
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
    staged_block(rng, model, pools, state, z, cfg, cfg.updates_per_pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn first_stage_rejection_skips_full_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = staged_decision(&mut rng, 0.0, 0.0, f64::NEG_INFINITY, || {
            panic!("full density must not be evaluated")
        });
        assert_eq!(out, StagedOutcome::FirstStageRejected);
    }

    #[test]
    fn matched_stages_always_accept_uphill() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            // rho1 improves and rho improves by more
            let out = staged_decision(&mut rng, -10.0, -5.0, -4.0, || -8.0);
            assert_eq!(out, StagedOutcome::Accepted);
        }
    }

    #[test]
    fn second_stage_ratio_algebra() {
        let r = second_stage_log_ratio(-3.0, -1.0, -2.0, -1.5);
        assert!((r - ((-2.0 + -1.0) - (-3.0 + -1.5))).abs() < 1e-15);
    }
}
