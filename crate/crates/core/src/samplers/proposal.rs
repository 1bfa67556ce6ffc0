use rand::Rng;
use rand_distr::StandardNormal;

use super::{accept, ChainState, ProposalConfig, Step};
use crate::model::{joint_log_density, ObservedSeries, ParamVec, StateSpaceModel};

/// Symmetric random-walk proposal, `theta + N(0, diag((scaling * base_sd)^2))`.
pub fn propose_params<R: Rng + ?Sized>(
    rng: &mut R,
    theta: &ParamVec,
    pc: &ProposalConfig,
) -> ParamVec {
    let sd = pc.sd();
    let mut a = theta.to_array();
    for (v, s) in a.iter_mut().zip(sd) {
        let e: f64 = rng.sample(StandardNormal);
        *v += s * e;
    }
    ParamVec::from_array(a)
}

/// Random-walk Metropolis update of `theta` given the current sequence.
pub fn metropolis_param_update<R: Rng + ?Sized, M: StateSpaceModel + ?Sized>(
    rng: &mut R,
    model: &M,
    state: &mut ChainState,
    z: &ObservedSeries,
    pc: &ProposalConfig,
) -> Step {
    let proposal = propose_params(rng, &state.theta, pc);
    state.counters.param_proposals += 1;
    let accepted = if model.log_prior(&proposal) == f64::NEG_INFINITY {
        state.counters.off_support += 1;
        let _: f64 = rng.random();
        false
    } else {
        let current = joint_log_density(model, &state.theta, &state.seq, z);
        let proposed = joint_log_density(model, &proposal, &state.seq, z);
        accept(rng, proposed - current)
    };
    if accepted {
        state.theta = proposal;
        state.counters.param_accepts += 1;
    }
    Step {
        theta: state.theta,
        accepted,
        stage1: None,
    }
}
