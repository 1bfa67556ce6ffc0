//! Forward and backward recursions over a pool of states.
//!
//! Restricting each latent state to its pool turns the model into a finite HMM over
//! the `L^N` pool-composed sequences, with a sequence `x` weighted by
//!
//! ```text
//! q(x) = p(x_1) prod_{i>1} p(x_i | x_i-1) prod_i gamma_i(x_i),
//! gamma_i(x) = p(z_i | x) / kappa_i(x)
//! ```
//!
//! where the emission factor is dropped at unobserved times but the `1 / kappa_i`
//! correction is kept. All quantities are natural logs. Time indices are 0-based.

use rand::Rng;

use crate::model::{LatentSequence, ObservedSeries, ParamVec, StateSpaceModel};
use crate::numerics::{log_sum_exp, sample_log_categorical};
use crate::pool::PoolSet;
use crate::simd;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeKind {
    Forward,
    Backward,
}

/// `N x L` matrix of log forward (alpha) or log backward (beta) values.
///
/// Backward lattices may be partial: only rows `low_index..N` are populated, the
/// rest hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct LogLattice {
    n: usize,
    l: usize,
    vals: Vec<f64>,
    kind: LatticeKind,
    low_index: usize,
}

impl LogLattice {
    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    /// Lowest populated time index; always 0 for forward lattices.
    pub fn low_index(&self) -> usize {
        self.low_index
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn pool_size(&self) -> usize {
        self.l
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vals[i * self.l..(i + 1) * self.l]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.vals[i * self.l..(i + 1) * self.l]
    }

    pub fn is_complete(&self) -> bool {
        self.low_index == 0
    }

    /// Adds `c` to every populated entry.
    pub fn shifted(&self, c: f64) -> Self {
        let mut out = self.clone();
        for i in self.low_index..self.n {
            for v in out.row_mut(i) {
                *v += c;
            }
        }
        out
    }
}

/// Log ensemble density (including the log prior) at `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleLogDensity {
    pub value: f64,
    pub theta: ParamVec,
}

impl EnsembleLogDensity {
    fn off_support(theta: &ParamVec) -> Self {
        Self {
            value: f64::NEG_INFINITY,
            theta: *theta,
        }
    }
}

/// `log gamma_i` for pool slot `l` at time `i`.
pub fn log_gamma_factor<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    pool: &PoolSet,
    i: usize,
    l: usize,
    z: &ObservedSeries,
) -> f64 {
    let m = pool.state(i, l);
    let emit = match z.y[i] {
        Some(y) => model.log_emit(theta, y, m),
        None => 0.0,
    };
    emit - pool.log_kappa(i, l)
}

fn gamma_row<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    pool: &PoolSet,
    z: &ObservedSeries,
    i: usize,
    out: &mut [f64],
) {
    let states = pool.states_at(i);
    let kappa = pool.log_kappa_at(i);
    match z.y[i] {
        Some(y) => {
            for ((o, &m), &k) in out.iter_mut().zip(states).zip(kappa) {
                *o = model.log_emit(theta, y, m) - k;
            }
        }
        None => {
            for (o, &k) in out.iter_mut().zip(kappa) {
                *o = -k;
            }
        }
    }
}

fn check_dims(pool: &PoolSet, z: &ObservedSeries) {
    assert_eq!(
        pool.horizon(),
        z.len(),
        "pool horizon and observation length differ"
    );
    assert!(pool.horizon() >= 1, "empty horizon");
}

/// Forward pass: `alpha_1 = p(x_1) gamma_1`,
/// `alpha_i(x) = gamma_i(x) sum_l p(x | x_i-1^[l]) alpha_i-1(x_i-1^[l])`.
///
/// Costs `(N - 1) L^2` transition evaluations.
pub fn forward<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    pool: &PoolSet,
    z: &ObservedSeries,
) -> LogLattice {
    check_dims(pool, z);
    let (n, l) = (pool.horizon(), pool.pool_size());
    let mut lat = LogLattice {
        n,
        l,
        vals: vec![0.0; n * l],
        kind: LatticeKind::Forward,
        low_index: 0,
    };
    let mut gamma = vec![0.0; l];
    let mut block = vec![0.0; l * l];

    gamma_row(model, theta, pool, z, 0, &mut gamma);
    for (j, (a, &g)) in lat.row_mut(0).iter_mut().zip(&gamma).enumerate() {
        *a = model.log_init(theta, pool.state(0, j)) + g;
    }
    for i in 1..n {
        model.log_trans_block(theta, pool.states_at(i - 1), pool.states_at(i), &mut block);
        gamma_row(model, theta, pool, z, i, &mut gamma);
        let (done, rest) = lat.vals.split_at_mut(i * l);
        simd::forward_step(&done[(i - 1) * l..], &block, &gamma, &mut rest[..l]);
    }
    lat
}

/// `log prior(theta) + log sum_l alpha_N(x_N^[l])`.
pub fn ensemble_log_density<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    fwd: &LogLattice,
) -> EnsembleLogDensity {
    assert_eq!(fwd.kind, LatticeKind::Forward, "expected a forward lattice");
    let prior = model.log_prior(theta);
    if prior == f64::NEG_INFINITY {
        return EnsembleLogDensity::off_support(theta);
    }
    EnsembleLogDensity {
        value: prior + log_sum_exp(fwd.row(fwd.n - 1)),
        theta: *theta,
    }
}

/// Stochastic backward pass returning slot indices: `x_N ~ alpha_N`, then
/// `x_i ~ p(x_i+1 | x_i) alpha_i(x_i)`.
///
/// # Panics
///
/// Panics if the final row has no finite entry.
pub fn sample_slots_backward<R: Rng + ?Sized, M: StateSpaceModel + ?Sized>(
    rng: &mut R,
    model: &M,
    theta: &ParamVec,
    fwd: &LogLattice,
    pool: &PoolSet,
) -> Vec<usize> {
    assert_eq!(fwd.kind, LatticeKind::Forward, "expected a forward lattice");
    let (n, l) = (fwd.n, fwd.l);
    let mut slots = vec![0; n];
    let mut weights = vec![0.0; l];
    let mut trans = vec![0.0; l];
    slots[n - 1] = sample_log_categorical(rng, fwd.row(n - 1));
    for i in (0..n - 1).rev() {
        let next = [pool.state(i + 1, slots[i + 1])];
        model.log_trans_block(theta, pool.states_at(i), &next, &mut trans);
        for ((w, &a), &t) in weights.iter_mut().zip(fwd.row(i)).zip(&trans) {
            *w = a + t;
        }
        slots[i] = sample_log_categorical(rng, &weights);
    }
    slots
}

pub fn sample_sequence_backward<R: Rng + ?Sized, M: StateSpaceModel + ?Sized>(
    rng: &mut R,
    model: &M,
    theta: &ParamVec,
    fwd: &LogLattice,
    pool: &PoolSet,
) -> LatentSequence {
    pool.compose(&sample_slots_backward(rng, model, theta, fwd, pool))
}

/// Computes backward rows from `lat.low_index - 1` down to `stop`.
fn backward_rows<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    pool: &PoolSet,
    z: &ObservedSeries,
    lat: &mut LogLattice,
    stop: usize,
) {
    let l = lat.l;
    let mut w = vec![0.0; l];
    let mut block = vec![0.0; l * l];
    let mut max = vec![0.0; l];
    let mut sum = vec![0.0; l];
    while lat.low_index > stop {
        let i = lat.low_index - 1;
        // w_j = gamma_i+1(j) + beta_i+1(j)
        gamma_row(model, theta, pool, z, i + 1, &mut w);
        for (wj, &b) in w.iter_mut().zip(lat.row(i + 1)) {
            *wj += b;
        }
        model.log_trans_block(theta, pool.states_at(i), pool.states_at(i + 1), &mut block);
        simd::backward_step(&w, &block, lat.row_mut(i), &mut max, &mut sum);
        lat.low_index = i;
    }
}

/// Backward recursion from `beta_N = 1` down to time `n1` (0-based):
/// `beta_i(x) = sum_l p(x_i+1^[l] | x) beta_i+1(x_i+1^[l]) gamma_i+1(x_i+1^[l])`.
pub fn backward_partial<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    pool: &PoolSet,
    z: &ObservedSeries,
    n1: usize,
) -> LogLattice {
    check_dims(pool, z);
    let (n, l) = (pool.horizon(), pool.pool_size());
    assert!(n1 < n, "n1 = {n1} outside 0..{n}");
    let mut vals = vec![f64::NAN; n * l];
    vals[(n - 1) * l..].fill(0.0);
    let mut lat = LogLattice {
        n,
        l,
        vals,
        kind: LatticeKind::Backward,
        low_index: n - 1,
    };
    backward_rows(model, theta, pool, z, &mut lat, n1);
    lat
}

/// Continues a partial backward lattice down to time 0, reusing populated rows.
pub fn extend_backward<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    mut lat: LogLattice,
    pool: &PoolSet,
    z: &ObservedSeries,
) -> LogLattice {
    assert_eq!(
        lat.kind,
        LatticeKind::Backward,
        "expected a backward lattice"
    );
    backward_rows(model, theta, pool, z, &mut lat, 0);
    lat
}

/// First-stage density over the observations from `n1` onwards, with a uniform
/// `1 / L` weight over the pool at `n1` standing in for the unknown `p(x_n1)`:
/// `log prior + log sum_l (1/L) p(y_n1 | x^[l]) beta_n1(x^[l])`.
pub fn first_stage_log_density<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    lat: &LogLattice,
    pool: &PoolSet,
    z: &ObservedSeries,
    n1: usize,
) -> EnsembleLogDensity {
    assert_eq!(
        lat.kind,
        LatticeKind::Backward,
        "expected a backward lattice"
    );
    assert!(lat.low_index <= n1, "lattice not populated down to n1");
    let prior = model.log_prior(theta);
    if prior == f64::NEG_INFINITY {
        return EnsembleLogDensity::off_support(theta);
    }
    let log_u = -(lat.l as f64).ln();
    let terms: Vec<f64> = lat
        .row(n1)
        .iter()
        .enumerate()
        .map(|(s, &b)| {
            let emit = match z.y[n1] {
                Some(y) => model.log_emit(theta, y, pool.state(n1, s)),
                None => 0.0,
            };
            log_u + emit + b
        })
        .collect();
    EnsembleLogDensity {
        value: prior + log_sum_exp(&terms),
        theta: *theta,
    }
}

/// Full ensemble density from a complete backward lattice:
/// `log prior + log sum_l p(x_1^[l]) gamma_1(x_1^[l]) beta_1(x_1^[l])`.
/// Equal to [`ensemble_log_density`] of the forward lattice.
pub fn full_log_density_backward<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    lat: &LogLattice,
    pool: &PoolSet,
    z: &ObservedSeries,
) -> EnsembleLogDensity {
    assert_eq!(
        lat.kind,
        LatticeKind::Backward,
        "expected a backward lattice"
    );
    assert!(
        lat.is_complete(),
        "backward lattice not populated down to 0"
    );
    let prior = model.log_prior(theta);
    if prior == f64::NEG_INFINITY {
        return EnsembleLogDensity::off_support(theta);
    }
    let terms = initial_terms(model, theta, lat, pool, z);
    EnsembleLogDensity {
        value: prior + log_sum_exp(&terms),
        theta: *theta,
    }
}

fn initial_terms<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    lat: &LogLattice,
    pool: &PoolSet,
    z: &ObservedSeries,
) -> Vec<f64> {
    let mut gamma = vec![0.0; lat.l];
    gamma_row(model, theta, pool, z, 0, &mut gamma);
    lat.row(0)
        .iter()
        .zip(&gamma)
        .enumerate()
        .map(|(s, (&b, &g))| model.log_init(theta, pool.state(0, s)) + g + b)
        .collect()
}

/// Stochastic forward pass over a complete backward lattice, returning slot
/// indices: `x_1 ~ p(x_1) gamma_1 beta_1`, then `x_i ~ p(x_i | x_i-1) gamma_i beta_i`.
pub fn sample_slots_forward<R: Rng + ?Sized, M: StateSpaceModel + ?Sized>(
    rng: &mut R,
    model: &M,
    theta: &ParamVec,
    lat: &LogLattice,
    pool: &PoolSet,
    z: &ObservedSeries,
) -> Vec<usize> {
    assert_eq!(
        lat.kind,
        LatticeKind::Backward,
        "expected a backward lattice"
    );
    assert!(
        lat.is_complete(),
        "backward lattice not populated down to 0"
    );
    let (n, l) = (lat.n, lat.l);
    let mut slots = vec![0; n];
    let mut gamma = vec![0.0; l];
    let mut trans = vec![0.0; l];
    let mut weights = initial_terms(model, theta, lat, pool, z);
    slots[0] = sample_log_categorical(rng, &weights);
    for i in 1..n {
        let prev = [pool.state(i - 1, slots[i - 1])];
        model.log_trans_block(theta, &prev, pool.states_at(i), &mut trans);
        gamma_row(model, theta, pool, z, i, &mut gamma);
        for (((w, &t), &g), &b) in weights.iter_mut().zip(&trans).zip(&gamma).zip(lat.row(i)) {
            *w = t + g + b;
        }
        slots[i] = sample_log_categorical(rng, &weights);
    }
    slots
}

pub fn sample_sequence_forward<R: Rng + ?Sized, M: StateSpaceModel + ?Sized>(
    rng: &mut R,
    model: &M,
    theta: &ParamVec,
    lat: &LogLattice,
    pool: &PoolSet,
    z: &ObservedSeries,
) -> LatentSequence {
    pool.compose(&sample_slots_forward(rng, model, theta, lat, pool, z))
}

/// Cost, in full passes, of a backward pass from time `N` down to `n1` (0-based):
/// `(N - 1 - n1) / (N - 1)`. Zero when `N = 1`.
pub fn partial_pass_cost(n: usize, n1: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    (n - 1 - n1) as f64 / (n - 1) as f64
}

/// Cost of extending a backward pass from `n1` down to time 0: `n1 / (N - 1)`.
pub fn extension_pass_cost(n: usize, n1: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    n1 as f64 / (n - 1) as f64
}
