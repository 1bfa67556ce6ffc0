//! Pools of candidate latent states.
//!
//! Pool states are generated by drawing `exp(m)` from a Gamma pseudo-prior, or from
//! its conjugate update `Gamma(k + y, scale / (1 + scale))` where a count `y` is
//! observed, and taking logs. The pool density `kappa` is the density of `m` itself.
//!
//! Pool construction never sees the model parameters: the ensemble update is only
//! reversible if the pool distribution does not depend on the current `theta`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LatentSequence, ObservedSeries};
use crate::numerics::ln_gamma;

/// Gamma pseudo-prior on `exp(m)`: shape `k`, scale `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolParams {
    pub k: f64,
    pub theta: f64,
}

impl Default for PoolParams {
    fn default() -> Self {
        Self {
            k: 0.15,
            theta: 50.0,
        }
    }
}

impl PoolParams {
    pub fn new(k: f64, theta: f64) -> Result<Self> {
        let pp = Self { k, theta };
        pp.validate()?;
        Ok(pp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite() && self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "pool parameters must be positive and finite, got k={} theta={}",
                self.k, self.theta
            )));
        }
        Ok(())
    }

    /// Shape and scale of the Gamma distribution for `exp(m)`, conditioned on `y`
    /// when present.
    pub fn effective(&self, y: Option<u64>) -> (f64, f64) {
        match y {
            None => (self.k, self.theta),
            Some(y) => (self.k + y as f64, self.theta / (1.0 + self.theta)),
        }
    }
}

/// `log kappa(m)` where `exp(m) ~ Gamma(shape, scale)`.
#[inline]
fn log_gamma_of_exp(shape: f64, scale: f64, m: f64) -> f64 {
    shape * m - m.exp() / scale - ln_gamma(shape) - shape * scale.ln()
}

/// Log pool density of a latent value `m`, optionally conditioned on a count.
pub fn log_kappa(pp: &PoolParams, m: f64, y: Option<u64>) -> f64 {
    let (shape, scale) = pp.effective(y);
    log_gamma_of_exp(shape, scale, m)
}

/// `log X` for `X ~ Gamma(shape, scale)`, drawn in log space so small shapes cannot
/// underflow to `log 0`.
fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    loop {
        let v = if shape >= 1.0 {
            let g = Gamma::new(shape, 1.0)
                .expect("shape validated positive")
                .sample(rng);
            g.ln()
        } else {
            // X = Y * U^(1/shape) with Y ~ Gamma(shape + 1)
            let y = Gamma::new(shape + 1.0, 1.0)
                .expect("shape validated positive")
                .sample(rng);
            let u: f64 = rng.sample(Open01);
            y.ln() + u.ln() / shape
        };
        let v = v + scale.ln();
        if v.is_finite() {
            return v;
        }
    }
}

/// Draws `count` pool states (on the `m` scale).
pub fn sample_pool_states<R: Rng + ?Sized>(
    pp: &PoolParams,
    y: Option<u64>,
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    let (shape, scale) = pp.effective(y);
    (0..count)
        .map(|_| sample_log_gamma(shape, scale, rng))
        .collect()
}

/// `L` candidate states at each of `N` times, with their log pool densities.
///
/// Slot 0 holds the sequence the pool was built around.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSet {
    n: usize,
    l: usize,
    states: Vec<f64>,
    log_kappa: Vec<f64>,
}

impl PoolSet {
    /// Builds a pool from row-major `N x L` arrays of states and log pool densities.
    pub fn from_parts(n: usize, l: usize, states: Vec<f64>, log_kappa: Vec<f64>) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidInput("pool size must be at least 1".into()));
        }
        if states.len() != n * l || log_kappa.len() != n * l {
            return Err(Error::InvalidInput(format!(
                "pool arrays must have {} entries, got {} and {}",
                n * l,
                states.len(),
                log_kappa.len()
            )));
        }
        if states.iter().chain(&log_kappa).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("pool entries must be finite".into()));
        }
        Ok(Self {
            n,
            l,
            states,
            log_kappa,
        })
    }

    pub fn horizon(&self) -> usize {
        self.n
    }

    pub fn pool_size(&self) -> usize {
        self.l
    }

    pub fn states_at(&self, i: usize) -> &[f64] {
        &self.states[i * self.l..(i + 1) * self.l]
    }

    pub fn log_kappa_at(&self, i: usize) -> &[f64] {
        &self.log_kappa[i * self.l..(i + 1) * self.l]
    }

    pub fn state(&self, i: usize, slot: usize) -> f64 {
        self.states[i * self.l + slot]
    }

    pub fn log_kappa(&self, i: usize, slot: usize) -> f64 {
        self.log_kappa[i * self.l + slot]
    }

    /// The sequence composed of the given slot at each time.
    pub fn compose(&self, slots: &[usize]) -> LatentSequence {
        assert_eq!(slots.len(), self.n);
        LatentSequence::new(
            slots
                .iter()
                .enumerate()
                .map(|(i, &s)| self.state(i, s))
                .collect(),
        )
    }

    /// The embedded sequence in slot 0.
    pub fn current_sequence(&self) -> LatentSequence {
        self.compose(&vec![0; self.n])
    }

    /// Adds `shift[i]` to every log pool density at time `i`.
    pub fn shift_log_kappa(&mut self, shift: &[f64]) {
        assert_eq!(shift.len(), self.n);
        for (i, s) in shift.iter().enumerate() {
            for v in &mut self.log_kappa[i * self.l..(i + 1) * self.l] {
                *v += s;
            }
        }
    }
}

/// Builds a pool of `L` states per time around the current sequence.
pub trait PoolSource {
    fn build<R: Rng + ?Sized>(
        &self,
        current: &LatentSequence,
        z: &ObservedSeries,
        l: usize,
        rng: &mut R,
    ) -> PoolSet;
}

/// Independent pool states from the Gamma pseudo-prior.
#[derive(Debug, Clone, Copy, Default)]
pub struct GammaPool(pub PoolParams);

impl PoolSource for GammaPool {
    fn build<R: Rng + ?Sized>(
        &self,
        current: &LatentSequence,
        z: &ObservedSeries,
        l: usize,
        rng: &mut R,
    ) -> PoolSet {
        build_poolset(&self.0, current, z, l, rng)
    }
}

/// Pool with `current.m[i]` in slot 0 and `L - 1` fresh draws at each time.
///
/// # Panics
///
/// Panics if `l == 0` or the lengths of `current` and `z` differ.
pub fn build_poolset<R: Rng + ?Sized>(
    pp: &PoolParams,
    current: &LatentSequence,
    z: &ObservedSeries,
    l: usize,
    rng: &mut R,
) -> PoolSet {
    assert!(l >= 1, "pool size must be at least 1");
    assert_eq!(current.len(), z.len());
    let n = current.len();
    let mut states = Vec::with_capacity(n * l);
    let mut log_k = Vec::with_capacity(n * l);
    for (i, &m) in current.m.iter().enumerate() {
        let y = z.y[i];
        states.push(m);
        states.extend(sample_pool_states(pp, y, l - 1, rng));
        log_k.extend(states[i * l..].iter().map(|&s| log_kappa(pp, s, y)));
    }
    PoolSet {
        n,
        l,
        states,
        log_kappa: log_k,
    }
}

/// Initial latent sequence drawn independently per time from the pool distributions.
pub fn initial_sequence<R: Rng + ?Sized>(
    pp: &PoolParams,
    z: &ObservedSeries,
    rng: &mut R,
) -> LatentSequence {
    LatentSequence::new(
        z.y.iter()
            .map(|&y| sample_pool_states(pp, y, 1, rng)[0])
            .collect(),
    )
}
