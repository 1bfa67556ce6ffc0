//! State space model interface and the Ricker population model.
//!
//! The Ricker model is written in terms of `M_i = log(phi * N_i)`:
//!
//! ```text
//! M_1         ~ Normal(log r + log phi - 1, sigma^2)
//! M_i | M_i-1 ~ Normal(log r + M_i-1 - exp(M_i-1) / phi, sigma^2)
//! Y_i | M_i   ~ Poisson(exp(M_i))
//! ```
//!
//! with the parameters held on log scale in [`ParamVec`].

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_gamma, normal_log_density, HALF_LN_2PI};

/// Model parameters `(log r, log sigma, log phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVec {
    pub log_r: f64,
    pub log_sigma: f64,
    pub log_phi: f64,
}

impl ParamVec {
    pub const NAMES: [&'static str; 3] = ["r", "sigma", "phi"];
    pub const LOG_NAMES: [&'static str; 3] = ["log_r", "log_sigma", "log_phi"];

    pub fn new(log_r: f64, log_sigma: f64, log_phi: f64) -> Self {
        Self {
            log_r,
            log_sigma,
            log_phi,
        }
    }

    /// Builds a parameter point from natural-scale `(r, sigma, phi)`.
    pub fn from_natural(r: f64, sigma: f64, phi: f64) -> Self {
        Self::new(r.ln(), sigma.ln(), phi.ln())
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.log_r, self.log_sigma, self.log_phi]
    }

    /// `(r, sigma, phi)`.
    pub fn natural(&self) -> [f64; 3] {
        [self.r(), self.sigma(), self.phi()]
    }

    pub fn r(&self) -> f64 {
        self.log_r.exp()
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn phi(&self) -> f64 {
        self.log_phi.exp()
    }

    pub fn is_finite(&self) -> bool {
        self.log_r.is_finite() && self.log_sigma.is_finite() && self.log_phi.is_finite()
    }
}

/// One latent trajectory, `m[i] = log(phi * N_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSequence {
    pub m: Vec<f64>,
}

impl LatentSequence {
    pub fn new(m: Vec<f64>) -> Self {
        Self { m }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Observed counts, `None` where a time step is unobserved.
///
/// `obs_start` is the 1-based time of the first observation. Series built with
/// [`ObservedSeries::from_start`] are observed exactly from `obs_start` onwards;
/// arbitrary masks can be built with [`ObservedSeries::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    pub y: Vec<Option<u64>>,
    pub obs_start: usize,
}

impl ObservedSeries {
    pub fn new(y: Vec<Option<u64>>) -> Self {
        let obs_start = y
            .iter()
            .position(Option::is_some)
            .map_or(y.len() + 1, |i| i + 1);
        Self { y, obs_start }
    }

    /// Keeps the counts at times `obs_start..=N` (1-based) and drops the rest.
    pub fn from_start(counts: &[u64], obs_start: usize) -> Result<Self> {
        if obs_start == 0 || obs_start > counts.len() {
            return Err(Error::InvalidInput(format!(
                "obs_start {obs_start} outside 1..={}",
                counts.len()
            )));
        }
        let y = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (i + 1 >= obs_start).then_some(c))
            .collect();
        Ok(Self { y, obs_start })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn observed_count(&self) -> usize {
        self.y.iter().filter(|y| y.is_some()).count()
    }
}

/// Densities defining a state space model with parameters [`ParamVec`].
///
/// Every method returns a natural-log density, `-inf` where the density is zero.
pub trait StateSpaceModel {
    fn log_init(&self, theta: &ParamVec, m: f64) -> f64;

    fn log_trans(&self, theta: &ParamVec, m_prev: f64, m: f64) -> f64;

    fn log_emit(&self, theta: &ParamVec, y: u64, m: f64) -> f64;

    fn log_prior(&self, theta: &ParamVec) -> f64;

    /// Fills `out[j * prev.len() + l]` with `log_trans(theta, prev[l], next[j])`.
    ///
    /// Models override this to hoist per-predecessor work out of the inner loop.
    fn log_trans_block(&self, theta: &ParamVec, prev: &[f64], next: &[f64], out: &mut [f64]) {
        let lp = prev.len();
        debug_assert_eq!(out.len(), lp * next.len());
        for (j, &x) in next.iter().enumerate() {
            for (l, &xp) in prev.iter().enumerate() {
                out[j * lp + l] = self.log_trans(theta, xp, x);
            }
        }
    }
}

impl<T: StateSpaceModel + ?Sized> StateSpaceModel for &T {
    fn log_init(&self, theta: &ParamVec, m: f64) -> f64 {
        (**self).log_init(theta, m)
    }
    fn log_trans(&self, theta: &ParamVec, m_prev: f64, m: f64) -> f64 {
        (**self).log_trans(theta, m_prev, m)
    }
    fn log_emit(&self, theta: &ParamVec, y: u64, m: f64) -> f64 {
        (**self).log_emit(theta, y, m)
    }
    fn log_prior(&self, theta: &ParamVec) -> f64 {
        (**self).log_prior(theta)
    }
    fn log_trans_block(&self, theta: &ParamVec, prev: &[f64], next: &[f64], out: &mut [f64]) {
        (**self).log_trans_block(theta, prev, next, out)
    }
}

/// Unnormalised log posterior of `(theta, x)` given `z`.
///
/// Returns `-inf` when `theta` is outside the prior support.
pub fn joint_log_density<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &ParamVec,
    x: &LatentSequence,
    z: &ObservedSeries,
) -> f64 {
    assert_eq!(
        x.len(),
        z.len(),
        "sequence and observations differ in length"
    );
    let prior = model.log_prior(theta);
    if prior == f64::NEG_INFINITY || x.is_empty() {
        return prior;
    }
    let mut total = prior + model.log_init(theta, x.m[0]);
    for w in x.m.windows(2) {
        total += model.log_trans(theta, w[0], w[1]);
    }
    for (&m, y) in x.m.iter().zip(&z.y) {
        if let Some(y) = *y {
            total += model.log_emit(theta, y, m);
        }
    }
    total
}

/// Ricker population dynamics with Poisson observations, uniform priors on
/// `log r`, `log sigma` and `phi`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Ricker;

impl Ricker {
    pub const LOG_R_MAX: f64 = 10.0;
    pub const PHI_MAX: f64 = 100.0;
    /// `log(0.1)`
    pub const LOG_SIGMA_MIN: f64 = -std::f64::consts::LN_10;

    pub fn in_support(theta: &ParamVec) -> bool {
        theta.log_r > 0.0
            && theta.log_r < Self::LOG_R_MAX
            && theta.log_sigma >= Self::LOG_SIGMA_MIN
            && theta.log_sigma <= 0.0
            && theta.log_phi < Self::PHI_MAX.ln()
            && theta.log_phi > f64::NEG_INFINITY
    }

    /// Prior means, each on the scale its prior is stated on: `log r` = 5,
    /// `phi` = 50, `log sigma` = log(0.1) / 2.
    pub fn prior_mean() -> ParamVec {
        ParamVec::new(
            Self::LOG_R_MAX / 2.0,
            Self::LOG_SIGMA_MIN / 2.0,
            (Self::PHI_MAX / 2.0).ln(),
        )
    }

    /// Mean of `M_i` given `M_i-1 = m_prev`.
    #[inline]
    pub fn transition_mean(theta: &ParamVec, m_prev: f64) -> f64 {
        theta.log_r + m_prev - (m_prev - theta.log_phi).exp()
    }

    /// Simulates the population recursion from `N_0 = 1` and the Poisson counts,
    /// keeping counts at times `obs_start..=n` (1-based).
    pub fn simulate<R: Rng + ?Sized>(
        theta: &ParamVec,
        n: usize,
        obs_start: usize,
        rng: &mut R,
    ) -> Result<(LatentSequence, ObservedSeries)> {
        if n == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if obs_start == 0 || obs_start > n {
            return Err(Error::InvalidInput(format!(
                "obs_start {obs_start} outside 1..={n}"
            )));
        }
        let sigma = theta.sigma();
        let mut m = Vec::with_capacity(n);
        // log N_0 = 0, so M_0 = log phi
        let mut prev = theta.log_phi;
        for _ in 0..n {
            let e: f64 = rng.sample::<f64, _>(StandardNormal) * sigma;
            let next = Self::transition_mean(theta, prev) + e;
            m.push(next);
            prev = next;
        }
        let mut counts = Vec::with_capacity(n);
        for &mi in &m {
            let rate = mi.exp();
            let c = if rate > 0.0 && rate.is_finite() {
                Poisson::new(rate)
                    .map_err(|e| Error::InvalidInput(format!("poisson rate {rate}: {e}")))?
                    .sample(rng) as u64
            } else {
                0
            };
            counts.push(c);
        }
        let z = ObservedSeries::from_start(&counts, obs_start)?;
        Ok((LatentSequence::new(m), z))
    }
}

impl StateSpaceModel for Ricker {
    fn log_init(&self, theta: &ParamVec, m: f64) -> f64 {
        normal_log_density(m, theta.log_r + theta.log_phi - 1.0, theta.sigma())
    }

    fn log_trans(&self, theta: &ParamVec, m_prev: f64, m: f64) -> f64 {
        normal_log_density(m, Self::transition_mean(theta, m_prev), theta.sigma())
    }

    fn log_emit(&self, _theta: &ParamVec, y: u64, m: f64) -> f64 {
        let y = y as f64;
        y * m - m.exp() - ln_gamma(y + 1.0)
    }

    fn log_prior(&self, theta: &ParamVec) -> f64 {
        if !Self::in_support(theta) {
            return f64::NEG_INFINITY;
        }
        // Uniform on log r and log sigma; uniform on phi carries the exp(log phi)
        // Jacobian in log-phi coordinates.
        -Self::LOG_R_MAX.ln() - (-Self::LOG_SIGMA_MIN).ln() + theta.log_phi - Self::PHI_MAX.ln()
    }

    fn log_trans_block(&self, theta: &ParamVec, prev: &[f64], next: &[f64], out: &mut [f64]) {
        let lp = prev.len();
        debug_assert_eq!(out.len(), lp * next.len());
        let inv_sd = (-theta.log_sigma).exp();
        let norm = -theta.log_sigma - HALF_LN_2PI;
        let means: Vec<f64> = prev
            .iter()
            .map(|&m| Self::transition_mean(theta, m))
            .collect();
        crate::simd::gaussian_block(&means, next, inv_sd, norm, &mut out[..lp * next.len()]);
    }
}
