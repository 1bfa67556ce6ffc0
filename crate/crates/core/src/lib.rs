//! Embedded-HMM samplers for Bayesian inference in non-linear state space models.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the state space model interface, the Ricker population model in its
//!   log-transformed parameterisation, priors and simulation.
//! - [`pool`]: construction of per-time pools of candidate latent states and the
//!   pool density.
//! - [`kernel`]: log-domain forward/backward recursions over a pool, sequence sampling
//!   and full/partial ensemble densities.
//! - [`samplers`]: baseline single-site Metropolis, single-sequence embedded HMM,
//!   ensemble and staged-ensemble MCMC, plus the chain driver.
//! - [`diagnostics`]: autocorrelation times, posterior summaries and efficiency tables.

pub mod diagnostics;
pub mod error;
pub mod kernel;
pub mod model;
pub mod numerics;
pub mod pool;
pub mod samplers;
mod simd;

pub use error::{Error, Result};
pub use kernel::{EnsembleLogDensity, LatticeKind, LogLattice};
pub use model::{LatentSequence, ObservedSeries, ParamVec, Ricker, StateSpaceModel};
pub use pool::{GammaPool, PoolParams, PoolSet, PoolSource};
pub use samplers::{ChainState, ChainTrace, Counters, ProposalConfig, SamplerConfig, SamplerKind};
