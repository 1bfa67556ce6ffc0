#![allow(dead_code)]

use ehmm_core::numerics::log_sum_exp;
use ehmm_core::{ObservedSeries, ParamVec, PoolSet, StateSpaceModel};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Every slot assignment of an `n x l` pool, in lexicographic order.
pub fn all_slot_paths(n: usize, l: usize) -> Vec<Vec<usize>> {
    let total = l.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut path = vec![0; n];
            for i in (0..n).rev() {
                path[i] = code % l;
                code /= l;
            }
            path
        })
        .collect()
}

/// Index of a slot path in [`all_slot_paths`] order.
pub fn path_index(path: &[usize], l: usize) -> usize {
    path.iter().fold(0, |acc, &s| acc * l + s)
}

/// `log q(x)` for one pool-composed sequence: initial density, transitions, and the
/// emission over pool density at every time (pool density alone where unobserved),
/// summed term by term.
pub fn log_weight<M: StateSpaceModel>(
    model: &M,
    theta: &ParamVec,
    pool: &PoolSet,
    z: &ObservedSeries,
    path: &[usize],
) -> f64 {
    let mut total = model.log_init(theta, pool.state(0, path[0]));
    for i in 1..path.len() {
        total += model.log_trans(
            theta,
            pool.state(i - 1, path[i - 1]),
            pool.state(i, path[i]),
        );
    }
    for (i, &s) in path.iter().enumerate() {
        if let Some(y) = z.y[i] {
            total += model.log_emit(theta, y, pool.state(i, s));
        }
        total -= pool.log_kappa(i, s);
    }
    total
}

/// Log weights of all `L^N` pool-composed sequences.
pub fn enumerate_log_weights<M: StateSpaceModel>(
    model: &M,
    theta: &ParamVec,
    pool: &PoolSet,
    z: &ObservedSeries,
) -> Vec<f64> {
    all_slot_paths(pool.horizon(), pool.pool_size())
        .iter()
        .map(|p| log_weight(model, theta, pool, z, p))
        .collect()
}

/// Normalised probabilities of all pool-composed sequences.
pub fn enumerate_probs<M: StateSpaceModel>(
    model: &M,
    theta: &ParamVec,
    pool: &PoolSet,
    z: &ObservedSeries,
) -> Vec<f64> {
    let w = enumerate_log_weights(model, theta, pool, z);
    let total = log_sum_exp(&w);
    w.iter().map(|v| (v - total).exp()).collect()
}

/// A parameter vector well inside the prior support.
pub fn random_theta<R: Rng>(rng: &mut R) -> ParamVec {
    ParamVec::new(
        rng.random_range(0.5..4.5),
        rng.random_range(-1.5..-0.3),
        rng.random_range(0.0..2.0),
    )
}

/// Pool of `n x l` states on a moderate range with arbitrary log pool densities.
pub fn random_pool<R: Rng>(rng: &mut R, n: usize, l: usize) -> PoolSet {
    let states = (0..n * l).map(|_| rng.random_range(-0.5..4.0)).collect();
    let kappa = (0..n * l).map(|_| rng.random_range(-3.0..0.5)).collect();
    PoolSet::from_parts(n, l, states, kappa).unwrap()
}

/// Observations with each time observed with probability one half.
pub fn random_mask<R: Rng>(rng: &mut R, n: usize) -> ObservedSeries {
    ObservedSeries::new(
        (0..n)
            .map(|_| rng.random_bool(0.5).then(|| rng.random_range(0..15)))
            .collect(),
    )
}

/// Pearson chi-square goodness-of-fit p-value; cells with expected count below 5
/// are merged into one.
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut small_obs, mut small_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        let e = p * total as f64;
        if e < 5.0 {
            small_obs += c as f64;
            small_exp += e;
        } else {
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if small_exp > 0.0 {
        stat += (small_obs - small_exp).powi(2) / small_exp.max(1e-300);
        cells += 1;
    }
    let df = (cells - 1) as f64;
    1.0 - ChiSquared::new(df).unwrap().cdf(stat)
}

/// Two-sample chi-square homogeneity p-value over matching cells.
pub fn two_sample_chi_square_p(a: &[u64], b: &[u64]) -> f64 {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let pooled = (x + y) as f64;
        if pooled == 0.0 {
            continue;
        }
        let ea = pooled * na / (na + nb);
        let eb = pooled * nb / (na + nb);
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
        cells += 1;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

/// `ln Gamma(x)` from the Stirling series after shifting `x` above 20 with the
/// recurrence.
pub fn ln_gamma_stirling(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0;
    let mut z = x;
    while z < 20.0 {
        shift += z.ln();
        z += 1.0;
    }
    let z2 = z * z;
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z2 * z2 * z)
        - 1.0 / (1680.0 * z2 * z2 * z2 * z);
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}
