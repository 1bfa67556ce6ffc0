mod common;

use common::{ln_gamma_stirling, simpson};
use ehmm_core::model::joint_log_density;
use ehmm_core::numerics::{ln_gamma, log_sum_exp};
use ehmm_core::{LatentSequence, ObservedSeries, ParamVec, Ricker, StateSpaceModel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn normal_pdf_log(x: f64, mean: f64, sd: f64) -> f64 {
    let d = (x - mean) / sd;
    -0.5 * d * d - sd.ln() - 0.5 * LN_2PI
}

/// Term list of the joint density written out from the model definition.
fn joint_terms(theta: &ParamVec, x: &[f64], y: &[Option<u64>]) -> Vec<f64> {
    let (r, sigma, phi) = (
        theta.log_r.exp(),
        theta.log_sigma.exp(),
        theta.log_phi.exp(),
    );
    let mut terms = vec![
        -(10f64).ln(),
        -(10f64.ln()).ln(),
        phi.ln() - 100f64.ln(),
        normal_pdf_log(x[0], r.ln() + phi.ln() - 1.0, sigma),
    ];
    for i in 1..x.len() {
        let mean = r.ln() + x[i - 1] - x[i - 1].exp() / phi;
        terms.push(normal_pdf_log(x[i], mean, sigma));
    }
    for (i, yi) in y.iter().enumerate() {
        if let Some(c) = yi {
            let lam = x[i].exp();
            let log_fact: f64 = (1..=*c).map(|k| (k as f64).ln()).sum();
            terms.push(*c as f64 * lam.ln() - lam - log_fact);
        }
    }
    terms
}

#[test]
fn joint_density_matches_term_by_term_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let theta = ParamVec::new(
            rng.random_range(1.0..5.0),
            rng.random_range(-2.0..-0.2),
            rng.random_range(0.0..3.0),
        );
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..4.0)).collect();
        let y: Vec<Option<u64>> = (0..5)
            .map(|_| rng.random_bool(0.6).then(|| rng.random_range(0..30)))
            .collect();
        let got = joint_log_density(
            &Ricker,
            &theta,
            &LatentSequence::new(x.clone()),
            &ObservedSeries::new(y.clone()),
        );
        let want: f64 = joint_terms(&theta, &x, &y).iter().sum();
        assert!(
            (got - want).abs() < 1e-12 * want.abs().max(1.0),
            "{got} vs {want}"
        );
    }
}

#[test]
fn joint_density_off_support_is_negative_infinity() {
    let x = LatentSequence::new(vec![1.0; 3]);
    let z = ObservedSeries::new(vec![None, Some(2), Some(3)]);
    let theta = ParamVec::new(11.0, -1.0, 0.5);
    assert_eq!(
        joint_log_density(&Ricker, &theta, &x, &z),
        f64::NEG_INFINITY
    );
}

#[test]
fn prior_examples() {
    assert_eq!(
        Ricker.log_prior(&ParamVec::new(11.0, -1.0, 0.5)),
        f64::NEG_INFINITY
    );
    assert!(Ricker
        .log_prior(&ParamVec::new(3.8, 0.15f64.ln(), 2f64.ln()))
        .is_finite());
    let a = ParamVec::new(3.0, -1.0, 0.4);
    let b = ParamVec::new(2.0, -0.5, 1.7);
    let ratio = (Ricker.log_prior(&a) - Ricker.log_prior(&b)).exp();
    assert!((ratio - (0.4f64 - 1.7).exp()).abs() < 1e-14);
}

#[test]
fn prior_integrates_to_one_over_support() {
    // uniform in log r and log sigma; phi = exp(log phi) uniform on (0, 100)
    let dens = Ricker.log_prior(&ParamVec::new(1.0, -1.0, 0.0));
    let phi_integral = simpson(
        |lp| (Ricker.log_prior(&ParamVec::new(1.0, -1.0, lp)) - dens).exp(),
        -40.0,
        100f64.ln() - 1e-12,
        20_000,
    );
    let total = dens.exp() * 10.0 * 10f64.ln() * phi_integral;
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn ln_gamma_agrees_with_stirling_oracle() {
    let mut xs: Vec<f64> = (1..=200).map(|k| k as f64).collect();
    xs.extend([0.15, 0.5, 1.5, 4.15, 1e3 + 1.0, 123_457.0, 1e6 + 1.0]);
    for x in xs {
        let (a, b) = (ln_gamma(x), ln_gamma_stirling(x));
        assert!(
            (a - b).abs() < 1e-10 * b.abs().max(1.0),
            "x={x}: {a} vs {b}"
        );
    }
}

#[test]
fn initial_and_transition_densities_normalise() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let theta = ParamVec::new(
            rng.random_range(0.5..5.0),
            rng.random_range(-2.3..0.0),
            rng.random_range(0.0..4.0),
        );
        let sd = theta.log_sigma.exp();
        let c = theta.log_r + theta.log_phi - 1.0;
        let f = |m: f64| Ricker.log_init(&theta, m).exp();
        let total = simpson(f, c - 12.0 * sd, c + 12.0 * sd, 4000);
        assert!((total - 1.0).abs() < 1e-8, "{total}");

        let prev = rng.random_range(-1.0..5.0);
        let mu = Ricker::transition_mean(&theta, prev);
        let g = |m: f64| Ricker.log_trans(&theta, prev, m).exp();
        let total = simpson(g, mu - 12.0 * sd, mu + 12.0 * sd, 4000);
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }
}

#[test]
fn emission_sums_to_one() {
    let theta = ParamVec::new(3.8, -1.9, 0.7);
    for m in [-3.0, 0.0, 1.5, 3.0, 4.5] {
        let lam: f64 = f64::exp(m);
        let upper = (lam + 40.0 * lam.sqrt() + 60.0) as u64;
        let terms: Vec<f64> = (0..=upper).map(|y| Ricker.log_emit(&theta, y, m)).collect();
        let total = log_sum_exp(&terms).exp();
        assert!((total - 1.0).abs() < 1e-10, "m={m}: {total}");
    }
}

#[test]
fn joint_density_is_order_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = ParamVec::new(3.8, 0.15f64.ln(), 2f64.ln());
    let (x, z) = Ricker::simulate(&theta, 100, 51, &mut rng).unwrap();
    let got = joint_log_density(&Ricker, &theta, &x, &z);
    let mut terms = joint_terms(&theta, &x.m, &z.y);
    for _ in 0..10 {
        terms.shuffle(&mut rng);
        let s: f64 = terms.iter().sum();
        assert!((s - got).abs() < 1e-10, "{s} vs {got}");
    }
}

#[test]
fn simulate_observes_from_start() {
    let theta = ParamVec::new(3.8, 0.15f64.ln(), 2f64.ln());
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (x, z) = Ricker::simulate(&theta, 100, 51, &mut rng).unwrap();
    assert_eq!(x.len(), 100);
    assert_eq!(z.observed_count(), 50);
    assert!(z.y[..50].iter().all(|y| y.is_none()));
    assert!(z.y[50..].iter().all(|y| y.is_some()));
    let (_, z) = Ricker::simulate(&theta, 100, 1, &mut rng).unwrap();
    assert_eq!(z.observed_count(), 100);
}

#[test]
fn noiseless_simulation_matches_unrolled_recursion() {
    let theta = ParamVec::new(1.2, -700.0, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (x, _) = Ricker::simulate(&theta, 6, 1, &mut rng).unwrap();
    let (r, phi) = (1.2f64.exp(), 0.3f64.exp());
    let mut pop = 1.0f64;
    for &mi in &x.m {
        pop = r * pop * (-pop).exp();
        assert!((mi - (phi * pop).ln()).abs() < 1e-12);
    }
    assert!((x.m[0] - (1.2 + 0.3 - 1.0)).abs() < 1e-15);
}

proptest! {
    #[test]
    fn densities_finite_and_positive(
        log_r in 0.01f64..9.99,
        log_sigma in -2.3f64..0.0,
        log_phi in -3.0f64..4.6,
        m_prev in -5.0f64..8.0,
        m in -5.0f64..8.0,
        y in 0u64..500,
    ) {
        let theta = ParamVec::new(log_r, log_sigma, log_phi);
        for v in [
            Ricker.log_init(&theta, m),
            Ricker.log_trans(&theta, m_prev, m),
            Ricker.log_emit(&theta, y, m),
            Ricker.log_prior(&theta),
        ] {
            prop_assert!(v.is_finite());
            prop_assert!(v.exp() >= 0.0 && v.exp().is_finite());
        }
    }

    #[test]
    fn markov_blanket_of_a_site(seed in 0u64..1000, i in 0usize..6, delta in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = ParamVec::new(2.0, -1.0, 0.5);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..3.0)).collect();
        let y: Vec<Option<u64>> = (0..6).map(|_| Some(rng.random_range(0..10))).collect();
        let mut x2 = x.clone();
        x2[i] += delta;
        let a = joint_terms(&theta, &x, &y);
        let b = joint_terms(&theta, &x2, &y);
        let changed = a.iter().zip(&b).filter(|(p, q)| p != q).count();
        let expect = if i == 5 { 2 } else { 3 };
        prop_assert!(changed <= expect);
        let z = ObservedSeries::new(y.clone());
        let d = joint_log_density(&Ricker, &theta, &LatentSequence::new(x2), &z)
            - joint_log_density(&Ricker, &theta, &LatentSequence::new(x), &z);
        let expected: f64 = b.iter().sum::<f64>() - a.iter().sum::<f64>();
        prop_assert!((d - expected).abs() < 1e-9);
    }
}
