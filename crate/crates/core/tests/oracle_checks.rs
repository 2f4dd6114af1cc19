mod oracles;

use mars_core::advantage::{gae, normalize_advantages};
use mars_core::objective::{JointAdvantage, ProbabilityRatio};
use mars_core::trust_region::resolve;
use mars_core::{Surrogate, Variant};
use oracles::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn gae_matches_direct_summation() {
    let mut rng = rng(11);
    for _ in 0..200 {
        let len = rng.random_range(1..40);
        let ro = random_rollout(&mut rng, len);
        let (gamma, lambda) = (rng.random_range(0.5..1.0), rng.random_range(0.0..1.0));
        let got = gae(&ro.rewards, &ro.values, ro.bootstrap, &ro.dones, gamma, lambda).unwrap();
        let want = gae_direct(&ro.rewards, &ro.values, ro.bootstrap, &ro.dones, gamma, lambda);
        for (g, w) in got.advantages.iter().zip(&want) {
            assert!((g - w).abs() < 1e-10, "{g} vs {w}");
        }
        for ((ret, adv), v) in got.returns.iter().zip(&got.advantages).zip(&ro.values) {
            assert_eq!(*ret, adv + v);
        }
    }
}

#[test]
fn gae_limits_are_td_error_and_monte_carlo() {
    let mut rng = rng(12);
    for _ in 0..50 {
        let ro = random_rollout(&mut rng, 16);
        let zero = gae(&ro.rewards, &ro.values, ro.bootstrap, &ro.dones, 0.99, 0.0).unwrap();
        assert_eq!(zero.advantages, gae_direct(&ro.rewards, &ro.values, ro.bootstrap, &ro.dones, 0.99, 0.0));
        let one = gae(&ro.rewards, &ro.values, ro.bootstrap, &ro.dones, 0.99, 1.0).unwrap();
        let mc = monte_carlo_advantage(&ro.rewards, &ro.values, ro.bootstrap, &ro.dones, 0.99);
        for (g, w) in one.advantages.iter().zip(&mc) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn normalised_advantages_have_unit_scale() {
    let mut rng = rng(13);
    let ro = random_rollout(&mut rng, 64);
    let set = gae(&ro.rewards, &ro.values, ro.bootstrap, &ro.dones, 0.99, 0.95).unwrap();
    let norm = normalize_advantages(&set, true);
    let n = norm.advantages.len() as f64;
    let mean = norm.advantages.iter().sum::<f64>() / n;
    let var = norm.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 1e-12);
    assert!((var - 1.0).abs() < 1e-6);
    assert_eq!(norm.returns, set.returns);
    assert_eq!(normalize_advantages(&set, false), set);
}

fn reference_objective(s: &Surrogate, r: f64) -> f64 {
    match *s {
        Surrogate::Clipped { advantage, eps_lower, eps_upper } => {
            clipped_objective(r, advantage.value(), eps_lower, eps_upper)
        }
        Surrogate::Quadratic { advantage, coeff } => quadratic_objective(r, advantage.value(), coeff),
        Surrogate::Barrier { advantage, alpha } => barrier_objective(r, advantage.value(), alpha.value()),
    }
}

#[test]
fn scalar_surrogates_match_reference_and_finite_differences() {
    for seed in 0..10 {
        let mut rng = rng(seed);
        for v in Variant::ALL {
            let adv = JointAdvantage::new(rng.random_range(-3.0..3.0)).unwrap();
            let s = resolve(&v.default_spec(), adv).unwrap();
            for r in scalar_check_ratios(&mut rng, 50) {
                let e = s.eval(ProbabilityRatio::new(r).unwrap());
                let want = reference_objective(&s, r);
                assert!((e.objective - want).abs() <= 1e-12 * (1.0 + want.abs()), "{v} r={r}");
                let fd = central_difference(|x| reference_objective(&s, x), r, 1e-6 * r);
                assert!(relative_error(&[e.ratio_gradient], &[fd], 1e-3) < 1e-5, "{v} r={r}: {} vs {fd}", e.ratio_gradient);
            }
        }
    }
}

#[test]
fn network_gradients_match_finite_differences() {
    for seed in 0..10 {
        assert!(mlp_gradient_error(seed) < 1e-4);
        assert!(policy_gradient_error(seed) < 1e-4);
        assert!(critic_loss_gradient_error(seed) < 1e-4);
    }
}

#[test]
fn actor_loss_gradients_match_finite_differences_for_every_variant() {
    for seed in 0..10 {
        for v in Variant::ALL {
            let err = actor_loss_gradient_error(seed, &v.default_spec());
            assert!(err < 1e-4, "{v} seed {seed}: {err}");
        }
    }
}

proptest! {
    #[test]
    fn barrier_objective_is_inversion_symmetric_in_its_penalty(log_r in -9.0f64..9.0, alpha in 0.0f64..50.0) {
        let r = log_r.exp();
        let pen = |x: f64| (barrier_objective(x, 0.0, alpha)).abs();
        prop_assert!((pen(r) - pen(1.0 / r)).abs() <= 1e-9 * pen(r).max(1e-300));
    }

    #[test]
    fn calibrated_barrier_is_stationary_at_its_target(a in -20.0f64..20.0) {
        prop_assume!(a.abs() > 1e-9);
        let adv = JointAdvantage::new(a).unwrap();
        let s = resolve(&Variant::Mars.default_spec(), adv).unwrap();
        let target = if a >= 0.0 { 1.25 } else { 0.8 };
        let g = s.eval(ProbabilityRatio::new(target).unwrap()).ratio_gradient;
        prop_assert!(g.abs() < 1e-9 * a.abs().max(1.0));
    }
}
