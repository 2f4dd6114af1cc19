//! Reference computations written independently of the library code paths.
#![allow(dead_code)]

use mars_core::approximator::{Action, GradientAccumulator, HeadKind, Mlp, ParameterVector, Policy};
use mars_core::trainer::{actor_loss, critic_loss, Sample};
use mars_core::TrustRegionSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Advantages as explicit truncated sums of discounted TD errors.
pub fn gae_direct(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    let delta = |k: usize| {
        let next = if k + 1 < n { values[k + 1] } else { bootstrap };
        let live = if dones[k] { 0.0 } else { 1.0 };
        rewards[k] + gamma * live * next - values[k]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            let mut weight = 1.0;
            for (k, &done) in dones.iter().enumerate().skip(t) {
                sum += weight * delta(k);
                if done {
                    break;
                }
                weight *= gamma * lambda;
            }
            sum
        })
        .collect()
}

/// Discounted return-to-go bootstrapped at the rollout end, minus the value.
pub fn monte_carlo_advantage(rewards: &[f64], values: &[f64], bootstrap: f64, dones: &[bool], gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    (0..n)
        .map(|t| {
            let mut g = 0.0;
            let mut discount = 1.0;
            let mut ended = false;
            for (reward, &done) in rewards[t..].iter().zip(&dones[t..]) {
                g += discount * reward;
                if done {
                    ended = true;
                    break;
                }
                discount *= gamma;
            }
            if !ended {
                g += discount * bootstrap;
            }
            g - values[t]
        })
        .collect()
}

pub struct Rollout {
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap: f64,
}

pub fn random_rollout(rng: &mut ChaCha8Rng, len: usize) -> Rollout {
    Rollout {
        rewards: (0..len).map(|_| rng.random_range(-2.0..2.0)).collect(),
        values: (0..len).map(|_| rng.random_range(-3.0..3.0)).collect(),
        dones: (0..len).map(|_| rng.random_bool(0.2)).collect(),
        bootstrap: rng.random_range(-3.0..3.0),
    }
}

/// Closed-form objectives, kept separate from the library's evaluators.
pub fn clipped_objective(r: f64, a: f64, lo: f64, hi: f64) -> f64 {
    (r * a).min(r.clamp(1.0 - lo, 1.0 + hi) * a)
}

pub fn quadratic_objective(r: f64, a: f64, c: f64) -> f64 {
    r * a - c * (r - 1.0) * (r - 1.0)
}

pub fn barrier_objective(r: f64, a: f64, alpha: f64) -> f64 {
    r * a - alpha * (r + 1.0 / r - 2.0)
}

pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Finite-difference gradient of `f` with respect to every parameter.
pub fn numeric_gradient<F: Fn(&ParameterVector) -> f64>(params: &ParameterVector, f: F, h: f64) -> Vec<f64> {
    let mut p = params.clone();
    (0..params.len())
        .map(|i| {
            let x = p.values()[i];
            p.values_mut()[i] = x + h;
            let up = f(&p);
            p.values_mut()[i] = x - h;
            let down = f(&p);
            p.values_mut()[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(floor)
}

pub const FD_STEP: f64 = 1e-6;

/// Head, log-prob and entropy gradients through the MLP against finite
/// differences, for both head kinds. Returns the worst relative error.
pub fn policy_gradient_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    let heads = [
        (HeadKind::Categorical { actions: 4 }, None),
        (HeadKind::Gaussian { dim: 2 }, Some(2)),
    ];
    for (head, gaussian_dim) in heads {
        let policy = Policy::new(5, &[8, 6], head);
        let params = policy.init(&mut rng, 1.0);
        let obs: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let action = match gaussian_dim {
            None => Action::Discrete(rng.random_range(0..4)),
            Some(d) => Action::Continuous((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()),
        };
        let (wl, we) = (rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0));
        let f = |p: &ParameterVector| {
            let tape = policy.forward(p, &obs).unwrap();
            wl * policy.log_prob(&tape, &action).unwrap() + we * tape.distribution().entropy()
        };
        let tape = policy.forward(&params, &obs).unwrap();
        let mut grads = GradientAccumulator::zeros_like(&params);
        policy.backward(&params, &tape, &action, wl, we, &mut grads).unwrap();
        let numeric = numeric_gradient(&params, f, FD_STEP);
        worst = worst.max(relative_error(grads.values(), &numeric, 1e-8));
    }
    worst
}

/// Plain MLP output gradient against finite differences.
pub fn mlp_gradient_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let net = Mlp::new(4, &[7, 5], 3);
    let params = net.init(&mut rng, 2f64.sqrt(), 1.0);
    let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = |p: &ParameterVector| {
        let (out, _) = net.forward(p, &x).unwrap();
        out.iter().zip(&w).map(|(o, w)| o * w).sum::<f64>()
    };
    let (_, tape) = net.forward(&params, &x).unwrap();
    let mut grads = GradientAccumulator::zeros_like(&params);
    net.backward(&params, &tape, &w, &mut grads).unwrap();
    relative_error(grads.values(), &numeric_gradient(&params, f, FD_STEP), 1e-8)
}

fn away_from_kinks(r: f64, kinks: &[f64]) -> bool {
    kinks.iter().all(|k| (r / k).ln().abs() > 0.02)
}

/// A minibatch of `steps` timesteps for `agents` agents. Old log-probs are
/// offset from the current policy so ratios spread around 1 while staying
/// clear of clip kinks.
pub fn random_actor_batch(
    rng: &mut ChaCha8Rng,
    policy: &Policy,
    params: &ParameterVector,
    steps: usize,
    agents: usize,
    kinks: &[f64],
) -> Vec<Sample> {
    let obs_dim = policy.net().input_dim();
    let actions = match policy.head() {
        HeadKind::Categorical { actions } => actions,
        HeadKind::Gaussian { .. } => unreachable!("discrete batches only"),
    };
    (0..steps)
        .map(|_| {
            let observations: Vec<Vec<f64>> = (0..agents)
                .map(|_| (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let acts: Vec<Action> = (0..agents).map(|_| Action::Discrete(rng.random_range(0..actions))).collect();
            let old_log_probs = observations
                .iter()
                .zip(&acts)
                .map(|(o, a)| {
                    let tape = policy.forward(params, o).unwrap();
                    let logp = policy.log_prob(&tape, a).unwrap();
                    loop {
                        let shift: f64 = rng.random_range(-0.6..0.6);
                        if away_from_kinks(shift.exp(), kinks) {
                            break logp - shift;
                        }
                    }
                })
                .collect();
            Sample {
                observations,
                actions: acts,
                old_log_probs,
                advantage: rng.random_range(-2.0..2.0),
                state: vec![],
                old_value: 0.0,
                value_target: 0.0,
            }
        })
        .collect()
}

pub fn actor_loss_gradient_error(seed: u64, spec: &TrustRegionSpec) -> f64 {
    let mut rng = rng(seed);
    let policy = Policy::new(6, &[8, 8], HeadKind::Categorical { actions: 3 });
    let params = policy.init(&mut rng, 1.0);
    let kinks = match spec {
        TrustRegionSpec::Mappo { eps } => vec![1.0 - eps, 1.0 + eps],
        TrustRegionSpec::MappoAsymmetric { eps_lower, eps_upper } => vec![1.0 - eps_lower, 1.0 + eps_upper],
        _ => vec![],
    };
    let samples = random_actor_batch(&mut rng, &policy, &params, 6, 3, &kinks);
    let batch: Vec<&Sample> = samples.iter().collect();
    let beta = 0.01;
    let analytic = actor_loss(&policy, &params, &batch, spec, beta).unwrap();
    let numeric = numeric_gradient(
        &params,
        |p| actor_loss(&policy, p, &batch, spec, beta).unwrap().loss,
        FD_STEP,
    );
    relative_error(analytic.grads.values(), &numeric, 1e-8)
}

pub fn critic_loss_gradient_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let critic = Mlp::new(5, &[8, 8], 1);
    let params = critic.init(&mut rng, 2f64.sqrt(), 1.0);
    let eps = 0.2;
    let samples: Vec<Sample> = (0..8)
        .map(|_| {
            let state: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v = critic.forward(&params, &state).unwrap().0[0];
            // keep |V − V_old| and both loss branches away from their switch points
            loop {
                let old_value = v + rng.random_range(-0.5..0.5);
                let value_target = v + rng.random_range(-1.0..1.0);
                let clipped = old_value + (v - old_value).clamp(-eps, eps);
                let gap = ((v - value_target).powi(2) - (clipped - value_target).powi(2)).abs();
                if ((v - old_value).abs() - eps).abs() > 0.02 && gap > 1e-3 {
                    break Sample {
                        observations: vec![],
                        actions: vec![],
                        old_log_probs: vec![],
                        advantage: 0.0,
                        state,
                        old_value,
                        value_target,
                    };
                }
            }
        })
        .collect();
    let batch: Vec<&Sample> = samples.iter().collect();
    let analytic = critic_loss(&critic, &params, &batch, eps, 0.5).unwrap();
    let numeric = numeric_gradient(
        &params,
        |p| critic_loss(&critic, p, &batch, eps, 0.5).unwrap().loss,
        FD_STEP,
    );
    relative_error(analytic.grads.values(), &numeric, 1e-8)
}

/// Ratios for scalar gradient checks, kept clear of clip kinks.
pub fn scalar_check_ratios(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    let kinks = [0.8, 1.2];
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r = rng.random_range(-3.0f64..3.0).exp();
        if away_from_kinks(r, &kinks) {
            out.push(r);
        }
    }
    out
}
