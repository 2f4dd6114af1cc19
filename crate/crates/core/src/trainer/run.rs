use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{actor_loss, critic_loss, ActorLoss, Sample};
use super::{DiagnosticsRecord, EvalPoint, RunArtifact, RunSummary, TrainConfig};
use crate::advantage::{gae, normalized};
use crate::approximator::{
    adam_step, clip_global_norm, Action, AdamState, HeadKind, Mlp, ParameterVector, Policy,
};
use crate::envs::{ActionSpace, EnvStep, Environment};
use crate::error::{Error, Result};

const ACTOR_OUTPUT_GAIN: f64 = 0.01;
const CRITIC_OUTPUT_GAIN: f64 = 1.0;

// independent ChaCha streams derived from the run seed
const STREAM_INIT: u64 = 0;
const STREAM_ACT: u64 = 1;
const STREAM_ENV: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_EVAL: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn at_update(update: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { what, detail, .. } => Error::NonFinite { what, update, detail },
        Error::Env(m) => Error::Env(format!("update {update}: {m}")),
        other => other,
    }
}

struct Worker {
    env: Box<dyn Environment + Send>,
    current: EnvStep,
    episode_return: f64,
}

fn discrete(action: &Action) -> usize {
    action.discrete().unwrap_or(0)
}

/// Mean return of `episodes` stochastic-policy episodes on a fresh instance.
fn evaluate(
    config: &TrainConfig,
    policy: &Policy,
    actor: &ParameterVector,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut env = config.env.build(config.trainer.agent_id)?;
    let mut total = 0.0;
    for _ in 0..config.trainer.eval_episodes {
        let mut step = env.reset(rng.random());
        let mut ret = 0.0;
        while !step.done {
            let mut joint = Vec::with_capacity(step.observations.len());
            for obs in &step.observations {
                let tape = policy.forward(actor, obs)?;
                joint.push(discrete(&policy.sample(&tape, rng)?));
            }
            step = env.step(&joint)?;
            ret += step.reward;
        }
        total += ret;
    }
    Ok(total / config.trainer.eval_episodes as f64)
}

/// Runs the full training loop. Deterministic for a fixed config.
pub fn run_training(config: &TrainConfig) -> Result<RunArtifact> {
    run_training_with(config, |_| {})
}

/// As [`run_training`], calling `observer` after every update.
pub fn run_training_with<F: FnMut(&DiagnosticsRecord)>(
    config: &TrainConfig,
    mut observer: F,
) -> Result<RunArtifact> {
    config.validate()?;
    let tc = &config.trainer;
    let probe = config.env.build(tc.agent_id)?;
    let spec = probe.spec();
    let actions = match spec.action_space {
        ActionSpace::Categorical(n) => n,
        ActionSpace::Continuous { .. } => {
            return Err(Error::UnsupportedVariant(
                "training loop drives categorical environments only".into(),
            ))
        }
    };
    drop(probe);

    let policy = Policy::new(spec.obs_dim, &tc.hidden, HeadKind::Categorical { actions });
    let critic = Mlp::new(spec.state_dim, &tc.hidden, 1);
    let mut init_rng = stream(tc.seed, STREAM_INIT);
    let mut actor_params = policy.init(&mut init_rng, ACTOR_OUTPUT_GAIN);
    let mut critic_params = critic.init(&mut init_rng, 2f64.sqrt(), CRITIC_OUTPUT_GAIN);
    let mut actor_opt = AdamState::new(&actor_params);
    let mut critic_opt = AdamState::new(&critic_params);

    let mut act_rng = stream(tc.seed, STREAM_ACT);
    let mut env_rng = stream(tc.seed, STREAM_ENV);
    let mut shuffle_rng = stream(tc.seed, STREAM_SHUFFLE);
    let mut eval_rng = stream(tc.seed, STREAM_EVAL);

    let mut workers = Vec::with_capacity(tc.update_batch_size);
    for _ in 0..tc.update_batch_size {
        let mut env = config.env.build(tc.agent_id)?;
        let current = env.reset(env_rng.random());
        workers.push(Worker {
            env,
            current,
            episode_return: 0.0,
        });
    }

    let num_updates = tc.num_updates();
    let mut diagnostics = Vec::with_capacity(num_updates);
    let mut eval_curve = Vec::new();
    let mut env_steps = 0;

    for update in 1..=num_updates {
        let tag = at_update(update);

        // rollout, one worker at a time in index order
        let mut samples = Vec::with_capacity(tc.steps_per_update());
        let mut raw_advantages = Vec::with_capacity(tc.steps_per_update());
        let mut finished_returns = Vec::new();
        for w in workers.iter_mut() {
            let mut rewards = Vec::with_capacity(tc.rollout_length);
            let mut dones = Vec::with_capacity(tc.rollout_length);
            let mut values = Vec::with_capacity(tc.rollout_length);
            let start = samples.len();
            for _ in 0..tc.rollout_length {
                let obs = w.current.observations.clone();
                let mut joint = Vec::with_capacity(obs.len());
                let mut acts = Vec::with_capacity(obs.len());
                let mut logps = Vec::with_capacity(obs.len());
                for o in &obs {
                    let tape = policy.forward(&actor_params, o).map_err(&tag)?;
                    let a = policy.sample(&tape, &mut act_rng).map_err(&tag)?;
                    logps.push(policy.log_prob(&tape, &a).map_err(&tag)?);
                    joint.push(discrete(&a));
                    acts.push(a);
                }
                let state = w.current.state.clone();
                let value = critic.forward(&critic_params, &state).map_err(&tag)?.0[0];
                let next = w.env.step(&joint).map_err(&tag)?;
                w.episode_return += next.reward;
                rewards.push(next.reward);
                dones.push(next.done);
                values.push(value);
                samples.push(Sample {
                    observations: obs,
                    actions: acts,
                    old_log_probs: logps,
                    advantage: 0.0,
                    state,
                    old_value: value,
                    value_target: 0.0,
                });
                w.current = if next.done {
                    finished_returns.push(std::mem::take(&mut w.episode_return));
                    w.env.reset(env_rng.random())
                } else {
                    next
                };
            }
            let bootstrap = critic.forward(&critic_params, &w.current.state).map_err(&tag)?.0[0];
            let set = gae(&rewards, &values, bootstrap, &dones, tc.gamma, tc.gae_lambda).map_err(&tag)?;
            for (k, s) in samples[start..].iter_mut().enumerate() {
                s.value_target = set.returns[k];
            }
            raw_advantages.extend(set.advantages);
        }
        env_steps += tc.steps_per_update();
        let used = if tc.advantage_normalization {
            normalized(&raw_advantages)
        } else {
            raw_advantages.clone()
        };
        for (s, &a) in samples.iter_mut().zip(&used) {
            s.advantage = a;
        }

        // optimisation
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut acc = UpdateStats::default();
        for _ in 0..tc.num_epochs {
            order.shuffle(&mut shuffle_rng);
            for chunk in split(&order, tc.num_minibatches) {
                let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
                let mut a = actor_loss(&policy, &actor_params, &batch, &config.trust_region, tc.entropy_coeff)
                    .map_err(&tag)?;
                let actor_norm = clip_global_norm(&mut a.grads, tc.max_grad_norm);
                adam_step(&mut actor_params, &a.grads, &mut actor_opt, tc.actor_lr).map_err(&tag)?;

                let mut c = critic_loss(&critic, &critic_params, &batch, tc.value_clip_eps, tc.value_coeff)
                    .map_err(&tag)?;
                let critic_norm = clip_global_norm(&mut c.grads, tc.max_grad_norm);
                adam_step(&mut critic_params, &c.grads, &mut critic_opt, tc.critic_lr).map_err(&tag)?;

                acc.add(&a, c.loss, actor_norm, critic_norm);
            }
        }

        let eval_return = if update % tc.eval_interval == 0 || update == num_updates {
            let r = evaluate(config, &policy, &actor_params, &mut eval_rng).map_err(&tag)?;
            eval_curve.push(EvalPoint {
                update,
                env_steps,
                mean_return: r,
            });
            Some(r)
        } else {
            None
        };

        let n = acc.count as f64;
        let record = DiagnosticsRecord {
            update,
            env_steps,
            mean_episode_return: if finished_returns.is_empty() {
                None
            } else {
                Some(finished_returns.iter().sum::<f64>() / finished_returns.len() as f64)
            },
            actor_loss: acc.actor_loss / n,
            critic_loss: acc.critic_loss / n,
            entropy: acc.entropy / n,
            min_ratio: acc.min_ratio,
            max_ratio: acc.max_ratio,
            mean_abs_adv: raw_advantages.iter().map(|a| a.abs()).sum::<f64>() / raw_advantages.len() as f64,
            actor_grad_norm: acc.actor_norm / n,
            critic_grad_norm: acc.critic_norm / n,
            eval_return,
        };
        observer(&record);
        diagnostics.push(record);
    }

    let summary = RunSummary::new(config, &diagnostics, eval_curve);
    Ok(RunArtifact {
        config: config.clone(),
        diagnostics,
        actor: actor_params,
        critic: critic_params,
        summary,
    })
}

/// `parts` contiguous chunks whose sizes differ by at most one.
fn split(order: &[usize], parts: usize) -> impl Iterator<Item = &[usize]> {
    let n = order.len();
    (0..parts).map(move |k| &order[k * n / parts..(k + 1) * n / parts])
}

struct UpdateStats {
    count: usize,
    actor_loss: f64,
    critic_loss: f64,
    entropy: f64,
    min_ratio: f64,
    max_ratio: f64,
    actor_norm: f64,
    critic_norm: f64,
}

impl Default for UpdateStats {
    fn default() -> Self {
        Self {
            count: 0,
            actor_loss: 0.0,
            critic_loss: 0.0,
            entropy: 0.0,
            min_ratio: f64::INFINITY,
            max_ratio: 0.0,
            actor_norm: 0.0,
            critic_norm: 0.0,
        }
    }
}

impl UpdateStats {
    fn add(&mut self, actor: &ActorLoss, critic_loss: f64, actor_norm: f64, critic_norm: f64) {
        self.count += 1;
        self.actor_loss += actor.loss;
        self.critic_loss += critic_loss;
        self.entropy += actor.mean_entropy;
        self.min_ratio = self.min_ratio.min(actor.min_ratio);
        self.max_ratio = self.max_ratio.max(actor.max_ratio);
        self.actor_norm += actor_norm;
        self.critic_norm += critic_norm;
    }
}
