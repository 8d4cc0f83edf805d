//! Training driver shared by AL-SAC and the penalized baselines.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::agent::{Agent, AlSac};
use super::buffer::{Batch, ReplayBuffer};
use super::eval::{evaluate_plan, evaluation_plan, PolicySnapshot};
use super::lagrange::DualSign;
use crate::env::{observe, sample_session, EvEnv, Normalizer, Transition, EPISODE_STEPS};
use crate::error::{Error, Result};
use crate::rng::{self, Rng, Stream};

/// Consecutive non-finite updates tolerated before training stops.
pub const MAX_NON_FINITE_UPDATES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Stop before an episode that could push the step count past this.
    pub max_env_steps: Option<usize>,
    pub gamma: f64,
    pub batch_size: usize,
    /// Network learning rate.
    pub lr: f64,
    pub alpha_lr: f64,
    pub lambda_lr: f64,
    /// Quadratic penalty weight; defaults to `lambda_lr`.
    pub penalty: Option<f64>,
    /// Soft target-update rate.
    pub eta: f64,
    /// Episodes of uniform-random actions before learning starts.
    pub warmup_episodes: usize,
    pub updates_per_step: usize,
    /// Critic updates per actor update.
    pub policy_delay: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub entropy_target: f64,
    pub dual_sign: DualSign,
    /// Episodes between checkpoint evaluations.
    pub checkpoint_every: usize,
    /// Training-day episodes per checkpoint evaluation.
    pub selection_episodes: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 1000,
            max_env_steps: None,
            gamma: 0.995,
            batch_size: 256,
            lr: 5e-4,
            alpha_lr: 1e-5,
            lambda_lr: 1e-5,
            penalty: None,
            eta: 0.005,
            warmup_episodes: 5,
            updates_per_step: 1,
            policy_delay: 2,
            buffer_capacity: 100_000,
            hidden: vec![256, 256],
            entropy_target: -1.0,
            dual_sign: DualSign::Residual,
            checkpoint_every: 10,
            selection_episodes: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(format!("train: {m}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if self.buffer_capacity < self.batch_size {
            return fail("buffer_capacity must be at least batch_size");
        }
        for (name, v) in [
            ("lr", self.lr),
            ("alpha_lr", self.alpha_lr),
            ("lambda_lr", self.lambda_lr),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return fail(&format!("{name} must be positive"));
            }
        }
        if let Some(p) = self.penalty {
            if !(p.is_finite() && p >= 0.0) {
                return fail("penalty must be non-negative");
            }
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return fail("eta must lie in [0, 1]");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return fail("hidden layers must be non-empty and positive");
        }
        if !self.entropy_target.is_finite() {
            return fail("entropy_target must be finite");
        }
        if self.updates_per_step == 0 || self.policy_delay == 0 {
            return fail("updates_per_step and policy_delay must be positive");
        }
        if self.checkpoint_every == 0 || self.selection_episodes == 0 {
            return fail("checkpoint_every and selection_episodes must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Cumulative environment steps.
    pub env_steps: usize,
    /// Charging cost of the episode (€), unshaped.
    pub episode_cost_eur: f64,
    pub episode_violation_kwh: f64,
    pub alpha: f64,
    pub lambda: f64,
    /// Means over the episode's updates; empty before learning starts.
    pub critic_loss: Option<f64>,
    pub cost_critic_loss: Option<f64>,
    pub actor_objective: Option<f64>,
}

pub const LOG_COLUMNS: [&str; 9] = [
    "episode",
    "env_steps",
    "episode_cost_eur",
    "episode_violation_kwh",
    "alpha",
    "lambda",
    "critic_loss",
    "cost_critic_loss",
    "actor_objective",
];

/// Renders the training log as CSV, optionally with a leading `method` column.
pub fn train_log_csv(records: &[EpisodeRecord], method: Option<&str>) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::new();
    if method.is_some() {
        out.push_str("method,");
    }
    out.push_str(&LOG_COLUMNS.join(","));
    out.push('\n');
    for r in records {
        if let Some(m) = method {
            out.push_str(m);
            out.push(',');
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.episode,
            r.env_steps,
            r.episode_cost_eur,
            r.episode_violation_kwh,
            r.alpha,
            r.lambda,
            opt(r.critic_loss),
            opt(r.cost_critic_loss),
            opt(r.actor_objective),
        );
    }
    out
}

pub fn write_train_log(path: &Path, records: &[EpisodeRecord], method: Option<&str>) -> Result<()> {
    std::fs::write(path, train_log_csv(records, method)).map_err(|e| Error::io(path, e))
}

/// A policy snapshot with its score on the training-day selection episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Episodes completed when the snapshot was taken.
    pub episode: usize,
    pub train_cost_eur: f64,
    pub train_violation_kwh: f64,
    pub policy: PolicySnapshot,
}

impl Checkpoint {
    /// Selection rule: among snapshots whose violation is within `budget`, the
    /// lowest cost wins; if none is, the lowest violation wins. Ties keep the
    /// earlier snapshot.
    pub fn better_than(&self, other: &Checkpoint, budget: f64) -> bool {
        let (a, b) = (self.train_violation_kwh <= budget, other.train_violation_kwh <= budget);
        match (a, b) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => self.train_cost_eur < other.train_cost_eur,
            (false, false) => self.train_violation_kwh < other.train_violation_kwh,
        }
    }
}

pub const SELECTION_RULE: &str = "best checkpoint = lowest training cost among checkpoints with \
training violation <= cost budget, else lowest training violation";

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: Vec<EpisodeRecord>,
    pub best: Checkpoint,
    pub final_policy: PolicySnapshot,
    pub env_steps: usize,
    pub updates: usize,
    /// Set when training stopped on repeated non-finite updates.
    pub halted: Option<String>,
}

#[derive(Default)]
struct Running {
    n: usize,
    cost_n: usize,
    critic: f64,
    cost: f64,
    actor: f64,
}

fn mean(sum: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

/// Runs Algorithm-style training of `agent` on `env`.
///
/// `policy_rng` drives exploration, warmup actions, replay sampling and the
/// reparameterization noise. Sessions and training days come from the
/// session stream of `cfg.seed`. When `reward_penalty` is set, the stored
/// reward is `R - sigma * R^c`; the log always reports the raw cost and
/// violation.
pub fn train_agent<A: Agent + ?Sized>(
    agent: &mut A,
    env: &mut EvEnv,
    norm: &Normalizer,
    cfg: &TrainConfig,
    reward_penalty: Option<f64>,
    policy_rng: &mut Rng,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut session_rng = rng::stream(cfg.seed, Stream::Session);
    let selection = evaluation_plan(
        env,
        cfg.selection_episodes,
        &mut rng::stream(cfg.seed, Stream::Selection),
    );
    let budget = env.config().cost_budget;
    let days = env.valid_days();
    let (scale, offset) = agent.action_affine();
    let (lo, hi) = (-env.config().max_discharge, env.config().max_charge);

    let score = |agent: &A, env: &mut EvEnv, episode: usize| -> Result<Checkpoint> {
        let mut policy = agent.snapshot();
        let m = evaluate_plan(&mut policy, env, norm, &selection)?;
        Ok(Checkpoint {
            episode,
            train_cost_eur: m.avg_cost_eur,
            train_violation_kwh: m.avg_violation_kwh,
            policy,
        })
    };

    let mut best = score(agent, env, 0)?;
    let mut last_scored = 0;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut log = Vec::new();
    let (mut env_steps, mut updates, mut failures) = (0, 0, 0);
    let mut halted = None;

    for episode in 0..cfg.episodes {
        if cfg.max_env_steps.is_some_and(|max| env_steps + EPISODE_STEPS > max) {
            break;
        }
        let day = days[session_rng.random_range(0..days.len())];
        let session = sample_session(&mut session_rng, env.config());
        let state = env.reset(day, &session)?;
        let mut obs = observe(&state, env.config(), norm);
        let warm = episode < cfg.warmup_episodes;
        let (mut cost, mut violation) = (0.0, 0.0);
        let mut run = Running::default();
        loop {
            let action = if warm {
                policy_rng.random_range(lo..=hi)
            } else {
                match agent.explore(&obs, policy_rng) {
                    Ok(a) if a.is_finite() => a,
                    Ok(_) | Err(Error::NonFinite(_)) => {
                        halted = Some("policy produced a non-finite action".to_string());
                        break;
                    }
                    Err(e) => return Err(e),
                }
            };
            let out = env.step(action)?;
            let next_obs = observe(&out.state, env.config(), norm);
            cost -= out.reward;
            violation += out.cost;
            let reward = match reward_penalty {
                Some(sigma) => crate::baselines::shaped_reward(out.reward, out.cost, sigma),
                None => out.reward,
            };
            buffer.push(Transition {
                state: obs,
                action,
                reward,
                cost: out.cost,
                next_state: next_obs.clone(),
                done: out.done,
            });
            env_steps += 1;
            obs = next_obs;

            if !warm && buffer.len() >= cfg.batch_size {
                for _ in 0..cfg.updates_per_step {
                    let items = buffer.sample(cfg.batch_size, policy_rng)?;
                    let batch = Batch::from_transitions(&items, scale, offset);
                    match agent.update(&batch, policy_rng) {
                        Ok(s) => {
                            failures = 0;
                            updates += 1;
                            run.n += 1;
                            run.critic += s.critic_loss;
                            if let Some(c) = s.cost_critic_loss {
                                run.cost_n += 1;
                                run.cost += c;
                            }
                            run.actor += s.actor_objective;
                        }
                        Err(Error::NonFinite(what)) => {
                            failures += 1;
                            if failures > MAX_NON_FINITE_UPDATES {
                                halted = Some(format!("{failures} consecutive non-finite updates (last: {what})"));
                                break;
                            }
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
            if out.done || halted.is_some() {
                break;
            }
        }
        let (alpha, lambda) = agent.multipliers();
        log.push(EpisodeRecord {
            episode: episode + 1,
            env_steps,
            episode_cost_eur: cost,
            episode_violation_kwh: violation,
            alpha,
            lambda,
            critic_loss: mean(run.critic, run.n),
            cost_critic_loss: mean(run.cost, run.cost_n),
            actor_objective: mean(run.actor, run.n),
        });
        if halted.is_some() {
            break;
        }
        if (episode + 1) % cfg.checkpoint_every == 0 {
            let c = score(agent, env, episode + 1)?;
            last_scored = episode + 1;
            if c.better_than(&best, budget) {
                best = c;
            }
        }
    }
    if halted.is_none() && log.len() > last_scored {
        let c = score(agent, env, log.len())?;
        if c.better_than(&best, budget) {
            best = c;
        }
    }
    Ok(TrainOutcome {
        log,
        best,
        final_policy: agent.snapshot(),
        env_steps,
        updates,
        halted,
    })
}

/// Trains a fresh AL-SAC agent; network initialization and all learning noise
/// come from the policy stream of `cfg.seed`.
pub fn train(env: &mut EvEnv, norm: &Normalizer, cfg: &TrainConfig) -> Result<(AlSac, TrainOutcome)> {
    cfg.validate()?;
    let mut policy_rng = rng::stream(cfg.seed, Stream::Policy);
    let mut agent = AlSac::new(env.config(), cfg, &mut policy_rng);
    let outcome = train_agent(&mut agent, env, norm, cfg, None, &mut policy_rng)?;
    Ok((agent, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EvEnvConfig, TruncatedNormal};
    use crate::prices::{gen_synthetic, SyntheticPriceSpec};
    use std::sync::Arc;

    fn setup() -> (EvEnv, Normalizer) {
        let s = Arc::new(gen_synthetic(&SyntheticPriceSpec::two_tier(0.05, 0.30, 0, 6), 6).unwrap());
        let norm = Normalizer::from_series(&s);
        let env_cfg = EvEnvConfig {
            arrival: TruncatedNormal::fixed(18.0),
            departure: TruncatedNormal::fixed(8.0),
            initial_soc: TruncatedNormal::fixed(0.5),
            ..EvEnvConfig::default()
        };
        (EvEnv::new(env_cfg, s).unwrap(), norm)
    }

    fn tiny() -> TrainConfig {
        TrainConfig {
            episodes: 12,
            hidden: vec![8, 8],
            batch_size: 32,
            warmup_episodes: 2,
            checkpoint_every: 4,
            selection_episodes: 2,
            seed: 9,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_episodes_gives_empty_log_and_initial_checkpoint() {
        let (mut env, norm) = setup();
        let cfg = TrainConfig { episodes: 0, ..tiny() };
        let (_, out) = train(&mut env, &norm, &cfg).unwrap();
        assert!(out.log.is_empty());
        assert_eq!(out.best.episode, 0);
        assert_eq!(out.best.policy, out.final_policy);
    }

    #[test]
    fn same_seed_same_log() {
        let (mut env, norm) = setup();
        let (_, a) = train(&mut env, &norm, &tiny()).unwrap();
        let (_, b) = train(&mut env, &norm, &tiny()).unwrap();
        assert_eq!(train_log_csv(&a.log, None), train_log_csv(&b.log, None));
        assert_eq!(a.log.len(), 12);
        assert!(a.updates > 0);
        assert!(a.log[0].critic_loss.is_none());
        assert!(a.log.last().unwrap().critic_loss.is_some());
    }

    #[test]
    fn step_cap_is_respected() {
        let (mut env, norm) = setup();
        let cfg = TrainConfig {
            max_env_steps: Some(100),
            ..tiny()
        };
        let (_, out) = train(&mut env, &norm, &cfg).unwrap();
        assert!(out.env_steps <= 100);
        assert_eq!(out.log.len(), 4);
    }

    #[test]
    fn selection_prefers_feasible_then_cheap() {
        let mut r = crate::rng::stream(0, Stream::Policy);
        let head = crate::nn::GaussianPolicyHead::init(3, &[2], 1.0, 0.0, &mut r);
        let mk = |c, v| Checkpoint {
            episode: 0,
            train_cost_eur: c,
            train_violation_kwh: v,
            policy: PolicySnapshot::Gaussian(head.clone()),
        };
        assert!(mk(5.0, 0.0).better_than(&mk(-1.0, 0.5), 0.024));
        assert!(mk(-1.0, 0.01).better_than(&mk(0.0, 0.0), 0.024));
        assert!(mk(9.0, 0.3).better_than(&mk(-9.0, 0.4), 0.024));
        assert!(!mk(1.0, 0.0).better_than(&mk(1.0, 0.0), 0.024));
    }

    #[test]
    fn log_columns() {
        let rec = EpisodeRecord {
            episode: 1,
            env_steps: 20,
            episode_cost_eur: 0.5,
            episode_violation_kwh: 0.0,
            alpha: 0.0,
            lambda: 1e-5,
            critic_loss: None,
            cost_critic_loss: Some(2.0),
            actor_objective: None,
        };
        let csv = train_log_csv(&[rec], Some("sac"));
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,episode,env_steps,episode_cost_eur,episode_violation_kwh,alpha,lambda,critic_loss,cost_critic_loss,actor_objective"
        );
        assert_eq!(lines.next().unwrap(), "sac,1,20,0.5,0,0,0.00001,,2,");
    }
}
