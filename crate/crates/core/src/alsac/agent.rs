//! The AL-SAC learner and the interface shared with the baseline learners.

use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::buffer::Batch;
use super::critic::{cost_critic_target, critic_target, next_actions, with_action, CriticEnsemble, CriticPair};
use super::eval::PolicySnapshot;
use super::lagrange::{ActorPass, LagrangeState};
use super::train::TrainConfig;
use crate::env::EvEnvConfig;
use crate::error::Result;
use crate::nn::{checkpoint, Adam, DenseNet, GaussianPolicyHead};
use crate::rng::Rng;

/// Mean losses of one gradient update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    /// `None` for learners without cost critics.
    pub cost_critic_loss: Option<f64>,
    pub actor_objective: f64,
}

/// An off-policy learner driven by [`super::train::train_agent`].
pub trait Agent {
    /// Exploratory action in kWh.
    fn explore(&mut self, obs: &[f64], rng: &mut Rng) -> Result<f64>;
    /// One gradient update on a replay batch.
    fn update(&mut self, batch: &Batch, rng: &mut Rng) -> Result<UpdateStats>;
    /// Deterministic policy for evaluation.
    fn snapshot(&self) -> PolicySnapshot;
    /// Current `(alpha, lambda)`; zero for learners without them.
    fn multipliers(&self) -> (f64, f64);
    /// `(scale, offset)` mapping normalized actions to kWh.
    fn action_affine(&self) -> (f64, f64);
    /// Every network, by name.
    fn named_nets(&self) -> Vec<(&'static str, &DenseNet)>;
    fn manifest(&self) -> AgentManifest;
}

/// Counters and multipliers written next to an agent checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentManifest {
    pub algorithm: String,
    pub updates: u64,
    pub actor_updates: u64,
    pub lagrange: Option<LagrangeState>,
}

/// Saves every network of `agent` to `path`.
pub fn save_agent<A: Agent + ?Sized>(agent: &A, path: &Path) -> Result<()> {
    checkpoint::save(path, &agent.named_nets())
}

pub fn gaussian_normals(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Squashed-Gaussian actor, twin reward and cost critics, and the dual state.
#[derive(Clone, Debug)]
pub struct AlSac {
    pub policy: GaussianPolicyHead,
    policy_adam: Adam,
    pub critics: CriticEnsemble,
    pub lagrange: LagrangeState,
    gamma: f64,
    lr: f64,
    eta: f64,
    policy_delay: usize,
    updates: u64,
    actor_updates: u64,
}

/// Layer sizes `[input, hidden..., output]`.
pub fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(input);
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    sizes
}

impl AlSac {
    /// Fresh learner; draws network initializations from `rng`.
    pub fn new(env: &EvEnvConfig, cfg: &TrainConfig, rng: &mut Rng) -> Self {
        let obs_len = env.observation_len();
        let (scale, offset) = env.action_affine();
        let policy = GaussianPolicyHead::init(obs_len, &cfg.hidden, scale, offset, rng);
        let critic_sizes = layer_sizes(obs_len + 1, &cfg.hidden, 1);
        let critics = CriticEnsemble {
            reward: CriticPair::new(&critic_sizes, rng),
            cost: CriticPair::new(&critic_sizes, rng),
        };
        let mut lagrange = LagrangeState::new(cfg.alpha_lr, cfg.lambda_lr, cfg.entropy_target, env.cost_budget);
        lagrange.penalty = cfg.penalty;
        lagrange.sign = cfg.dual_sign;
        Self {
            policy_adam: Adam::new(policy.net.params().len()),
            policy,
            critics,
            lagrange,
            gamma: cfg.gamma,
            lr: cfg.lr,
            eta: cfg.eta,
            policy_delay: cfg.policy_delay.max(1),
            updates: 0,
            actor_updates: 0,
        }
    }

    /// Plain SAC: lambda frozen at its initial value and no quadratic penalty.
    pub fn unconstrained(mut self) -> Self {
        self.lagrange.constrained = false;
        self
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }
}

impl Agent for AlSac {
    fn explore(&mut self, obs: &[f64], rng: &mut Rng) -> Result<f64> {
        Ok(self.policy.sample(obs, rng)?.0)
    }

    fn update(&mut self, batch: &Batch, rng: &mut Rng) -> Result<UpdateStats> {
        let n = batch.len();
        let next = next_actions(&self.policy, batch, &gaussian_normals(rng, n))?;
        let y = critic_target(batch, &self.critics.reward, &next, self.gamma, self.lagrange.alpha)?;
        let yc = cost_critic_target(batch, &self.critics.cost, &next, self.gamma)?;
        let x = with_action(batch.obs.view(), &batch.actions);
        let critic_loss = self.critics.reward.update(x.view(), &y, self.lr)?;
        let cost_critic_loss = self.critics.cost.update(x.view(), &yc, self.lr)?;

        let actor_step = self.updates.is_multiple_of(self.policy_delay as u64);
        let xi = gaussian_normals(rng, n);
        let pass = if actor_step {
            ActorPass::new(&self.policy, &self.critics, batch.obs.view(), &xi)?
        } else {
            ActorPass::statistics(&self.policy, &self.critics, batch.obs.view(), &xi)?
        };
        self.lagrange.dual_update(pass.mean_log_prob(), pass.mean_cost_q());
        let actor_objective = pass.value(&self.lagrange);
        if actor_step {
            let ascent = pass.gradient(&self.policy, &self.lagrange)?;
            let descent: Vec<f64> = ascent.iter().map(|g| -g).collect();
            self.policy_adam.step(self.policy.net.params_mut(), &descent, self.lr)?;
            self.actor_updates += 1;
        }
        self.critics.reward.soft_update(self.eta)?;
        self.critics.cost.soft_update(self.eta)?;
        self.updates += 1;
        Ok(UpdateStats {
            critic_loss,
            cost_critic_loss: Some(cost_critic_loss),
            actor_objective,
        })
    }

    fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot::Gaussian(self.policy.clone())
    }

    fn multipliers(&self) -> (f64, f64) {
        (self.lagrange.alpha, self.lagrange.lambda)
    }

    fn action_affine(&self) -> (f64, f64) {
        (self.policy.scale, self.policy.offset)
    }

    fn named_nets(&self) -> Vec<(&'static str, &DenseNet)> {
        let r = &self.critics.reward;
        let c = &self.critics.cost;
        vec![
            ("policy", &self.policy.net),
            ("q1", &r.online[0]),
            ("q2", &r.online[1]),
            ("q1_target", &r.target[0]),
            ("q2_target", &r.target[1]),
            ("qc1", &c.online[0]),
            ("qc2", &c.online[1]),
            ("qc1_target", &c.target[0]),
            ("qc2_target", &c.target[1]),
        ]
    }

    fn manifest(&self) -> AgentManifest {
        AgentManifest {
            algorithm: if self.lagrange.constrained { "alsac" } else { "sac" }.into(),
            updates: self.updates,
            actor_updates: self.actor_updates,
            lagrange: Some(self.lagrange.clone()),
        }
    }
}
