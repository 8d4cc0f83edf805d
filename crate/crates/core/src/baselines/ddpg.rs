//! Minimal DDPG: deterministic tanh actor, one critic, targets for both, and
//! additive Gaussian exploration noise.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::alsac::agent::{layer_sizes, Agent, AgentManifest, UpdateStats};
use crate::alsac::buffer::Batch;
use crate::alsac::critic::{mse_step, with_action};
use crate::alsac::eval::{DeterministicActor, PolicySnapshot};
use crate::alsac::train::TrainConfig;
use crate::env::EvEnvConfig;
use crate::error::Result;
use crate::nn::{soft_update, Adam, DenseNet};
use crate::rng::Rng;

#[derive(Clone, Debug)]
pub struct Ddpg {
    pub actor: DeterministicActor,
    pub actor_target: DenseNet,
    actor_adam: Adam,
    pub critic: DenseNet,
    pub critic_target: DenseNet,
    critic_adam: Adam,
    /// Exploration noise std in kWh.
    noise_std: f64,
    max_discharge: f64,
    max_charge: f64,
    gamma: f64,
    lr: f64,
    eta: f64,
    updates: u64,
}

impl Ddpg {
    /// `noise_fraction` scales the exploration std relative to the action
    /// half-range.
    pub fn new(env: &EvEnvConfig, cfg: &TrainConfig, noise_fraction: f64, rng: &mut Rng) -> Self {
        let obs_len = env.observation_len();
        let (scale, offset) = env.action_affine();
        let actor_net = DenseNet::init(&layer_sizes(obs_len, &cfg.hidden, 1), 0.01, rng);
        let critic = DenseNet::init(&layer_sizes(obs_len + 1, &cfg.hidden, 1), 1.0, rng);
        Self {
            actor_target: actor_net.clone(),
            actor_adam: Adam::new(actor_net.params().len()),
            actor: DeterministicActor {
                net: actor_net,
                scale,
                offset,
            },
            critic_target: critic.clone(),
            critic_adam: Adam::new(critic.params().len()),
            critic,
            noise_std: noise_fraction * scale,
            max_discharge: env.max_discharge,
            max_charge: env.max_charge,
            gamma: cfg.gamma,
            lr: cfg.lr,
            eta: cfg.eta,
            updates: 0,
        }
    }
}

impl Agent for Ddpg {
    fn explore(&mut self, obs: &[f64], rng: &mut Rng) -> Result<f64> {
        let z: f64 = rng.sample(StandardNormal);
        let a = self.actor.action(obs)? + self.noise_std * z;
        Ok(a.clamp(-self.max_discharge, self.max_charge))
    }

    fn update(&mut self, batch: &Batch, _rng: &mut Rng) -> Result<UpdateStats> {
        let n = batch.len();
        let (next_u, _) = self.actor_target.forward_batch(batch.next_obs.view())?;
        let next_a: Vec<f64> = next_u.column(0).iter().map(|u| u.tanh()).collect();
        let xn = with_action(batch.next_obs.view(), &next_a);
        let (qn, _) = self.critic_target.forward_batch(xn.view())?;
        let y: Vec<f64> = (0..n)
            .map(|i| {
                if batch.dones[i] {
                    batch.rewards[i]
                } else {
                    batch.rewards[i] + self.gamma * qn[[i, 0]]
                }
            })
            .collect();
        let x = with_action(batch.obs.view(), &batch.actions);
        let critic_loss = mse_step(&mut self.critic, &mut self.critic_adam, x.view(), &y, self.lr)?;

        let (u, actor_cache) = self.actor.net.forward_batch(batch.obs.view())?;
        let a: Vec<f64> = u.column(0).iter().map(|u| u.tanh()).collect();
        let xa = with_action(batch.obs.view(), &a);
        let (q, critic_cache) = self.critic.forward_batch(xa.view())?;
        let ones = Array2::from_elem((n, 1), 1.0);
        let dx = self.critic.backward(&critic_cache, ones.view(), None)?;
        let last = xa.ncols() - 1;
        // descend on -mean Q
        let mut upstream = Array2::zeros((n, 1));
        for i in 0..n {
            upstream[[i, 0]] = -dx[[i, last]] * (1.0 - a[i] * a[i]) / n as f64;
        }
        let mut grads = vec![0.0; self.actor.net.params().len()];
        self.actor
            .net
            .param_gradient(&actor_cache, upstream.view(), &mut grads)?;
        self.actor_adam.step(self.actor.net.params_mut(), &grads, self.lr)?;

        soft_update(self.critic_target.params_mut(), self.critic.params(), self.eta)?;
        soft_update(self.actor_target.params_mut(), self.actor.net.params(), self.eta)?;
        self.updates += 1;
        Ok(UpdateStats {
            critic_loss,
            cost_critic_loss: None,
            actor_objective: q.column(0).sum() / n as f64,
        })
    }

    fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot::Deterministic(self.actor.clone())
    }

    fn multipliers(&self) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn action_affine(&self) -> (f64, f64) {
        (self.actor.scale, self.actor.offset)
    }

    fn named_nets(&self) -> Vec<(&'static str, &DenseNet)> {
        vec![
            ("actor", &self.actor.net),
            ("actor_target", &self.actor_target),
            ("q", &self.critic),
            ("q_target", &self.critic_target),
        ]
    }

    fn manifest(&self) -> AgentManifest {
        AgentManifest {
            algorithm: "ddpg".into(),
            updates: self.updates,
            actor_updates: self.updates,
            lagrange: None,
        }
    }
}
