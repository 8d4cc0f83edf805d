//! Episode rollouts and test-split evaluation for any controller.

use serde::{Deserialize, Serialize};

use crate::env::{observe, sample_session, EpisodeState, EvEnv, Normalizer, Session};
use crate::error::{Error, Result};
use crate::nn::{DenseNet, GaussianPolicyHead};
use crate::rng::Rng;

/// What a controller sees at each step.
pub struct StepContext<'a> {
    pub env: &'a EvEnv,
    pub state: &'a EpisodeState,
    pub obs: &'a [f64],
    pub day: usize,
    pub session: &'a Session,
}

pub trait Controller {
    fn begin_episode(&mut self, _env: &EvEnv, _day: usize, _session: &Session) -> Result<()> {
        Ok(())
    }

    /// Requested action in kWh.
    fn act(&mut self, ctx: &StepContext<'_>) -> Result<f64>;
}

/// Deterministic actor `scale * tanh(net(obs)) + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterministicActor {
    pub net: DenseNet,
    pub scale: f64,
    pub offset: f64,
}

impl DeterministicActor {
    pub fn action(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.scale * self.net.forward(obs)?[0].tanh() + self.offset)
    }
}

/// A frozen policy evaluated in deterministic mode.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySnapshot {
    /// Squashed-Gaussian policy; acts with its squashed mean.
    Gaussian(GaussianPolicyHead),
    Deterministic(DeterministicActor),
}

impl PolicySnapshot {
    pub fn action(&self, obs: &[f64]) -> Result<f64> {
        match self {
            PolicySnapshot::Gaussian(head) => head.mean_action(obs),
            PolicySnapshot::Deterministic(actor) => actor.action(obs),
        }
    }

    pub fn net(&self) -> &DenseNet {
        match self {
            PolicySnapshot::Gaussian(head) => &head.net,
            PolicySnapshot::Deterministic(actor) => &actor.net,
        }
    }
}

impl Controller for PolicySnapshot {
    fn act(&mut self, ctx: &StepContext<'_>) -> Result<f64> {
        self.action(ctx.obs)
    }
}

/// Always requests the same action.
#[derive(Clone, Copy, Debug)]
pub struct ConstantController(pub f64);

impl Controller for ConstantController {
    fn act(&mut self, _ctx: &StepContext<'_>) -> Result<f64> {
        Ok(self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Series index of the hour.
    pub index: usize,
    pub price: f64,
    /// SOC at the start of the hour (kWh).
    pub soc: f64,
    pub parked: bool,
    /// Applied action (kWh).
    pub action: f64,
    pub reward: f64,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub day: usize,
    pub session: Session,
    /// Charging cost, the negative of the reward sum (€).
    pub cost_eur: f64,
    /// Total SOC violation (kWh).
    pub violation_kwh: f64,
    pub steps: Vec<StepRecord>,
    pub final_soc: f64,
}

pub fn run_episode(
    controller: &mut dyn Controller,
    env: &mut EvEnv,
    norm: &Normalizer,
    day: usize,
    session: &Session,
) -> Result<EpisodeResult> {
    controller.begin_episode(env, day, session)?;
    let mut state = env.reset(day, session)?;
    let mut steps = Vec::new();
    let (mut reward_sum, mut violation) = (0.0, 0.0);
    loop {
        let obs = observe(&state, env.config(), norm);
        let index = env.current_index().expect("episode active");
        let action = controller.act(&StepContext {
            env,
            state: &state,
            obs: &obs,
            day,
            session,
        })?;
        let out = env.step(action)?;
        steps.push(StepRecord {
            index,
            price: state.price(),
            soc: state.soc,
            parked: state.parked,
            action: out.applied_action,
            reward: out.reward,
            cost: out.cost,
        });
        reward_sum += out.reward;
        violation += out.cost;
        state = out.state;
        if out.done {
            break;
        }
    }
    Ok(EpisodeResult {
        day,
        session: *session,
        cost_eur: -reward_sum,
        violation_kwh: violation,
        steps,
        final_soc: state.soc,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalMetrics {
    pub avg_cost_eur: f64,
    pub avg_violation_kwh: f64,
    pub episodes: Vec<EpisodeResult>,
}

impl EvalMetrics {
    pub fn from_episodes(episodes: Vec<EpisodeResult>) -> Self {
        let n = episodes.len().max(1) as f64;
        Self {
            avg_cost_eur: episodes.iter().map(|e| e.cost_eur).sum::<f64>() / n,
            avg_violation_kwh: episodes.iter().map(|e| e.violation_kwh).sum::<f64>() / n,
            episodes,
        }
    }
}

/// Episode plan for evaluation: days cycle through the valid days of the
/// environment's series, sessions are drawn from `rng`.
pub fn evaluation_plan(env: &EvEnv, episodes: usize, rng: &mut Rng) -> Vec<(usize, Session)> {
    let days = env.valid_days();
    (0..episodes)
        .map(|i| (days[i % days.len()], sample_session(rng, env.config())))
        .collect()
}

pub fn evaluate_plan(
    controller: &mut dyn Controller,
    env: &mut EvEnv,
    norm: &Normalizer,
    plan: &[(usize, Session)],
) -> Result<EvalMetrics> {
    if plan.is_empty() {
        return Err(Error::InvalidConfig("evaluation needs at least one episode".into()));
    }
    let episodes = plan
        .iter()
        .map(|(day, session)| run_episode(controller, env, norm, *day, session))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalMetrics::from_episodes(episodes))
}

/// Runs `episodes` deterministic-policy episodes over the environment's series.
pub fn evaluate(
    controller: &mut dyn Controller,
    env: &mut EvEnv,
    norm: &Normalizer,
    episodes: usize,
    rng: &mut Rng,
) -> Result<EvalMetrics> {
    let plan = evaluation_plan(env, episodes, rng);
    evaluate_plan(controller, env, norm, &plan)
}
