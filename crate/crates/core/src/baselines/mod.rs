//! Comparison methods: penalized-reward SAC and DDPG, and LP-based MPC.

pub mod ddpg;
pub mod lp;
pub mod mpc;

use serde::{Deserialize, Serialize};

pub use ddpg::Ddpg;
pub use lp::{solve_charging_lp, LpProblem, LpSolution};
pub use mpc::{forecast_prices, mpc_rollout, DepartureMode, MpcConfig, MpcController};

use crate::alsac::agent::{Agent, AlSac};
use crate::alsac::train::{train_agent, TrainConfig, TrainOutcome};
use crate::env::{EvEnv, Normalizer};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// `R - sigma * R^c`.
pub fn shaped_reward(reward: f64, cost: f64, sigma: f64) -> f64 {
    reward - sigma * cost
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenalizedBase {
    #[default]
    Sac,
    Ddpg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    /// € per kWh of violation.
    pub sigma: f64,
    pub base: PenalizedBase,
    /// DDPG exploration std as a fraction of the action half-range.
    pub exploration_noise: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            sigma: 1.2,
            base: PenalizedBase::Sac,
            exploration_noise: 0.1,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig("penalty sigma must be non-negative".into()));
        }
        if !(self.exploration_noise.is_finite() && self.exploration_noise >= 0.0) {
            return Err(Error::InvalidConfig("exploration_noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Trains SAC (lambda frozen at 0) or DDPG on shaped rewards. Logs report the
/// unshaped cost and violation.
pub fn train_penalized(
    env: &mut EvEnv,
    norm: &Normalizer,
    cfg: &TrainConfig,
    pen: &PenaltyConfig,
) -> Result<(Box<dyn Agent>, TrainOutcome)> {
    cfg.validate()?;
    pen.validate()?;
    let mut policy_rng = rng::stream(cfg.seed, Stream::Policy);
    let mut agent: Box<dyn Agent> = match pen.base {
        PenalizedBase::Sac => Box::new(AlSac::new(env.config(), cfg, &mut policy_rng).unconstrained()),
        PenalizedBase::Ddpg => Box::new(Ddpg::new(env.config(), cfg, pen.exploration_noise, &mut policy_rng)),
    };
    let outcome = train_agent(agent.as_mut(), env, norm, cfg, Some(pen.sigma), &mut policy_rng)?;
    Ok((agent, outcome))
}
