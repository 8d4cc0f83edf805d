//! Receding-horizon MPC over the charging LP.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::lp::{solve_charging_lp, LpProblem};
use crate::alsac::eval::{evaluate, Controller, EvalMetrics, StepContext};
use crate::env::{EvEnv, EvEnvConfig, Normalizer, Session};
use crate::error::{Error, Result};
use crate::rng::{self, Rng, Stream};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepartureMode {
    /// Drawn from the configured departure distribution.
    #[default]
    Sampled,
    /// The true departure hour.
    Known,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Forecast error std as a fraction of the true price.
    pub price_error_std_fraction: f64,
    pub departure_mode: DepartureMode,
    pub resolve_each_step: bool,
    /// Draw a fresh departure prediction at every parked step.
    pub redraw_departure: bool,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 24,
            price_error_std_fraction: 0.10,
            departure_mode: DepartureMode::Sampled,
            resolve_each_step: true,
            redraw_departure: false,
        }
    }
}

impl MpcConfig {
    /// Perfect price and departure information.
    pub fn ideal() -> Self {
        Self {
            price_error_std_fraction: 0.0,
            departure_mode: DepartureMode::Known,
            ..Self::default()
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.price_error_std_fraction == 0.0 && self.departure_mode == DepartureMode::Known
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("mpc: horizon must be at least 1".into()));
        }
        if !(self.price_error_std_fraction.is_finite() && self.price_error_std_fraction >= 0.0) {
            return Err(Error::InvalidConfig(
                "mpc: price_error_std_fraction must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `P_t + N(0, (fraction * P_t)^2)` per entry; `fraction = 0` returns the input
/// without drawing.
pub fn forecast_prices(prices: &[f64], fraction: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    if !(fraction.is_finite() && fraction >= 0.0) {
        return Err(Error::InvalidConfig(format!("forecast error fraction {fraction}")));
    }
    if fraction == 0.0 {
        return Ok(prices.to_vec());
    }
    Ok(prices
        .iter()
        .map(|&p| {
            let z: f64 = rng.sample(StandardNormal);
            p + fraction * p.abs() * z
        })
        .collect())
}

/// Smallest change to `action` such that `soc + action` lands where intended
/// in floating point: exactly on `target` when given, otherwise inside
/// `[soc_min, capacity]` when the plan asks for that.
fn polish(soc: f64, action: f64, target: Option<f64>, cfg: &EvEnvConfig) -> f64 {
    let mut a = action;
    if let Some(goal) = target {
        a = goal - soc;
        for _ in 0..64 {
            let s = soc + a;
            if s == goal {
                break;
            }
            a = if s < goal { a.next_up() } else { a.next_down() };
        }
        return a;
    }
    let planned = soc + action;
    if planned >= cfg.soc_min - 1e-9 {
        for _ in 0..64 {
            if soc + a >= cfg.soc_min {
                break;
            }
            a = a.next_up();
        }
    }
    if planned <= cfg.capacity + 1e-9 {
        for _ in 0..64 {
            if soc + a <= cfg.capacity {
                break;
            }
            a = a.next_down();
        }
    }
    a
}

/// MPC as a step controller.
#[derive(Clone, Debug)]
pub struct MpcController {
    cfg: MpcConfig,
    rng: Rng,
    predicted_departure: usize,
    plan: Vec<f64>,
    plan_start: usize,
    solves: usize,
    fallbacks: usize,
}

impl MpcController {
    /// `rng` supplies forecast noise and departure predictions.
    pub fn new(cfg: MpcConfig, rng: Rng) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rng,
            predicted_departure: 0,
            plan: Vec::new(),
            plan_start: 0,
            solves: 0,
            fallbacks: 0,
        })
    }

    pub fn solves(&self) -> usize {
        self.solves
    }

    /// Steps where the LP was infeasible and the controller charged toward
    /// the target instead.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn predicted_departure_step(&self) -> usize {
        self.predicted_departure
    }

    fn predict_departure(&mut self, env: &EvEnv, session: &Session) -> usize {
        match self.cfg.departure_mode {
            DepartureMode::Known => env.session_steps(session).1,
            DepartureMode::Sampled => {
                let draw = self.cfg_departure(env.config());
                let hour = (draw + 0.5).floor().max(0.0) as usize;
                env.session_steps(&Session {
                    departure_hour: hour,
                    ..*session
                })
                .1
            }
        }
    }

    fn cfg_departure(&mut self, env: &EvEnvConfig) -> f64 {
        env.departure.sample(&mut self.rng)
    }

    fn toward_target(soc: f64, cfg: &EvEnvConfig) -> f64 {
        (cfg.soc_target - soc).clamp(-cfg.max_discharge, cfg.max_charge)
    }

    fn solve(&mut self, ctx: &StepContext<'_>, horizon: usize) -> Result<Option<Vec<f64>>> {
        let index = ctx
            .env
            .current_index()
            .ok_or_else(|| Error::Runtime("mpc called outside an episode".into()))?;
        let truth = &ctx.env.series().prices()[index..index + horizon];
        let prices = forecast_prices(truth, self.cfg.price_error_std_fraction, &mut self.rng)?;
        let problem = LpProblem::from_env(ctx.env.config(), prices, ctx.state.soc);
        self.solves += 1;
        match solve_charging_lp(&problem) {
            Ok(s) => Ok(Some(s.schedule)),
            Err(Error::Infeasible(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

impl Controller for MpcController {
    fn begin_episode(&mut self, env: &EvEnv, _day: usize, session: &Session) -> Result<()> {
        self.predicted_departure = self.predict_departure(env, session);
        self.plan.clear();
        self.plan_start = 0;
        Ok(())
    }

    fn act(&mut self, ctx: &StepContext<'_>) -> Result<f64> {
        if !ctx.state.parked {
            return Ok(0.0);
        }
        let cfg = ctx.env.config();
        let (t, soc) = (ctx.state.t, ctx.state.soc);
        if self.cfg.redraw_departure && self.cfg.departure_mode == DepartureMode::Sampled {
            self.predicted_departure = self.predict_departure(ctx.env, ctx.session);
        }
        if self.predicted_departure <= t {
            return Ok(Self::toward_target(soc, cfg));
        }
        let horizon = (self.predicted_departure - t).min(self.cfg.horizon);
        let planned = t >= self.plan_start && t - self.plan_start < self.plan.len();
        if self.cfg.resolve_each_step || !planned {
            match self.solve(ctx, horizon)? {
                Some(plan) => {
                    self.plan = plan;
                    self.plan_start = t;
                }
                None => {
                    self.fallbacks += 1;
                    self.plan.clear();
                    return Ok(Self::toward_target(soc, cfg));
                }
            }
        }
        let k = t - self.plan_start;
        let terminal = k + 1 == self.plan.len();
        let goal = terminal.then_some(cfg.soc_target);
        Ok(polish(soc, self.plan[k], goal, cfg))
    }
}

/// Evaluates MPC on the same episode plan that [`evaluate`] gives RL policies
/// for `seed`.
pub fn mpc_rollout(env: &mut EvEnv, cfg: &MpcConfig, episodes: usize, seed: u64) -> Result<EvalMetrics> {
    let mut controller = MpcController::new(cfg.clone(), rng::stream(seed, Stream::Forecast))?;
    let norm = Normalizer::new(0.0, 1.0)?;
    let mut sessions = rng::stream(seed, Stream::EvalSession);
    evaluate(&mut controller, env, &norm, episodes, &mut sessions)
}
