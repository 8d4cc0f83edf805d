//! EV charging environment.
//!
//! One episode covers 24 hourly steps starting at `anchor_hour` of a price-series
//! day, so that the evening arrival and the next morning's departure fall inside
//! the same episode. Actions are kWh per hour; positive charges, negative
//! discharges. Steps outside the plug-in window force the action to zero.
//!
//! Per step the environment emits the negative charging cost as reward and a
//! non-negative SOC-constraint cost: the absolute deviation from the target SOC on
//! the departure step, and the energy below `soc_min` on other parked steps.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prices::{price_window, PriceSeries, HOURS_PER_DAY, WINDOW};
use crate::rng::Rng;

/// Steps per episode.
pub const EPISODE_STEPS: usize = 24;

/// Normal distribution restricted to `[lower, upper]`, sampled by rejection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub std: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormal {
    pub const fn new(mean: f64, std: f64, lower: f64, upper: f64) -> Self {
        Self {
            mean,
            std,
            lower,
            upper,
        }
    }

    /// Point mass at `value`.
    pub const fn fixed(value: f64) -> Self {
        Self::new(value, 0.0, value, value)
    }

    fn validate(&self, name: &str) -> Result<()> {
        let finite = [self.mean, self.std, self.lower, self.upper]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.std < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "{name}: parameters must be finite, std >= 0"
            )));
        }
        if self.std == 0.0 {
            if !(self.lower..=self.upper).contains(&self.mean) {
                return Err(Error::InvalidConfig(format!("{name}: point mass outside bounds")));
            }
        } else if !(self.lower < self.upper) {
            return Err(Error::InvalidConfig(format!("{name}: need lower < upper")));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        if self.std == 0.0 {
            return self.mean;
        }
        loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = self.mean + self.std * z;
            if (self.lower..=self.upper).contains(&x) {
                return x;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvEnvConfig {
    /// Battery capacity (kWh).
    pub capacity: f64,
    pub soc_min: f64,
    pub soc_target: f64,
    /// Maximum charge per hour (kWh).
    pub max_charge: f64,
    /// Maximum discharge per hour (kWh, positive number).
    pub max_discharge: f64,
    /// Arrival hour of day.
    pub arrival: TruncatedNormal,
    /// Departure hour of day (next calendar day).
    pub departure: TruncatedNormal,
    /// Initial SOC as a fraction of capacity.
    pub initial_soc: TruncatedNormal,
    /// Budget on expected discounted SOC violation (kWh).
    pub cost_budget: f64,
    pub anchor_hour: usize,
    pub clip_infeasible_actions: bool,
    pub state_time_features: bool,
}

impl Default for EvEnvConfig {
    fn default() -> Self {
        Self {
            capacity: 24.0,
            soc_min: 4.8,
            soc_target: 24.0,
            max_charge: 6.0,
            max_discharge: 6.0,
            arrival: TruncatedNormal::new(18.0, 1.0, 15.0, 21.0),
            departure: TruncatedNormal::new(8.0, 1.0, 6.0, 11.0),
            initial_soc: TruncatedNormal::new(0.5, 0.1, 0.3, 0.8),
            cost_budget: 0.024,
            anchor_hour: 12,
            clip_infeasible_actions: true,
            state_time_features: false,
        }
    }
}

/// Nearest integer hour, ties rounding up.
fn round_hour(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

impl EvEnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let finite = [
            self.capacity,
            self.soc_min,
            self.soc_target,
            self.max_charge,
            self.max_discharge,
            self.cost_budget,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return bad("env: physical constants must be finite");
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_target && self.soc_target <= self.capacity) {
            return bad("env: need 0 <= soc_min < soc_target <= capacity");
        }
        if !(self.max_charge > 0.0 && self.max_discharge > 0.0) {
            return bad("env: max_charge and max_discharge must be positive");
        }
        if self.cost_budget < 0.0 {
            return bad("env: cost_budget must be non-negative");
        }
        if self.anchor_hour >= HOURS_PER_DAY {
            return bad("env: anchor_hour must be in 0..24");
        }
        self.arrival.validate("env.arrival")?;
        self.departure.validate("env.departure")?;
        self.initial_soc.validate("env.initial_soc")?;
        if self.initial_soc.lower < 0.0 || self.initial_soc.upper > 1.0 {
            return bad("env.initial_soc: bounds must lie in [0, 1]");
        }
        if self.arrival.lower < 0.0
            || self.arrival.upper > 23.0
            || self.departure.lower < 0.0
            || self.departure.upper > 23.0
        {
            return bad("env: arrival/departure bounds must be hours of day in [0, 23]");
        }
        let latest_arrival = self.step_of_hour(round_hour(self.arrival.upper));
        let earliest_departure = self.departure_step_of_hour(round_hour(self.departure.lower));
        let earliest_arrival = self.step_of_hour(round_hour(self.arrival.lower));
        let latest_departure = self.departure_step_of_hour(round_hour(self.departure.upper));
        if latest_arrival >= earliest_departure || earliest_arrival >= latest_departure {
            return bad("env: every sampled session must arrive before it departs within one episode");
        }
        Ok(())
    }

    fn step_of_hour(&self, hour: usize) -> usize {
        (hour + HOURS_PER_DAY - self.anchor_hour) % HOURS_PER_DAY
    }

    fn departure_step_of_hour(&self, hour: usize) -> usize {
        match self.step_of_hour(hour) {
            0 => EPISODE_STEPS,
            s => s,
        }
    }

    /// Action scale and offset mapping `[-1, 1]` onto `[-max_discharge, max_charge]`.
    pub fn action_affine(&self) -> (f64, f64) {
        let scale = 0.5 * (self.max_charge + self.max_discharge);
        let offset = 0.5 * (self.max_charge - self.max_discharge);
        (scale, offset)
    }

    pub fn observation_len(&self) -> usize {
        1 + WINDOW + if self.state_time_features { 2 } else { 0 }
    }
}

/// One parking event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub arrival_hour: usize,
    pub departure_hour: usize,
    /// kWh.
    pub initial_soc: f64,
}

pub fn sample_session(rng: &mut Rng, cfg: &EvEnvConfig) -> Session {
    let arrival_hour = round_hour(cfg.arrival.sample(rng));
    let departure_hour = round_hour(cfg.departure.sample(rng));
    let initial_soc = cfg.initial_soc.sample(rng) * cfg.capacity;
    Session {
        arrival_hour,
        departure_hour,
        initial_soc,
    }
}

/// Clips `action` to what the battery can physically absorb or deliver.
pub fn feasible_action_clip(soc: f64, action: f64, cfg: &EvEnvConfig) -> f64 {
    let lo = (-cfg.max_discharge).max(-soc);
    let hi = cfg.max_charge.min(cfg.capacity - soc);
    action.clamp(lo, hi.max(lo))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeFeatures {
    pub hours_since_arrival: f64,
    pub hours_to_departure: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState {
    pub t: usize,
    pub soc: f64,
    pub parked: bool,
    pub price_window: [f64; WINDOW],
    pub time_features: Option<TimeFeatures>,
}

impl EpisodeState {
    /// Price of the current hour.
    pub fn price(&self) -> f64 {
        self.price_window[WINDOW - 1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Action requested by the agent (kWh), inside the action box.
    pub action: f64,
    pub reward: f64,
    pub cost: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: EpisodeState,
    /// Action actually applied to the battery (kWh).
    pub applied_action: f64,
    pub reward: f64,
    pub cost: f64,
    pub done: bool,
}

/// Price normalization statistics computed from the training split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub price_mean: f64,
    pub price_std: f64,
}

impl Normalizer {
    pub fn new(price_mean: f64, price_std: f64) -> Result<Self> {
        if !price_mean.is_finite() || !(price_std.is_finite() && price_std > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "normalization statistics unusable: mean {price_mean}, std {price_std}"
            )));
        }
        Ok(Self { price_mean, price_std })
    }

    /// Statistics of a training series; a constant series gets unit scale.
    pub fn from_series(train: &PriceSeries) -> Self {
        let (mean, std) = train.mean_std();
        Self {
            price_mean: mean,
            price_std: if std > 1e-12 { std } else { 1.0 },
        }
    }
}

/// Observation vector: `[soc / capacity, normalized prices..., time features?]`.
pub fn observe(state: &EpisodeState, cfg: &EvEnvConfig, norm: &Normalizer) -> Vec<f64> {
    let mut obs = Vec::with_capacity(cfg.observation_len());
    obs.push(state.soc / cfg.capacity);
    obs.extend(
        state
            .price_window
            .iter()
            .map(|p| (p - norm.price_mean) / norm.price_std),
    );
    if cfg.state_time_features {
        let tf = state.time_features.unwrap_or(TimeFeatures {
            hours_since_arrival: 0.0,
            hours_to_departure: 0.0,
        });
        let scale = EPISODE_STEPS as f64;
        obs.push((tf.hours_since_arrival / scale).clamp(0.0, 1.0));
        obs.push((tf.hours_to_departure / scale).clamp(0.0, 1.0));
    }
    obs
}

#[derive(Clone, Debug)]
struct Episode {
    start_index: usize,
    arrival_step: usize,
    departure_step: usize,
    t: usize,
    soc: f64,
    done: bool,
}

/// The charging environment over one price series.
#[derive(Clone, Debug)]
pub struct EvEnv {
    cfg: EvEnvConfig,
    series: Arc<PriceSeries>,
    episode: Option<Episode>,
}

impl EvEnv {
    pub fn new(cfg: EvEnvConfig, series: Arc<PriceSeries>) -> Result<Self> {
        cfg.validate()?;
        let env = Self {
            cfg,
            series,
            episode: None,
        };
        if env.valid_days().is_empty() {
            return Err(Error::SeriesTooShort {
                len: env.series.len(),
                required: 2 * HOURS_PER_DAY,
            });
        }
        Ok(env)
    }

    pub fn config(&self) -> &EvEnvConfig {
        &self.cfg
    }

    pub fn series(&self) -> &Arc<PriceSeries> {
        &self.series
    }

    /// Series index of step 0 for the episode on `day`.
    pub fn episode_start(&self, day: usize) -> usize {
        let first_hour = self.series.hour_of_day(0);
        day * HOURS_PER_DAY + (self.cfg.anchor_hour + HOURS_PER_DAY - first_hour) % HOURS_PER_DAY
    }

    fn day_is_valid(&self, day: usize) -> bool {
        let start = self.episode_start(day);
        start >= WINDOW - 1 && start + EPISODE_STEPS <= self.series.len()
    }

    /// Days with full lookback and a full episode horizon.
    pub fn valid_days(&self) -> Vec<usize> {
        (0..=self.series.len() / HOURS_PER_DAY)
            .filter(|&d| self.day_is_valid(d))
            .collect()
    }

    pub fn session_steps(&self, session: &Session) -> (usize, usize) {
        (
            self.cfg.step_of_hour(session.arrival_hour),
            self.cfg.departure_step_of_hour(session.departure_hour),
        )
    }

    pub fn reset(&mut self, day: usize, session: &Session) -> Result<EpisodeState> {
        let start_index = self.episode_start(day);
        if start_index < WINDOW - 1 {
            return Err(Error::InsufficientLookback { end_index: start_index });
        }
        if start_index + EPISODE_STEPS > self.series.len() {
            return Err(Error::SeriesTooShort {
                len: self.series.len(),
                required: start_index + EPISODE_STEPS,
            });
        }
        let (arrival_step, departure_step) = self.session_steps(session);
        if arrival_step >= departure_step {
            return Err(Error::InvalidConfig(format!(
                "session arrives at step {arrival_step} but departs at step {departure_step}"
            )));
        }
        self.episode = Some(Episode {
            start_index,
            arrival_step,
            departure_step,
            t: 0,
            soc: session.initial_soc.clamp(0.0, self.cfg.capacity),
            done: false,
        });
        self.state()
    }

    pub fn state(&self) -> Result<EpisodeState> {
        let ep = self
            .episode
            .as_ref()
            .ok_or_else(|| Error::Runtime("environment not reset".into()))?;
        let t = ep.t.min(EPISODE_STEPS - 1);
        let price_window = price_window(&self.series, ep.start_index + t)?;
        let time_features = self.cfg.state_time_features.then(|| TimeFeatures {
            hours_since_arrival: ep.t.saturating_sub(ep.arrival_step) as f64,
            hours_to_departure: ep.departure_step.saturating_sub(ep.t) as f64,
        });
        Ok(EpisodeState {
            t: ep.t,
            soc: ep.soc,
            parked: self.is_parked(ep, ep.t),
            price_window,
            time_features,
        })
    }

    fn is_parked(&self, ep: &Episode, t: usize) -> bool {
        (ep.arrival_step..ep.departure_step).contains(&t)
    }

    /// Series index of the current hour.
    pub fn current_index(&self) -> Option<usize> {
        self.episode.as_ref().map(|ep| ep.start_index + ep.t)
    }

    pub fn step(&mut self, action: f64) -> Result<StepOutcome> {
        let ep = self
            .episode
            .as_ref()
            .ok_or_else(|| Error::Runtime("environment not reset".into()))?;
        if ep.done {
            return Err(Error::EpisodeDone);
        }
        if !action.is_finite() {
            return Err(Error::NonFinite("action"));
        }
        let parked = self.is_parked(ep, ep.t);
        let price = self.series.prices()[ep.start_index + ep.t];
        let boxed = action.clamp(-self.cfg.max_discharge, self.cfg.max_charge);
        let applied = if !parked {
            0.0
        } else if self.cfg.clip_infeasible_actions {
            feasible_action_clip(ep.soc, boxed, &self.cfg)
        } else {
            boxed
        };
        let soc = (ep.soc + applied).clamp(0.0, self.cfg.capacity);
        let departing = parked && ep.t + 1 == ep.departure_step;
        let cost = if !parked {
            0.0
        } else if departing {
            (soc - self.cfg.soc_target).abs()
        } else {
            (self.cfg.soc_min - soc).max(0.0)
        };
        let reward = -applied * price;
        let done = departing || ep.t + 1 >= EPISODE_STEPS;

        let ep = self.episode.as_mut().expect("episode present");
        ep.t += 1;
        ep.soc = soc;
        ep.done = done;
        Ok(StepOutcome {
            state: self.state()?,
            applied_action: applied,
            reward,
            cost,
            done,
        })
    }
}
