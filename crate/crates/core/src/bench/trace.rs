//! Hour-by-hour schedule traces of a finished run on its test episodes.

use std::fs;
use std::ops::Range;
use std::path::Path;

use super::config::{ExperimentConfig, MethodConfig};
use super::run::{load_policy, prepare, RunRecord, POLICY_FILE, RESOLVED_CONFIG_FILE};
use super::{runtime, validation, Outcome};
use crate::alsac::eval::{run_episode, Controller};
use crate::baselines::MpcController;
use crate::env::EPISODE_STEPS;
use crate::error::{Error, Result};
use crate::prices::format_timestamp;
use crate::rng::{stream, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    /// Index into the run's test episode plan.
    pub episode: usize,
    pub timestamp: String,
    pub price: f64,
    /// Applied action (kWh); 0 while away.
    pub action: f64,
    /// SOC at the start of the hour (kWh).
    pub soc: f64,
    pub parked: bool,
}

pub const TRACE_HEADER: &str = "episode,timestamp,price_eur_per_kwh,action_kwh,soc_kwh,parked";

/// Values are written in shortest round-trip form so the trace can be replayed
/// exactly.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.episode, r.timestamp, r.price, r.action, r.soc, r.parked as u8
        ));
    }
    out
}

/// Parses `a..b` (half-open).
pub fn parse_day_range(s: &str) -> Result<Range<usize>> {
    let bad = || Error::InvalidConfig(format!("day range `{s}` is not of the form a..b with a < b"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a >= b {
        return Err(bad());
    }
    Ok(a..b)
}

/// Runs test episodes `0..days.end` of the plan with `controller` and records
/// 24 rows from the episode anchor for each episode in `days`. Hours after
/// departure are written as away with the departure SOC held.
pub fn trace_episodes(
    cfg: &ExperimentConfig,
    controller: &mut dyn Controller,
    days: Range<usize>,
) -> Result<Vec<TraceRow>> {
    let mut prep = prepare(cfg)?;
    if days.end > prep.plan.len() {
        return Err(Error::InvalidConfig(format!(
            "day range {}..{} exceeds the {} test episodes of this run",
            days.start,
            days.end,
            prep.plan.len()
        )));
    }
    let mut rows = Vec::with_capacity(days.len() * EPISODE_STEPS);
    for (i, (day, session)) in prep.plan[..days.end].iter().enumerate() {
        let ep = run_episode(controller, &mut prep.test_env, &prep.norm, *day, session)?;
        if i < days.start {
            continue;
        }
        let series = prep.test_env.series().clone();
        let start = prep.test_env.episode_start(*day);
        for k in 0..EPISODE_STEPS {
            let index = start + k;
            let row = match ep.steps.get(k) {
                Some(s) => TraceRow {
                    episode: i,
                    timestamp: format_timestamp(series.timestamp(s.index)),
                    price: s.price,
                    action: s.action,
                    soc: s.soc,
                    parked: s.parked,
                },
                None => TraceRow {
                    episode: i,
                    timestamp: format_timestamp(series.timestamp(index)),
                    price: series.prices()[index],
                    action: 0.0,
                    soc: ep.final_soc,
                    parked: false,
                },
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Writes the trace of a run's test episodes `days` to `out`; returns the row
/// count.
pub fn trace(manifest: &Path, days: Range<usize>, out: &Path) -> Outcome<usize> {
    let record = RunRecord::load(manifest).map_err(validation)?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let config_path = dir.join(RESOLVED_CONFIG_FILE);
    let text = fs::read_to_string(&config_path).map_err(|e| validation(Error::io(&config_path, e)))?;
    let cfg = ExperimentConfig::parse(&text, &record.config_dir).map_err(validation)?;

    let mut controller: Box<dyn Controller> = match &cfg.method {
        MethodConfig::Mpc(m) => {
            Box::new(MpcController::new(m.clone(), stream(cfg.seed, Stream::Forecast)).map_err(validation)?)
        }
        _ => Box::new(load_policy(&cfg, &dir.join(POLICY_FILE)).map_err(validation)?),
    };
    let rows = trace_episodes(&cfg, controller.as_mut(), days).map_err(|e| match e {
        Error::InvalidConfig(_) => validation(e),
        e => runtime(e),
    })?;
    fs::write(out, trace_csv(&rows)).map_err(|e| runtime(Error::io(out, e)))?;
    Ok(rows.len())
}
