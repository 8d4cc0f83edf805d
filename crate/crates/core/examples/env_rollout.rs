//! Steps the charging environment by hand with a simple rule: charge at full
//! rate whenever the price is below the day's mean, otherwise idle.
//!
//! cargo run --example env_rollout [seed]

use std::sync::Arc;

use ev_alsac::env::{observe, sample_session, EvEnv, EvEnvConfig, Normalizer};
use ev_alsac::prices::{gen_synthetic, PricePattern, SyntheticPriceSpec};
use ev_alsac::rng::{stream, Stream};

fn main() -> ev_alsac::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let pattern = PricePattern::Sinusoid {
        low: 0.05,
        high: 0.35,
        peak_hour: 19.0,
    };
    let series = Arc::new(gen_synthetic(&SyntheticPriceSpec::new(pattern, 0.02, seed), 5)?);
    let norm = Normalizer::from_series(&series);
    let cfg = EvEnvConfig::default();
    let mut env = EvEnv::new(cfg.clone(), series)?;

    let session = sample_session(&mut stream(seed, Stream::Session), &cfg);
    let day = env.valid_days()[0];
    println!(
        "day {day}, session {session:?}, observation length {}",
        cfg.observation_len()
    );
    let mut state = env.reset(day, &session)?;
    let (mut cost, mut violation) = (0.0, 0.0);
    loop {
        let mean = state.price_window.iter().sum::<f64>() / state.price_window.len() as f64;
        let action = if state.price() < mean { cfg.max_charge } else { 0.0 };
        let obs = observe(&state, &cfg, &norm);
        let out = env.step(action)?;
        println!(
            "t {:2}  parked {:5}  price {:.3}  soc {:5.2} -> {:5.2}  reward {:+.3}  cost {:.2}  obs[0] {:+.2}",
            state.t,
            state.parked,
            state.price(),
            state.soc,
            out.state.soc,
            out.reward,
            out.cost,
            obs[0]
        );
        cost -= out.reward;
        violation += out.cost;
        state = out.state;
        if out.done {
            break;
        }
    }
    println!("episode cost {cost:.4} EUR, violation {violation:.4} kWh");
    Ok(())
}
