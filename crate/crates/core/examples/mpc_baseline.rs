//! Receding-horizon MPC with perfect information and with 10% forecast error
//! and sampled departure times, on noisy sinusoidal prices.
//!
//! cargo run --release --example mpc_baseline [episodes]

use std::sync::Arc;

use ev_alsac::baselines::{mpc_rollout, DepartureMode, MpcConfig};
use ev_alsac::env::{EvEnv, EvEnvConfig};
use ev_alsac::prices::{gen_synthetic, PricePattern, SyntheticPriceSpec};

fn main() -> ev_alsac::Result<()> {
    let episodes: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let pattern = PricePattern::Sinusoid {
        low: 0.05,
        high: 0.35,
        peak_hour: 19.0,
    };
    let series = gen_synthetic(&SyntheticPriceSpec::new(pattern, 0.02, 7), 30)?;
    let mut env = EvEnv::new(EvEnvConfig::default(), Arc::new(series))?;

    let configs = [
        ("ideal", MpcConfig::ideal()),
        (
            "10% error, known departure",
            MpcConfig {
                departure_mode: DepartureMode::Known,
                ..MpcConfig::default()
            },
        ),
        ("10% error, sampled departure", MpcConfig::default()),
    ];
    for (name, cfg) in configs {
        let m = mpc_rollout(&mut env, &cfg, episodes, 7)?;
        println!(
            "{name:30} cost {:+.4} EUR  violation {:.4} kWh over {} episodes",
            m.avg_cost_eur,
            m.avg_violation_kwh,
            m.episodes.len()
        );
    }
    Ok(())
}
