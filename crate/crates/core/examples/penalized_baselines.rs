//! Trains penalized-reward SAC at two penalty levels and DDPG on the two-tier
//! desk setup and evaluates the selected checkpoints.
//!
//! cargo run --release --example penalized_baselines [env_steps] [seed]

use std::sync::Arc;

use ev_alsac::alsac::{evaluate, TrainConfig};
use ev_alsac::baselines::{train_penalized, PenalizedBase, PenaltyConfig};
use ev_alsac::env::{EvEnv, EvEnvConfig, Normalizer, TruncatedNormal};
use ev_alsac::prices::{gen_synthetic, SyntheticPriceSpec};
use ev_alsac::rng::{stream, Stream};

fn main() -> ev_alsac::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(10_000);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let series = Arc::new(gen_synthetic(&SyntheticPriceSpec::two_tier(0.05, 0.30, 0, 6), 30)?);
    let norm = Normalizer::from_series(&series);
    let env_cfg = EvEnvConfig {
        arrival: TruncatedNormal::fixed(18.0),
        departure: TruncatedNormal::fixed(8.0),
        initial_soc: TruncatedNormal::fixed(0.5),
        state_time_features: true,
        ..EvEnvConfig::default()
    };
    let mut env = EvEnv::new(env_cfg, series)?;
    let cfg = TrainConfig {
        episodes: usize::MAX,
        max_env_steps: Some(steps),
        hidden: vec![64, 64],
        seed,
        ..TrainConfig::default()
    };

    let variants = [
        (
            "sac sigma=0.12",
            PenaltyConfig {
                sigma: 0.12,
                ..PenaltyConfig::default()
            },
        ),
        (
            "sac sigma=1.2",
            PenaltyConfig {
                sigma: 1.2,
                ..PenaltyConfig::default()
            },
        ),
        (
            "ddpg sigma=1.2",
            PenaltyConfig {
                sigma: 1.2,
                base: PenalizedBase::Ddpg,
                ..PenaltyConfig::default()
            },
        ),
    ];
    for (name, pen) in variants {
        let (_, out) = train_penalized(&mut env, &norm, &cfg, &pen)?;
        let mut policy = out.best.policy.clone();
        let m = evaluate(&mut policy, &mut env, &norm, 20, &mut stream(seed, Stream::EvalSession))?;
        println!(
            "{name:15} {} episodes, best checkpoint {:4}: cost {:+.4} EUR, violation {:.4} kWh",
            out.log.len(),
            out.best.episode,
            m.avg_cost_eur,
            m.avg_violation_kwh
        );
    }
    Ok(())
}
