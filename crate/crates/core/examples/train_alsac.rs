//! Trains AL-SAC on a two-tier tariff with a fixed commuting session and
//! compares the result with the perfect-information LP optimum.
//!
//! cargo run --release --example train_alsac [env_steps] [seed]

use std::sync::Arc;
use std::time::Instant;

use ev_alsac::alsac::{evaluate, train, TrainConfig};
use ev_alsac::baselines::{mpc_rollout, MpcConfig};
use ev_alsac::env::{EvEnv, EvEnvConfig, Normalizer, TruncatedNormal};
use ev_alsac::prices::{gen_synthetic, SyntheticPriceSpec};
use ev_alsac::rng::{stream, Stream};

fn main() -> ev_alsac::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
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

    let t0 = Instant::now();
    let (_, out) = train(&mut env, &norm, &cfg)?;
    println!(
        "trained {} episodes / {} steps in {:.1?}",
        out.log.len(),
        out.env_steps,
        t0.elapsed()
    );
    for r in out.log.iter().step_by(50) {
        println!(
            "ep {:4}  cost {:+.3}  viol {:.3}  alpha {:.2e}  lambda {:.2e}",
            r.episode, r.episode_cost_eur, r.episode_violation_kwh, r.alpha, r.lambda
        );
    }

    let mut policy = out.best.policy.clone();
    let mut sessions = stream(seed, Stream::EvalSession);
    let m = evaluate(&mut policy, &mut env, &norm, 50, &mut sessions)?;
    let ideal = mpc_rollout(&mut env, &MpcConfig::ideal(), 50, seed)?;
    println!(
        "best checkpoint (episode {}): cost {:.4} EUR, violation {:.4} kWh",
        out.best.episode, m.avg_cost_eur, m.avg_violation_kwh
    );
    let mut last = out.final_policy.clone();
    let f = evaluate(&mut last, &mut env, &norm, 50, &mut stream(seed, Stream::EvalSession))?;
    println!(
        "final policy: cost {:.4} EUR, violation {:.4} kWh",
        f.avg_cost_eur, f.avg_violation_kwh
    );
    println!(
        "ideal MPC:   cost {:.4} EUR, violation {:.4} kWh",
        ideal.avg_cost_eur, ideal.avg_violation_kwh
    );
    Ok(())
}
