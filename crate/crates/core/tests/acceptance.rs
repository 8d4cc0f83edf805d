//! Acceptance suite. Prints one PASS/FAIL line per criterion. The verdicts are
//! the report; the process only exits non-zero on a FAIL when
//! `ACCEPTANCE_STRICT` is set. The convergence criteria train 15 agents on the
//! desk setup, so a full run takes over an hour on one core.

mod common;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use chrono::NaiveDate;
use ndarray::Array2;
use rand::Rng as _;

use common::{gradient_trial, grid_optimum, random_lp_problem};
use ev_alsac::alsac::{evaluation_plan, run_episode, ActorPass, CriticEnsemble, CriticPair, LagrangeState};
use ev_alsac::baselines::{solve_charging_lp, LpProblem, MpcConfig, MpcController};
use ev_alsac::bench::{run_config, RunRecord};
use ev_alsac::env::{EvEnv, EvEnvConfig, Normalizer, Session};
use ev_alsac::nn::{DenseNet, GaussianPolicyHead};
use ev_alsac::prices::{
    gen_synthetic, load_price_csv, split_train_test, PricePattern, PriceSeries, PriceUnit, SyntheticPriceSpec,
};
use ev_alsac::rng::{stream, Stream};

// pinned tolerances and budgets
const CRITIC_GRAD_TOL: f64 = 1e-6;
const ACTOR_GRAD_TOL: f64 = 1e-4;
const GRADIENT_SECONDS: f64 = 30.0;
const LP_SECONDS: f64 = 60.0;
const HAND_LP_TOL: f64 = 1e-12;
const DESK_VIOLATION_KWH: f64 = 0.05;
const DESK_COST_FRACTION: f64 = 0.15;
const DESK_SECONDS: f64 = 600.0;
const SEEDS: u64 = 5;
const SEED_MAJORITY: usize = 4;
const MPC_LP_TOL: f64 = 1e-9;
const DENSITY_RANGE: (f64, f64) = (0.999, 1.001);

type Verdict = (bool, String);

fn gradients() -> Verdict {
    let start = Instant::now();
    let (mut ok, mut worst) = (0, [0.0f64; 3]);
    for seed in 0..100 {
        let t = gradient_trial(seed);
        if t.critic < CRITIC_GRAD_TOL && t.cost_critic < CRITIC_GRAD_TOL && t.actor < ACTOR_GRAD_TOL {
            ok += 1;
        }
        worst = [
            worst[0].max(t.critic),
            worst[1].max(t.cost_critic),
            worst[2].max(t.actor),
        ];
    }
    let secs = start.elapsed().as_secs_f64();
    (
        ok == 100 && secs < GRADIENT_SECONDS,
        format!(
            "{ok}/100 trials; worst rel err critic {:.1e}, cost critic {:.1e}, actor {:.1e}; {secs:.1} s",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn hand_lp(prices: &[f64]) -> LpProblem {
    LpProblem {
        prices: prices.to_vec(),
        initial_soc: 20.0,
        soc_min: 4.8,
        capacity: 24.0,
        soc_target: 24.0,
        max_charge: 6.0,
        max_discharge: 6.0,
    }
}

fn lp_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = stream(2024, Stream::Data);
    let (mut agree, mut feasible) = (0, 0);
    for _ in 0..200 {
        let p = random_lp_problem(&mut rng);
        let increment = 0.1 * p.prices.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        match (solve_charging_lp(&p), grid_optimum(&p, 0.1)) {
            (Ok(lp), Some(g)) => {
                feasible += 1;
                if lp.objective <= g + 1e-9 && g - lp.objective <= increment {
                    agree += 1;
                }
            }
            (Err(_), None) => agree += 1,
            _ => {}
        }
    }
    let hand = |prices: &[f64], schedule: [f64; 3], objective: f64| {
        solve_charging_lp(&hand_lp(prices))
            .map(|s| s.schedule == schedule && (s.objective - objective).abs() < HAND_LP_TOL)
            .unwrap_or(false)
    };
    let a = hand(&[0.1, 0.3, 0.2], [4.0, -6.0, 6.0], -0.2);
    let b = hand(&[0.3, 0.2, 0.1], [-6.0, 4.0, 6.0], -0.4);
    let secs = start.elapsed().as_secs_f64();
    (
        agree == 200 && a && b && secs < LP_SECONDS,
        format!("{agree}/200 agree ({feasible} feasible); hand instances {a}/{b}; {secs:.2} s"),
    )
}

fn cost_branches() -> Verdict {
    let series = gen_synthetic(&SyntheticPriceSpec::two_tier(0.05, 0.30, 0, 6), 4).unwrap();
    let cfg = EvEnvConfig::default();
    let mut env = EvEnv::new(cfg.clone(), Arc::new(series)).unwrap();
    // parked 18:00 to 08:00, arriving below the minimum
    let session = Session {
        arrival_hour: 18,
        departure_hour: 8,
        initial_soc: 3.0,
    };
    env.reset(1, &session).unwrap();
    let mut checks = Vec::new();
    let away: Vec<_> = (0..6).map(|_| env.step(5.0).unwrap()).collect();
    checks.push((
        "away-masked",
        away.iter().all(|o| o.cost == 0.0 && o.applied_action == 0.0),
    ));

    let deficit = env.step(1.0).unwrap();
    checks.push((
        "sub-minimum",
        deficit.state.soc == 4.0 && deficit.cost == cfg.soc_min - 4.0 && deficit.cost == 4.8 - 4.0,
    ));
    let in_range = env.step(6.0).unwrap();
    checks.push(("in-range", in_range.state.soc == 10.0 && in_range.cost == 0.0));
    env.step(6.0).unwrap();
    let mut last = env.step(6.0).unwrap();
    let mut quiet = true;
    while !last.done {
        quiet &= last.cost == 0.0;
        last = env.step(0.0).unwrap();
    }
    checks.push(("in-range hold", quiet));
    checks.push((
        "terminal",
        last.state.soc == 22.0 && last.cost == 2.0 && last.cost == (cfg.soc_target - 22.0).abs(),
    ));
    let failed: Vec<_> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    (
        failed.is_empty(),
        if failed.is_empty() {
            "terminal 2.0, deficit 4.8-4.0, in-range 0, away 0".into()
        } else {
            format!("failed branches: {failed:?}")
        },
    )
}

/// Constant critic: every input maps to `value`.
fn constant_net(inputs: usize, value: f64) -> DenseNet {
    let mut net = DenseNet::zeros(&[inputs, 1]);
    *net.params_mut().last_mut().unwrap() = value;
    net
}

fn dual_dynamics() -> Verdict {
    // a dyadic step keeps every multiplier value exactly representable
    let delta = 2f64.powi(-17);
    let budget = 0.024;
    let obs_len = 3;
    let policy = GaussianPolicyHead::init(obs_len, &[8], 6.0, 0.0, &mut stream(5, Stream::Policy));
    let obs = Array2::from_elem((2, obs_len), 0.25);
    let xi = [0.3, -0.7];
    let mean_cost_q = |c: f64| {
        let critics = CriticEnsemble {
            reward: CriticPair::from_nets(constant_net(obs_len + 1, 0.0), constant_net(obs_len + 1, 0.0)),
            cost: CriticPair::from_nets(constant_net(obs_len + 1, c), constant_net(obs_len + 1, c)),
        };
        ActorPass::new(&policy, &critics, obs.view(), &xi).unwrap()
    };

    let mut lag = LagrangeState::new(delta, delta, -1.0, budget);
    let above = mean_cost_q(budget + 1.0);
    let mut rising = Vec::new();
    for _ in 0..5 {
        let before = lag.lambda;
        lag.dual_update(above.mean_log_prob(), above.mean_cost_q());
        rising.push(lag.lambda - before == delta);
    }
    let rise_ok = rising.iter().all(|&x| x) && lag.lambda == 5.0 * delta;

    let below = mean_cost_q(budget - 1.0);
    lag.lambda = 3.0 * delta;
    let mut path = Vec::new();
    for _ in 0..6 {
        lag.dual_update(below.mean_log_prob(), below.mean_cost_q());
        path.push(lag.lambda / delta);
    }
    let fall_ok = path == [2.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    (
        rise_ok && fall_ok,
        format!("delta 2^-17; rise steps exact {rising:?}; fall path in units of delta {path:?}"),
    )
}

fn ideal_mpc() -> Verdict {
    let spec = SyntheticPriceSpec::new(
        PricePattern::Sinusoid {
            low: -0.05,
            high: 0.4,
            peak_hour: 18.0,
        },
        0.03,
        11,
    );
    let mut env = EvEnv::new(EvEnvConfig::default(), Arc::new(gen_synthetic(&spec, 40).unwrap())).unwrap();
    let norm = Normalizer::new(0.0, 1.0).unwrap();
    let plan = evaluation_plan(&env, 100, &mut stream(7, Stream::EvalSession));
    let mut mpc = MpcController::new(MpcConfig::ideal(), stream(7, Stream::Forecast)).unwrap();
    let (mut zero, mut matched, mut worst) = (0, 0, 0.0f64);
    for (day, session) in &plan {
        let r = run_episode(&mut mpc, &mut env, &norm, *day, session).unwrap();
        let (arr, dep) = env.session_steps(session);
        let start = env.episode_start(*day);
        let prices = env.series().prices()[start + arr..start + dep].to_vec();
        let lp = solve_charging_lp(&LpProblem::from_env(env.config(), prices, session.initial_soc));
        if r.violation_kwh == 0.0 {
            zero += 1;
        }
        if let Ok(lp) = lp {
            let gap = (r.cost_eur - lp.objective).abs();
            worst = worst.max(gap);
            if gap < MPC_LP_TOL {
                matched += 1;
            }
        }
    }
    (
        zero == 100 && matched == 100,
        format!("{zero}/100 zero violation, {matched}/100 match the one-shot LP (worst gap {worst:.1e})"),
    )
}

fn density() -> Verdict {
    let mut rng = stream(9, Stream::Policy);
    let mut masses = Vec::new();
    for _ in 0..20 {
        let mu: f64 = rng.random_range(-1.0..1.0);
        let sigma: f64 = rng.random_range(0.05..1.0);
        let mut net = DenseNet::zeros(&[1, 2]);
        net.params_mut()[2] = mu;
        net.params_mut()[3] = sigma.ln();
        let head = GaussianPolicyHead::from_net(net, 6.0, 0.0);
        let (lo, hi) = (head.offset - head.scale, head.offset + head.scale);
        let n = 20_000;
        let w = (hi - lo) / n as f64;
        let mass: f64 = (0..n)
            .map(|i| head.log_prob(&[0.0], lo + (i as f64 + 0.5) * w).unwrap().exp() * w)
            .sum();
        masses.push(mass);
    }
    let inside = masses
        .iter()
        .filter(|m| (DENSITY_RANGE.0..=DENSITY_RANGE.1).contains(*m))
        .count();
    let (lo, hi) = masses
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), m| (a.min(*m), b.max(*m)));
    (
        inside == 20,
        format!("{inside}/20 in range; mass spans [{lo:.6}, {hi:.6}]"),
    )
}

fn data_accounting(dir: &Path) -> Verdict {
    let start = NaiveDate::from_ymd_opt(2018, 10, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let end = NaiveDate::from_ymd_opt(2020, 5, 1).unwrap();
    let days = (end - start.date()).num_days() as usize + 1;
    let mut rng = stream(3, Stream::Data);
    let prices = (0..days * 24).map(|_| rng.random_range(-5.0..120.0)).collect();
    let path = dir.join("prices_2018_2020.csv");
    PriceSeries::new(start, prices).unwrap().write_csv(&path).unwrap();
    let series = load_price_csv(&path, PriceUnit::EurPerMwh).unwrap();
    let split = split_train_test(&series, 175).unwrap();
    let last = series.timestamp(series.len() - 1);
    (
        split.train.days() == 404 && split.test.days() == 175,
        format!(
            "{} days through {last}; train {} days, test {} days",
            series.days(),
            split.train.days(),
            split.test.days()
        ),
    )
}

struct Desk {
    root: PathBuf,
}

impl Desk {
    fn run(&self, name: &str, method: &str, seed: u64) -> Result<RunRecord, String> {
        let out = self.root.join(name);
        let started = Instant::now();
        let record = run_config(&common::desk(method, seed, &out)).map_err(|e| format!("{name}: {e}"))?;
        eprintln!(
            "  {name}: cost {:.4} EUR, violation {:.4} kWh, {:.0} s",
            record.avg_cost_eur.unwrap_or(f64::NAN),
            record.avg_violation_kwh.unwrap_or(f64::NAN),
            started.elapsed().as_secs_f64()
        );
        Ok(record)
    }
}

fn metrics(r: &RunRecord) -> (f64, f64) {
    (
        r.avg_cost_eur.unwrap_or(f64::NAN),
        r.avg_violation_kwh.unwrap_or(f64::NAN),
    )
}

const ALSAC: &str = "name = \"alsac\"";
const IDEAL: &str = "name = \"mpc\"\nprice_error_std_fraction = 0.0\ndeparture_mode = \"known\"";

fn sac(sigma: f64) -> String {
    format!("name = \"sac\"\nsigma = {sigma}")
}

fn convergence(desk: &Desk) -> Result<(Verdict, RunRecord), String> {
    let ideal = desk.run("ideal", IDEAL, 1)?;
    let alsac = desk.run("alsac-1", ALSAC, 1)?;
    if ideal.eval_data_digest != alsac.eval_data_digest {
        return Err("ideal MPC and AL-SAC were evaluated on different episodes".into());
    }
    let (ideal_cost, _) = metrics(&ideal);
    let (cost, violation) = metrics(&alsac);
    let gap = (cost - ideal_cost).abs() / ideal_cost.abs();
    let pass = violation <= DESK_VIOLATION_KWH && gap <= DESK_COST_FRACTION && alsac.wall_clock_seconds <= DESK_SECONDS;
    let detail = format!(
        "violation {violation:.4} kWh, cost {cost:.4} EUR vs ideal {ideal_cost:.4} ({:.1}% gap), {:.0} s",
        100.0 * gap,
        alsac.wall_clock_seconds
    );
    Ok(((pass, detail), alsac))
}

fn ordering(desk: &Desk, alsac_seed1: &RunRecord) -> Result<Verdict, String> {
    let (mut sigma_order, mut alsac_best) = (0, 0);
    let mut table = String::new();
    for seed in 1..=SEEDS {
        let alsac = if seed == 1 {
            alsac_seed1.clone()
        } else {
            desk.run(&format!("alsac-{seed}"), ALSAC, seed)?
        };
        let low = desk.run(&format!("sac-0.12-{seed}"), &sac(0.12), seed)?;
        let high = desk.run(&format!("sac-1.2-{seed}"), &sac(1.2), seed)?;
        let ((_, va), (cl, vl), (ch, vh)) = (metrics(&alsac), metrics(&low), metrics(&high));
        if vh < vl && ch > cl {
            sigma_order += 1;
        }
        if va <= vl && va <= vh {
            alsac_best += 1;
        }
        let _ = write!(table, " [s{seed} viol {va:.3}/{vl:.3}/{vh:.3} cost {cl:.3}/{ch:.3}]");
    }
    Ok((
        sigma_order >= SEED_MAJORITY && alsac_best >= SEED_MAJORITY,
        format!(
            "sigma 1.2 safer and dearer in {sigma_order}/{SEEDS}, AL-SAC least violation in {alsac_best}/{SEEDS};{table}"
        ),
    ))
}

fn determinism(desk: &Desk) -> Result<Verdict, String> {
    desk.run("alsac-1-repeat", ALSAC, 1)?;
    let mut same = Vec::new();
    for file in ["train_log.csv", "metrics.csv"] {
        let a = fs::read(desk.root.join("alsac-1").join(file)).map_err(|e| e.to_string())?;
        let b = fs::read(desk.root.join("alsac-1-repeat").join(file)).map_err(|e| e.to_string())?;
        same.push((file, a == b));
    }
    Ok((same.iter().all(|s| s.1), format!("byte-identical: {same:?}")))
}

fn main() {
    let root = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&root);
    fs::create_dir_all(&root).unwrap();
    let desk = Desk { root: root.clone() };

    let mut results: Vec<(usize, &str, Verdict)> = Vec::new();
    let mut record = |n: usize, name: &'static str, v: Verdict| {
        println!("{} {n:>2} {name}: {}", if v.0 { "PASS" } else { "FAIL" }, v.1);
        results.push((n, name, v));
    };
    let failed = |e: String| (false, e);

    record(1, "gradient exactness", gradients());
    record(2, "LP oracle equivalence", lp_oracle());
    record(3, "cost function branches", cost_branches());
    let seed1 = match convergence(&desk) {
        Ok((v, alsac)) => {
            record(4, "desk-scale convergence", v);
            Some(alsac)
        }
        Err(e) => {
            record(4, "desk-scale convergence", failed(e));
            None
        }
    };
    match &seed1 {
        Some(alsac) => record(
            5,
            "penalty ordering across seeds",
            ordering(&desk, alsac).unwrap_or_else(failed),
        ),
        None => record(
            5,
            "penalty ordering across seeds",
            failed("no seed-1 AL-SAC run".into()),
        ),
    }
    record(6, "dual dynamics", dual_dynamics());
    record(7, "ideal MPC zero violation", ideal_mpc());
    match &seed1 {
        Some(_) => record(8, "determinism", determinism(&desk).unwrap_or_else(failed)),
        None => record(8, "determinism", failed("no seed-1 AL-SAC run".into())),
    }
    record(9, "squashed density normalization", density());
    record(10, "data accounting", data_accounting(&root));

    let passed = results.iter().filter(|r| r.2 .0).count();
    println!(
        "{passed}/{} criteria passed; run artifacts in {}",
        results.len(),
        root.display()
    );
    if passed != results.len() && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
