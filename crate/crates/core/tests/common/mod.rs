//! Shared oracles for the integration suites.
#![allow(dead_code)]

use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::StandardNormal;

use ev_alsac::alsac::critic::{cost_critic_target, critic_target, mse_gradient, next_actions};
use ev_alsac::alsac::{ActorPass, Batch, CriticEnsemble, CriticPair, LagrangeState};
use ev_alsac::baselines::LpProblem;
use ev_alsac::bench::ExperimentConfig;
use ev_alsac::nn::{DenseNet, GaussianPolicyHead};
use ev_alsac::rng::{stream, Rng, Stream};

/// Central differences of `f` at `params`.
pub fn finite_difference(params: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let x = p[i];
            p[i] = x + h;
            let up = f(&p);
            p[i] = x - h;
            let down = f(&p);
            p[i] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn normals(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn random_net(sizes: &[usize], rng: &mut Rng) -> DenseNet {
    let n = ev_alsac::nn::dense::param_count(sizes);
    let params = (0..n).map(|_| 0.6 * rng.sample::<f64, _>(StandardNormal)).collect();
    DenseNet::from_params(sizes, params).unwrap()
}

/// Relative errors of the analytic critic, cost-critic and actor gradients
/// against central differences for one random small problem.
pub struct GradientTrial {
    pub critic: f64,
    pub cost_critic: f64,
    pub actor: f64,
}

pub fn gradient_trial(seed: u64) -> GradientTrial {
    let mut rng = stream(seed, Stream::Policy);
    let obs_len = rng.random_range(1..=2);
    let hidden: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(2..=8)).collect();
    let mut sizes = vec![obs_len + 1];
    sizes.extend(&hidden);
    sizes.push(1);
    let mut policy_sizes = vec![obs_len];
    policy_sizes.extend(&hidden);
    policy_sizes.push(2);

    let pair = |rng: &mut Rng| CriticPair::from_nets(random_net(&sizes, rng), random_net(&sizes, rng));
    let mut critics = CriticEnsemble {
        reward: pair(&mut rng),
        cost: pair(&mut rng),
    };
    critics.reward.target = [random_net(&sizes, &mut rng), random_net(&sizes, &mut rng)];
    critics.cost.target = [random_net(&sizes, &mut rng), random_net(&sizes, &mut rng)];
    let policy = GaussianPolicyHead::from_net(random_net(&policy_sizes, &mut rng), 6.0, 0.0);

    let n = rng.random_range(2..=12);
    let batch = Batch {
        obs: Array2::from_shape_vec((n, obs_len), normals(&mut rng, n * obs_len)).unwrap(),
        actions: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        rewards: (0..n).map(|_| rng.random_range(-1.5..0.5)).collect(),
        costs: (0..n).map(|_| rng.random_range(0.0..3.0)).collect(),
        next_obs: Array2::from_shape_vec((n, obs_len), normals(&mut rng, n * obs_len)).unwrap(),
        dones: (0..n).map(|_| rng.random_bool(0.2)).collect(),
    };
    let alpha = rng.random_range(0.0..0.5);
    let xi_next = normals(&mut rng, n);
    let next = next_actions(&policy, &batch, &xi_next).unwrap();
    let input = ev_alsac::alsac::critic::with_action(batch.obs.view(), &batch.actions);

    let mse_error = |net: &DenseNet, targets: &[f64]| {
        let (_, analytic) = mse_gradient(net, input.view(), targets).unwrap();
        let numeric = finite_difference(net.params(), 1e-5, |p| {
            let probe = DenseNet::from_params(net.sizes(), p.to_vec()).unwrap();
            mse_gradient(&probe, input.view(), targets).unwrap().0
        });
        relative_error(&analytic, &numeric)
    };
    let y = critic_target(&batch, &critics.reward, &next, 0.99, alpha).unwrap();
    let yc = cost_critic_target(&batch, &critics.cost, &next, 0.99).unwrap();
    let critic = mse_error(&critics.reward.online[0], &y);
    let cost_critic = mse_error(&critics.cost.online[1], &yc);

    let mut lag = LagrangeState::new(1e-5, 1e-5, -1.0, 0.024);
    lag.alpha = alpha;
    lag.lambda = rng.random_range(0.0..2.0);
    lag.penalty = Some(rng.random_range(0.0..2.0));
    // with some probability move the budget above the batch cost so the
    // penalty branch is inactive
    let xi = normals(&mut rng, n);
    let pass = ActorPass::new(&policy, &critics, batch.obs.view(), &xi).unwrap();
    if rng.random_bool(0.3) {
        lag.cost_budget = pass.mean_cost_q() + 1.0;
    } else {
        lag.cost_budget = pass.mean_cost_q() - 0.5;
    }
    let analytic = pass.gradient(&policy, &lag).unwrap();
    let numeric = finite_difference(policy.net.params(), 1e-6, |p| {
        let mut probe = policy.clone();
        probe.net.params_mut().copy_from_slice(p);
        ActorPass::statistics(&probe, &critics, batch.obs.view(), &xi)
            .unwrap()
            .value(&lag)
    });
    GradientTrial {
        critic,
        cost_critic,
        actor: relative_error(&analytic, &numeric),
    }
}

/// Exact optimum of the charging problem over actions on a `step`-kWh grid,
/// by dynamic programming over the (grid) SOC. `None` when infeasible.
pub fn grid_optimum(p: &LpProblem, step: f64) -> Option<f64> {
    let units = |x: f64| (x / step).round() as i64;
    let (cap, lo, target) = (units(p.capacity), units(p.soc_min), units(p.soc_target));
    let (up, down) = (units(p.max_charge), units(p.max_discharge));
    let h = p.prices.len();
    let mut best: Vec<Option<f64>> = vec![None; cap as usize + 1];
    best[units(p.initial_soc) as usize] = Some(0.0);
    for (t, price) in p.prices.iter().enumerate() {
        let mut next: Vec<Option<f64>> = vec![None; cap as usize + 1];
        for (s, cost) in best.iter().enumerate() {
            let Some(cost) = cost else { continue };
            for a in -down..=up {
                let s2 = s as i64 + a;
                let ok = if t + 1 == h {
                    s2 == target
                } else {
                    (lo..=cap).contains(&s2)
                };
                if !ok {
                    continue;
                }
                let c = cost + a as f64 * step * price;
                let slot = &mut next[s2 as usize];
                if slot.is_none_or(|old| c < old) {
                    *slot = Some(c);
                }
            }
        }
        best = next;
    }
    best[target as usize]
}

/// Random instance with every quantity on the 0.1-kWh grid.
pub fn random_lp_problem(rng: &mut Rng) -> LpProblem {
    let tenth = |rng: &mut Rng, lo: i64, hi: i64| rng.random_range(lo..=hi) as f64 / 10.0;
    let h = rng.random_range(2..=5);
    LpProblem {
        prices: (0..h).map(|_| rng.random_range(-0.1..0.5)).collect(),
        initial_soc: tenth(rng, 48, 240),
        soc_min: 4.8,
        capacity: 24.0,
        soc_target: tenth(rng, 120, 240),
        max_charge: tenth(rng, 20, 60),
        max_discharge: tenth(rng, 20, 60),
    }
}

/// Config text for the desk-scale setup: two-tier prices, one fixed session
/// per day, 64x64 networks, 20k environment steps.
pub fn desk_config(method: &str, seed: u64, output_dir: &Path) -> String {
    let train = if method.contains("mpc") {
        ""
    } else {
        "[train]\nhidden = [64, 64]\nmax_env_steps = 20000\nepisodes = 100000\n"
    };
    config_text(method, seed, output_dir, train)
}

/// The desk setup with an arbitrary `[train]` section.
pub fn config_text(method: &str, seed: u64, output_dir: &Path, train: &str) -> String {
    format!(
        r#"seed = {seed}
output_dir = "{}"
eval_episodes = 50
eval_seed = 100

[data]
source = "synthetic"
days = 30
test_days = 10

[data.synthetic]
pattern = "two-tier"
low = 0.05
high = 0.30
cheap_start = 0
cheap_end = 6

[env]
state_time_features = true
arrival = {{ mean = 18.0, std = 0.0, lower = 15.0, upper = 21.0 }}
departure = {{ mean = 8.0, std = 0.0, lower = 6.0, upper = 11.0 }}
initial_soc = {{ mean = 0.5, std = 0.0, lower = 0.3, upper = 0.8 }}

[method]
{method}

{train}"#,
        output_dir.display()
    )
}

pub fn desk(method: &str, seed: u64, output_dir: &Path) -> ExperimentConfig {
    ExperimentConfig::parse(&desk_config(method, seed, output_dir), Path::new(".")).unwrap()
}
