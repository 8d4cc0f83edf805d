//! A single seeded experiment run and its artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DataConfig, ExperimentConfig, MethodConfig};
use super::{hex, runtime, validation, Outcome};
use crate::alsac::agent::{layer_sizes, save_agent, Agent};
use crate::alsac::eval::{evaluate_plan, evaluation_plan, DeterministicActor, EvalMetrics, PolicySnapshot};
use crate::alsac::train::{train, write_train_log, TrainOutcome, SELECTION_RULE};
use crate::baselines::{train_penalized, MpcController};
use crate::env::{EvEnv, Normalizer, Session};
use crate::error::{Error, Result};
use crate::nn::{checkpoint, GaussianPolicyHead};
use crate::prices::{gen_synthetic, load_price_csv, split_train_test, DatasetSplit, PriceSeries, SyntheticPriceSpec};
use crate::rng::{stream, Stream};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const AGENT_FILE: &str = "agent.ckpt";
pub const AGENT_MANIFEST_FILE: &str = "agent.json";

/// Data, environments and the test episode plan of a config.
pub struct Prepared {
    /// The config with `eval_episodes` filled in.
    pub config: ExperimentConfig,
    pub split: DatasetSplit,
    pub norm: Normalizer,
    pub train_env: EvEnv,
    pub test_env: EvEnv,
    pub plan: Vec<(usize, Session)>,
}

fn load_series(cfg: &ExperimentConfig) -> Result<PriceSeries> {
    match &cfg.data {
        DataConfig::Csv { path, unit, .. } => load_price_csv(&cfg.resolve(path), *unit),
        DataConfig::Synthetic {
            days,
            noise,
            seed,
            synthetic,
            ..
        } => {
            let spec = SyntheticPriceSpec::new(synthetic.clone(), *noise, seed.unwrap_or(cfg.seed));
            gen_synthetic(&spec, *days)
        }
    }
}

/// Loads and splits the price data, builds both environments and draws the
/// test plan. Every failure here is a problem with the inputs.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let series = load_series(cfg)?;
    let split = split_train_test(&series, cfg.data.test_days())?;
    let norm = Normalizer::from_series(&split.train);
    let train_env = EvEnv::new(cfg.env.clone(), Arc::new(split.train.clone()))?;
    let test_env = EvEnv::new(cfg.env.clone(), Arc::new(split.test.clone()))?;
    if train_env.valid_days().is_empty() {
        return Err(Error::InvalidConfig(
            "training split has no complete episode day".into(),
        ));
    }
    let test_days = test_env.valid_days().len();
    if test_days == 0 {
        return Err(Error::InvalidConfig("test split has no complete episode day".into()));
    }
    let mut config = cfg.clone();
    let episodes = *config.eval_episodes.get_or_insert(test_days);
    let plan = evaluation_plan(&test_env, episodes, &mut stream(config.eval_seed, Stream::EvalSession));
    Ok(Prepared {
        config,
        split,
        norm,
        train_env,
        test_env,
        plan,
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Hash of the test prices, the environment and the sessions evaluated.
pub fn eval_data_digest(prep: &Prepared) -> Result<String> {
    let mut h = Sha256::new();
    h.update(crate::prices::format_timestamp(prep.split.test.start()).as_bytes());
    for p in prep.split.test.prices() {
        h.update(p.to_le_bytes());
    }
    let env = serde_json::to_vec(&prep.config.env).map_err(|e| Error::Runtime(e.to_string()))?;
    h.update(&env);
    for (day, s) in &prep.plan {
        h.update((*day as u64).to_le_bytes());
        h.update((s.arrival_hour as u64).to_le_bytes());
        h.update((s.departure_hour as u64).to_le_bytes());
        h.update(s.initial_soc.to_le_bytes());
    }
    Ok(hex(&h.finalize()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub rule: String,
    pub episode: usize,
    pub train_cost_eur: f64,
    pub train_violation_kwh: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub label: String,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub eval_seed: u64,
    pub config_digest: String,
    pub eval_data_digest: String,
    pub avg_cost_eur: Option<f64>,
    pub avg_violation_kwh: Option<f64>,
    pub eval_episodes: usize,
    pub wall_clock_seconds: f64,
    /// Directory the relative data paths of the config resolve against.
    pub config_dir: PathBuf,
    /// Artifact name to path relative to the manifest.
    pub artifacts: BTreeMap<String, String>,
    pub selection: Option<Selection>,
    pub env_steps: Option<usize>,
    pub updates: Option<usize>,
    pub mpc_fallbacks: Option<usize>,
    /// `ok` or `failed`.
    pub status: String,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Metrics file: one row, six decimals.
pub fn metrics_csv(method: &MethodConfig, m: &EvalMetrics) -> String {
    let sigma = method.sigma().map(|s| s.to_string()).unwrap_or_default();
    format!(
        "method,sigma,avg_cost_eur,avg_violation_kwh,episodes\n{},{sigma},{:.6},{:.6},{}\n",
        method.name(),
        m.avg_cost_eur,
        m.avg_violation_kwh,
        m.episodes.len()
    )
}

pub fn episodes_csv(m: &EvalMetrics) -> String {
    let mut out =
        String::from("episode,day,arrival_hour,departure_hour,initial_soc_kwh,cost_eur,violation_kwh,final_soc_kwh\n");
    for (i, e) in m.episodes.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{:.6},{:.6},{:.6},{:.6}\n",
            e.day,
            e.session.arrival_hour,
            e.session.departure_hour,
            e.session.initial_soc,
            e.cost_eur,
            e.violation_kwh,
            e.final_soc
        ));
    }
    out
}

/// Rebuilds the evaluated policy of an RL run from its `policy.ckpt`.
pub fn load_policy(cfg: &ExperimentConfig, path: &Path) -> Result<PolicySnapshot> {
    let mut nets = checkpoint::load(path)?;
    let obs = cfg.env.observation_len();
    let (scale, offset) = cfg.env.action_affine();
    match cfg.method {
        MethodConfig::Ddpg { .. } => {
            let net = checkpoint::take_net(&mut nets, "policy", &layer_sizes(obs, &cfg.train.hidden, 1))?;
            Ok(PolicySnapshot::Deterministic(DeterministicActor { net, scale, offset }))
        }
        MethodConfig::Alsac | MethodConfig::Sac { .. } => {
            let net = checkpoint::take_net(&mut nets, "policy", &layer_sizes(obs, &cfg.train.hidden, 2))?;
            Ok(PolicySnapshot::Gaussian(GaussianPolicyHead::from_net(
                net, scale, offset,
            )))
        }
        MethodConfig::Mpc(_) => Err(Error::Checkpoint("mpc runs have no policy checkpoint".into())),
    }
}

fn train_method(prep: &mut Prepared) -> Result<(Box<dyn Agent>, TrainOutcome)> {
    let cfg = &prep.config;
    match cfg.method.penalty() {
        None => {
            let (agent, outcome) = train(&mut prep.train_env, &prep.norm, &cfg.train)?;
            Ok((Box::new(agent), outcome))
        }
        Some(pen) => train_penalized(&mut prep.train_env, &prep.norm, &cfg.train, &pen),
    }
}

fn execute(prep: &mut Prepared, out: &Path, record: &mut RunRecord) -> Result<()> {
    let mut artifact = |name: &str, file: &str| {
        record.artifacts.insert(name.into(), file.into());
        out.join(file)
    };
    let metrics = match prep.config.method.clone() {
        MethodConfig::Mpc(m) => {
            let mut controller = MpcController::new(m, stream(prep.config.seed, Stream::Forecast))?;
            let metrics = evaluate_plan(&mut controller, &mut prep.test_env, &prep.norm, &prep.plan)?;
            record.mpc_fallbacks = Some(controller.fallbacks());
            metrics
        }
        _ => {
            let (agent, outcome) = train_method(prep)?;
            let method = prep.config.method.name();
            write_train_log(&artifact("train_log", TRAIN_LOG_FILE), &outcome.log, Some(method))?;
            checkpoint::save(
                &artifact("policy", POLICY_FILE),
                &[("policy", outcome.best.policy.net())],
            )?;
            save_agent(agent.as_ref(), &artifact("agent", AGENT_FILE))?;
            let agent_json =
                serde_json::to_string_pretty(&agent.manifest()).map_err(|e| Error::Runtime(e.to_string()))?;
            write(&artifact("agent_manifest", AGENT_MANIFEST_FILE), agent_json + "\n")?;
            record.selection = Some(Selection {
                rule: SELECTION_RULE.into(),
                episode: outcome.best.episode,
                train_cost_eur: outcome.best.train_cost_eur,
                train_violation_kwh: outcome.best.train_violation_kwh,
            });
            record.env_steps = Some(outcome.env_steps);
            record.updates = Some(outcome.updates);
            let mut policy = outcome.best.policy.clone();
            let metrics = evaluate_plan(&mut policy, &mut prep.test_env, &prep.norm, &prep.plan)?;
            if let Some(reason) = outcome.halted {
                write(
                    &artifact("metrics", METRICS_FILE),
                    metrics_csv(&prep.config.method, &metrics),
                )?;
                return Err(Error::Runtime(format!("training halted: {reason}")));
            }
            metrics
        }
    };
    write(
        &artifact("metrics", METRICS_FILE),
        metrics_csv(&prep.config.method, &metrics),
    )?;
    write(&artifact("episodes", EPISODES_FILE), episodes_csv(&metrics))?;
    record.avg_cost_eur = Some(metrics.avg_cost_eur);
    record.avg_violation_kwh = Some(metrics.avg_violation_kwh);
    Ok(())
}

/// Runs an already-parsed config and writes its artifacts under the output
/// directory. Runtime failures still leave a manifest describing the error.
pub fn run_config(cfg: &ExperimentConfig) -> Outcome<RunRecord> {
    let started = Instant::now();
    let mut prep = prepare(cfg).map_err(validation)?;
    let out = prep.config.output_dir();
    fs::create_dir_all(&out).map_err(|e| runtime(Error::io(&out, e)))?;

    let setup = || -> Result<RunRecord> {
        let resolved = prep.config.to_toml()?;
        write(&out.join(RESOLVED_CONFIG_FILE), &resolved)?;
        let config_dir = fs::canonicalize(&prep.config.base_dir).map_err(|e| Error::io(&prep.config.base_dir, e))?;
        Ok(RunRecord {
            method: prep.config.method.name().into(),
            label: prep.config.method.label(),
            sigma: prep.config.method.sigma(),
            seed: prep.config.seed,
            eval_seed: prep.config.eval_seed,
            config_digest: sha256_hex(prep.config.digest_text()?.as_bytes()),
            eval_data_digest: eval_data_digest(&prep)?,
            avg_cost_eur: None,
            avg_violation_kwh: None,
            eval_episodes: prep.plan.len(),
            wall_clock_seconds: 0.0,
            config_dir,
            artifacts: BTreeMap::from([("resolved_config".to_string(), RESOLVED_CONFIG_FILE.to_string())]),
            selection: None,
            env_steps: None,
            updates: None,
            mpc_fallbacks: None,
            status: "ok".into(),
            error: None,
        })
    };
    let mut record = setup().map_err(runtime)?;

    let result = execute(&mut prep, &out, &mut record);
    record.wall_clock_seconds = started.elapsed().as_secs_f64();
    if let Err(e) = &result {
        record.status = "failed".into();
        record.error = Some(e.to_string());
    }
    let json = serde_json::to_string_pretty(&record).map_err(|e| runtime(Error::Runtime(e.to_string())))?;
    write(&out.join(MANIFEST_FILE), json + "\n").map_err(runtime)?;
    result.map_err(runtime)?;
    Ok(record)
}

/// Loads the config at `path` and runs it.
pub fn run(path: &Path) -> Outcome<RunRecord> {
    let cfg = ExperimentConfig::load(path).map_err(validation)?;
    run_config(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, method: &str) -> ExperimentConfig {
        let text = format!(
            r#"
seed = 4
output_dir = "out"

[data]
source = "synthetic"
days = 8
test_days = 4

[data.synthetic]
pattern = "two-tier"
low = 0.05
high = 0.30
cheap_start = 0
cheap_end = 6

[method]
{method}

[train]
episodes = 6
hidden = [8]
batch_size = 16
warmup_episodes = 2
checkpoint_every = 3
selection_episodes = 2
"#
        );
        ExperimentConfig::parse(&text, dir).unwrap()
    }

    #[test]
    fn plan_defaults_to_usable_test_days() {
        let dir = tempfile::tempdir().unwrap();
        let prep = prepare(&config(dir.path(), "name = \"alsac\"")).unwrap();
        assert_eq!(prep.plan.len(), 2);
        assert_eq!(prep.config.eval_episodes, Some(2));
        assert_eq!(prep.split.train.days(), 4);
    }

    #[test]
    fn rl_run_writes_artifacts_and_reloads_policy() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "name = \"sac\"\nsigma = 0.12");
        let record = run_config(&cfg).unwrap();
        let out = dir.path().join("out");
        for file in record.artifacts.values() {
            assert!(out.join(file).is_file(), "{file}");
        }
        assert_eq!(RunRecord::load(&out.join(MANIFEST_FILE)).unwrap(), record);
        let policy = load_policy(&cfg, &out.join(POLICY_FILE)).unwrap();
        assert!(matches!(policy, PolicySnapshot::Gaussian(_)));

        let mut wider = cfg.clone();
        wider.train.hidden = vec![16];
        let err = load_policy(&wider, &out.join(POLICY_FILE)).unwrap_err();
        assert!(err.to_string().contains("config expects"), "{err}");
    }

    #[test]
    fn digests_ignore_output_dir_but_not_settings() {
        let dir = tempfile::tempdir().unwrap();
        let a = config(dir.path(), "name = \"alsac\"");
        let mut b = a.clone();
        b.output_dir = "elsewhere".into();
        assert_eq!(a.digest_text().unwrap(), b.digest_text().unwrap());
        b.train.lr = 1e-3;
        assert_ne!(a.digest_text().unwrap(), b.digest_text().unwrap());

        let pa = prepare(&a).unwrap();
        let mut c = a.clone();
        c.eval_seed = 99;
        let pc = prepare(&c).unwrap();
        assert_ne!(eval_data_digest(&pa).unwrap(), eval_data_digest(&pc).unwrap());
        assert_eq!(
            eval_data_digest(&pa).unwrap(),
            eval_data_digest(&prepare(&b).unwrap()).unwrap()
        );
    }
}
