//! Experiment configuration files.
//!
//! A config is a TOML document with top-level `seed` and `output_dir`, and the
//! sections `[data]`, `[env]`, `[method]` and `[train]`. Omitted `[env]` and
//! `[train]` keys take the documented defaults; every default is written back
//! out in the resolved config of a run. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::alsac::train::TrainConfig;
use crate::baselines::{MpcConfig, PenalizedBase, PenaltyConfig};
use crate::env::EvEnvConfig;
use crate::error::{Error, Result};
use crate::prices::{PricePattern, PriceUnit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataConfig {
    /// Hourly `timestamp,price` file; `path` is relative to the config file.
    Csv {
        path: PathBuf,
        unit: PriceUnit,
        test_days: usize,
    },
    Synthetic {
        days: usize,
        test_days: usize,
        noise: f64,
        /// Defaults to the run seed.
        seed: Option<u64>,
        synthetic: PricePattern,
    },
}

impl DataConfig {
    pub fn test_days(&self) -> usize {
        match self {
            DataConfig::Csv { test_days, .. } | DataConfig::Synthetic { test_days, .. } => *test_days,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum MethodConfig {
    Alsac,
    Sac { sigma: f64 },
    Ddpg { sigma: f64, exploration_noise: f64 },
    Mpc(MpcConfig),
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Alsac => "alsac",
            MethodConfig::Sac { .. } => "sac",
            MethodConfig::Ddpg { .. } => "ddpg",
            MethodConfig::Mpc(_) => "mpc",
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self {
            MethodConfig::Sac { sigma } | MethodConfig::Ddpg { sigma, .. } => Some(*sigma),
            _ => None,
        }
    }

    pub fn penalty(&self) -> Option<PenaltyConfig> {
        match *self {
            MethodConfig::Sac { sigma } => Some(PenaltyConfig {
                sigma,
                base: PenalizedBase::Sac,
                ..PenaltyConfig::default()
            }),
            MethodConfig::Ddpg {
                sigma,
                exploration_noise,
            } => Some(PenaltyConfig {
                sigma,
                base: PenalizedBase::Ddpg,
                exploration_noise,
            }),
            _ => None,
        }
    }

    /// Short label such as `sac(sigma=1.2)`.
    pub fn label(&self) -> String {
        match self {
            MethodConfig::Mpc(m) if m.is_ideal() => "mpc(ideal)".into(),
            MethodConfig::Mpc(m) => format!("mpc(error={})", m.price_error_std_fraction),
            m => match m.sigma() {
                Some(s) => format!("{}(sigma={s})", m.name()),
                None => m.name().into(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Seed for test-split sessions; defaults to `seed`. Runs that should be
    /// compared across training seeds share one value here.
    pub eval_seed: u64,
    pub output_dir: PathBuf,
    /// Defaults to one episode per usable test day.
    pub eval_episodes: Option<usize>,
    pub data: DataConfig,
    pub env: EvEnvConfig,
    pub method: MethodConfig,
    pub train: TrainConfig,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

const TOP_KEYS: &[&str] = &[
    "seed",
    "eval_seed",
    "output_dir",
    "eval_episodes",
    "data",
    "env",
    "method",
    "train",
];
const CSV_KEYS: &[&str] = &["source", "path", "unit", "test_days"];
const SYNTHETIC_KEYS: &[&str] = &["source", "days", "test_days", "noise", "seed", "synthetic"];
const TRAIN_OPTIONAL_KEYS: &[&str] = &["max_env_steps", "penalty"];

fn suggest<'a>(key: &str, known: &[&'a str]) -> Option<&'a str> {
    known
        .iter()
        .map(|k| (strsim::levenshtein(key, k), *k))
        .filter(|(d, k)| *d <= 2.max(k.len() / 3))
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| k)
}

fn check_keys(section: &str, table: &Table, known: &[&str], errors: &mut Vec<String>) {
    for key in table.keys() {
        if !known.contains(&key.as_str()) {
            let hint = suggest(key, known)
                .map(|s| format!(", did you mean `{s}`?"))
                .unwrap_or_default();
            errors.push(format!("{section}: unknown key `{key}`{hint}"));
        }
    }
}

/// Checks `user` against the key structure of `defaults`, recursing into
/// sub-tables.
fn check_against(section: &str, user: &Table, defaults: &Table, extra: &[&str], errors: &mut Vec<String>) {
    let known: Vec<&str> = defaults
        .keys()
        .map(String::as_str)
        .chain(extra.iter().copied())
        .collect();
    check_keys(section, user, &known, errors);
    for (key, value) in user {
        if let (Value::Table(sub), Some(Value::Table(def))) = (value, defaults.get(key)) {
            check_against(&format!("{section}.{key}"), sub, def, &[], errors);
        }
    }
}

fn merge(base: &mut Table, overlay: &Table) {
    for (key, value) in overlay {
        match (base.get_mut(key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(key.clone(), value.clone());
            }
        }
    }
}

fn defaults_table<T: Serialize>(value: &T) -> Table {
    match Value::try_from(value) {
        Ok(Value::Table(t)) => t,
        _ => Table::new(),
    }
}

fn section<'a>(root: &'a Table, name: &str, errors: &mut Vec<String>) -> Option<&'a Table> {
    match root.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(_) => {
            errors.push(format!("`{name}` must be a table"));
            None
        }
    }
}

/// Deserializes a section unless its keys already produced errors, which
/// serde would only repeat.
fn decode<T: for<'de> Deserialize<'de>>(section: &str, value: Table, errors: &mut Vec<String>) -> Option<T> {
    if errors.iter().any(|e| e.starts_with(section)) {
        return None;
    }
    match Value::Table(value).try_into() {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{section}: {}", e.message().trim()));
            None
        }
    }
}

fn pattern_keys(pattern: Option<&str>) -> &'static [&'static str] {
    match pattern {
        Some("two-tier") => &["pattern", "low", "high", "cheap_start", "cheap_end"],
        Some("sinusoid") => &["pattern", "low", "high", "peak_hour"],
        Some("random-walk") => &["pattern", "initial", "low", "high"],
        _ => &["pattern"],
    }
}

fn parse_data(t: &Table, errors: &mut Vec<String>) -> Option<DataConfig> {
    let source = t.get("source").and_then(Value::as_str);
    match source {
        Some("csv") => {
            check_keys("data", t, CSV_KEYS, errors);
            let mut full = t.clone();
            full.entry("unit")
                .or_insert_with(|| Value::String("eur_per_kwh".into()));
            decode("data", full, errors)
        }
        Some("synthetic") => {
            check_keys("data", t, SYNTHETIC_KEYS, errors);
            if let Some(Value::Table(p)) = t.get("synthetic") {
                let kind = p.get("pattern").and_then(Value::as_str);
                if !matches!(kind, Some("two-tier" | "sinusoid" | "random-walk")) {
                    errors.push("data.synthetic: `pattern` must be one of two-tier, sinusoid, random-walk".into());
                    return None;
                }
                check_keys("data.synthetic", p, pattern_keys(kind), errors);
            }
            let mut full = t.clone();
            full.entry("noise").or_insert(Value::Float(0.0));
            decode("data", full, errors)
        }
        _ => {
            errors.push("data: `source` must be \"csv\" or \"synthetic\"".into());
            None
        }
    }
}

fn parse_method(t: &Table, errors: &mut Vec<String>) -> Option<MethodConfig> {
    let name = t.get("name").and_then(Value::as_str);
    let mut full = t.clone();
    match name {
        Some("alsac") => check_keys("method", t, &["name"], errors),
        Some("sac") => check_keys("method", t, &["name", "sigma"], errors),
        Some("ddpg") => {
            check_keys("method", t, &["name", "sigma", "exploration_noise"], errors);
            full.entry("exploration_noise")
                .or_insert(Value::Float(PenaltyConfig::default().exploration_noise));
        }
        Some("mpc") => {
            let mut defaults = defaults_table(&MpcConfig::default());
            defaults.insert("name".into(), Value::String("mpc".into()));
            check_against("method", t, &defaults, &[], errors);
            merge(&mut defaults, t);
            full = defaults;
        }
        _ => {
            errors.push("method: `name` must be one of alsac, sac, ddpg, mpc".into());
            return None;
        }
    }
    decode("method", full, errors)
}

impl ExperimentConfig {
    /// Parses and validates a config document. All problems found are
    /// reported together.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("config is not valid TOML: {}", e.message())))?;
        let mut errors = Vec::new();
        check_keys("top level", &root, TOP_KEYS, &mut errors);

        let int = |key: &str, errors: &mut Vec<String>| -> Option<i64> {
            match root.get(key) {
                None => None,
                Some(Value::Integer(i)) if *i >= 0 => Some(*i),
                Some(_) => {
                    errors.push(format!("`{key}` must be a non-negative integer"));
                    None
                }
            }
        };
        let seed = int("seed", &mut errors);
        if seed.is_none() && !root.contains_key("seed") {
            errors.push("missing `seed`".into());
        }
        let eval_seed = int("eval_seed", &mut errors);
        let eval_episodes = int("eval_episodes", &mut errors).map(|v| v as usize);
        let output_dir = match root.get("output_dir") {
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => {
                errors.push("`output_dir` must be a string".into());
                None
            }
            None => {
                errors.push("missing `output_dir`".into());
                None
            }
        };

        let data = match section(&root, "data", &mut errors) {
            Some(t) => parse_data(t, &mut errors),
            None => {
                errors.push("missing [data] section".into());
                None
            }
        };
        let method = match section(&root, "method", &mut errors) {
            Some(t) => parse_method(t, &mut errors),
            None => {
                errors.push("missing [method] section".into());
                None
            }
        };
        let env = {
            let mut defaults = defaults_table(&EvEnvConfig::default());
            if let Some(t) = section(&root, "env", &mut errors) {
                check_against("env", t, &defaults, &[], &mut errors);
                merge(&mut defaults, t);
            }
            decode::<EvEnvConfig>("env", defaults, &mut errors)
        };
        let train = {
            let mut defaults = defaults_table(&TrainConfig::default());
            if let Some(t) = section(&root, "train", &mut errors) {
                check_against("train", t, &defaults, TRAIN_OPTIONAL_KEYS, &mut errors);
                merge(&mut defaults, t);
            }
            decode::<TrainConfig>("train", defaults, &mut errors)
        };

        match (seed, output_dir, data, method, env, train) {
            (Some(seed), Some(output_dir), Some(data), Some(method), Some(env), Some(mut train))
                if errors.is_empty() =>
            {
                train.seed = seed as u64;
                let cfg = Self {
                    seed: seed as u64,
                    eval_seed: eval_seed.map_or(seed as u64, |s| s as u64),
                    output_dir,
                    eval_episodes,
                    data,
                    env,
                    method,
                    train,
                    base_dir: base_dir.to_path_buf(),
                };
                cfg.validate()?;
                Ok(cfg)
            }
            _ => Err(Error::InvalidConfig(errors.join("\n"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Value checks beyond the key schema.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let mut note = |r: Result<()>| {
            if let Err(e) = r {
                errors.push(e.to_string());
            }
        };
        note(self.env.validate());
        note(self.train.validate());
        match &self.method {
            MethodConfig::Mpc(m) => note(m.validate()),
            m => {
                if let Some(p) = m.penalty() {
                    note(p.validate());
                }
            }
        }
        let test_days = self.data.test_days();
        if test_days < 3 {
            errors.push("data: test_days must be at least 3 (two are lost to lookback and horizon)".into());
        }
        match &self.data {
            DataConfig::Csv { path, .. } => {
                let full = self.resolve(path);
                if !full.is_file() {
                    errors.push(format!("data: price file {} does not exist", full.display()));
                }
            }
            DataConfig::Synthetic { days, noise, .. } => {
                if *days < test_days + 3 {
                    errors.push(format!(
                        "data: {days} synthetic days leave fewer than 3 training days after a {test_days}-day test split"
                    ));
                }
                if !(noise.is_finite() && *noise >= 0.0) {
                    errors.push("data: noise must be non-negative".into());
                }
            }
        }
        if self.eval_episodes == Some(0) {
            errors.push("eval_episodes must be positive".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errors.join("\n")))
        }
    }

    /// Resolves a path from the config against its directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// The fully-resolved config as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Runtime(format!("cannot render config: {e}")))
    }

    /// Resolved config without `output_dir`, the input to the config digest.
    pub fn digest_text(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.to_toml()
    }
}
