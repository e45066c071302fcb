//! Experiment descriptions, orchestration across seeds and artifact layout.
//!
//! An [`ExperimentConfig`] is a small JSON object; only `task` is required.
//! Task-specific knobs go in the flat `hyperparameters` map and are applied
//! on top of the task's defaults. Everything an experiment writes lands in
//! `<out>/<config_hash>/`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::agents::{train_ail, AgentKind, DeployedPolicy, RewardChoice, TrainConfig};
use crate::analysis::{
    gradient_accuracy_experiment, snr_study, standard_snr_cases, approximation_study, GradAccuracyConfig,
};
use crate::dp::{policy_iteration, q_minus_r_plus_c, CriticKind, PolicyIterationResult};
use crate::env::{make_gridworld, EnvKind};
use crate::error::{Error, Result};
use crate::nn::snapshot;

pub use crate::agents::{evaluate_policy, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    GridworldPi,
    Car1d,
    PlanarReach,
    PlanarPush,
    GradAccuracy,
    Snr,
    Theorem2,
}

impl Task {
    pub fn env(self) -> Option<EnvKind> {
        match self {
            Task::Car1d => Some(EnvKind::Car1d),
            Task::PlanarReach => Some(EnvKind::Reach),
            Task::PlanarPush => Some(EnvKind::Push),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::GridworldPi => "gridworld_pi",
            Task::Car1d => "car1d",
            Task::PlanarReach => "planar_reach",
            Task::PlanarPush => "planar_push",
            Task::GradAccuracy => "grad_accuracy",
            Task::Snr => "snr",
            Task::Theorem2 => "theorem2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: Task,
    pub agent: AgentKind,
    pub reward_kind: RewardChoice,
    pub seeds: Vec<u64>,
    pub max_env_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub hyperparameters: BTreeMap<String, Value>,
}

const TOP_LEVEL_KEYS: [&str; 8] = [
    "task",
    "agent",
    "reward_kind",
    "seeds",
    "max_env_steps",
    "eval_every",
    "eval_episodes",
    "hyperparameters",
];

impl ExperimentConfig {
    pub fn new(task: Task) -> Self {
        Self {
            task,
            agent: AgentKind::Sarc,
            reward_kind: RewardChoice::FmaxRkl,
            seeds: vec![0, 1, 2, 3, 4],
            max_env_steps: 25_000,
            eval_every: 5_000,
            eval_episodes: 20,
            hyperparameters: BTreeMap::new(),
        }
    }

    /// Parses and validates a JSON object, filling and logging defaults.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let Value::Object(obj) = value else {
            return Err(Error::config("<root>", "expected a JSON object"));
        };
        if let Some(key) = obj.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
            return Err(Error::config(key.as_str(), "unknown key"));
        }
        let task: Task = match obj.get("task") {
            Some(v) => field(v, "task")?,
            None => return Err(Error::config("task", "missing required field")),
        };
        let defaults = Self::new(task);
        let mut config = defaults.clone();
        macro_rules! take {
            ($name:ident) => {
                match obj.get(stringify!($name)) {
                    Some(v) => config.$name = field(v, stringify!($name))?,
                    None => log::info!(
                        "config: `{}` defaults to {}",
                        stringify!($name),
                        serde_json::to_string(&defaults.$name).unwrap_or_default()
                    ),
                }
            };
        }
        take!(agent);
        take!(reward_kind);
        take!(seeds);
        take!(max_env_steps);
        take!(eval_every);
        take!(eval_episodes);
        take!(hyperparameters);
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Checks the invariants and resolves the hyperparameters, so every
    /// error surfaces before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "must not be empty"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes", "must be at least 1"));
        }
        self.resolve().map(|_| ())
    }

    /// Fully resolved settings of the task this config describes.
    pub fn resolve(&self) -> Result<Resolved> {
        let hp = &self.hyperparameters;
        match self.task {
            Task::GridworldPi => Ok(Resolved::Gridworld(overlay(&GridworldSettings::default(), hp, &|k| vec![k])?)),
            Task::Car1d | Task::PlanarReach | Task::PlanarPush => {
                let env = self.task.env().expect("training task has an environment");
                let mut base = TrainConfig::new(env, self.agent, self.reward_kind, 0);
                base.max_env_steps = self.max_env_steps;
                base.eval_every = self.eval_every;
                base.eval_episodes = self.eval_episodes;
                for key in ["env", "agent", "reward", "seed", "max_env_steps", "eval_every", "eval_episodes", "disc"] {
                    if hp.contains_key(key) {
                        return Err(Error::config(key, "not a hyperparameter; set it at the top level"));
                    }
                }
                let train: TrainConfig = overlay(&base, hp, &train_key_path)?;
                train.validate()?;
                Ok(Resolved::Train(train))
            }
            Task::GradAccuracy => {
                if hp.contains_key("seeds") {
                    return Err(Error::config("seeds", "not a hyperparameter; set it at the top level"));
                }
                let base = GradAccuracyConfig {
                    seeds: self.seeds.clone(),
                    ..Default::default()
                };
                let config: GradAccuracyConfig = overlay(&base, hp, &|k| vec![k])?;
                if config.seeds.len() < 3 {
                    return Err(Error::config("seeds", "grad_accuracy needs at least three seeds"));
                }
                Ok(Resolved::GradAccuracy(config))
            }
            Task::Snr => {
                let s: SnrSettings = overlay(&SnrSettings::default(), hp, &|k| vec![k])?;
                if s.n_samples < 10_000 {
                    return Err(Error::config("n_samples", "must be at least 10000"));
                }
                Ok(Resolved::Snr(s))
            }
            Task::Theorem2 => {
                let s: ApproximationSettings = overlay(&ApproximationSettings::default(), hp, &|k| vec![k])?;
                if s.grid_points < 2 {
                    return Err(Error::config("grid_points", "must be at least 2"));
                }
                Ok(Resolved::Theorem2(s))
            }
        }
    }

    /// Hex SHA-256 (first 16 characters) of the canonical JSON of everything
    /// that influences this experiment's output. Defaults written out
    /// explicitly, key order and fields the task ignores do not change it.
    pub fn config_hash(&self) -> Result<String> {
        let payload = self.canonical()?;
        let digest = Sha256::digest(serde_json::to_vec(&payload)?);
        Ok(hex::encode(&digest[..8]))
    }

    fn canonical(&self) -> Result<Value> {
        // serde_json's default map is ordered, so serialization is canonical
        let resolved = serde_json::to_value(self.resolve()?)?;
        let mut m = Map::new();
        m.insert("task".into(), Value::from(self.task.name()));
        m.insert("seeds".into(), serde_json::to_value(&self.seeds)?);
        m.insert("settings".into(), resolved);
        Ok(Value::Object(m))
    }
}

fn field<T: DeserializeOwned>(v: &Value, name: &str) -> Result<T> {
    T::deserialize(v).map_err(|e| Error::config(name, e.to_string()))
}

/// Hyperparameter names that reach into the nested discriminator settings.
fn train_key_path(key: &str) -> Vec<&str> {
    match key {
        "disc_hidden" => vec!["disc", "hidden"],
        "disc_activation" => vec!["disc", "activation"],
        "disc_learning_rate" => vec!["disc", "learning_rate"],
        "logit_clip" => vec!["disc", "logit_clip"],
        "gp_lambda" => vec!["disc", "gp_lambda"],
        "reward_scale" => vec!["disc", "reward_scale"],
        other => vec![other],
    }
}

/// Writes each hyperparameter over `base`'s JSON form. An unknown key or a
/// value of the wrong type is reported under the hyperparameter's name.
fn overlay<T>(base: &T, hp: &BTreeMap<String, Value>, path_of: &dyn Fn(&str) -> Vec<&str>) -> Result<T>
where
    T: Serialize + DeserializeOwned,
{
    let mut value = serde_json::to_value(base)?;
    for (key, v) in hp {
        let path = path_of(key);
        let mut slot = &mut value;
        for part in &path {
            slot = match slot.get_mut(*part) {
                Some(s) => s,
                None => return Err(Error::config(key.as_str(), "unknown hyperparameter")),
            };
        }
        *slot = v.clone();
        T::deserialize(&value).map_err(|e| Error::config(key.as_str(), e.to_string()))?;
    }
    Ok(T::deserialize(&value)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridworldSettings {
    pub width: usize,
    pub height: usize,
    pub tol: f64,
}

impl Default for GridworldSettings {
    fn default() -> Self {
        Self {
            width: 5,
            height: 5,
            tol: crate::dp::DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrSettings {
    pub n_samples: usize,
}

impl Default for SnrSettings {
    fn default() -> Self {
        Self { n_samples: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproximationSettings {
    pub n_configs: usize,
    pub grid_points: usize,
}

impl Default for ApproximationSettings {
    fn default() -> Self {
        Self {
            n_configs: 20,
            grid_points: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolved {
    Gridworld(GridworldSettings),
    /// The per-seed training config with `seed` left at 0.
    Train(TrainConfig),
    GradAccuracy(GradAccuracyConfig),
    Snr(SnrSettings),
    Theorem2(ApproximationSettings),
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json_str(&text)
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub config_hash: String,
    pub dir: PathBuf,
    /// One per seed for training tasks, empty otherwise.
    pub records: Vec<RunRecord>,
    pub summary: Value,
}

/// Runs `config` and writes its artifacts under `out_root/<config_hash>/`.
pub fn run_experiment(config: &ExperimentConfig, out_root: &Path) -> Result<ExperimentOutput> {
    config.validate()?;
    let resolved = config.resolve()?;
    let hash = config.config_hash()?;
    let dir = out_root.join(&hash);
    std::fs::create_dir_all(&dir)?;
    let mut resolved_json = config.canonical()?;
    resolved_json["config"] = serde_json::to_value(config)?;
    write_json(&dir.join("config.json"), &resolved_json)?;

    let seed = config.seeds[0];
    let (records, summary) = match resolved {
        Resolved::Gridworld(s) => (Vec::new(), run_gridworld(&s, &dir)?),
        Resolved::Train(base) => run_training(&base, &config.seeds, &hash, &dir)?,
        Resolved::GradAccuracy(c) => {
            let report = gradient_accuracy_experiment(&c)?;
            report.write_csv(BufWriter::new(File::create(dir.join("grad_accuracy.csv"))?))?;
            (Vec::new(), report.summary_json(&c))
        }
        Resolved::Snr(s) => {
            let rows = snr_study(&standard_snr_cases(), s.n_samples, seed)?;
            let mut w = csv::Writer::from_path(dir.join("snr.csv"))?;
            w.write_record(["case", "s_r", "s_c", "s_rc", "snr_c", "formula", "monte_carlo", "relative_error"])?;
            for r in &rows {
                let i = r.inputs;
                w.write_record(
                    std::iter::once(r.case.to_string())
                        .chain([i.s_r, i.s_c, i.s_rc, i.snr_c, r.formula, r.monte_carlo, r.relative_error].map(fmt)),
                )?;
            }
            w.flush()?;
            let worst = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
            (Vec::new(), serde_json::json!({ "rows": rows, "max_relative_error": worst }))
        }
        Resolved::Theorem2(s) => {
            let rows = approximation_study(s.n_configs, s.grid_points, seed)?;
            let mut w = csv::Writer::from_path(dir.join("theorem2.csv"))?;
            w.write_record(["epsilon", "big_d", "x0", "sup_error", "grad_gap"])?;
            for r in &rows {
                w.write_record([r.epsilon, r.big_d, r.x0, r.sup_error, r.grad_gap].map(fmt))?;
            }
            w.flush()?;
            let bound_holds = rows.iter().all(|r| r.sup_error <= r.epsilon);
            let max_gap_error = rows.iter().map(|r| (r.grad_gap - 2.0 * r.big_d).abs()).fold(0.0, f64::max);
            (
                Vec::new(),
                serde_json::json!({ "rows": rows, "bound_holds": bound_holds, "max_gap_error": max_gap_error }),
            )
        }
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(ExperimentOutput {
        config_hash: hash,
        dir,
        records,
        summary,
    })
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// Result of policy iteration with both critics on one grid world.
#[derive(Debug, Clone, Serialize)]
pub struct GridworldReport {
    pub c: PolicyIterationResult,
    pub q: PolicyIterationResult,
    pub same_policy: bool,
    /// `‖Q* − (r + C*)‖∞`.
    pub residual: f64,
}

pub fn gridworld_report(settings: &GridworldSettings) -> Result<GridworldReport> {
    let goal = (settings.width.saturating_sub(1), settings.height.saturating_sub(1));
    let mdp = make_gridworld(settings.width, settings.height, goal).map_err(|e| Error::config("width", e.to_string()))?;
    let c = policy_iteration(&mdp, CriticKind::C, settings.tol)?;
    let q = policy_iteration(&mdp, CriticKind::Q, settings.tol)?;
    Ok(GridworldReport {
        same_policy: c.policy == q.policy,
        residual: q_minus_r_plus_c(&mdp, &q.table, &c.table),
        c,
        q,
    })
}

fn run_gridworld(settings: &GridworldSettings, dir: &Path) -> Result<Value> {
    let report = gridworld_report(settings)?;
    let mut w = csv::Writer::from_path(dir.join("residuals.csv"))?;
    w.write_record(["critic", "phase", "sweep", "residual"])?;
    for (name, run) in [("c", &report.c), ("q", &report.q)] {
        for (phase, trace) in run.residual_history.iter().enumerate() {
            for (sweep, r) in trace.iter().enumerate() {
                w.write_record([name.to_string(), phase.to_string(), sweep.to_string(), fmt(*r)])?;
            }
        }
    }
    w.flush()?;
    Ok(serde_json::json!({
        "policy": report.c.policy.greedy_actions(),
        "C_table": report.c.table.values,
        "Q_table": report.q.table.values,
        "improvement_steps": report.c.improvement_steps,
        "residual_history": report.c.residual_history,
        "q_improvement_steps": report.q.improvement_steps,
        "same_policy": report.same_policy,
        "q_minus_r_plus_c": report.residual,
    }))
}

fn run_training(base: &TrainConfig, seeds: &[u64], hash: &str, dir: &Path) -> Result<(Vec<RunRecord>, Value)> {
    let mut records = Vec::with_capacity(seeds.len());
    let mut per_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let config = TrainConfig { seed, ..base.clone() };
        log::info!("training {} on {:?}, seed {seed}", config.agent.name(), config.env);
        let mut out = train_ail(&config)?;
        out.record.config_hash = hash.to_string();
        out.record.write_csv(BufWriter::new(File::create(dir.join(format!("seed_{seed}.csv")))?))?;
        save_policy(&out.actor, &dir.join(format!("policy_seed_{seed}.bin")))?;
        if let (Some(disc), Some(kind)) = (&out.discriminator, config.reward.adversarial()) {
            disc.save(&dir.join(format!("disc_seed_{seed}.bin")), kind)?;
        }
        per_seed.push(serde_json::json!({
            "seed": seed,
            "final_return": out.record.final_return(),
            "wall_time_s": out.record.wall_time_s,
        }));
        records.push(out.record);
    }
    let finals: Vec<f64> = records.iter().filter_map(RunRecord::final_return).collect();
    let (mean, std) = mean_std(&finals);
    let summary = serde_json::json!({
        "agent": base.agent.name(),
        "reward_kind": base.reward,
        "env": base.env,
        "seeds": per_seed,
        "final_return_mean": mean,
        "final_return_std": std,
    });
    Ok((records, summary))
}

/// Mean and population standard deviation; `(NaN, NaN)` for no values.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// JSON sidecar stored next to a policy snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolicySidecar {
    normalizer: crate::agents::Normalizer,
    env_action_scale: f64,
    action_scale: f64,
}

/// Policy snapshot plus a `.json` sidecar with the observation normalizer
/// and action scales.
pub fn save_policy(actor: &DeployedPolicy, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    snapshot::write_snapshot(actor.policy.net(), BufWriter::new(file))?;
    let sidecar = PolicySidecar {
        normalizer: actor.normalizer.clone(),
        env_action_scale: actor.env_action_scale,
        action_scale: actor.policy.action_scale(),
    };
    write_json(&path.with_extension("json"), &serde_json::to_value(sidecar)?)
}

pub fn load_policy(path: &Path) -> Result<DeployedPolicy> {
    let net = snapshot::read_snapshot(std::io::BufReader::new(File::open(path)?))?;
    let sidecar: PolicySidecar = serde_json::from_reader(File::open(path.with_extension("json"))?)?;
    let policy = crate::agents::SquashedGaussianPolicy::from_net(net, sidecar.action_scale, 1e-3)?;
    if sidecar.normalizer.mean.len() != policy.state_dim() {
        return Err(Error::Format("normalizer does not match the policy input".into()));
    }
    Ok(DeployedPolicy {
        policy,
        normalizer: sidecar.normalizer,
        env_action_scale: sidecar.env_action_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_reaches_nested_discriminator_fields() {
        let cfg = ExperimentConfig::from_value(serde_json::json!({
            "task": "planar_reach",
            "hyperparameters": {"gp_lambda": 0.0, "alpha": 0.5}
        }))
        .unwrap();
        let Resolved::Train(t) = cfg.resolve().unwrap() else { panic!() };
        assert_eq!(t.disc.gp_lambda, 0.0);
        assert_eq!(t.alpha, 0.5);
    }

    #[test]
    fn top_level_fields_are_not_hyperparameters() {
        let err = ExperimentConfig::from_value(serde_json::json!({
            "task": "car1d",
            "hyperparameters": {"seed": 3}
        }))
        .unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "seed"));
    }

    #[test]
    fn mean_std_of_constant_is_zero() {
        assert_eq!(mean_std(&[2.0, 2.0]), (2.0, 0.0));
        assert!(mean_std(&[]).0.is_nan());
    }
}
