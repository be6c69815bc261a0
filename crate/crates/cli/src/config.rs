//! Experiment configuration: TOML files layered over an optional `base`.

use std::path::{Path, PathBuf};

use progresscounts::envs::{build_task, Task, TaskFamily};
use progresscounts::intrinsic::{RewardConfig, RewardMode};
use progresscounts::rl::{BinningConfig, BinningKind, PpoConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("config base chain loops back to {0}")]
    Cycle(PathBuf),
    #[error("`base` must be a string path")]
    BaseType,
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Training signal and binning for one run, as named in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Counts,
    #[serde(rename = "noveld")]
    NovelD,
    SimhashCounts,
    SimhashNoveld,
    ProgressAsReward,
    SparseOnly,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Counts => "counts",
            Variant::NovelD => "noveld",
            Variant::SimhashCounts => "simhash_counts",
            Variant::SimhashNoveld => "simhash_noveld",
            Variant::ProgressAsReward => "progress_as_reward",
            Variant::SparseOnly => "sparse_only",
        }
    }

    pub fn reward_mode(self) -> RewardMode {
        match self {
            Variant::Counts | Variant::SimhashCounts => RewardMode::Counts,
            Variant::NovelD | Variant::SimhashNoveld => RewardMode::NovelD,
            Variant::ProgressAsReward => RewardMode::ProgressAsReward,
            Variant::SparseOnly => RewardMode::SparseOnly,
        }
    }

    pub fn binning_kind(self) -> BinningKind {
        match self {
            Variant::SimhashCounts | Variant::SimhashNoveld => BinningKind::SimHash,
            _ => BinningKind::Progress,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateSource {
    /// The task's bundled progress program.
    #[default]
    Reference,
    /// `.prog` files from `dir` (default `fixtures/<task>`).
    Fixtures {
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default = "default_candidates")]
        count: usize,
    },
    /// Chat-completions endpoint configured through environment variables.
    Endpoint {
        #[serde(default = "default_candidates")]
        count: usize,
        /// Fixture directory used instead when running offline.
        #[serde(default)]
        dir: Option<PathBuf>,
    },
}

fn default_candidates() -> usize {
    4
}

/// Raw file contents after base merging. Reward and PPO fields are kept
/// as tables so that unset keys fall back to the task family's defaults.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    task: Option<String>,
    variant: Option<Variant>,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
    total_steps: Option<u64>,
    #[serde(default = "default_threshold")]
    threshold: f64,
    #[serde(default)]
    stop_at_threshold: bool,
    #[serde(default = "default_window")]
    success_window: usize,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    checkpoints: bool,
    #[serde(default)]
    reward: Table,
    #[serde(default)]
    binning: BinningConfig,
    #[serde(default)]
    ppo: Table,
    #[serde(default)]
    candidates: CandidateSource,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_threshold() -> f64 {
    0.75
}

fn default_window() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub task: String,
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub threshold: f64,
    pub stop_at_threshold: bool,
    pub success_window: usize,
    pub output_dir: PathBuf,
    pub checkpoints: bool,
    pub reward: RewardConfig,
    pub binning: BinningConfig,
    pub ppo: PpoConfig,
    pub candidates: CandidateSource,
}

/// Overlay `over` onto `base`; tables merge key by key, anything else is
/// replaced.
pub fn deep_merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => deep_merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Read `path` and every file reachable through `base` keys, which are
/// resolved relative to the file that names them.
pub fn load_table(path: &Path) -> Result<Table, ConfigError> {
    let mut chain = Vec::new();
    load_chain(path, &mut chain)
}

fn load_chain(path: &Path, seen: &mut Vec<PathBuf>) -> Result<Table, ConfigError> {
    let canonical = path.canonicalize().unwrap_or_else(|_| path.to_path_buf());
    if seen.contains(&canonical) {
        return Err(ConfigError::Cycle(path.to_path_buf()));
    }
    seen.push(canonical);
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    let mut table: Table = text.parse().map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
    match table.remove("base") {
        None => Ok(table),
        Some(Value::String(base)) => {
            let base_path = path.parent().unwrap_or(Path::new(".")).join(base);
            let mut merged = load_chain(&base_path, seen)?;
            deep_merge(&mut merged, table);
            Ok(merged)
        }
        Some(_) => Err(ConfigError::BaseType),
    }
}

/// `defaults` with the keys of `over` replaced.
fn overlay<T: Serialize + serde::de::DeserializeOwned>(defaults: &T, over: Table) -> Result<T, ConfigError> {
    let mut table = Table::try_from(defaults).expect("defaults serialize to a table");
    deep_merge(&mut table, over);
    Value::Table(table).try_into().map_err(|source| ConfigError::Parse { path: PathBuf::new(), source })
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let table = load_table(path)?;
        Self::from_table(table).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse { path: path.to_path_buf(), source },
            other => other,
        })
    }

    pub fn from_table(table: Table) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            Value::Table(table).try_into().map_err(|source| ConfigError::Parse { path: PathBuf::new(), source })?;
        let invalid = |m: String| Err(ConfigError::Invalid(m));

        let Some(task_name) = raw.task else { return invalid("missing `task`".into()) };
        let task = build_task(&task_name).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let Some(variant) = raw.variant else { return invalid("missing `variant`".into()) };
        let Some(output_dir) = raw.output_dir else { return invalid("missing `output_dir`".into()) };

        if raw.reward.contains_key("mode") {
            return invalid("set the reward mode through `variant`, not `reward.mode`".into());
        }
        let mut reward: RewardConfig = overlay(&RewardConfig::for_family(task.family), raw.reward)?;
        reward.mode = variant.reward_mode();
        let mut ppo: PpoConfig = overlay(&PpoConfig::for_family(task.family), raw.ppo)?;

        let mut binning = raw.binning;
        binning.kind = variant.binning_kind();
        if let Some(steps) = raw.total_steps {
            ppo.total_steps = steps;
        }

        let cfg = Self {
            task: task_name,
            variant,
            seeds: raw.seeds,
            threshold: raw.threshold,
            stop_at_threshold: raw.stop_at_threshold,
            success_window: raw.success_window,
            output_dir,
            checkpoints: raw.checkpoints,
            reward,
            binning,
            ppo,
            candidates: raw.candidates,
        };
        cfg.validate(&task)?;
        Ok(cfg)
    }

    fn validate(&self, task: &Task) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.seeds.is_empty() {
            return invalid("`seeds` must not be empty".into());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return invalid("`seeds` contains duplicates".into());
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return invalid(format!("threshold must lie in (0, 1], got {}", self.threshold));
        }
        if self.success_window == 0 {
            return invalid("success_window must be at least 1".into());
        }
        if self.ppo.total_steps == 0 {
            return invalid("total_steps must be positive".into());
        }
        self.ppo.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.reward.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(g) = &self.binning.granularities {
            if task.family == TaskFamily::Grid {
                return invalid("granularities apply to vector tasks only".into());
            }
            if g.contains(&0) {
                return invalid("granularities must be positive".into());
            }
        }
        if !(self.binning.gate_factor.is_finite() && self.binning.gate_factor > 0.0) {
            return invalid("binning.gate_factor must be positive".into());
        }
        if self.binning.simhash_bits == 0 || self.binning.simhash_bits > 64 {
            return invalid("binning.simhash_bits must lie in 1..=64".into());
        }
        match &self.candidates {
            CandidateSource::Fixtures { count, .. } | CandidateSource::Endpoint { count, .. } if *count == 0 => {
                invalid("candidates.count must be at least 1".into())
            }
            _ => Ok(()),
        }
    }

    pub fn task(&self) -> Task {
        build_task(&self.task).expect("task validated on load")
    }

    pub fn train_config(&self, seed: u64, checkpoint_dir: Option<PathBuf>) -> TrainConfig {
        let mut cfg = TrainConfig::new(self.ppo.clone(), self.reward.clone(), seed);
        cfg.binning = self.binning.clone();
        cfg.threshold = self.threshold;
        cfg.stop_at_threshold = self.stop_at_threshold;
        cfg.success_window = self.success_window;
        cfg.checkpoint_dir = checkpoint_dir;
        cfg
    }
}
