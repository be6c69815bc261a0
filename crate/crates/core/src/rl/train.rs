//! The full training loop: rollouts, progress evaluation, binning,
//! intrinsic reward, GAE and PPO updates.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::checkpoint::Checkpoint;
use super::dist::{categorical_sample, gaussian_sample};
use super::gae::{compute_gae, normalize_advantages};
use super::net::{Cache, Head, PolicyNet};
use super::obs::{DenseToSparse, ObsBatch};
use super::ppo::{ppo_update, Actions, Batch, PpoConfig, PpoError};
use crate::binning::{
    default_granularities, BinId, BinningError, DiscretizerState, SimHashBinner, DEFAULT_GATE_FACTOR,
    DEFAULT_SIMHASH_BITS,
};
use crate::dsl::{EvalError, ProgressProgram, ProgressReport};
use crate::envs::{Action, ActionSpace, Environment, Task, TaskFamily};
use crate::intrinsic::{
    noveld_bonus, novelty_from_count, progress_as_reward, CountTable, EpisodicCounts, RewardConfig, RewardConfigError,
    RewardMode, RewardShaper,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningKind {
    /// Discretized progress-program outputs.
    Progress,
    /// Sign-of-random-projection hash of the raw observation.
    #[serde(rename = "simhash")]
    SimHash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinningConfig {
    pub kind: BinningKind,
    /// Per-subtask granularities for vector tasks; defaults to 20 per
    /// earlier subtask and 1020 for the last.
    pub granularities: Option<Vec<u64>>,
    pub gate_factor: f64,
    pub bin_cap: Option<u64>,
    pub simhash_bits: usize,
    pub simhash_seed: u64,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self {
            kind: BinningKind::Progress,
            granularities: None,
            gate_factor: DEFAULT_GATE_FACTOR,
            bin_cap: None,
            simhash_bits: DEFAULT_SIMHASH_BITS,
            simhash_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub ppo: PpoConfig,
    pub reward: RewardConfig,
    pub binning: BinningConfig,
    pub seed: u64,
    /// Success rate that counts as solving the task.
    pub threshold: f64,
    /// End training at the first iteration that reaches `threshold`.
    pub stop_at_threshold: bool,
    /// Completed episodes averaged for the success rate.
    pub success_window: usize,
    /// Directory for `checkpoint.bin` and `counts.csv`.
    pub checkpoint_dir: Option<PathBuf>,
}

impl TrainConfig {
    pub fn new(ppo: PpoConfig, reward: RewardConfig, seed: u64) -> Self {
        Self {
            ppo,
            reward,
            binning: BinningConfig::default(),
            seed,
            threshold: 0.75,
            stop_at_threshold: false,
            success_window: 100,
            checkpoint_dir: None,
        }
    }
}

/// One row of the per-iteration metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub iteration: u64,
    pub env_steps: u64,
    pub mean_episode_reward: f64,
    pub success_rate: f64,
    pub distinct_bins: u64,
    pub intrinsic_mean: f64,
    pub wall_clock: f64,
}

#[derive(Debug)]
pub struct TrainLog {
    pub rows: Vec<MetricsRow>,
    /// Environment steps at the first row whose success rate reached the threshold.
    pub steps_to_threshold: Option<u64>,
    pub final_success: f64,
    pub episodes: u64,
    pub counts: CountTable,
    pub net: PolicyNet,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Ppo(#[from] PpoError),
    #[error(transparent)]
    Reward(#[from] RewardConfigError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Binning(#[from] BinningError),
    #[error("{0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

enum Binner {
    Grid(DiscretizerState),
    Vector(DiscretizerState),
    SimHash(SimHashBinner, Vec<f64>),
}

impl Binner {
    fn bin(&mut self, env: &dyn Environment, report: &ProgressReport, start: &ProgressReport) -> Result<BinId, BinningError> {
        match self {
            Binner::Grid(d) => Ok(d.bin_grid(report, start)),
            Binner::Vector(d) => d.bin_vector(report),
            Binner::SimHash(h, buf) => {
                env.hash_features(buf);
                h.bin(buf)
            }
        }
    }
}

fn save_checkpoint(dir: &Path, net: &PolicyNet, adam: &Adam, counts: &CountTable) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let counts_path = dir.join("counts.csv");
    counts.write_snapshot(std::io::BufWriter::new(std::fs::File::create(&counts_path)?))?;
    let ck = Checkpoint::new(&net.params, adam, &counts_path);
    ck.write_to(std::io::BufWriter::new(std::fs::File::create(dir.join("checkpoint.bin"))?))
}

struct Episodes {
    window: VecDeque<(f64, bool)>,
    cap: usize,
    total: u64,
}

impl Episodes {
    fn push(&mut self, ret: f64, success: bool) {
        if self.window.len() == self.cap {
            self.window.pop_front();
        }
        self.window.push_back((ret, success));
        self.total += 1;
    }

    fn means(&self) -> (f64, f64) {
        if self.window.is_empty() {
            return (0.0, 0.0);
        }
        let n = self.window.len() as f64;
        let r = self.window.iter().map(|(r, _)| r).sum::<f64>() / n;
        let s = self.window.iter().filter(|(_, s)| *s).count() as f64 / n;
        (r, s)
    }
}

/// Train a policy on `task` with intrinsic rewards derived from `program`.
///
/// `on_row` is called after every iteration with the new metrics row; an
/// error from it stops training.
pub fn train(
    task: &Task,
    program: &ProgressProgram,
    cfg: &TrainConfig,
    mut on_row: impl FnMut(&MetricsRow) -> std::io::Result<()>,
) -> Result<TrainLog, TrainError> {
    cfg.ppo.validate()?;
    cfg.reward.validate()?;
    if !(cfg.threshold.is_finite()) || cfg.success_window == 0 {
        return Err(TrainError::Config("threshold must be finite and success_window at least 1".into()));
    }
    let ppo = &cfg.ppo;
    let n_envs = ppo.num_envs;

    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut init_rng = ChaCha8Rng::seed_from_u64(master.random());
    let mut rng = ChaCha8Rng::seed_from_u64(master.random());
    let mut env_rng = ChaCha8Rng::seed_from_u64(master.random());

    let mut envs: Vec<Box<dyn Environment>> = (0..n_envs).map(|_| task.make_env()).collect();
    let obs_dim = envs[0].obs_dim();
    let head = match envs[0].action_space() {
        ActionSpace::Discrete(n) => Head::Categorical(n),
        ActionSpace::Continuous(d) => Head::Gaussian(d),
    };
    let mut net = PolicyNet::new(obs_dim, ppo.hidden, head, ppo.init_log_std, &mut init_rng);
    let mut adam = Adam::new(net.num_params(), ppo.lr);

    let mut start_reports = Vec::with_capacity(n_envs);
    for env in envs.iter_mut() {
        let f = env.reset(env_rng.random());
        start_reports.push(program.evaluate(&f)?);
    }

    let directions = program.directions();
    let mut par_state = DiscretizerState::vector(directions.clone());
    par_state.calibrate_vector(&start_reports);
    let mut binner = match (cfg.binning.kind, task.family) {
        (BinningKind::SimHash, _) => Binner::SimHash(
            SimHashBinner::new(cfg.binning.simhash_bits, envs[0].hash_dim(), cfg.binning.simhash_seed)?,
            vec![0.0; envs[0].hash_dim()],
        ),
        (BinningKind::Progress, TaskFamily::Grid) => Binner::Grid(
            DiscretizerState::grid(directions.clone())
                .with_gate_factor(cfg.binning.gate_factor)
                .with_bin_cap(cfg.binning.bin_cap),
        ),
        (BinningKind::Progress, TaskFamily::Vector) => {
            let g = cfg.binning.granularities.clone().unwrap_or_else(|| default_granularities(directions.len()));
            let mut d = DiscretizerState::vector_with_granularities(directions.clone(), g)?;
            d.calibrate_vector(&start_reports);
            Binner::Vector(d)
        }
    };

    let mut counts = CountTable::new();
    let mut episodic: Vec<EpisodicCounts> = (0..n_envs).map(|_| EpisodicCounts::new()).collect();
    let mut prev_bin = Vec::with_capacity(n_envs);
    for (e, env) in envs.iter().enumerate() {
        let b = binner.bin(env.as_ref(), &start_reports[e], &start_reports[e])?;
        counts.increment(b);
        episodic[e].increment(b);
        prev_bin.push(b);
    }

    let mut shaper = RewardShaper::new(cfg.reward.clone());
    let mut episodes = Episodes { window: VecDeque::new(), cap: cfg.success_window, total: 0 };
    let mut ep_return = vec![0.0; n_envs];

    let batch_size = ppo.batch_size();
    let mut obs_buf = vec![0.0; obs_dim];
    let mut sparse = DenseToSparse::default();
    let mut cache = Cache::default();
    let started = Instant::now();

    let mut rows = Vec::new();
    let mut steps_to_threshold = None;
    let mut env_steps: u64 = 0;
    let mut iteration: u64 = 0;

    while env_steps < ppo.total_steps {
        iteration += 1;
        let mut obs = ObsBatch::new();
        let mut act_discrete = Vec::new();
        let mut act_cont = Vec::new();
        let mut log_probs = Vec::with_capacity(batch_size);
        let mut values = Vec::with_capacity(batch_size);
        let mut rewards = Vec::with_capacity(batch_size);
        let mut dones = Vec::with_capacity(batch_size);
        let mut intrinsic_sum = 0.0;

        for _ in 0..ppo.horizon {
            for e in 0..n_envs {
                let env = envs[e].as_mut();
                env.observe(&mut obs_buf);
                net.forward(sparse.view(&obs_buf), &mut cache);
                obs.push_dense(&obs_buf);
                let action = match head {
                    Head::Categorical(_) => {
                        let (a, lp) = categorical_sample(&cache.out, &mut rng);
                        act_discrete.push(a);
                        log_probs.push(lp);
                        Action::Discrete(a)
                    }
                    Head::Gaussian(d) => {
                        let ls: Vec<f64> = (0..d).map(|i| net.log_std(i)).collect();
                        let (a, lp) = gaussian_sample(&cache.out, &ls, &mut rng);
                        act_cont.extend_from_slice(&a);
                        log_probs.push(lp);
                        Action::Continuous(a)
                    }
                };
                values.push(cache.value);

                let out = env.step(&action);
                let report = program.evaluate(&env.features())?;
                let bin = binner.bin(env, &report, &start_reports[e])?;
                let n_prev = counts.current_novelty(prev_bin[e]);
                let n_next = novelty_from_count(counts.increment(bin));
                let first_visit = episodic[e].increment(bin) == 1;
                let raw_bonus = match cfg.reward.mode {
                    RewardMode::Counts => n_next,
                    RewardMode::NovelD => noveld_bonus(n_next, n_prev, cfg.reward.alpha, first_visit),
                    RewardMode::ProgressAsReward => progress_as_reward(&report, &par_state)?,
                    RewardMode::SparseOnly => 0.0,
                };
                prev_bin[e] = bin;
                let shaped = shaper.shape(out.reward, raw_bonus);
                intrinsic_sum += shaped.intrinsic;
                let mut reward = shaped.total;
                ep_return[e] += out.reward;

                if out.done {
                    if out.truncated {
                        env.observe(&mut obs_buf);
                        net.forward(sparse.view(&obs_buf), &mut cache);
                        reward += ppo.gamma * cache.value;
                    }
                    episodes.push(ep_return[e], out.success);
                    ep_return[e] = 0.0;
                    let f = env.reset(env_rng.random());
                    let start = program.evaluate(&f)?;
                    episodic[e].clear();
                    let b = binner.bin(env, &start, &start)?;
                    counts.increment(b);
                    episodic[e].increment(b);
                    prev_bin[e] = b;
                    start_reports[e] = start;
                }
                rewards.push(reward);
                dones.push(out.done);
                env_steps += 1;
            }
        }

        let mut last_values = Vec::with_capacity(n_envs);
        for env in &envs {
            env.observe(&mut obs_buf);
            net.forward(sparse.view(&obs_buf), &mut cache);
            last_values.push(cache.value);
        }
        let (mut advantages, returns) = compute_gae(&rewards, &values, &dones, &last_values, ppo.gamma, ppo.gae_lambda);
        normalize_advantages(&mut advantages);
        let actions = match head {
            Head::Categorical(_) => Actions::Discrete(act_discrete),
            Head::Gaussian(d) => Actions::Continuous { dim: d, data: act_cont },
        };
        let batch = Batch { obs, actions, old_log_probs: log_probs, advantages, returns };
        if let Err(err) = ppo_update(&mut net, &mut adam, &batch, ppo, &mut rng) {
            if let Some(dir) = &cfg.checkpoint_dir {
                save_checkpoint(dir, &net, &adam, &counts)?;
            }
            return Err(err.into());
        }

        let (mean_reward, success_rate) = episodes.means();
        let row = MetricsRow {
            iteration,
            env_steps,
            mean_episode_reward: mean_reward,
            success_rate,
            distinct_bins: counts.distinct_bins() as u64,
            intrinsic_mean: intrinsic_sum / batch_size as f64,
            wall_clock: started.elapsed().as_secs_f64(),
        };
        on_row(&row)?;
        rows.push(row);
        if success_rate >= cfg.threshold && steps_to_threshold.is_none() {
            steps_to_threshold = Some(env_steps);
            if cfg.stop_at_threshold {
                break;
            }
        }
    }

    if let Some(dir) = &cfg.checkpoint_dir {
        save_checkpoint(dir, &net, &adam, &counts)?;
    }
    let final_success = rows.last().map_or(0.0, |r| r.success_rate);
    Ok(TrainLog { rows, steps_to_threshold, final_success, episodes: episodes.total, counts, net })
}
