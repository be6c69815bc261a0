//! Visitation counts and the reward signals derived from them.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::binning::{BinId, BinningError, DiscretizerState};
use crate::dsl::ProgressReport;
use crate::envs::TaskFamily;

/// Persistent visit counts over bins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountTable {
    counts: HashMap<BinId, u64>,
    total_visits: u64,
}

impl CountTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one visit and return the updated count.
    pub fn increment(&mut self, bin: BinId) -> u64 {
        self.total_visits += 1;
        let c = self.counts.entry(bin).or_insert(0);
        *c += 1;
        *c
    }

    pub fn count(&self, bin: BinId) -> u64 {
        self.counts.get(&bin).copied().unwrap_or(0)
    }

    pub fn total_visits(&self) -> u64 {
        self.total_visits
    }

    pub fn distinct_bins(&self) -> usize {
        self.counts.len()
    }

    /// Count the visit, then return `1 / sqrt(count)`.
    pub fn novelty(&mut self, bin: BinId) -> f64 {
        novelty_from_count(self.increment(bin))
    }

    /// Novelty at the current count without recording a visit.
    pub fn current_novelty(&self, bin: BinId) -> f64 {
        novelty_from_count(self.count(bin))
    }

    /// Fold another table's counts into this one.
    pub fn merge(&mut self, other: &CountTable) {
        for (&bin, &c) in &other.counts {
            *self.counts.entry(bin).or_insert(0) += c;
        }
        self.total_visits += other.total_visits;
    }

    /// `bin_id,count` lines sorted by bin id.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        let sorted: BTreeMap<_, _> = self.counts.iter().map(|(b, c)| (b.0, *c)).collect();
        for (bin, count) in sorted {
            writeln!(w, "{bin},{count}")?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(r: R) -> io::Result<Self> {
        let mut table = CountTable::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = || io::Error::new(io::ErrorKind::InvalidData, format!("malformed snapshot line {}", lineno + 1));
            let (bin, count) = line.split_once(',').ok_or_else(bad)?;
            let bin: u64 = bin.trim().parse().map_err(|_| bad())?;
            let count: u64 = count.trim().parse().map_err(|_| bad())?;
            if count == 0 || table.counts.insert(BinId(bin), count).is_some() {
                return Err(bad());
            }
            table.total_visits += count;
        }
        Ok(table)
    }
}

/// `1 / sqrt(count)`; an unvisited bin has novelty 1.
pub fn novelty_from_count(count: u64) -> f64 {
    1.0 / (count.max(1) as f64).sqrt()
}

/// Per-episode visit counts for one environment instance.
#[derive(Debug, Clone, Default)]
pub struct EpisodicCounts {
    counts: HashMap<BinId, u32>,
}

impl EpisodicCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn increment(&mut self, bin: BinId) -> u32 {
        let c = self.counts.entry(bin).or_insert(0);
        *c += 1;
        *c
    }

    pub fn count(&self, bin: BinId) -> u32 {
        self.counts.get(&bin).copied().unwrap_or(0)
    }

    pub fn clear(&mut self) {
        self.counts.clear();
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Counts,
    #[serde(rename = "noveld")]
    NovelD,
    ProgressAsReward,
    SparseOnly,
}

impl RewardMode {
    pub fn label(self) -> &'static str {
        match self {
            RewardMode::Counts => "counts",
            RewardMode::NovelD => "noveld",
            RewardMode::ProgressAsReward => "progress_as_reward",
            RewardMode::SparseOnly => "sparse_only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub mode: RewardMode,
    pub lambda_c: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_extrinsic_scale")]
    pub extrinsic_scale: f64,
    /// When set, intrinsic rewards are rescaled to this running mean.
    #[serde(default)]
    pub intrinsic_target_mean: Option<f64>,
    #[serde(default = "default_window")]
    pub normalizer_window: usize,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_extrinsic_scale() -> f64 {
    1.0
}

fn default_window() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardConfigError {
    #[error("lambda_c must be non-negative and finite, got {0}")]
    Lambda(f64),
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("extrinsic_scale must be finite, got {0}")]
    Scale(f64),
    #[error("intrinsic_target_mean must be positive, got {0}")]
    Target(f64),
    #[error("normalizer_window must be at least 1")]
    Window,
}

impl RewardConfig {
    /// Vector-task defaults: scaled-down extrinsic reward and an intrinsic
    /// stream normalized to a mean of 0.001, with unit weight on top.
    pub fn vector_default() -> Self {
        Self {
            mode: RewardMode::Counts,
            lambda_c: 1.0,
            alpha: default_alpha(),
            extrinsic_scale: 0.05,
            intrinsic_target_mean: Some(0.001),
            normalizer_window: default_window(),
        }
    }

    /// Grid-task defaults: NovelD with weight 0.5 and unscaled extrinsic reward.
    pub fn grid_default() -> Self {
        Self {
            mode: RewardMode::NovelD,
            lambda_c: 0.5,
            alpha: default_alpha(),
            extrinsic_scale: 1.0,
            intrinsic_target_mean: None,
            normalizer_window: default_window(),
        }
    }

    pub fn for_family(family: TaskFamily) -> Self {
        match family {
            TaskFamily::Grid => Self::grid_default(),
            TaskFamily::Vector => Self::vector_default(),
        }
    }

    pub fn validate(&self) -> Result<(), RewardConfigError> {
        if !(self.lambda_c >= 0.0 && self.lambda_c.is_finite()) {
            return Err(RewardConfigError::Lambda(self.lambda_c));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(RewardConfigError::Alpha(self.alpha));
        }
        if !self.extrinsic_scale.is_finite() {
            return Err(RewardConfigError::Scale(self.extrinsic_scale));
        }
        if let Some(t) = self.intrinsic_target_mean {
            if !(t > 0.0 && t.is_finite()) {
                return Err(RewardConfigError::Target(t));
            }
        }
        if self.normalizer_window == 0 {
            return Err(RewardConfigError::Window);
        }
        Ok(())
    }
}

/// Rescales a positive stream so its running mean sits at `target_mean`.
///
/// The running mean is an exponential moving average with window `W`
/// (`mu += (raw - mu) / W`), seeded by the first positive sample. Zero
/// inputs pass through without touching the average.
#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicNormalizer {
    target_mean: f64,
    window: usize,
    mean: Option<f64>,
}

pub const NORMALIZER_EPS: f64 = 1e-8;

impl IntrinsicNormalizer {
    pub fn new(target_mean: f64, window: usize) -> Self {
        Self { target_mean, window: window.max(1), mean: None }
    }

    pub fn running_mean(&self) -> Option<f64> {
        self.mean
    }

    pub fn normalize(&mut self, raw: f64) -> f64 {
        if raw == 0.0 {
            return 0.0;
        }
        let mu = match self.mean {
            None => raw,
            Some(m) => m + (raw - m) / self.window as f64,
        };
        self.mean = Some(mu);
        raw * (self.target_mean / mu.max(NORMALIZER_EPS))
    }
}

/// Eq. 1 style combination: `r_ext * scale + lambda_c * intrinsic`.
pub fn combine_counts(r_ext: f64, intrinsic: f64, cfg: &RewardConfig) -> f64 {
    r_ext * cfg.extrinsic_scale + cfg.lambda_c * intrinsic
}

/// NovelD bonus: `max(n_next - alpha * n_prev, 0)`, only on the first visit
/// to the next bin within the current episode.
pub fn noveld_bonus(n_next: f64, n_prev: f64, alpha: f64, episodic_first_visit: bool) -> f64 {
    if episodic_first_visit {
        (n_next - alpha * n_prev).max(0.0)
    } else {
        0.0
    }
}

pub fn combine_noveld(r_ext: f64, n_next: f64, n_prev: f64, episodic_first_visit: bool, cfg: &RewardConfig) -> f64 {
    r_ext * cfg.extrinsic_scale + cfg.lambda_c * noveld_bonus(n_next, n_prev, cfg.alpha, episodic_first_visit)
}

/// Sum of direction-normalized progress values.
pub fn progress_as_reward(report: &ProgressReport, state: &DiscretizerState) -> Result<f64, BinningError> {
    Ok(state.normalized(report)?.iter().sum())
}

/// Stateful reward combiner used by the trainer: owns the normalizer and
/// applies the configured mode.
#[derive(Debug, Clone)]
pub struct RewardShaper {
    cfg: RewardConfig,
    normalizer: Option<IntrinsicNormalizer>,
}

/// Total reward plus its intrinsic component (after weighting).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapedReward {
    pub total: f64,
    pub intrinsic: f64,
}

impl RewardShaper {
    pub fn new(cfg: RewardConfig) -> Self {
        let normalizer = cfg
            .intrinsic_target_mean
            .map(|t| IntrinsicNormalizer::new(t, cfg.normalizer_window));
        Self { cfg, normalizer }
    }

    pub fn config(&self) -> &RewardConfig {
        &self.cfg
    }

    fn normalize(&mut self, raw: f64) -> f64 {
        match &mut self.normalizer {
            Some(n) => n.normalize(raw),
            None => raw,
        }
    }

    /// Combine an extrinsic reward with a raw (unweighted) bonus. The bonus
    /// is ignored in sparse mode.
    pub fn shape(&mut self, r_ext: f64, raw_bonus: f64) -> ShapedReward {
        let intrinsic = match self.cfg.mode {
            RewardMode::SparseOnly => 0.0,
            _ => self.cfg.lambda_c * self.normalize(raw_bonus),
        };
        ShapedReward { total: r_ext * self.cfg.extrinsic_scale + intrinsic, intrinsic }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(mode: RewardMode, lambda_c: f64) -> RewardConfig {
        RewardConfig {
            mode,
            lambda_c,
            alpha: 0.5,
            extrinsic_scale: 1.0,
            intrinsic_target_mean: None,
            normalizer_window: 100,
        }
    }

    #[test]
    fn novelty_sequence() {
        let mut t = CountTable::new();
        let b = BinId(7);
        assert_eq!(t.novelty(b), 1.0);
        t.novelty(b);
        t.novelty(b);
        assert_eq!(t.novelty(b), 0.5);
        for _ in 4..99 {
            t.novelty(b);
        }
        assert!((t.novelty(b) - 0.1).abs() < 1e-15);
        assert_eq!(t.total_visits(), 100);
        assert_eq!(t.current_novelty(BinId(8)), 1.0);
    }

    #[test]
    fn counts_combination() {
        assert_eq!(combine_counts(0.0, 0.25, &plain(RewardMode::Counts, 0.5)), 0.125);
        assert_eq!(combine_counts(1.0, 0.7, &plain(RewardMode::Counts, 0.0)), 1.0);
        assert_eq!(combine_counts(0.0, 1.0, &plain(RewardMode::Counts, 0.001)), 0.001);
    }

    #[test]
    fn noveld_combination() {
        let cfg = plain(RewardMode::NovelD, 1.0);
        assert!((combine_noveld(0.0, 0.5, 0.6, true, &cfg) - 0.2).abs() < 1e-15);
        assert_eq!(combine_noveld(0.0, 0.5, 0.6, false, &cfg), 0.0);
        let cfg = RewardConfig { alpha: 1.0, ..cfg };
        assert_eq!(combine_noveld(0.0, 0.1, 0.6, true, &cfg), 0.0);
    }

    #[test]
    fn progress_sum_uses_oriented_values() {
        let mut s = DiscretizerState::vector(vec![false]);
        s.calibrate_vector(&[ProgressReport::decreasing(vec![1.0])]);
        assert_eq!(progress_as_reward(&ProgressReport::decreasing(vec![0.0]), &s).unwrap(), 1.0);

        let mut s = DiscretizerState::vector(vec![false, false]);
        s.calibrate_vector(&[ProgressReport::decreasing(vec![1.0, 1.0])]);
        assert_eq!(progress_as_reward(&ProgressReport::decreasing(vec![1.0, 1.0]), &s).unwrap(), 0.0);

        let mut s = DiscretizerState::vector(vec![true]);
        s.calibrate_vector(&[ProgressReport::new(vec![2.0], vec![true])]);
        assert_eq!(progress_as_reward(&ProgressReport::new(vec![5.0], vec![true]), &s).unwrap(), 3.0);

        let s = DiscretizerState::vector(vec![true]);
        assert!(progress_as_reward(&ProgressReport::new(vec![5.0], vec![true]), &s).is_err());
    }

    #[test]
    fn normalizer_first_sample_and_zero() {
        let mut n = IntrinsicNormalizer::new(0.001, 100);
        assert_eq!(n.normalize(0.0), 0.0);
        assert!((n.normalize(0.37) - 0.001).abs() < 1e-15);
        assert_eq!(n.normalize(0.0), 0.0);
    }

    #[test]
    fn normalizer_constant_stream_converges() {
        let mut n = IntrinsicNormalizer::new(0.001, 50);
        let mut last = 0.0;
        for _ in 0..1000 {
            last = n.normalize(0.5);
        }
        assert!((last - 0.001).abs() < 1e-12);
    }

    #[test]
    fn snapshot_round_trip_is_sorted() {
        let mut t = CountTable::new();
        for b in [5, 1, 5, 3, 1, 5] {
            t.increment(BinId(b));
        }
        let mut buf = Vec::new();
        t.write_snapshot(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1,2\n3,1\n5,3\n");
        assert_eq!(CountTable::read_snapshot(buf.as_slice()).unwrap(), t);
        assert!(CountTable::read_snapshot("1;2\n".as_bytes()).is_err());
        assert!(CountTable::read_snapshot("1,2\n1,3\n".as_bytes()).is_err());
    }

    #[test]
    fn episodic_counts_clear() {
        let mut e = EpisodicCounts::new();
        assert_eq!(e.increment(BinId(1)), 1);
        assert_eq!(e.increment(BinId(1)), 2);
        e.clear();
        assert!(e.is_empty());
        assert_eq!(e.increment(BinId(1)), 1);
    }

    #[test]
    fn config_validation() {
        assert!(RewardConfig::grid_default().validate().is_ok());
        assert!(RewardConfig::vector_default().validate().is_ok());
        let bad = RewardConfig { lambda_c: -1.0, ..RewardConfig::grid_default() };
        assert_eq!(bad.validate(), Err(RewardConfigError::Lambda(-1.0)));
        let bad = RewardConfig { alpha: 1.5, ..RewardConfig::grid_default() };
        assert_eq!(bad.validate(), Err(RewardConfigError::Alpha(1.5)));
    }

    #[test]
    fn zero_lambda_shaper_is_scaled_extrinsic() {
        for mode in [RewardMode::Counts, RewardMode::NovelD, RewardMode::ProgressAsReward, RewardMode::SparseOnly] {
            let cfg = RewardConfig { lambda_c: 0.0, extrinsic_scale: 0.05, ..plain(mode, 0.0) };
            let mut s = RewardShaper::new(cfg);
            let r = s.shape(0.8, 0.3);
            assert_eq!(r.total, 0.8 * 0.05);
            assert_eq!(r.intrinsic, 0.0);
        }
    }
}
