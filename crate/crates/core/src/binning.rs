//! Discretization of progress reports (and raw observations) into bins.
//!
//! Two calibrating discretizers are provided:
//!
//! * **vector tasks** capture a per-subtask reference value from the first
//!   processed batch (`min` for increasing subtasks, `max` for decreasing
//!   ones), orient every subtask so that larger means more progress, and sum
//!   `trunc(v_i * g_i)` over subtasks with a coarse granularity for early
//!   subtasks and a fine one for the final subtask;
//! * **grid tasks** clip progress at the episode-start value and gate the
//!   second subtask on completion of the first: `p0 + gate * p1 * [p0 == 0]`.
//!
//! [`SimHashBinner`] hashes raw observations by the signs of a fixed random
//! projection and serves as the observation-space baseline.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsl::ProgressReport;

/// Granularity of every non-final subtask for vector tasks.
pub const COARSE_GRANULARITY: u64 = 20;
/// Granularity of the final subtask for vector tasks.
pub const FINE_GRANULARITY: u64 = 1000 + COARSE_GRANULARITY;
/// Multiplier applied to the second grid subtask once the first is complete.
pub const DEFAULT_GATE_FACTOR: f64 = 100.0;
pub const DEFAULT_SIMHASH_BITS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizerVariant {
    VectorTask,
    GridTask,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BinningError {
    #[error("subtask {0} has not been calibrated")]
    Uncalibrated(usize),
    #[error("report has {found} subtasks, discretizer expects {expected}")]
    SubtaskMismatch { expected: usize, found: usize },
    #[error("granularity list has {found} entries, expected {expected}")]
    Granularities { expected: usize, found: usize },
    #[error("observation has dimension {found}, binner expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("SimHash needs between 1 and 64 bits, got {0}")]
    Bits(usize),
}

/// Default granularities: coarse for every subtask but the last.
pub fn default_granularities(k: usize) -> Vec<u64> {
    (0..k)
        .map(|i| if i + 1 == k { FINE_GRANULARITY } else { COARSE_GRANULARITY })
        .collect()
}

/// Calibration and binning parameters for one progress program.
///
/// Calibration entries are written once and never change afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizerState {
    variant: DiscretizerVariant,
    increasing: Vec<bool>,
    calibration: Vec<Option<f64>>,
    granularities: Vec<u64>,
    gate_factor: f64,
    bin_cap: Option<u64>,
}

impl DiscretizerState {
    pub fn vector(increasing: Vec<bool>) -> Self {
        let granularities = default_granularities(increasing.len());
        Self::build(DiscretizerVariant::VectorTask, increasing, granularities)
    }

    pub fn vector_with_granularities(increasing: Vec<bool>, granularities: Vec<u64>) -> Result<Self, BinningError> {
        if granularities.len() != increasing.len() {
            return Err(BinningError::Granularities { expected: increasing.len(), found: granularities.len() });
        }
        Ok(Self::build(DiscretizerVariant::VectorTask, increasing, granularities))
    }

    pub fn grid(increasing: Vec<bool>) -> Self {
        let granularities = default_granularities(increasing.len());
        Self::build(DiscretizerVariant::GridTask, increasing, granularities)
    }

    fn build(variant: DiscretizerVariant, increasing: Vec<bool>, granularities: Vec<u64>) -> Self {
        let k = increasing.len();
        Self {
            variant,
            increasing,
            calibration: vec![None; k],
            granularities,
            gate_factor: DEFAULT_GATE_FACTOR,
            bin_cap: None,
        }
    }

    pub fn with_gate_factor(mut self, gate: f64) -> Self {
        self.gate_factor = gate;
        self
    }

    pub fn with_bin_cap(mut self, cap: Option<u64>) -> Self {
        self.bin_cap = cap;
        self
    }

    pub fn variant(&self) -> DiscretizerVariant {
        self.variant
    }

    pub fn num_subtasks(&self) -> usize {
        self.increasing.len()
    }

    pub fn granularities(&self) -> &[u64] {
        &self.granularities
    }

    /// Calibrated `min_i` (increasing) or `max_i` (decreasing).
    pub fn calibration(&self, i: usize) -> Option<f64> {
        self.calibration.get(i).copied().flatten()
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibration.iter().all(Option::is_some)
    }

    /// Set any unset calibration entry from `batch`: the batch minimum for
    /// increasing subtasks, the batch maximum for decreasing ones.
    pub fn calibrate_vector(&mut self, batch: &[ProgressReport]) {
        for i in 0..self.increasing.len() {
            if self.calibration[i].is_some() {
                continue;
            }
            let values = batch.iter().filter_map(|r| r.values.get(i).copied());
            let extreme = if self.increasing[i] {
                values.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
            } else {
                values.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
            };
            self.calibration[i] = extreme;
        }
    }

    fn check_len(&self, report: &ProgressReport) -> Result<(), BinningError> {
        if report.len() != self.increasing.len() {
            return Err(BinningError::SubtaskMismatch { expected: self.increasing.len(), found: report.len() });
        }
        Ok(())
    }

    /// Progress values oriented so that larger means more progress.
    ///
    /// Increasing subtasks are shifted by `min_i` (not rescaled). Decreasing
    /// subtasks with `max_i > 0` map to `max(max_i - x, 0) / max_i`; with
    /// `max_i < 0` they are negated; `max_i == 0` yields zero.
    pub fn normalized(&self, report: &ProgressReport) -> Result<Vec<f64>, BinningError> {
        self.check_len(report)?;
        report
            .values
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = self.calibration[i].ok_or(BinningError::Uncalibrated(i))?;
                Ok(if self.increasing[i] {
                    (x - c).max(0.0)
                } else if c < 0.0 {
                    -x
                } else if c == 0.0 {
                    0.0
                } else {
                    (c - x).max(0.0) / c
                })
            })
            .collect()
    }

    /// Vector-task bin: `sum_i trunc(v_i * g_i)` over oriented values.
    ///
    /// Increasing subtasks are not rescaled, so their contribution can exceed
    /// `g_i`. A decreasing subtask with a negative `max_i` contributes a
    /// negative amount once `x_i > 0`; the signed total is stored as its two's
    /// complement so distinct totals stay distinct bins.
    pub fn bin_vector(&self, report: &ProgressReport) -> Result<BinId, BinningError> {
        let v = self.normalized(report)?;
        let total: i64 = v
            .iter()
            .zip(&self.granularities)
            .map(|(&vi, &g)| contribution(vi, g))
            .fold(0i64, i64::wrapping_add);
        Ok(BinId(total as u64))
    }

    /// Grid-task bin. Each value is clipped at its episode-start value, then
    /// the second subtask only counts once the first has reached zero.
    /// Subtasks beyond the second are ignored.
    pub fn bin_grid(&self, report: &ProgressReport, episode_start: &ProgressReport) -> BinId {
        let clipped: Vec<f64> = report
            .values
            .iter()
            .enumerate()
            .map(|(i, &x)| episode_start.values.get(i).map_or(x, |&m| x.min(m)))
            .collect();
        let raw = match clipped.as_slice() {
            [] => 0.0,
            [p0] => *p0,
            [p0, p1, ..] => {
                let gate = if *p0 == 0.0 { 1.0 } else { 0.0 };
                p0 + self.gate_factor * p1 * gate
            }
        };
        let mut bin = if raw.is_finite() && raw > 0.0 { raw.floor() as u64 } else { 0 };
        if let Some(cap) = self.bin_cap {
            bin = bin.min(cap);
        }
        BinId(bin)
    }
}

/// Truncation toward zero; non-finite products count as zero.
fn contribution(v: f64, granularity: u64) -> i64 {
    let scaled = v * granularity as f64;
    if scaled.is_finite() {
        scaled.trunc() as i64
    } else {
        0
    }
}

/// Sign-of-random-projection hash over flat observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SimHashBinner {
    bits: usize,
    dim: usize,
    projection: Vec<f64>,
}

impl SimHashBinner {
    /// Draws a `bits x dim` standard-normal projection from `seed`.
    pub fn new(bits: usize, dim: usize, seed: u64) -> Result<Self, BinningError> {
        if bits == 0 || bits > 64 {
            return Err(BinningError::Bits(bits));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection = (0..bits * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(Self { bits, dim, projection })
    }

    /// Uses an explicit row-major `bits x dim` projection.
    pub fn from_projection(bits: usize, dim: usize, projection: Vec<f64>) -> Result<Self, BinningError> {
        if bits == 0 || bits > 64 {
            return Err(BinningError::Bits(bits));
        }
        if projection.len() != bits * dim {
            return Err(BinningError::Dimension { expected: bits * dim, found: projection.len() });
        }
        Ok(Self { bits, dim, projection })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row `i` of the projection sets bit `bits - 1 - i` when its dot product
    /// with the observation is non-negative.
    pub fn bin(&self, observation: &[f64]) -> Result<BinId, BinningError> {
        if observation.len() != self.dim {
            return Err(BinningError::Dimension { expected: self.dim, found: observation.len() });
        }
        let mut code = 0u64;
        for row in self.projection.chunks_exact(self.dim.max(1)).take(self.bits) {
            let dot: f64 = row.iter().zip(observation).map(|(a, b)| a * b).sum();
            code = (code << 1) | u64::from(dot >= 0.0);
        }
        if self.dim == 0 {
            // every row projects to zero
            code = if self.bits == 64 { u64::MAX } else { (1 << self.bits) - 1 };
        }
        Ok(BinId(code))
    }
}
