use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::TaskFamily;

use super::adam::{clip_grad_norm, Adam};
use super::dist::{categorical_entropy, gaussian_entropy, log_softmax};
use super::net::{Cache, Head, PolicyNet, LOG_STD_MAX, LOG_STD_MIN};
use super::obs::ObsBatch;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub lr: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    /// Steps collected per environment per iteration (T).
    pub horizon: usize,
    /// Parallel environment instances (N).
    pub num_envs: usize,
    pub total_steps: u64,
    pub hidden: usize,
    /// Initial log-std for continuous actions.
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            lr: 3e-4,
            epochs: 4,
            minibatch_size: 256,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            horizon: 128,
            num_envs: 16,
            total_steps: 500_000,
            hidden: 64,
            init_log_std: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PpoError {
    #[error("invalid PPO config: {0}")]
    Config(String),
    #[error("non-finite loss ({loss}) in epoch {epoch}; update aborted")]
    NonFinite { loss: f64, epoch: usize },
}

impl PpoConfig {
    /// Settings shared by the gridworld tasks.
    pub fn grid_default() -> Self {
        Self { gamma: 0.97, lr: 1e-3, epochs: 8, entropy_coef: 0.03, ..Self::default() }
    }

    /// Settings for the continuous-control task.
    pub fn vector_default() -> Self {
        Self { gamma: 0.97, lr: 1e-3, entropy_coef: 0.0, total_steps: 1_500_000, ..Self::default() }
    }

    pub fn for_family(family: TaskFamily) -> Self {
        match family {
            TaskFamily::Grid => Self::grid_default(),
            TaskFamily::Vector => Self::vector_default(),
        }
    }

    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::Config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.horizon == 0 || self.num_envs == 0 || self.hidden == 0 {
            return bad("epochs, minibatch_size, horizon, num_envs and hidden must be at least 1");
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 || !(self.max_grad_norm > 0.0) {
            return bad("coefficients must be non-negative and max_grad_norm positive");
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.horizon * self.num_envs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Actions {
    Discrete(Vec<usize>),
    /// Row-major `[len x dim]`.
    Continuous { dim: usize, data: Vec<f64> },
}

impl Actions {
    pub fn len(&self) -> usize {
        match self {
            Actions::Discrete(a) => a.len(),
            Actions::Continuous { dim, data } => data.len() / dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Training batch with advantages already computed (and normalized).
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: ObsBatch,
    pub actions: Actions,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Mean PPO loss over the samples `idx` and its gradient w.r.t. all
/// parameters, written to `grad` (overwritten).
///
/// loss = clipped surrogate + value_coef * 0.5 (V - R)^2 - entropy_coef * H
pub fn loss_and_grad(net: &PolicyNet, batch: &Batch, idx: &[usize], cfg: &PpoConfig, grad: &mut [f64]) -> LossStats {
    grad.fill(0.0);
    let m = idx.len() as f64;
    let mut stats = LossStats::default();
    let mut cache = Cache::default();
    let mut d_out = Vec::new();
    let ls_off = net.log_std_offset();

    for &i in idx {
        let x = batch.obs.row(i);
        net.forward(x, &mut cache);
        let adv = batch.advantages[i];

        let (logp, entropy) = match (&batch.actions, net.head()) {
            (Actions::Discrete(a), Head::Categorical(_)) => {
                let lp = log_softmax(&cache.out);
                (lp[a[i]], categorical_entropy(&lp))
            }
            (Actions::Continuous { dim, data }, Head::Gaussian(_)) => {
                let a = &data[i * dim..(i + 1) * dim];
                let ls: Vec<f64> = (0..*dim).map(|d| net.log_std(d)).collect();
                (super::dist::gaussian_log_prob(&cache.out, &ls, a), gaussian_entropy(&ls))
            }
            _ => panic!("action kind does not match the policy head"),
        };

        let log_ratio = logp - batch.old_log_probs[i];
        let ratio = log_ratio.exp();
        let unclipped = -adv * ratio;
        let clipped = -adv * ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let pg = unclipped.max(clipped);
        // d pg / d logp; zero when the clipped branch is active
        let g_lp = if unclipped >= clipped { -adv * ratio } else { 0.0 };

        let v_err = cache.value - batch.returns[i];
        stats.policy += pg;
        stats.value += 0.5 * v_err * v_err;
        stats.entropy += entropy;
        stats.approx_kl += (ratio - 1.0) - log_ratio;
        if (ratio - 1.0).abs() > cfg.clip_eps {
            stats.clip_fraction += 1.0;
        }

        d_out.clear();
        match (&batch.actions, net.head()) {
            (Actions::Discrete(a), _) => {
                let lp = log_softmax(&cache.out);
                for (j, &lpj) in lp.iter().enumerate() {
                    let p = lpj.exp();
                    let onehot = if j == a[i] { 1.0 } else { 0.0 };
                    let d_logp = g_lp * (onehot - p);
                    // dH/dlogit_j = -p_j (log p_j + H)
                    let d_ent = -p * (lpj + entropy);
                    d_out.push((d_logp - cfg.entropy_coef * d_ent) / m);
                }
            }
            (Actions::Continuous { dim, data }, _) => {
                let a = &data[i * dim..(i + 1) * dim];
                for d in 0..*dim {
                    let ls = net.log_std(d);
                    let sigma = ls.exp();
                    let z = (a[d] - cache.out[d]) / sigma;
                    d_out.push(g_lp * z / sigma / m);
                    let raw = net.params[ls_off + d];
                    if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
                        grad[ls_off + d] += (g_lp * (z * z - 1.0) - cfg.entropy_coef) / m;
                    }
                }
            }
        }
        net.backward(x, &cache, &d_out, cfg.value_coef * v_err / m, grad);
    }

    stats.policy /= m;
    stats.value /= m;
    stats.entropy /= m;
    stats.approx_kl /= m;
    stats.clip_fraction /= m;
    stats.total = stats.policy + cfg.value_coef * stats.value - cfg.entropy_coef * stats.entropy;
    stats
}

/// Run `cfg.epochs` passes of shuffled minibatch updates.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut PolicyNet,
    adam: &mut Adam,
    batch: &Batch,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<LossStats, PpoError> {
    let n = batch.advantages.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; net.num_params()];
    let mut mean = LossStats::default();
    let mut count = 0.0;
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let s = loss_and_grad(net, batch, chunk, cfg, &mut grad);
            if !s.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PpoError::NonFinite { loss: s.total, epoch });
            }
            clip_grad_norm(&mut grad, cfg.max_grad_norm);
            adam.step(&mut net.params, &grad);
            mean.total += s.total;
            mean.policy += s.policy;
            mean.value += s.value;
            mean.entropy += s.entropy;
            mean.approx_kl += s.approx_kl;
            mean.clip_fraction += s.clip_fraction;
            count += 1.0;
        }
    }
    if count > 0.0 {
        mean.total /= count;
        mean.policy /= count;
        mean.value /= count;
        mean.entropy /= count;
        mean.approx_kl /= count;
        mean.clip_fraction /= count;
    }
    Ok(mean)
}
