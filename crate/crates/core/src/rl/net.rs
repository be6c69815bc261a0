//! Two-hidden-layer tanh MLP with a policy head and a value head sharing
//! the trunk. Parameters live in one flat vector; gradients are computed by
//! explicit per-layer backward passes.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::obs::SparseRow;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Categorical logits over this many actions.
    Categorical(usize),
    /// Diagonal Gaussian with a state-independent log-std per dimension.
    Gaussian(usize),
}

impl Head {
    pub fn action_dim(self) -> usize {
        match self {
            Head::Categorical(n) | Head::Gaussian(n) => n,
        }
    }
}

/// Parameter offsets into the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    input: usize,
    h1: usize,
    h2: usize,
    out: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wpi: usize,
    bpi: usize,
    wv: usize,
    bv: usize,
    log_std: usize,
    total: usize,
}

impl Layout {
    fn new(input: usize, h1: usize, h2: usize, head: Head) -> Self {
        let out = head.action_dim();
        let w1 = 0;
        let b1 = w1 + input * h1;
        let w2 = b1 + h1;
        let b2 = w2 + h1 * h2;
        let wpi = b2 + h2;
        let bpi = wpi + h2 * out;
        let wv = bpi + out;
        let bv = wv + h2;
        let log_std = bv + 1;
        let total = log_std + if matches!(head, Head::Gaussian(_)) { out } else { 0 };
        Self { input, h1, h2, out, w1, b1, w2, b2, wpi, bpi, wv, bv, log_std, total }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub params: Vec<f64>,
    head: Head,
    layout: Layout,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    /// Logits (categorical) or mean (Gaussian).
    pub out: Vec<f64>,
    pub value: f64,
}

impl PolicyNet {
    /// Scaled-normal initialization; the policy head starts near uniform /
    /// zero-mean and log-std starts at `init_log_std`.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, head: Head, init_log_std: f64, rng: &mut R) -> Self {
        Self::with_sizes(input, hidden, hidden, head, init_log_std, rng)
    }

    pub fn with_sizes<R: Rng + ?Sized>(
        input: usize,
        h1: usize,
        h2: usize,
        head: Head,
        init_log_std: f64,
        rng: &mut R,
    ) -> Self {
        let layout = Layout::new(input, h1, h2, head);
        let mut params = vec![0.0; layout.total];
        let mut fill = |start: usize, len: usize, fan_in: usize, gain: f64| {
            let normal = Normal::new(0.0, gain / (fan_in as f64).sqrt()).expect("finite std");
            for p in &mut params[start..start + len] {
                *p = normal.sample(rng);
            }
        };
        fill(layout.w1, input * h1, input.max(1), 1.0);
        fill(layout.w2, h1 * h2, h1, 1.0);
        fill(layout.wpi, h2 * layout.out, h2, 0.01);
        fill(layout.wv, h2, h2, 1.0);
        if matches!(head, Head::Gaussian(_)) {
            params[layout.log_std..layout.total].fill(init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX));
        }
        Self { params, head, layout }
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn input_dim(&self) -> usize {
        self.layout.input
    }

    pub fn num_params(&self) -> usize {
        self.layout.total
    }

    /// Replace the parameters; the length must match.
    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.layout.total, "parameter length mismatch");
        self.params.copy_from_slice(params);
    }

    /// Raw log-std parameters; clamp with [`PolicyNet::log_std`] before use.
    pub fn log_std_raw(&self) -> &[f64] {
        match self.head {
            Head::Gaussian(_) => &self.params[self.layout.log_std..self.layout.total],
            Head::Categorical(_) => &[],
        }
    }

    pub fn log_std(&self, i: usize) -> f64 {
        self.log_std_raw()[i].clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    pub fn forward(&self, x: SparseRow<'_>, cache: &mut Cache) {
        let l = &self.layout;
        let p = &self.params;
        cache.h1.clear();
        cache.h1.extend_from_slice(&p[l.b1..l.b1 + l.h1]);
        for (&i, &v) in x.idx.iter().zip(x.val) {
            let row = &p[l.w1 + i as usize * l.h1..][..l.h1];
            for (h, w) in cache.h1.iter_mut().zip(row) {
                *h += v * w;
            }
        }
        cache.h1.iter_mut().for_each(|h| *h = h.tanh());

        cache.h2.clear();
        cache.h2.extend_from_slice(&p[l.b2..l.b2 + l.h2]);
        for (i, &a) in cache.h1.iter().enumerate() {
            let row = &p[l.w2 + i * l.h2..][..l.h2];
            for (h, w) in cache.h2.iter_mut().zip(row) {
                *h += a * w;
            }
        }
        cache.h2.iter_mut().for_each(|h| *h = h.tanh());

        cache.out.clear();
        cache.out.extend_from_slice(&p[l.bpi..l.bpi + l.out]);
        let mut value = p[l.bv];
        for (j, &a) in cache.h2.iter().enumerate() {
            let row = &p[l.wpi + j * l.out..][..l.out];
            for (o, w) in cache.out.iter_mut().zip(row) {
                *o += a * w;
            }
            value += a * p[l.wv + j];
        }
        cache.value = value;
    }

    /// Accumulate into `grad` the gradient for upstream derivatives `d_out`
    /// (w.r.t. logits or mean) and `d_value`. Log-std gradients are added by
    /// the caller at [`PolicyNet::log_std_offset`].
    pub fn backward(&self, x: SparseRow<'_>, cache: &Cache, d_out: &[f64], d_value: f64, grad: &mut [f64]) {
        let l = &self.layout;
        let p = &self.params;
        let mut dz2 = vec![0.0; l.h2];
        for (j, &a) in cache.h2.iter().enumerate() {
            let wrow = &p[l.wpi + j * l.out..][..l.out];
            let grow = &mut grad[l.wpi + j * l.out..][..l.out];
            let mut dh = 0.0;
            for ((g, w), d) in grow.iter_mut().zip(wrow).zip(d_out) {
                *g += a * d;
                dh += w * d;
            }
            grad[l.wv + j] += a * d_value;
            dh += p[l.wv + j] * d_value;
            dz2[j] = dh * (1.0 - a * a);
        }
        for (g, d) in grad[l.bpi..l.bpi + l.out].iter_mut().zip(d_out) {
            *g += d;
        }
        grad[l.bv] += d_value;

        let mut dz1 = vec![0.0; l.h1];
        for (i, &a) in cache.h1.iter().enumerate() {
            let wrow = &p[l.w2 + i * l.h2..][..l.h2];
            let grow = &mut grad[l.w2 + i * l.h2..][..l.h2];
            let mut dh = 0.0;
            for ((g, w), d) in grow.iter_mut().zip(wrow).zip(&dz2) {
                *g += a * d;
                dh += w * d;
            }
            dz1[i] = dh * (1.0 - a * a);
        }
        for (g, d) in grad[l.b2..l.b2 + l.h2].iter_mut().zip(&dz2) {
            *g += d;
        }

        for (&k, &v) in x.idx.iter().zip(x.val) {
            let grow = &mut grad[l.w1 + k as usize * l.h1..][..l.h1];
            for (g, d) in grow.iter_mut().zip(&dz1) {
                *g += v * d;
            }
        }
        for (g, d) in grad[l.b1..l.b1 + l.h1].iter_mut().zip(&dz1) {
            *g += d;
        }
    }

    pub fn log_std_offset(&self) -> usize {
        self.layout.log_std
    }
}
