//! Action distributions: categorical over logits and diagonal Gaussian.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Sample an index; returns it with its log-probability.
pub fn categorical_sample<R: Rng + ?Sized>(logits: &[f64], rng: &mut R) -> (usize, f64) {
    let logp = log_softmax(logits);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return (i, *lp);
        }
    }
    let last = logp.len() - 1;
    (last, logp[last])
}

pub fn categorical_entropy(logp: &[f64]) -> f64 {
    -logp.iter().map(|lp| lp.exp() * lp).sum::<f64>()
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| 0.5 + HALF_LN_2PI + ls).sum()
}

pub fn gaussian_sample<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> (Vec<f64>, f64) {
    let action: Vec<f64> = mean
        .iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let eps: f64 = StandardNormal.sample(rng);
            m + ls.exp() * eps
        })
        .collect();
    let lp = gaussian_log_prob(mean, log_std, &action);
    (action, lp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_softmax_normalizes() {
        let lp = log_softmax(&[1.0, 2.0, 3.0, 1000.0]);
        let total: f64 = lp.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(lp.iter().all(|l| l.is_finite() && *l <= 0.0));
    }

    #[test]
    fn uniform_entropy() {
        let lp = log_softmax(&[0.0; 6]);
        assert!((categorical_entropy(&lp) - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sampled_log_probs_are_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let (a, lp) = categorical_sample(&[0.3, -1.0, 2.0], &mut rng);
            assert!(a < 3);
            assert!(lp.exp() > 0.0 && lp.exp() <= 1.0);
        }
    }

    #[test]
    fn standard_normal_density_at_zero() {
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp + HALF_LN_2PI).abs() < 1e-15);
        assert!((gaussian_entropy(&[0.0]) - (0.5 + HALF_LN_2PI)).abs() < 1e-15);
    }
}
