/// Generalized advantage estimation over a time-major rollout.
///
/// `rewards`, `values` and `dones` are laid out `[t * n_envs + env]`;
/// `last_values` holds the bootstrap value of the state after the final
/// step for each env. A `done` at step `t` cuts the recursion there, so
/// timeouts should already have `gamma * V(s_final)` folded into the reward.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_values: &[f64],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n_envs = last_values.len();
    assert!(n_envs > 0, "no environments");
    assert_eq!(rewards.len(), values.len());
    assert_eq!(rewards.len(), dones.len());
    assert_eq!(rewards.len() % n_envs, 0);
    let steps = rewards.len() / n_envs;
    let mut adv = vec![0.0; rewards.len()];
    for e in 0..n_envs {
        let mut next_value = last_values[e];
        let mut running = 0.0;
        for t in (0..steps).rev() {
            let i = t * n_envs + e;
            let live = if dones[i] { 0.0 } else { 1.0 };
            let delta = rewards[i] + gamma * next_value * live - values[i];
            running = delta + gamma * lambda * live * running;
            adv[i] = running;
            next_value = values[i];
        }
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shift and scale to zero mean and unit (population) standard deviation.
/// A constant batch becomes all zeros.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a = if std > 1e-12 { (*a - mean) / std } else { 0.0 };
    }
}
