use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use progresscounts::envs::{build_task, Action, ActionSpace, Environment, ReachCarryConfig, TASK_NAMES};

fn random_action(space: ActionSpace, rng: &mut ChaCha8Rng) -> Action {
    match space {
        ActionSpace::Discrete(n) => Action::Discrete(rng.random_range(0..n)),
        ActionSpace::Continuous(d) => Action::Continuous((0..d).map(|_| rng.random_range(-1.5..1.5)).collect()),
    }
}

/// Runs `episodes` random episodes and returns every observation seen.
fn rollout(env: &mut dyn Environment, seed: u64, episodes: usize, mut check: impl FnMut(&dyn Environment)) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs = vec![0.0; env.obs_dim()];
    let mut hashed = vec![0.0; env.hash_dim()];
    let mut seen = Vec::new();
    for ep in 0..episodes {
        env.reset(seed * 1000 + ep as u64);
        loop {
            let out = env.step(&random_action(env.action_space(), &mut rng));
            env.observe(&mut obs);
            env.hash_features(&mut hashed);
            assert!(obs.iter().chain(&hashed).all(|v| v.is_finite()));
            assert!(env.step_count() <= env.spec().max_steps);
            assert_eq!(out.success, env.is_success());
            assert_eq!(out.truncated, !out.success && env.step_count() == env.spec().max_steps);
            assert_eq!(out.done, out.success || out.truncated);
            assert!(out.reward == 0.0 || out.success);
            check(env);
            seen.push(obs.clone());
            if out.done {
                break;
            }
        }
    }
    seen
}

#[test]
fn grid_agents_stay_on_traversable_cells() {
    for name in TASK_NAMES.iter().filter(|n| **n != "reach-carry") {
        let task = build_task(name).unwrap();
        let mut env = task.grid_env().unwrap();
        rollout(&mut env, 1, 5, |_| {});
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for ep in 0..5 {
            env.reset(ep);
            while !env.step(&random_action(env.action_space(), &mut rng)).done {
                let s = env.state();
                assert!(s.grid.contains(s.agent_pos), "{name}");
                assert!(s.grid.get(s.agent_pos).is_traversable(), "{name}");
                assert!(s.agent_dir < 4);
            }
        }
    }
}

#[test]
fn resets_are_deterministic_per_seed() {
    for name in TASK_NAMES {
        let task = build_task(name).unwrap();
        let (mut a, mut b) = (task.make_env(), task.make_env());
        assert_eq!(a.reset(7), b.reset(7), "{name}");
        assert_eq!(rollout(a.as_mut(), 3, 3, |_| {}), rollout(b.as_mut(), 3, 3, |_| {}), "{name}");
    }
}

#[test]
fn layouts_vary_with_seed() {
    for name in ["keycorridor-s3", "obstructedmaze-1q", "reach-carry"] {
        let task = build_task(name).unwrap();
        let mut env = task.make_env();
        let first = env.reset(0);
        assert!((1..20).any(|s| env.reset(s) != first), "{name}");
    }
}

#[test]
fn reach_carry_respects_workspace_and_wall() {
    let task = build_task("reach-carry").unwrap();
    let mut env = task.reach_carry_env().unwrap();
    let wall = env.config().wall_height;
    rollout(&mut env, 5, 20, |_| {});
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for ep in 0..20 {
        env.reset(ep);
        loop {
            let before = env.state().right_hand_pos;
            let out = env.step(&random_action(env.action_space(), &mut rng));
            let s = env.state();
            for p in [s.left_hand_pos, s.right_hand_pos] {
                assert!((-0.6..=0.6).contains(&p[0]) && (-0.4..=0.4).contains(&p[1]) && (0.0..=0.8).contains(&p[2]));
            }
            assert_eq!(s.object_pos, s.right_hand_pos);
            let after = s.right_hand_pos;
            if (before[0] < 0.0) != (after[0] < 0.0) {
                assert!(before[2] >= wall && after[2] >= wall, "crossed the wall low: {before:?} -> {after:?}");
            }
            if out.done {
                break;
            }
        }
    }
}

#[test]
fn reach_carry_episodes_truncate_at_the_step_limit() {
    let cfg = ReachCarryConfig { max_steps: 17, ..ReachCarryConfig::default() };
    let task = build_task("reach-carry").unwrap().with_reach_carry_config(cfg);
    let mut env = task.make_env();
    env.reset(0);
    let idle = Action::Continuous(vec![0.0; 6]);
    for i in 1..=17 {
        let out = env.step(&idle);
        assert_eq!(out.done, i == 17);
        assert_eq!(out.truncated, i == 17);
    }
}

#[test]
#[should_panic(expected = "finished episode")]
fn stepping_past_the_end_panics() {
    let cfg = ReachCarryConfig { max_steps: 1, ..ReachCarryConfig::default() };
    let mut env = build_task("reach-carry").unwrap().with_reach_carry_config(cfg).make_env();
    env.reset(0);
    let idle = Action::Continuous(vec![0.0; 6]);
    env.step(&idle);
    env.step(&idle);
}
