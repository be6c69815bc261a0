use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, ActionSpace, Environment, StepOutcome, TaskSpec};
use crate::dsl::builtins::dist;
use crate::dsl::{EnvFeatures, FeatureSchema, SemType, Value};

/// Parameters of the reach-and-carry toy.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachCarryConfig {
    pub max_steps: usize,
    /// Largest per-axis hand displacement per step.
    pub hand_speed: f64,
    /// Success when the cup is this close to the goal.
    pub success_radius: f64,
    /// Height of the wall on the plane `x = 0`; zero removes it.
    pub wall_height: f64,
}

impl Default for ReachCarryConfig {
    fn default() -> Self {
        Self { max_steps: 100, hand_speed: 0.05, success_radius: 0.1, wall_height: 0.25 }
    }
}

const WORKSPACE_LO: [f64; 3] = [-0.6, -0.4, 0.0];
const WORKSPACE_HI: [f64; 3] = [0.6, 0.4, 0.8];
const HANDLE_OFFSET: f64 = 0.06;

/// Kinematic state: hands are velocity-controlled points and the cup moves
/// rigidly with the right hand.
#[derive(Debug, Clone, PartialEq)]
pub struct VecState {
    pub object_pos: [f64; 3],
    /// Yaw of the cup; rotation is about the vertical axis only.
    pub object_yaw: f64,
    pub goal_pos: [f64; 3],
    pub goal_yaw: f64,
    pub left_hand_pos: [f64; 3],
    pub right_hand_pos: [f64; 3],
    pub step_count: usize,
}

fn yaw_quat(yaw: f64) -> [f64; 4] {
    [0.0, 0.0, (yaw / 2.0).sin(), (yaw / 2.0).cos()]
}

impl VecState {
    pub fn object_rot(&self) -> [f64; 4] {
        yaw_quat(self.object_yaw)
    }

    pub fn goal_rot(&self) -> [f64; 4] {
        yaw_quat(self.goal_yaw)
    }

    /// Left and right cup handle positions.
    pub fn handles(&self) -> ([f64; 3], [f64; 3]) {
        let (s, c) = self.object_yaw.sin_cos();
        let o = self.object_pos;
        let d = [c * HANDLE_OFFSET, s * HANDLE_OFFSET, 0.0];
        ([o[0] - d[0], o[1] - d[1], o[2]], [o[0] + d[0], o[1] + d[1], o[2]])
    }

    pub fn goal_dist(&self) -> f64 {
        dist(self.goal_pos, self.object_pos)
    }
}

pub(crate) fn vec_schema() -> FeatureSchema {
    FeatureSchema::new([
        ("object_pos", SemType::Vec3),
        ("object_rot", SemType::Quat),
        ("goal_pos", SemType::Vec3),
        ("goal_rot", SemType::Quat),
        ("left_hand_pos", SemType::Vec3),
        ("right_hand_pos", SemType::Vec3),
        ("cup_left_handle_pos", SemType::Vec3),
        ("cup_right_handle_pos", SemType::Vec3),
    ])
    .expect("static schema")
}

const OBS_DIM: usize = 26;
const ACTION_DIM: usize = 6;

#[derive(Debug, Clone)]
pub struct ReachCarryEnv {
    spec: TaskSpec,
    schema: FeatureSchema,
    cfg: ReachCarryConfig,
    state: VecState,
    done: bool,
}

fn uniform<R: Rng>(rng: &mut R, lo: [f64; 3], hi: [f64; 3]) -> [f64; 3] {
    [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2])]
}

impl ReachCarryEnv {
    pub fn new(spec: TaskSpec, cfg: ReachCarryConfig) -> Self {
        let mut env = Self { spec, schema: vec_schema(), cfg, state: Self::initial(&mut ChaCha8Rng::seed_from_u64(0)), done: false };
        env.reset(0);
        env
    }

    fn initial<R: Rng>(rng: &mut R) -> VecState {
        let right = uniform(rng, [-0.45, -0.2, 0.05], [-0.25, 0.2, 0.2]);
        let left = uniform(rng, [-0.45, -0.2, 0.05], [-0.25, 0.2, 0.2]);
        let goal = uniform(rng, [0.25, -0.2, 0.05], [0.45, 0.2, 0.2]);
        VecState {
            object_pos: right,
            object_yaw: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            goal_pos: goal,
            goal_yaw: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            left_hand_pos: left,
            right_hand_pos: right,
            step_count: 0,
        }
    }

    pub fn state(&self) -> &VecState {
        &self.state
    }

    pub fn config(&self) -> &ReachCarryConfig {
        &self.cfg
    }

    fn blocked_by_wall(&self, from: [f64; 3], to: [f64; 3]) -> bool {
        let crosses = (from[0] < 0.0) != (to[0] < 0.0);
        crosses && (from[2] < self.cfg.wall_height || to[2] < self.cfg.wall_height)
    }

    fn move_hand(&self, pos: [f64; 3], delta: &[f64]) -> [f64; 3] {
        let mut next = pos;
        for i in 0..3 {
            let d = delta[i].clamp(-1.0, 1.0) * self.cfg.hand_speed;
            next[i] = (pos[i] + if d.is_finite() { d } else { 0.0 }).clamp(WORKSPACE_LO[i], WORKSPACE_HI[i]);
        }
        next
    }
}

impl Environment for ReachCarryEnv {
    fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Continuous(ACTION_DIM)
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn hash_dim(&self) -> usize {
        OBS_DIM
    }

    fn reset(&mut self, seed: u64) -> EnvFeatures {
        self.state = Self::initial(&mut ChaCha8Rng::seed_from_u64(seed));
        self.done = false;
        self.features()
    }

    fn step(&mut self, action: &Action) -> StepOutcome {
        assert!(!self.done, "step called on a finished episode");
        let a = match action {
            Action::Continuous(v) if v.len() == ACTION_DIM => v,
            other => panic!("invalid reach-carry action {other:?}"),
        };
        self.state.left_hand_pos = self.move_hand(self.state.left_hand_pos, &a[0..3]);
        let from = self.state.right_hand_pos;
        let mut to = self.move_hand(from, &a[3..6]);
        if self.blocked_by_wall(from, to) {
            to[0] = from[0];
        }
        self.state.right_hand_pos = to;
        self.state.object_pos = to;
        self.state.step_count += 1;

        let success = self.is_success();
        let truncated = !success && self.state.step_count >= self.cfg.max_steps;
        let reward = if success {
            self.spec.reward_rule.success_reward(self.state.step_count, self.cfg.max_steps)
        } else {
            0.0
        };
        self.done = success || truncated;
        StepOutcome { reward, done: self.done, truncated, success }
    }

    fn features(&self) -> EnvFeatures {
        let s = &self.state;
        let (lh, rh) = s.handles();
        EnvFeatures::new()
            .with("object_pos", Value::Vec3(s.object_pos))
            .with("object_rot", Value::Quat(s.object_rot()))
            .with("goal_pos", Value::Vec3(s.goal_pos))
            .with("goal_rot", Value::Quat(s.goal_rot()))
            .with("left_hand_pos", Value::Vec3(s.left_hand_pos))
            .with("right_hand_pos", Value::Vec3(s.right_hand_pos))
            .with("cup_left_handle_pos", Value::Vec3(lh))
            .with("cup_right_handle_pos", Value::Vec3(rh))
    }

    fn observe(&self, out: &mut [f64]) {
        let s = &self.state;
        let (lh, rh) = s.handles();
        let parts: [&[f64]; 8] =
            [&s.object_pos, &s.object_rot(), &s.goal_pos, &s.goal_rot(), &s.left_hand_pos, &s.right_hand_pos, &lh, &rh];
        let mut i = 0;
        for p in parts {
            out[i..i + p.len()].copy_from_slice(p);
            i += p.len();
        }
    }

    fn hash_features(&self, out: &mut [f64]) {
        self.observe(out);
    }

    fn step_count(&self) -> usize {
        self.state.step_count
    }

    fn is_success(&self) -> bool {
        self.state.goal_dist() < self.cfg.success_radius
    }
}
