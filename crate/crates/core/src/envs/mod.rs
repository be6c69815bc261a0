//! Bundled sparse-reward tasks.
//!
//! Grid tasks use the MiniGrid `(type, color, state)` cell encoding and
//! expose `grid`, `agent_pos`, `agent_dir`, `carrying` and `carrying_color`
//! to progress programs. The vector task exposes positions and
//! orientations of two hands, a two-handled cup and its goal.

mod gridworld;
mod layouts;
mod reach_carry;

use std::path::Path;

pub use gridworld::{GridAction, GridEnv, GridState, Success as GridSuccess};
pub use layouts::{parse_map, GridLayout, InitialGrid, MapError};
pub use reach_carry::{ReachCarryConfig, ReachCarryEnv, VecState};

use crate::dsl::{EnvFeatures, FeatureSchema};

/// Names accepted by [`build_task`].
pub const TASK_NAMES: [&str; 5] = ["keycorridor-s3", "keycorridor-s4", "obstructedmaze-1q", "doorkey", "reach-carry"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSpace {
    Discrete(usize),
    /// Box `[-1, 1]^dim`.
    Continuous(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// How the extrinsic reward is paid on success.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RewardRule {
    /// `1 - 0.9 * step_count / max_steps`.
    StepDiscounted,
    Constant(f64),
}

impl RewardRule {
    pub fn success_reward(self, step_count: usize, max_steps: usize) -> f64 {
        match self {
            RewardRule::StepDiscounted => 1.0 - 0.9 * (step_count as f64 / max_steps as f64),
            RewardRule::Constant(r) => r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub description: String,
    pub max_steps: usize,
    pub reward_rule: RewardRule,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskFamily {
    Grid,
    Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    /// Episode over, by success or timeout.
    pub done: bool,
    /// Episode ended by the step limit rather than success.
    pub truncated: bool,
    pub success: bool,
}

/// A single-owner environment instance.
pub trait Environment: Send {
    fn spec(&self) -> &TaskSpec;
    fn schema(&self) -> &FeatureSchema;
    fn action_space(&self) -> ActionSpace;
    /// Length of the policy observation.
    fn obs_dim(&self) -> usize;
    /// Length of the raw observation hashed by SimHash binning.
    fn hash_dim(&self) -> usize;

    /// Start a new episode with a layout determined by `seed`.
    fn reset(&mut self, seed: u64) -> EnvFeatures;
    /// Apply one action. Calling `step` after `done` without a reset is a
    /// caller error and panics.
    fn step(&mut self, action: &Action) -> StepOutcome;

    /// Feature snapshot of the current state for progress programs.
    fn features(&self) -> EnvFeatures;
    fn observe(&self, out: &mut [f64]);
    fn hash_features(&self, out: &mut [f64]);
    fn step_count(&self) -> usize;
    fn is_success(&self) -> bool;
}

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("unknown task `{0}` (expected one of: {list})", list = TASK_NAMES.join(", "))]
    UnknownTask(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("cannot read map file {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// A named task: its spec, schema, reference program and an environment factory.
#[derive(Debug, Clone)]
pub struct Task {
    pub spec: TaskSpec,
    pub family: TaskFamily,
    pub schema: FeatureSchema,
    /// Hand-written progress program used when no candidates are supplied.
    pub reference_program: String,
    kind: TaskKind,
}

#[derive(Debug, Clone)]
enum TaskKind {
    Grid(GridLayout),
    ReachCarry(ReachCarryConfig),
}

impl Task {
    pub fn make_env(&self) -> Box<dyn Environment> {
        match &self.kind {
            TaskKind::Grid(layout) => Box::new(GridEnv::new(self.spec.clone(), layout.clone())),
            TaskKind::ReachCarry(cfg) => Box::new(ReachCarryEnv::new(self.spec.clone(), cfg.clone())),
        }
    }

    pub fn grid_env(&self) -> Option<GridEnv> {
        match &self.kind {
            TaskKind::Grid(layout) => Some(GridEnv::new(self.spec.clone(), layout.clone())),
            TaskKind::ReachCarry(_) => None,
        }
    }

    pub fn reach_carry_env(&self) -> Option<ReachCarryEnv> {
        match &self.kind {
            TaskKind::ReachCarry(cfg) => Some(ReachCarryEnv::new(self.spec.clone(), cfg.clone())),
            TaskKind::Grid(_) => None,
        }
    }

    /// Override the reach-carry parameters; no effect on grid tasks.
    pub fn with_reach_carry_config(mut self, cfg: ReachCarryConfig) -> Self {
        if let TaskKind::ReachCarry(_) = self.kind {
            self.spec.max_steps = cfg.max_steps;
            self.kind = TaskKind::ReachCarry(cfg);
        }
        self
    }

    /// Override the episode step limit.
    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.spec.max_steps = max_steps;
        if let TaskKind::ReachCarry(cfg) = &mut self.kind {
            cfg.max_steps = max_steps;
        }
        self
    }
}

const KEY_THEN_BALL: &str = "\
# reach the key, then the blue ball
subtask decreasing: path_len(bfs(grid, agent_pos, get_position(grid, 5)))
subtask decreasing: path_len(bfs(grid, agent_pos, get_position(grid, 6, 2)))
";

const DOOR_THEN_BALL: &str = "\
# open the closed door between agent and ball, then reach the ball
subtask decreasing: path_len(bfs(grid, agent_pos, get_position_on_path(grid, agent_pos, get_position(grid, 6, 2), 4, -1, 1)))
subtask decreasing: path_len(bfs(grid, agent_pos, get_position(grid, 6, 2)))
";

const KEY_THEN_GOAL: &str = "\
# reach the key, then the goal square
subtask decreasing: path_len(bfs(grid, agent_pos, get_position(grid, 5)))
subtask decreasing: path_len(bfs(grid, agent_pos, get_position(grid, 8)))
";

const OBJECT_TO_GOAL: &str = "\
subtask decreasing: goal_dist(object_pos)
";

fn grid_task(name: &str, description: &str, max_steps: usize, layout: GridLayout, program: &str) -> Task {
    Task {
        spec: TaskSpec {
            name: name.to_string(),
            description: description.to_string(),
            max_steps,
            reward_rule: RewardRule::StepDiscounted,
        },
        family: TaskFamily::Grid,
        schema: gridworld::grid_schema(),
        reference_program: program.to_string(),
        kind: TaskKind::Grid(layout),
    }
}

/// Construct one of the bundled tasks by name.
pub fn build_task(name: &str) -> Result<Task, EnvError> {
    Ok(match name {
        "keycorridor-s3" => grid_task(
            name,
            "This environment is a gridworld that requires the agent to pick up a key, unlock a door with it, then pick up a blue ball.",
            150,
            GridLayout::KeyCorridor { room_rows: 1, room_cols: 2, decoys: false },
            KEY_THEN_BALL,
        ),
        "keycorridor-s4" => grid_task(
            name,
            "This environment is a gridworld that requires the agent to pick up a key, unlock a door with it, then pick up a blue ball; other rooms are empty.",
            300,
            GridLayout::KeyCorridor { room_rows: 3, room_cols: 3, decoys: true },
            KEY_THEN_BALL,
        ),
        "obstructedmaze-1q" => grid_task(
            name,
            "This environment is a gridworld that requires the agent to pick up a blue ball behind a closed door that is blocked by another ball; several locked doors are misleading and the key is not needed.",
            200,
            GridLayout::ObstructedMaze,
            DOOR_THEN_BALL,
        ),
        "doorkey" => grid_task(
            name,
            "This environment is a gridworld that requires the agent to pick up a key, unlock the door, then walk onto the green goal square.",
            160,
            GridLayout::DoorKey,
            KEY_THEN_GOAL,
        ),
        "reach-carry" => {
            let cfg = ReachCarryConfig::default();
            Task {
                spec: TaskSpec {
                    name: name.to_string(),
                    description: "This environment requires the cup held in the right hand to be carried over a low wall to the goal location.".to_string(),
                    max_steps: cfg.max_steps,
                    reward_rule: RewardRule::Constant(1.0),
                },
                family: TaskFamily::Vector,
                schema: reach_carry::vec_schema(),
                reference_program: OBJECT_TO_GOAL.to_string(),
                kind: TaskKind::ReachCarry(cfg),
            }
        }
        other => return Err(EnvError::UnknownTask(other.to_string())),
    })
}

/// Grid task from a map file (see [`parse_map`]). Success is reaching the
/// goal square when the map has one, otherwise picking up the blue ball.
pub fn load_map_task(path: &Path, max_steps: usize) -> Result<Task, EnvError> {
    let text = std::fs::read_to_string(path).map_err(|source| EnvError::Io { path: path.display().to_string(), source })?;
    let fixed = parse_map(&text)?;
    let name = path.file_stem().map_or_else(|| "map".to_string(), |s| s.to_string_lossy().into_owned());
    let has_goal = fixed.success == GridSuccess::ReachGoal;
    let program = if has_goal { KEY_THEN_GOAL } else { KEY_THEN_BALL };
    Ok(grid_task(
        &name,
        "This environment is a gridworld loaded from a map file.",
        max_steps,
        GridLayout::Fixed(Box::new(fixed)),
        program,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_rule_examples() {
        assert!((RewardRule::StepDiscounted.success_reward(10, 100) - 0.91).abs() < 1e-15);
        assert!((RewardRule::StepDiscounted.success_reward(100, 100) - 0.1).abs() < 1e-15);
        assert_eq!(RewardRule::Constant(1.0).success_reward(3, 10), 1.0);
    }

    #[test]
    fn every_name_builds() {
        for name in TASK_NAMES {
            let task = build_task(name).unwrap();
            assert_eq!(task.spec.name, name);
            let mut env = task.make_env();
            let f = env.reset(1);
            assert!(f.conforms_to(&task.schema), "{name}");
            assert_eq!(env.step_count(), 0);
        }
        assert!(matches!(build_task("keycorridor-s9"), Err(EnvError::UnknownTask(_))));
    }
}
