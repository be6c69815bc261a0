use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layouts::{GridLayout, InitialGrid};
use super::{Action, ActionSpace, Environment, StepOutcome, TaskSpec};
use crate::dsl::{EnvFeatures, FeatureSchema, SemType, Value};
use crate::grid::{color, door, object, Cell, Grid, GridPos};

/// MiniGrid action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    Left = 0,
    Right = 1,
    Forward = 2,
    Pickup = 3,
    Drop = 4,
    Toggle = 5,
}

impl GridAction {
    pub const COUNT: usize = 6;

    pub fn from_index(i: usize) -> Option<Self> {
        use GridAction::*;
        [Left, Right, Forward, Pickup, Drop, Toggle].get(i).copied()
    }
}

/// What ends a grid episode successfully.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Success {
    /// Agent is carrying a ball of this color.
    CarryBall(u8),
    /// Agent stands on the goal square.
    ReachGoal,
}

/// Side of the forward-facing window hashed by SimHash, as in MiniGrid's
/// default partial observation.
const HASH_VIEW: usize = 7;

/// Direction vectors as `(drow, dcol)`; 0 = right, 1 = down, 2 = left, 3 = up.
const DIR_VEC: [(isize, isize); 4] = [(0, 1), (1, 0), (0, -1), (-1, 0)];

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub grid: Arc<Grid>,
    pub agent_pos: GridPos,
    pub agent_dir: u8,
    pub carrying: Option<Cell>,
    pub step_count: usize,
    pub max_steps: usize,
}

impl GridState {
    pub fn front_pos(&self) -> Option<GridPos> {
        let (dr, dc) = DIR_VEC[self.agent_dir as usize];
        self.agent_pos.offset(dr, dc).filter(|p| self.grid.contains(*p))
    }

    /// Grid encoding with the agent drawn in as `(10, 0, dir)`.
    pub fn encode_with_agent(&self) -> Vec<u8> {
        let mut enc = self.grid.encode();
        let i = 3 * (self.agent_pos.row * self.grid.cols() + self.agent_pos.col);
        enc[i] = object::AGENT;
        enc[i + 1] = 0;
        enc[i + 2] = self.agent_dir;
        enc
    }
}

pub(crate) fn grid_schema() -> FeatureSchema {
    FeatureSchema::new([
        ("grid", SemType::Grid),
        ("agent_pos", SemType::GridPos),
        ("agent_dir", SemType::Scalar),
        ("carrying", SemType::Scalar),
        ("carrying_color", SemType::Scalar),
    ])
    .expect("static schema")
}

// Per-cell observation channels.
const CH_WALL: usize = 0;
const CH_DOOR_OPEN: usize = 1;
const CH_DOOR_CLOSED: usize = 2;
const CH_DOOR_LOCKED: usize = 3;
const CH_KEY: usize = 4;
const CH_BALL: usize = 5;
const CH_BOX: usize = 6;
const CH_GOAL: usize = 7;
const CH_BLUE: usize = 8;
const CHANNELS: usize = 9;

fn cell_channels(c: Cell) -> [Option<usize>; 2] {
    let kind = match c.kind {
        object::WALL => Some(CH_WALL),
        object::DOOR => Some(match c.state {
            door::OPEN => CH_DOOR_OPEN,
            door::CLOSED => CH_DOOR_CLOSED,
            _ => CH_DOOR_LOCKED,
        }),
        object::KEY => Some(CH_KEY),
        object::BALL => Some(CH_BALL),
        object::BOX => Some(CH_BOX),
        object::GOAL => Some(CH_GOAL),
        _ => None,
    };
    let blue = (matches!(c.kind, object::KEY | object::BALL | object::BOX) && c.color == color::BLUE).then_some(CH_BLUE);
    [kind, blue]
}

/// Gridworld with MiniGrid dynamics over a randomized layout.
///
/// The policy observation is an egocentric one-hot view covering the whole
/// grid from any agent position, rotated so the agent faces up, followed by
/// one-hot agent position and direction and two flags for carrying a key or
/// a ball.
#[derive(Debug, Clone)]
pub struct GridEnv {
    spec: TaskSpec,
    schema: FeatureSchema,
    layout: GridLayout,
    state: GridState,
    success: Success,
    done: bool,
    dims: (usize, usize),
}

impl GridEnv {
    pub fn new(spec: TaskSpec, layout: GridLayout) -> Self {
        let init = layout.generate(&mut ChaCha8Rng::seed_from_u64(0));
        let dims = (init.grid.rows(), init.grid.cols());
        let state = GridState {
            grid: Arc::new(init.grid),
            agent_pos: init.agent_pos,
            agent_dir: init.agent_dir,
            carrying: None,
            step_count: 0,
            max_steps: spec.max_steps,
        };
        Self { spec, schema: grid_schema(), layout, state, success: init.success, done: false, dims }
    }

    pub fn state(&self) -> &GridState {
        &self.state
    }

    pub fn success_rule(&self) -> Success {
        self.success
    }

    /// Replace the current state, e.g. to start from a hand-built position.
    pub fn set_state(&mut self, init: InitialGrid) {
        self.state = GridState {
            grid: Arc::new(init.grid),
            agent_pos: init.agent_pos,
            agent_dir: init.agent_dir,
            carrying: None,
            step_count: 0,
            max_steps: self.spec.max_steps,
        };
        self.success = init.success;
        self.done = false;
    }

    fn cell_count(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    fn view_side(&self) -> usize {
        2 * (self.dims.0.max(self.dims.1) - 1) + 1
    }

    fn check_success(&self) -> bool {
        match self.success {
            Success::CarryBall(col) => self.state.carrying.is_some_and(|c| c.kind == object::BALL && c.color == col),
            Success::ReachGoal => self.state.grid.get(self.state.agent_pos).kind == object::GOAL,
        }
    }

    /// Apply one MiniGrid action without the episode bookkeeping.
    fn apply(&mut self, action: GridAction) {
        let s = &mut self.state;
        match action {
            GridAction::Left => s.agent_dir = (s.agent_dir + 3) % 4,
            GridAction::Right => s.agent_dir = (s.agent_dir + 1) % 4,
            GridAction::Forward => {
                if let Some(front) = s.front_pos() {
                    if s.grid.get(front).can_overlap() {
                        s.agent_pos = front;
                    }
                }
            }
            GridAction::Pickup => {
                if let Some(front) = s.front_pos() {
                    let cell = s.grid.get(front);
                    if s.carrying.is_none() && cell.can_pickup() {
                        s.carrying = Some(cell);
                        Arc::make_mut(&mut s.grid).set(front, Cell::EMPTY);
                    }
                }
            }
            GridAction::Drop => {
                if let (Some(front), Some(held)) = (s.front_pos(), s.carrying) {
                    if s.grid.get(front).kind == object::EMPTY {
                        Arc::make_mut(&mut s.grid).set(front, held);
                        s.carrying = None;
                    }
                }
            }
            GridAction::Toggle => {
                if let Some(front) = s.front_pos() {
                    let cell = s.grid.get(front);
                    if cell.kind != object::DOOR {
                        return;
                    }
                    let next = match cell.state {
                        door::LOCKED => {
                            let has_key = s.carrying.is_some_and(|k| k.kind == object::KEY && k.color == cell.color);
                            if !has_key {
                                return;
                            }
                            // the key is used up by the lock
                            s.carrying = None;
                            door::OPEN
                        }
                        door::CLOSED => door::OPEN,
                        _ => door::CLOSED,
                    };
                    Arc::make_mut(&mut s.grid).set(front, Cell::door(cell.color, next));
                }
            }
        }
    }

    /// Take a typed action; see [`Environment::step`].
    pub fn step_action(&mut self, action: GridAction) -> StepOutcome {
        assert!(!self.done, "step called on a finished episode");
        self.apply(action);
        self.state.step_count += 1;
        let success = self.check_success();
        let truncated = !success && self.state.step_count >= self.state.max_steps;
        let reward = if success {
            self.spec.reward_rule.success_reward(self.state.step_count, self.state.max_steps)
        } else {
            0.0
        };
        self.done = success || truncated;
        StepOutcome { reward, done: self.done, truncated, success }
    }
}

impl Environment for GridEnv {
    fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete(GridAction::COUNT)
    }

    fn obs_dim(&self) -> usize {
        self.view_side() * self.view_side() * CHANNELS + self.cell_count() + 4 + 2
    }

    fn hash_dim(&self) -> usize {
        HASH_VIEW * HASH_VIEW * 3 + 2
    }

    fn reset(&mut self, seed: u64) -> EnvFeatures {
        let init = self.layout.generate(&mut ChaCha8Rng::seed_from_u64(seed));
        self.set_state(init);
        self.features()
    }

    fn step(&mut self, action: &Action) -> StepOutcome {
        let a = match action {
            Action::Discrete(i) => GridAction::from_index(*i),
            Action::Continuous(_) => None,
        };
        self.step_action(a.unwrap_or_else(|| panic!("invalid grid action {action:?}")))
    }

    fn features(&self) -> EnvFeatures {
        let s = &self.state;
        let (carrying, carrying_color) = s.carrying.map_or((0.0, 0.0), |c| (c.kind as f64, c.color as f64));
        EnvFeatures::new()
            .with("grid", Value::Grid(Arc::clone(&s.grid)))
            .with("agent_pos", Value::Pos(Some(s.agent_pos)))
            .with("agent_dir", Value::Scalar(s.agent_dir as f64))
            .with("carrying", Value::Scalar(carrying))
            .with("carrying_color", Value::Scalar(carrying_color))
    }

    fn observe(&self, out: &mut [f64]) {
        out.fill(0.0);
        let s = &self.state;
        let side = self.view_side();
        let r = (side / 2) as isize;
        let cols = self.dims.1;
        let (fr, fc) = DIR_VEC[s.agent_dir as usize];
        // agent's right-hand side
        let (rr, rc) = (fc, -fr);
        for (pos, cell) in s.grid.cells() {
            let dr = pos.row as isize - s.agent_pos.row as isize;
            let dc = pos.col as isize - s.agent_pos.col as isize;
            let ahead = dr * fr + dc * fc;
            let right = dr * rr + dc * rc;
            let vr = (r - ahead) as usize;
            let vc = (r + right) as usize;
            let base = (vr * side + vc) * CHANNELS;
            for ch in cell_channels(cell).into_iter().flatten() {
                out[base + ch] = 1.0;
            }
        }
        let mut tail = side * side * CHANNELS;
        out[tail + s.agent_pos.row * cols + s.agent_pos.col] = 1.0;
        tail += self.cell_count();
        out[tail + s.agent_dir as usize] = 1.0;
        tail += 4;
        if let Some(c) = s.carrying {
            match c.kind {
                object::KEY => out[tail] = 1.0,
                object::BALL => out[tail + 1] = 1.0,
                _ => {}
            }
        }
    }

    fn hash_features(&self, out: &mut [f64]) {
        let s = &self.state;
        out.fill(0.0);
        let (fr, fc) = DIR_VEC[s.agent_dir as usize];
        let (rr, rc) = (fc, -fr);
        let half = (HASH_VIEW / 2) as isize;
        let mut i = 0;
        for ahead in 0..HASH_VIEW as isize {
            for side in -half..=half {
                let r = s.agent_pos.row as isize + ahead * fr + side * rr;
                let c = s.agent_pos.col as isize + ahead * fc + side * rc;
                if r >= 0 && c >= 0 && (r as usize) < s.grid.rows() && (c as usize) < s.grid.cols() {
                    let cell = s.grid.get(GridPos::new(r as usize, c as usize));
                    out[i..i + 3].copy_from_slice(&[cell.kind as f64, cell.color as f64, cell.state as f64]);
                }
                i += 3;
            }
        }
        let (kind, col) = s.carrying.map_or((0.0, 0.0), |c| (c.kind as f64, c.color as f64));
        out[i] = kind;
        out[i + 1] = col;
    }

    fn step_count(&self) -> usize {
        self.state.step_count
    }

    fn is_success(&self) -> bool {
        self.check_success()
    }
}
