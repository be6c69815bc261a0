//! Layout generators and the plain-text map format.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::gridworld::Success;
use crate::grid::{color, door, Cell, Grid, GridPos};

/// A fully specified starting position.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialGrid {
    pub grid: Grid,
    pub agent_pos: GridPos,
    pub agent_dir: u8,
    pub success: Success,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridLayout {
    /// Rooms above (and with `decoys`, below) a corridor. One room holds a
    /// key behind a closed door, another a blue ball behind a door locked
    /// with the key's color.
    KeyCorridor { room_rows: usize, room_cols: usize, decoys: bool },
    /// Two rooms joined by a closed door with a green ball in front of it;
    /// the blue ball is in the far room and locked closets are decoys.
    ObstructedMaze,
    /// A wall splits the room; a locked door, its key on the agent's side,
    /// the goal in the far corner.
    DoorKey,
    Fixed(Box<InitialGrid>),
}

const KEY_COLORS: [u8; 5] = [color::RED, color::GREEN, color::PURPLE, color::YELLOW, color::GREY];

fn pick<R: Rng + ?Sized, T: Copy>(rng: &mut R, items: &[T]) -> T {
    *items.choose(rng).expect("non-empty choice")
}

fn room_cells(rows: std::ops::RangeInclusive<usize>, cols: std::ops::RangeInclusive<usize>) -> Vec<GridPos> {
    rows.flat_map(|r| cols.clone().map(move |c| GridPos::new(r, c))).collect()
}

impl GridLayout {
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> InitialGrid {
        match self {
            GridLayout::KeyCorridor { room_rows, room_cols, decoys } => key_corridor(rng, *room_rows, *room_cols, *decoys),
            GridLayout::ObstructedMaze => obstructed_maze(rng),
            GridLayout::DoorKey => door_key(rng),
            GridLayout::Fixed(init) => (**init).clone(),
        }
    }
}

fn key_corridor<R: Rng + ?Sized>(rng: &mut R, room_rows: usize, room_cols: usize, decoys: bool) -> InitialGrid {
    let cols = 2 * room_cols + 3;
    let mid = room_cols + 1;
    let upper_wall = room_rows + 1;
    let corridor = room_rows + 2;
    let rows = if decoys { 2 * room_rows + 5 } else { room_rows + 4 };
    let mut grid = Grid::walled(rows, cols);
    for c in 0..cols {
        grid.set(GridPos::new(upper_wall, c), Cell::WALL);
    }
    for r in 1..=room_rows {
        grid.set(GridPos::new(r, mid), Cell::WALL);
    }
    let left_door = room_cols.div_ceil(2);
    let right_door = mid + left_door;
    // (door position, room cells)
    let mut rooms = vec![
        (GridPos::new(upper_wall, left_door), room_cells(1..=room_rows, 1..=room_cols)),
        (GridPos::new(upper_wall, right_door), room_cells(1..=room_rows, mid + 1..=2 * room_cols + 1)),
    ];
    if decoys {
        let lower_wall = corridor + 1;
        for c in 0..cols {
            grid.set(GridPos::new(lower_wall, c), Cell::WALL);
        }
        let lower = lower_wall + 1..=lower_wall + room_rows;
        for r in lower.clone() {
            grid.set(GridPos::new(r, mid), Cell::WALL);
        }
        rooms.push((GridPos::new(lower_wall, left_door), room_cells(lower.clone(), 1..=room_cols)));
        rooms.push((GridPos::new(lower_wall, right_door), room_cells(lower, mid + 1..=2 * room_cols + 1)));
    }

    let key_room = rng.random_range(0..rooms.len());
    let mut ball_room = rng.random_range(0..rooms.len() - 1);
    if ball_room >= key_room {
        ball_room += 1;
    }
    let key_color = pick(rng, &KEY_COLORS);
    for (i, (door_pos, _)) in rooms.iter().enumerate() {
        let cell = if i == ball_room {
            Cell::door(key_color, door::LOCKED)
        } else {
            Cell::door(pick(rng, &KEY_COLORS), door::CLOSED)
        };
        grid.set(*door_pos, cell);
    }
    grid.set(pick(rng, &rooms[key_room].1), Cell::key(key_color));
    grid.set(pick(rng, &rooms[ball_room].1), Cell::ball(color::BLUE));

    let agent_pos = GridPos::new(corridor, rng.random_range(1..cols - 1));
    InitialGrid { grid, agent_pos, agent_dir: rng.random_range(0..4), success: Success::CarryBall(color::BLUE) }
}

fn obstructed_maze<R: Rng + ?Sized>(rng: &mut R) -> InitialGrid {
    let (rows, cols) = (7, 11);
    let mut grid = Grid::walled(rows, cols);
    for r in 1..=3 {
        grid.set(GridPos::new(r, 4), Cell::WALL);
    }
    for c in 0..cols {
        grid.set(GridPos::new(4, c), Cell::WALL);
        if ![5, 7, 9].contains(&c) {
            grid.set(GridPos::new(5, c), Cell::WALL);
        }
    }
    for c in [5, 7, 9] {
        grid.set(GridPos::new(4, c), Cell::door(pick(rng, &KEY_COLORS), door::LOCKED));
    }
    let door_row = rng.random_range(1..=3);
    grid.set(GridPos::new(door_row, 4), Cell::door(pick(rng, &KEY_COLORS), door::CLOSED));
    let blocker = GridPos::new(door_row, 3);
    grid.set(blocker, Cell::ball(color::GREEN));
    grid.set(pick(rng, &room_cells(1..=3, 5..=9)), Cell::ball(color::BLUE));

    let free: Vec<GridPos> = room_cells(1..=3, 1..=3).into_iter().filter(|p| *p != blocker).collect();
    let agent_pos = pick(rng, &free);
    InitialGrid { grid, agent_pos, agent_dir: rng.random_range(0..4), success: Success::CarryBall(color::BLUE) }
}

fn door_key<R: Rng + ?Sized>(rng: &mut R) -> InitialGrid {
    let (rows, cols) = (6, 8);
    let mut grid = Grid::walled(rows, cols);
    let split = rng.random_range(3..=4);
    for r in 1..rows - 1 {
        grid.set(GridPos::new(r, split), Cell::WALL);
    }
    let key_color = pick(rng, &KEY_COLORS);
    grid.set(GridPos::new(rng.random_range(1..rows - 1), split), Cell::door(key_color, door::LOCKED));
    grid.set(GridPos::new(rows - 2, cols - 2), Cell::goal());

    let left = room_cells(1..=rows - 2, 1..=split - 1);
    let key_pos = pick(rng, &left);
    grid.set(key_pos, Cell::key(key_color));
    let free: Vec<GridPos> = left.into_iter().filter(|p| *p != key_pos).collect();
    let agent_pos = pick(rng, &free);
    InitialGrid { grid, agent_pos, agent_dir: rng.random_range(0..4), success: Success::ReachGoal }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("map is empty")]
    Empty,
    #[error("line {line} has {found} cells, expected {expected}")]
    Ragged { line: usize, expected: usize, found: usize },
    #[error("unknown map character {ch:?} at line {line}, column {col}")]
    UnknownChar { ch: char, line: usize, col: usize },
    #[error("map must contain exactly one agent, found {0}")]
    AgentCount(usize),
}

/// Parse a map with one character per cell:
///
/// | char | cell |
/// |------|------|
/// | `#` | wall |
/// | `.` | empty floor |
/// | `D` | locked yellow door |
/// | `d` | closed yellow door |
/// | `_` | open yellow door |
/// | `K` | yellow key |
/// | `B` | blue ball |
/// | `o` | green ball |
/// | `G` | goal |
/// | `A` `>` | agent facing right (`v`, `<`, `^` for the other headings) |
///
/// The task is reaching the goal if the map has one, otherwise picking up
/// the blue ball.
pub fn parse_map(text: &str) -> Result<InitialGrid, MapError> {
    let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
    let Some(first) = lines.first() else { return Err(MapError::Empty) };
    let cols = first.chars().count();
    let mut grid = Grid::new(lines.len(), cols);
    let mut agents = Vec::new();
    let mut has_goal = false;
    for (r, line) in lines.iter().enumerate() {
        let found = line.chars().count();
        if found != cols {
            return Err(MapError::Ragged { line: r + 1, expected: cols, found });
        }
        for (c, ch) in line.chars().enumerate() {
            let pos = GridPos::new(r, c);
            let cell = match ch {
                '#' => Cell::WALL,
                '.' => Cell::EMPTY,
                'D' => Cell::door(color::YELLOW, door::LOCKED),
                'd' => Cell::door(color::YELLOW, door::CLOSED),
                '_' => Cell::door(color::YELLOW, door::OPEN),
                'K' => Cell::key(color::YELLOW),
                'B' => Cell::ball(color::BLUE),
                'o' => Cell::ball(color::GREEN),
                'G' => {
                    has_goal = true;
                    Cell::goal()
                }
                'A' | '>' | 'v' | '<' | '^' => {
                    let dir = match ch {
                        'v' => 1,
                        '<' => 2,
                        '^' => 3,
                        _ => 0,
                    };
                    agents.push((pos, dir));
                    Cell::EMPTY
                }
                _ => return Err(MapError::UnknownChar { ch, line: r + 1, col: c + 1 }),
            };
            grid.set(pos, cell);
        }
    }
    if agents.len() != 1 {
        return Err(MapError::AgentCount(agents.len()));
    }
    let (agent_pos, agent_dir) = agents[0];
    let success = if has_goal { Success::ReachGoal } else { Success::CarryBall(color::BLUE) };
    Ok(InitialGrid { grid, agent_pos, agent_dir, success })
}
