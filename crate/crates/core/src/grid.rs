//! Gridworld cell storage using the MiniGrid `(type, color, state)` encoding.

use std::fmt;

/// Object type codes.
pub mod object {
    pub const UNSEEN: u8 = 0;
    pub const EMPTY: u8 = 1;
    pub const WALL: u8 = 2;
    pub const FLOOR: u8 = 3;
    pub const DOOR: u8 = 4;
    pub const KEY: u8 = 5;
    pub const BALL: u8 = 6;
    pub const BOX: u8 = 7;
    pub const GOAL: u8 = 8;
    pub const LAVA: u8 = 9;
    pub const AGENT: u8 = 10;
    pub const MAX: u8 = AGENT;
}

/// Color codes.
pub mod color {
    pub const RED: u8 = 0;
    pub const GREEN: u8 = 1;
    pub const BLUE: u8 = 2;
    pub const PURPLE: u8 = 3;
    pub const YELLOW: u8 = 4;
    pub const GREY: u8 = 5;
    pub const MAX: u8 = GREY;
}

/// Door state codes.
pub mod door {
    pub const OPEN: u8 = 0;
    pub const CLOSED: u8 = 1;
    pub const LOCKED: u8 = 2;
}

/// One encoded cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub kind: u8,
    pub color: u8,
    pub state: u8,
}

impl Cell {
    pub const EMPTY: Cell = Cell { kind: object::EMPTY, color: 0, state: 0 };
    pub const WALL: Cell = Cell { kind: object::WALL, color: color::GREY, state: 0 };

    pub fn new(kind: u8, color: u8, state: u8) -> Self {
        Self { kind, color, state }
    }

    pub fn door(color: u8, state: u8) -> Self {
        Self::new(object::DOOR, color, state)
    }

    pub fn key(color: u8) -> Self {
        Self::new(object::KEY, color, 0)
    }

    pub fn ball(color: u8) -> Self {
        Self::new(object::BALL, color, 0)
    }

    pub fn goal() -> Self {
        Self::new(object::GOAL, color::GREEN, 0)
    }

    /// Whether the agent may stand on this cell.
    pub fn can_overlap(&self) -> bool {
        match self.kind {
            object::EMPTY | object::FLOOR | object::GOAL => true,
            object::DOOR => self.state == door::OPEN,
            _ => false,
        }
    }

    pub fn can_pickup(&self) -> bool {
        matches!(self.kind, object::KEY | object::BALL | object::BOX)
    }

    /// Traversability used by path search. Doors count as passable in every
    /// state so that distances through a still-closed door remain finite.
    pub fn is_traversable(&self) -> bool {
        !matches!(self.kind, object::UNSEEN | object::WALL | object::LAVA)
    }

    /// Whether the triple lies inside the legal encoding ranges.
    pub fn is_legal(&self) -> bool {
        self.kind <= object::MAX && self.color <= color::MAX && self.state <= door::LOCKED
    }
}

/// Row/column coordinate; `row` indexes the first grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridPos {
    pub row: usize,
    pub col: usize,
}

impl GridPos {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn offset(self, dr: isize, dc: isize) -> Option<GridPos> {
        let row = self.row.checked_add_signed(dr)?;
        let col = self.col.checked_add_signed(dc)?;
        Some(GridPos { row, col })
    }
}

impl fmt::Display for GridPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Dense `rows x cols x 3` grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid {
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols, cells: vec![Cell::EMPTY; rows * cols] }
    }

    /// Empty room with a wall border.
    pub fn walled(rows: usize, cols: usize) -> Self {
        let mut grid = Self::new(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if r == 0 || c == 0 || r + 1 == rows || c + 1 == cols {
                    grid.set(GridPos::new(r, c), Cell::WALL);
                }
            }
        }
        grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn contains(&self, pos: GridPos) -> bool {
        pos.row < self.rows && pos.col < self.cols
    }

    pub fn get(&self, pos: GridPos) -> Cell {
        self.cells[pos.row * self.cols + pos.col]
    }

    pub fn try_get(&self, pos: GridPos) -> Option<Cell> {
        self.contains(pos).then(|| self.get(pos))
    }

    pub fn set(&mut self, pos: GridPos, cell: Cell) {
        self.cells[pos.row * self.cols + pos.col] = cell;
    }

    pub fn cells(&self) -> impl Iterator<Item = (GridPos, Cell)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, c)| (GridPos::new(i / self.cols, i % self.cols), *c))
    }

    /// Flat `(type, color, state)` triples in row-major order.
    pub fn encode(&self) -> Vec<u8> {
        self.cells.iter().flat_map(|c| [c.kind, c.color, c.state]).collect()
    }
}
