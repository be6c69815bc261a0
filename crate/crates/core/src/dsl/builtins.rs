//! Feature-engineering helpers callable from progress programs.
//!
//! Vector helpers operate on 3-vectors and `(x, y, z, w)` quaternions.
//! Grid helpers operate on `(type, color, state)` encoded grids.

use std::collections::VecDeque;

use crate::grid::{Grid, GridPos};

/// Euclidean distance between two points.
pub fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

/// Distance of `x` from the environment goal position.
pub fn goal_dist(goal: [f64; 3], x: [f64; 3]) -> f64 {
    dist(goal, x)
}

pub fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn quat_normalize(q: [f64; 4]) -> [f64; 4] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if n == 0.0 || !n.is_finite() {
        return [0.0, 0.0, 0.0, 1.0];
    }
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

pub fn quat_conjugate(q: [f64; 4]) -> [f64; 4] {
    [-q[0], -q[1], -q[2], q[3]]
}

/// Hamilton product with `(x, y, z, w)` layout.
pub fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [x1, y1, z1, w1] = a;
    let [x2, y2, z2, w2] = b;
    [
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
    ]
}

/// Rotation angle in `[0, pi]` between two orientations:
/// `2 asin(min(|vec(q1 * conj(q2))|, 1))`.
pub fn rot_dist(q1: [f64; 4], q2: [f64; 4]) -> f64 {
    let diff = quat_mul(quat_normalize(q1), quat_conjugate(quat_normalize(q2)));
    let v = norm([diff[0], diff[1], diff[2]]).min(1.0);
    2.0 * v.asin()
}

const DIRECTIONS: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)]; // down, right, up, left

/// Breadth-first shortest path from `start` to `end`, both endpoints
/// included. Returns an empty path when `end` is unreachable.
///
/// Neighbours are expanded down, right, up, left, so among equal-length
/// paths the one discovered first in that order is returned.
pub fn bfs(grid: &Grid, start: GridPos, end: GridPos) -> Vec<GridPos> {
    if !grid.contains(start) {
        return Vec::new();
    }
    let cols = grid.cols();
    let idx = |p: GridPos| p.row * cols + p.col;
    let mut parent: Vec<Option<usize>> = vec![None; grid.rows() * cols];
    let mut seen = vec![false; grid.rows() * cols];
    let mut queue = VecDeque::from([start]);
    seen[idx(start)] = true;

    while let Some(current) = queue.pop_front() {
        if current == end {
            let mut path = vec![current];
            let mut at = idx(current);
            while let Some(prev) = parent[at] {
                path.push(GridPos::new(prev / cols, prev % cols));
                at = prev;
            }
            path.reverse();
            return path;
        }
        for (dr, dc) in DIRECTIONS {
            let Some(next) = current.offset(dr, dc) else { continue };
            if !grid.contains(next) || seen[idx(next)] || !grid.get(next).is_traversable() {
                continue;
            }
            seen[idx(next)] = true;
            parent[idx(next)] = Some(idx(current));
            queue.push_back(next);
        }
    }
    Vec::new()
}

/// Number of moves along a path; infinite for an empty (unreachable) path.
pub fn path_len(path: &[GridPos]) -> f64 {
    if path.is_empty() {
        f64::INFINITY
    } else {
        (path.len() - 1) as f64
    }
}

/// First cell in row-major order holding `object_type` (and `color`, when given).
pub fn get_position(grid: &Grid, object_type: u8, color: Option<u8>) -> Option<GridPos> {
    grid.cells()
        .find(|(_, c)| c.kind == object_type && color.is_none_or(|col| c.color == col))
        .map(|(p, _)| p)
}

/// First cell on the shortest path from `agent` to `goal` holding
/// `object_type`, optionally filtered by color and door state.
pub fn get_position_on_path(
    grid: &Grid,
    agent: GridPos,
    goal: GridPos,
    object_type: u8,
    color: Option<u8>,
    state: Option<u8>,
) -> Option<GridPos> {
    bfs(grid, agent, goal).into_iter().find(|&p| {
        let c = grid.get(p);
        c.kind == object_type && color.is_none_or(|col| c.color == col) && state.is_none_or(|s| c.state == s)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{color, door, object, Cell};
    use std::f64::consts::PI;

    #[test]
    fn euclidean_distances() {
        assert_eq!(dist([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]), 1.0);
        assert_eq!(dist([1.0, 2.0, 2.0], [0.0, 0.0, 0.0]), 3.0);
        assert_eq!(dist([0.3, -0.2, 9.0], [0.3, -0.2, 9.0]), 0.0);
        assert_eq!(goal_dist([3.0, 4.0, 0.0], [0.0, 0.0, 0.0]), 5.0);
    }

    #[test]
    fn rotation_distances() {
        let id = [0.0, 0.0, 0.0, 1.0];
        assert_eq!(rot_dist(id, id), 0.0);
        let h = (PI / 4.0).sin();
        // 180 degrees about z
        assert!((rot_dist(id, [0.0, 0.0, 1.0, 0.0]) - PI).abs() < 1e-12);
        // 90 degrees about x
        assert!((rot_dist(id, [h, 0.0, 0.0, (PI / 4.0).cos()]) - PI / 2.0).abs() < 1e-12);
        // unnormalized input is normalized first
        assert!((rot_dist([0.0, 0.0, 0.0, 5.0], [0.0, 0.0, 3.0, 0.0]) - PI).abs() < 1e-12);
    }

    #[test]
    fn bfs_open_grid() {
        let grid = Grid::new(3, 3);
        let path = bfs(&grid, GridPos::new(0, 0), GridPos::new(2, 2));
        assert_eq!(path.len(), 5);
        // down-first expansion order
        assert_eq!(path[1], GridPos::new(1, 0));
        assert_eq!(bfs(&grid, GridPos::new(1, 1), GridPos::new(1, 1)), vec![GridPos::new(1, 1)]);
    }

    #[test]
    fn bfs_blocked_by_wall() {
        let mut grid = Grid::new(3, 3);
        for r in 0..3 {
            grid.set(GridPos::new(r, 1), Cell::WALL);
        }
        assert!(bfs(&grid, GridPos::new(0, 0), GridPos::new(0, 2)).is_empty());
        assert_eq!(path_len(&[]), f64::INFINITY);
    }

    #[test]
    fn positions() {
        let mut grid = Grid::new(4, 5);
        grid.set(GridPos::new(2, 3), Cell::key(color::YELLOW));
        assert_eq!(get_position(&grid, object::KEY, None), Some(GridPos::new(2, 3)));
        assert_eq!(get_position(&grid, object::BALL, None), None);
        assert_eq!(get_position(&grid, object::KEY, Some(color::RED)), None);

        let mut two = Grid::new(3, 3);
        two.set(GridPos::new(0, 1), Cell::ball(color::BLUE));
        two.set(GridPos::new(1, 0), Cell::ball(color::BLUE));
        assert_eq!(get_position(&two, object::BALL, None), Some(GridPos::new(0, 1)));
    }

    #[test]
    fn door_on_corridor_path() {
        // 5x5: wall column at 2 with a single door at row 2
        let mut grid = Grid::new(5, 5);
        for r in 0..5 {
            grid.set(GridPos::new(r, 2), Cell::WALL);
        }
        grid.set(GridPos::new(2, 2), Cell::door(color::YELLOW, door::CLOSED));
        let agent = GridPos::new(0, 0);
        let goal = GridPos::new(4, 4);
        assert_eq!(get_position_on_path(&grid, agent, goal, object::DOOR, None, None), Some(GridPos::new(2, 2)));
        assert_eq!(
            get_position_on_path(&grid, agent, goal, object::DOOR, Some(color::YELLOW), Some(door::CLOSED)),
            Some(GridPos::new(2, 2))
        );
        assert_eq!(get_position_on_path(&grid, agent, goal, object::DOOR, None, Some(door::OPEN)), None);
        assert_eq!(get_position_on_path(&grid, agent, goal, object::KEY, None, None), None);

        grid.set(GridPos::new(2, 2), Cell::WALL);
        assert_eq!(get_position_on_path(&grid, agent, goal, object::DOOR, None, None), None);
    }
}
