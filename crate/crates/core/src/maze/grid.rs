//! Grid mazes and their text format.
//!
//! | glyph | meaning |
//! |-------|---------|
//! | `#`   | wall    |
//! | `.`   | open    |
//! | `S`   | start (open, exactly one) |
//! | `G`   | goal (open, exactly one)  |
//!
//! Rows are lines; every row must have the same width. Blank trailing lines
//! and `\r` line endings are ignored. Cells outside the grid count as walls.

use std::collections::VecDeque;

use crate::error::{Result, TatError};

/// `(row, col)`; signed so that off-grid cells can be represented.
pub type Cell = (i64, i64);
/// `(drow, dcol)` with each component in `{-1, 0, 1}` and at most one nonzero.
pub type Move = (i64, i64);

pub const STAY: Move = (0, 0);
/// Fixed move order, also the tie-break order of shortest-path steps.
pub const MOVES: [Move; 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Maze {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    start: Cell,
    goal: Cell,
    // BFS distance to the goal, `u32::MAX` for walls and unreachable cells
    dist: Vec<u32>,
}

const PRESET_UMAZE: &str = include_str!("../../data/mazes/umaze.txt");
const PRESET_MEDIUM: &str = include_str!("../../data/mazes/medium.txt");
const PRESET_LARGE: &str = include_str!("../../data/mazes/large.txt");

pub const PRESET_NAMES: [&str; 3] = ["umaze", "medium", "large"];

/// Built-in layouts shaped after the D4RL Maze2D maps. They are
/// approximations drawn on a unit grid, not the original assets.
pub fn preset(name: &str) -> Result<Maze> {
    let text = match name {
        "umaze" => PRESET_UMAZE,
        "medium" => PRESET_MEDIUM,
        "large" => PRESET_LARGE,
        other => return Err(TatError::UnknownPreset(other.to_string())),
    };
    load_maze(text)
}

pub fn load_maze(text: &str) -> Result<Maze> {
    let mut rows: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    while rows.last().is_some_and(|l| l.is_empty()) {
        rows.pop();
    }
    if rows.is_empty() {
        return Err(TatError::MazeFormat("empty map".into()));
    }
    let width = rows[0].chars().count();
    if width == 0 {
        return Err(TatError::MazeFormat("empty first row".into()));
    }
    let height = rows.len();
    let mut walls = Vec::with_capacity(width * height);
    let (mut start, mut goal) = (None, None);
    for (r, line) in rows.iter().enumerate() {
        if line.chars().count() != width {
            return Err(TatError::MazeFormat(format!(
                "row {r} has width {} but row 0 has width {width}",
                line.chars().count()
            )));
        }
        for (c, ch) in line.chars().enumerate() {
            let cell = (r as i64, c as i64);
            match ch {
                '#' => walls.push(true),
                '.' => walls.push(false),
                'S' | 'G' => {
                    let slot = if ch == 'S' { &mut start } else { &mut goal };
                    if slot.replace(cell).is_some() {
                        return Err(TatError::MazeFormat(format!("more than one '{ch}'")));
                    }
                    walls.push(false);
                }
                other => {
                    return Err(TatError::MazeFormat(format!("unknown glyph '{other}' at row {r}, column {c}")))
                }
            }
        }
    }
    let start = start.ok_or(TatError::MissingStart)?;
    let goal = goal.ok_or(TatError::MissingGoal)?;
    let mut maze = Maze {
        width,
        height,
        walls,
        start,
        goal,
        dist: Vec::new(),
    };
    maze.dist = maze.distance_field();
    if maze.distance(start).is_none() {
        return Err(TatError::GoalUnreachable);
    }
    Ok(maze)
}

impl Maze {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.0 >= 0 && cell.1 >= 0 && (cell.0 as usize) < self.height && (cell.1 as usize) < self.width
    }

    fn index(&self, cell: Cell) -> Option<usize> {
        self.in_bounds(cell).then(|| cell.0 as usize * self.width + cell.1 as usize)
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        self.index(cell).is_none_or(|i| self.walls[i])
    }

    pub fn is_open(&self, cell: Cell) -> bool {
        !self.is_wall(cell)
    }

    pub fn wall_count(&self) -> usize {
        self.walls.iter().filter(|&&w| w).count()
    }

    pub fn open_count(&self) -> usize {
        self.walls.len() - self.wall_count()
    }

    /// Walls in row-major order.
    pub fn walls(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.walls.len())
            .filter(|&i| self.walls[i])
            .map(|i| ((i / self.width) as i64, (i % self.width) as i64))
    }

    /// Wall-respecting shortest distance to the goal.
    pub fn distance(&self, cell: Cell) -> Option<u32> {
        self.index(cell).map(|i| self.dist[i]).filter(|&d| d != u32::MAX)
    }

    /// First move of the shortest path from `cell`, ties broken by [`MOVES`]
    /// order. `None` at the goal or from a cell that cannot reach it.
    pub fn shortest_step(&self, cell: Cell) -> Option<Move> {
        let d = self.distance(cell)?;
        if d == 0 {
            return None;
        }
        MOVES
            .into_iter()
            .find(|&m| self.distance(step(cell, m)) == Some(d - 1))
    }

    /// Every move that lowers the distance to the goal, in [`MOVES`] order.
    pub fn shortest_moves(&self, cell: Cell) -> Vec<Move> {
        match self.distance(cell) {
            Some(d) if d > 0 => MOVES
                .into_iter()
                .filter(|&m| self.distance(step(cell, m)) == Some(d - 1))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Open 4-neighbours of `cell`, in [`MOVES`] order.
    pub fn open_moves(&self, cell: Cell) -> impl Iterator<Item = Move> + '_ {
        MOVES.into_iter().filter(move |&m| self.is_open(step(cell, m)))
    }

    fn distance_field(&self) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.walls.len()];
        let mut queue = VecDeque::new();
        if let Some(g) = self.index(self.goal) {
            dist[g] = 0;
            queue.push_back(self.goal);
        }
        while let Some(cell) = queue.pop_front() {
            let d = dist[self.index(cell).expect("queued cells are in bounds")];
            for m in MOVES {
                let next = step(cell, m);
                if let Some(i) = self.index(next) {
                    if !self.walls[i] && dist[i] == u32::MAX {
                        dist[i] = d + 1;
                        queue.push_back(next);
                    }
                }
            }
        }
        dist
    }

    /// Number of transitions in `cells` that end in a wall or jump further
    /// than one 4-neighbour step.
    pub fn count_crossings(&self, cells: &[Cell]) -> usize {
        cells
            .windows(2)
            .filter(|w| {
                let (dr, dc) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                dr.abs() + dc.abs() > 1 || self.is_wall(w[1])
            })
            .count()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for r in 0..self.height as i64 {
            for c in 0..self.width as i64 {
                let cell = (r, c);
                out.push(if cell == self.start {
                    'S'
                } else if cell == self.goal {
                    'G'
                } else if self.is_wall(cell) {
                    '#'
                } else {
                    '.'
                });
            }
            out.push('\n');
        }
        out
    }
}

pub fn step(cell: Cell, m: Move) -> Cell {
    (cell.0 + m.0, cell.1 + m.1)
}
