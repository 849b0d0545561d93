//! Stochastic stand-in for a trajectory sampler.
//!
//! Each plan is independently an artifact with probability ε: a 4-connected
//! staircase from the current cell straight toward the goal that ignores
//! walls. Otherwise it follows a shortest wall-respecting path; with
//! probability `path_noise` a step picks uniformly among all moves that lower
//! the goal distance, which spreads plans over equally short routes.
//! Plans are padded with stay moves once they reach the goal.

use crate::element::{StateMode, Trajectory, TrajectoryElement};
use crate::error::{Result, TatError};
use crate::rng::{self, Rng};

use super::grid::{step, Cell, Maze, Move, STAY};

/// Denoising steps to effective artifact probability.
///
/// Linear interpolation between the listed points, constant beyond the ends.
/// Must be nonincreasing in the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityCurve {
    points: Vec<(u32, f64)>,
}

impl QualityCurve {
    pub fn new(mut points: Vec<(u32, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(TatError::InvalidConfig("quality curve needs at least one point".into()));
        }
        points.sort_by_key(|p| p.0);
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(TatError::InvalidConfig(format!("quality curve repeats step {}", w[0].0)));
            }
            if w[1].1 > w[0].1 {
                return Err(TatError::InvalidConfig(format!(
                    "quality curve must be nonincreasing: {}→{} then {}→{}",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        if let Some(&(s, e)) = points.iter().find(|&&(s, e)| s == 0 || !(0.0..=1.0).contains(&e)) {
            return Err(TatError::InvalidConfig(format!("bad quality curve point {s}:{e}")));
        }
        Ok(Self { points })
    }

    /// Parses `steps:eps` pairs separated by `;`, e.g. `20:0.05;8:0.15`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |p: &str| TatError::InvalidConfig(format!("bad quality curve point '{p}'"));
        let points = text
            .split(';')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                let (s, e) = p.split_once(':').ok_or_else(|| bad(p))?;
                Ok((s.trim().parse().map_err(|_| bad(p))?, e.trim().parse().map_err(|_| bad(p))?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    pub fn eval(&self, steps: u32) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if steps <= first.0 {
            return first.1;
        }
        if steps >= last.0 {
            return last.1;
        }
        let k = self.points.partition_point(|p| p.0 <= steps);
        let (a, b) = (self.points[k - 1], self.points[k]);
        if a.0 == steps {
            return a.1;
        }
        let t = (steps - a.0) as f64 / (b.0 - a.0) as f64;
        a.1 + t * (b.1 - a.1)
    }
}

impl std::fmt::Display for QualityCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .points
            .iter()
            .rev()
            .map(|&(s, e)| format!("{s}:{}", crate::fmt::sig12(e)))
            .collect();
        f.write_str(&parts.join(";"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateConfig {
    /// Used when no quality curve is set. `[0, 1]`.
    pub eps_artifact: f64,
    pub path_noise: f64,
    pub horizon: usize,
    pub denoise_steps: u32,
    pub quality_curve: Option<QualityCurve>,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            eps_artifact: 0.1,
            path_noise: 0.25,
            horizon: 32,
            denoise_steps: 20,
            quality_curve: None,
        }
    }
}

impl SurrogateConfig {
    pub fn with_eps(eps: f64) -> Self {
        Self {
            eps_artifact: eps,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps_artifact) {
            return Err(TatError::InvalidConfig(format!("eps must lie in [0, 1], got {}", self.eps_artifact)));
        }
        if !(0.0..=1.0).contains(&self.path_noise) {
            return Err(TatError::InvalidConfig(format!("path_noise must lie in [0, 1], got {}", self.path_noise)));
        }
        if self.horizon == 0 {
            return Err(TatError::InvalidConfig("horizon must be positive".into()));
        }
        if self.denoise_steps == 0 {
            return Err(TatError::InvalidConfig("denoise_steps must be positive".into()));
        }
        Ok(())
    }

    /// Artifact probability after applying the quality curve, if any.
    pub fn effective_eps(&self) -> f64 {
        match &self.quality_curve {
            Some(q) => q.eval(self.denoise_steps),
            None => self.eps_artifact,
        }
    }
}

/// A plan on the grid: `cells[t]` is reached by `moves[t]` from `cells[t-1]`;
/// `moves[0]` is [`STAY`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub cells: Vec<Cell>,
    pub moves: Vec<Move>,
    pub artifact: bool,
}

/// Offset of the continuous coordinates from the integer cell index.
const CELL_CENTRE: f64 = 0.5;
/// Half-width of the uniform jitter in continuous coordinates.
pub const JITTER: f64 = 0.02;

impl Plan {
    pub fn horizon(&self) -> usize {
        self.cells.len() - 1
    }

    /// Trajectory of `[row, col, drow, dcol]` elements. Continuous mode uses
    /// jittered cell centres.
    pub fn to_trajectory<R: Rng + ?Sized>(&self, mode: StateMode, rng: &mut R) -> Trajectory {
        Trajectory::new(
            self.cells
                .iter()
                .zip(&self.moves)
                .map(|(&c, &m)| TrajectoryElement::new(encode(c, m, mode, rng)))
                .collect(),
        )
    }

    /// The plan seen one step later, extended back to the same horizon with
    /// shortest-path steps (or stays when no path exists).
    pub fn advance(&self, maze: &Maze) -> Plan {
        let mut cells = self.cells[1..].to_vec();
        let mut moves = self.moves[1..].to_vec();
        moves[0] = STAY;
        extend(maze, &mut cells, &mut moves, self.horizon());
        Plan {
            cells,
            moves,
            artifact: self.artifact,
        }
    }
}

fn encode<R: Rng + ?Sized>(c: Cell, m: Move, mode: StateMode, rng: &mut R) -> Vec<f64> {
    match mode {
        StateMode::Discrete => vec![c.0 as f64, c.1 as f64, m.0 as f64, m.1 as f64],
        StateMode::Continuous => {
            let jr = (2.0 * rng::uniform(rng) - 1.0) * JITTER;
            let jc = (2.0 * rng::uniform(rng) - 1.0) * JITTER;
            vec![c.0 as f64 + CELL_CENTRE + jr, c.1 as f64 + CELL_CENTRE + jc, m.0 as f64, m.1 as f64]
        }
    }
}

/// Cell and move encoded in a trajectory element.
pub fn decode(values: &[f64], mode: StateMode) -> (Cell, Move) {
    let off = match mode {
        StateMode::Discrete => 0.0,
        StateMode::Continuous => CELL_CENTRE,
    };
    (
        ((values[0] - off).round() as i64, (values[1] - off).round() as i64),
        (values[2].round() as i64, values[3].round() as i64),
    )
}

/// Pads `cells` to `horizon + 1` entries with shortest-path steps.
pub(crate) fn extend(maze: &Maze, cells: &mut Vec<Cell>, moves: &mut Vec<Move>, horizon: usize) {
    while cells.len() < horizon + 1 {
        let last = *cells.last().expect("plans are never empty");
        let m = maze.shortest_step(last).unwrap_or(STAY);
        cells.push(step(last, m));
        moves.push(m);
    }
}

/// Deterministic wall-ignoring staircase from `pos` to the goal.
pub fn artifact_plan(maze: &Maze, pos: Cell, horizon: usize) -> Plan {
    let goal = maze.goal();
    let (dr, dc) = (goal.0 - pos.0, goal.1 - pos.1);
    let (sr, sc) = (dr.signum(), dc.signum());
    let (nr, nc) = (dr.abs(), dc.abs());
    let (mut v, mut h) = (0i64, 0i64);
    let mut cells = vec![pos];
    let mut moves = vec![STAY];
    let mut cell = pos;
    for _ in 0..horizon {
        let m = if v == nr && h == nc {
            STAY
        } else if h == nc || (v < nr && (2 * v + 1) * nc <= (2 * h + 1) * nr) {
            // vertical step keeps closer to the straight segment
            v += 1;
            (sr, 0)
        } else {
            h += 1;
            (0, sc)
        };
        cell = step(cell, m);
        cells.push(cell);
        moves.push(m);
    }
    Plan {
        cells,
        moves,
        artifact: true,
    }
}

/// Shortest-path plan. With probability `path_noise` a step is drawn
/// uniformly among all distance-reducing moves instead of the first one in
/// [`MOVES`] order, so plans differ but never get longer.
pub fn feasible_plan<R: Rng + ?Sized>(maze: &Maze, pos: Cell, horizon: usize, path_noise: f64, rng: &mut R) -> Plan {
    let mut cells = vec![pos];
    let mut moves = vec![STAY];
    let mut cell = pos;
    for _ in 0..horizon {
        let m = if cell == maze.goal() {
            STAY
        } else if path_noise > 0.0 && rng::bernoulli(rng, path_noise) {
            let options = maze.shortest_moves(cell);
            if options.is_empty() {
                STAY
            } else {
                options[rng::index(rng, options.len())]
            }
        } else {
            maze.shortest_step(cell).unwrap_or(STAY)
        };
        cell = step(cell, m);
        cells.push(cell);
        moves.push(m);
    }
    Plan {
        cells,
        moves,
        artifact: false,
    }
}

/// `n` independent plans from `pos`.
pub fn generate_plans<R: Rng + ?Sized>(maze: &Maze, pos: Cell, cfg: &SurrogateConfig, n: usize, rng: &mut R) -> Result<Vec<Plan>> {
    cfg.validate()?;
    if n == 0 {
        return Err(TatError::InvalidConfig("batch size must be positive".into()));
    }
    if !maze.is_open(pos) {
        return Err(TatError::OutOfBounds { row: pos.0, col: pos.1 });
    }
    let eps = cfg.effective_eps();
    Ok((0..n)
        .map(|_| {
            if rng::bernoulli(rng, eps) {
                artifact_plan(maze, pos, cfg.horizon)
            } else {
                feasible_plan(maze, pos, cfg.horizon, cfg.path_noise, rng)
            }
        })
        .collect())
}

/// Wall crossings along a plan.
pub fn plan_crossings(maze: &Maze, plan: &Plan) -> usize {
    maze.count_crossings(&plan.cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::grid::preset;

    fn table4() -> QualityCurve {
        QualityCurve::parse("20:0.05;8:0.15;6:0.25;4:0.40").unwrap()
    }

    #[test]
    fn curve_eval_and_validation() {
        let q = table4();
        assert_eq!(q.eval(20), 0.05);
        assert_eq!(q.eval(6), 0.25);
        assert_eq!(q.eval(4), 0.40);
        assert_eq!(q.eval(1), 0.40);
        assert_eq!(q.eval(100), 0.05);
        assert!((q.eval(7) - 0.20).abs() < 1e-15);
        assert_eq!(q.to_string(), "20:0.05;8:0.15;6:0.25;4:0.4");
        assert!(QualityCurve::parse("4:0.1;6:0.2").is_err());
        assert!(QualityCurve::parse("4:0.1;4:0.1").is_err());
        assert!(QualityCurve::parse("4-0.1").is_err());
        assert!(QualityCurve::parse("").is_err());
        for s in 1..40 {
            assert!(q.eval(s) >= q.eval(s + 1));
        }
    }

    #[test]
    fn staircase_reaches_goal() {
        let m = preset("large").unwrap();
        let p = artifact_plan(&m, m.start(), 32);
        let d = (m.goal().0 - m.start().0).abs() + (m.goal().1 - m.start().1).abs();
        assert_eq!(p.cells[d as usize], m.goal());
        assert!(p.cells[d as usize..].iter().all(|&c| c == m.goal()));
        for w in p.cells.windows(2) {
            assert!((w[1].0 - w[0].0).abs() + (w[1].1 - w[0].1).abs() <= 1);
        }
        assert!(plan_crossings(&m, &p) > 0);
    }

    #[test]
    fn eps_zero_plans_respect_walls() {
        let m = preset("medium").unwrap();
        let cfg = SurrogateConfig {
            eps_artifact: 0.0,
            path_noise: 0.3,
            ..SurrogateConfig::default()
        };
        for b in 0..200 {
            let plans = generate_plans(&m, m.start(), &cfg, 8, &mut rng::stream(2, b)).unwrap();
            assert!(plans.iter().all(|p| plan_crossings(&m, p) == 0 && !p.artifact));
        }
    }

    #[test]
    fn eps_one_plans_all_cross() {
        let m = preset("umaze").unwrap();
        let plans = generate_plans(&m, m.start(), &SurrogateConfig::with_eps(1.0), 16, &mut rng::stream(0, 0)).unwrap();
        assert!(plans.iter().all(|p| plan_crossings(&m, p) >= 1));
    }

    #[test]
    fn noiseless_plan_is_shortest() {
        let m = preset("large").unwrap();
        let d = m.distance(m.start()).unwrap() as usize;
        let p = feasible_plan(&m, m.start(), d + 3, 0.0, &mut rng::stream(0, 0));
        assert_eq!(p.cells[d], m.goal());
        assert_ne!(p.cells[d - 1], m.goal());
    }

    #[test]
    fn noisy_plans_stay_shortest_but_differ() {
        let m = preset("large").unwrap();
        let d = m.distance(m.start()).unwrap() as usize;
        let mut distinct = std::collections::HashSet::new();
        for i in 0..200 {
            let p = feasible_plan(&m, m.start(), d, 1.0, &mut rng::stream(5, i));
            assert_eq!(p.cells[d], m.goal());
            assert_eq!(plan_crossings(&m, &p), 0);
            distinct.insert(p.cells);
        }
        assert!(distinct.len() > 1);
    }

    #[test]
    fn advance_keeps_horizon() {
        let m = preset("umaze").unwrap();
        let p = feasible_plan(&m, m.start(), 3, 0.0, &mut rng::stream(0, 0));
        let q = p.advance(&m);
        assert_eq!(q.horizon(), 3);
        assert_eq!(q.cells[0], p.cells[1]);
        assert_eq!(q.moves[0], STAY);
        assert_eq!(q.cells[3], (1, 3));
    }

    #[test]
    fn encode_decode() {
        let mut r = rng::stream(4, 4);
        for mode in [StateMode::Discrete, StateMode::Continuous] {
            let v = encode((3, 7), (0, -1), mode, &mut r);
            assert_eq!(decode(&v, mode), ((3, 7), (0, -1)));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = preset("umaze").unwrap();
        let cfg = SurrogateConfig::default();
        assert!(generate_plans(&m, m.start(), &cfg, 0, &mut rng::stream(0, 0)).is_err());
        assert!(generate_plans(&m, (0, 0), &cfg, 1, &mut rng::stream(0, 0)).is_err());
        let bad = SurrogateConfig { eps_artifact: 1.5, ..cfg };
        assert!(bad.validate().is_err());
    }
}
