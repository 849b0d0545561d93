//! Closed- and open-loop episodes with a tree planner or a single sampled
//! plan.
//!
//! Executed moves into walls are blocked: the agent stays put and the
//! attempt counts as a wall violation. An episode ends at the goal or when
//! the step budget is spent.
//!
//! Score: `1 + 0.1 * d / steps` when the goal is reached, where `d` is the
//! shortest start-to-goal distance, and 0 otherwise.

use crate::element::{StateMode, TatConfig, Trajectory};
use crate::error::{Result, TatError};
use crate::rng::{self, Rng};
use crate::tree::AggregationTree;

use super::grid::{step, Cell, Maze, Move, STAY};
use super::surrogate::{artifact_plan, decode, extend, generate_plans, Plan, SurrogateConfig};

/// Weight of the path-efficiency term in the score.
pub const EFFICIENCY_WEIGHT: f64 = 0.1;
/// Default budget as a multiple of the shortest start-to-goal distance: no
/// slack, so every blocked step costs the episode.
pub const DEFAULT_BUDGET_FACTOR: f64 = 1.0;
/// Element layout `[row, col, drow, dcol]`.
pub const ELEMENT_DIM: usize = 4;
pub const ACTION_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Tat { n: usize, config: TatConfig },
    Single,
}

impl Policy {
    pub fn tat(n: usize, horizon: usize, mode: StateMode) -> Self {
        Policy::Tat {
            n,
            config: maze_tat_config(horizon, mode),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::Tat { .. } => "tat",
            Policy::Single => "single",
        }
    }

    pub fn batch_size(&self) -> usize {
        match self {
            Policy::Tat { n, .. } => *n,
            Policy::Single => 1,
        }
    }
}

/// Tree settings for maze elements: λ = 0.98, α = 0.9995, action suffix of 2.
pub fn maze_tat_config(horizon: usize, mode: StateMode) -> TatConfig {
    TatConfig {
        horizon,
        state_mode: mode,
        action_dim: ACTION_DIM,
        ..TatConfig::default()
    }
}

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl std::str::FromStr for $name {
            type Err = TatError;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(TatError::InvalidConfig(format!(
                        concat!("unknown ", stringify!($name), " '{}'"),
                        other
                    ))),
                }
            }
        }
    };
}

named_enum!(LoopMode { Closed => "closed", Open => "open" });
named_enum!(WarmStart { Off => "off", Naive => "naive", TatBranch => "tat_branch" });

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Steps(usize),
    /// `ceil(factor * d)` for the shortest distance `d`.
    Factor(f64),
}

impl Budget {
    pub fn resolve(self, maze: &Maze) -> Result<usize> {
        match self {
            Budget::Steps(0) => Err(TatError::InvalidConfig("budget must be positive".into())),
            Budget::Steps(s) => Ok(s),
            Budget::Factor(f) if f > 0.0 && f.is_finite() => {
                let d = maze.distance(maze.start()).ok_or(TatError::GoalUnreachable)?;
                Ok(((f * d as f64).ceil() as usize).max(1))
            }
            Budget::Factor(f) => Err(TatError::InvalidConfig(format!("budget factor must be positive, got {f}"))),
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::Factor(DEFAULT_BUDGET_FACTOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub surrogate: SurrogateConfig,
    pub policy: Policy,
    pub mode: LoopMode,
    pub warm_start: WarmStart,
    pub budget: Budget,
}

impl EpisodeConfig {
    pub fn new(surrogate: SurrogateConfig, policy: Policy) -> Self {
        Self {
            surrogate,
            policy,
            mode: LoopMode::Closed,
            warm_start: WarmStart::Off,
            budget: Budget::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.surrogate.validate()?;
        if let Policy::Tat { n, config } = &self.policy {
            config.validate()?;
            if *n == 0 {
                return Err(TatError::InvalidConfig("batch size must be positive".into()));
            }
            if config.horizon != self.surrogate.horizon {
                return Err(TatError::InvalidConfig(format!(
                    "tree horizon {} differs from plan horizon {}",
                    config.horizon, self.surrogate.horizon
                )));
            }
            if config.action_dim != ACTION_DIM {
                return Err(TatError::InvalidConfig(format!("maze elements need action_dim {ACTION_DIM}")));
            }
        } else if self.warm_start == WarmStart::TatBranch {
            return Err(TatError::InvalidConfig("warm_start=tat_branch requires the tat policy".into()));
        }
        Ok(())
    }

    fn state_mode(&self) -> StateMode {
        match &self.policy {
            Policy::Tat { config, .. } => config.state_mode,
            Policy::Single => StateMode::Discrete,
        }
    }
}

/// Plans behind the first decision of an episode, kept for rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Candidate paths with an artifact flag (tree branches or raw plans).
    pub paths: Vec<(Vec<Cell>, bool)>,
    /// The path the policy committed to first.
    pub selected: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub reached_goal: bool,
    pub steps_taken: usize,
    pub wall_violations: usize,
    pub score: f64,
    pub budget: usize,
    /// Executed cells, starting at the start cell.
    pub path: Vec<Cell>,
    pub snapshot: Option<Snapshot>,
}

/// Runs episode `index` of the experiment seeded by `seed`.
pub fn run_episode(maze: &Maze, cfg: &EpisodeConfig, seed: u64, index: u64) -> Result<EpisodeResult> {
    Episode::new(maze, cfg, seed, index, false)?.run()
}

/// Like [`run_episode`], also recording the first decision's candidates.
pub fn run_episode_traced(maze: &Maze, cfg: &EpisodeConfig, seed: u64, index: u64) -> Result<EpisodeResult> {
    Episode::new(maze, cfg, seed, index, true)?.run()
}

struct Episode<'a> {
    maze: &'a Maze,
    cfg: &'a EpisodeConfig,
    rng: rand_chacha::ChaCha8Rng,
    mode: StateMode,
    budget: usize,
    pos: Cell,
    path: Vec<Cell>,
    violations: usize,
    capture: bool,
    snapshot: Option<Snapshot>,
}

impl<'a> Episode<'a> {
    fn new(maze: &'a Maze, cfg: &'a EpisodeConfig, seed: u64, index: u64, capture: bool) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            maze,
            cfg,
            rng: rng::stream(seed, index),
            mode: cfg.state_mode(),
            budget: cfg.budget.resolve(maze)?,
            pos: maze.start(),
            path: vec![maze.start()],
            violations: 0,
            capture,
            snapshot: None,
        })
    }

    fn run(mut self) -> Result<EpisodeResult> {
        match (self.cfg.mode, &self.cfg.policy) {
            (LoopMode::Closed, Policy::Tat { n, config }) => self.closed_tat(*n, config)?,
            (LoopMode::Closed, Policy::Single) => self.closed_single()?,
            (LoopMode::Open, policy) => self.open_loop(policy)?,
        }
        let steps = self.path.len() - 1;
        let reached = self.pos == self.maze.goal();
        let shortest = self.maze.distance(self.maze.start()).unwrap_or(0) as f64;
        let score = if reached {
            1.0 + EFFICIENCY_WEIGHT * shortest / steps.max(1) as f64
        } else {
            0.0
        };
        Ok(EpisodeResult {
            reached_goal: reached,
            steps_taken: steps,
            wall_violations: self.violations,
            score,
            budget: self.budget,
            path: self.path,
            snapshot: self.snapshot,
        })
    }

    fn done(&self) -> bool {
        self.pos == self.maze.goal() || self.path.len() > self.budget
    }

    /// Executes `m`; returns false if it was blocked.
    fn execute(&mut self, m: Move) -> bool {
        let next = step(self.pos, m);
        let legal = m.0.abs() + m.1.abs() <= 1 && self.maze.is_open(next);
        if legal {
            self.pos = next;
        } else {
            self.violations += 1;
        }
        self.path.push(self.pos);
        legal
    }

    fn batch(&mut self, seed: Option<&Plan>, n: usize) -> Result<Vec<Plan>> {
        match seed {
            Some(seed) if self.cfg.warm_start != WarmStart::Off => {
                Ok(warm_batch(self.maze, self.pos, seed, &self.cfg.surrogate, n, &mut self.rng))
            }
            _ => generate_plans(self.maze, self.pos, &self.cfg.surrogate, n, &mut self.rng),
        }
    }

    fn trajectories(&mut self, plans: &[Plan]) -> Vec<Trajectory> {
        plans.iter().map(|p| p.to_trajectory(self.mode, &mut self.rng)).collect()
    }

    fn fresh_tree(config: &TatConfig) -> Result<AggregationTree> {
        AggregationTree::with_dimension(config.clone(), ELEMENT_DIM)
    }

    fn closed_tat(&mut self, n: usize, config: &TatConfig) -> Result<()> {
        let mut tree = Self::fresh_tree(config)?;
        let mut seed: Option<Plan> = None;
        while !self.done() {
            let plans = self.batch(seed.as_ref(), n)?;
            for traj in self.trajectories(&plans) {
                tree.integrate(&traj)?;
            }
            if self.capture && self.snapshot.is_none() {
                self.snapshot = Some(tree_snapshot(&tree, self.maze, self.pos, self.mode)?);
            }
            let decision = tree.select_child()?;
            let (target, m) = decode(decision.target_state.values(), self.mode);
            tree.prune(&decision)?;
            if !self.execute(m) || target != self.pos {
                tree.check_invariants().map_err(TatError::Invariant)?;
                tree = Self::fresh_tree(config)?;
                seed = None;
                continue;
            }
            seed = match self.cfg.warm_start {
                WarmStart::Off => None,
                WarmStart::Naive => plans
                    .iter()
                    .find(|p| p.cells[1] == target && p.moves[1] == m)
                    .map(|p| p.advance(self.maze)),
                WarmStart::TatBranch => branch_plan(&tree, self.maze, self.pos, config.horizon, self.mode),
            };
        }
        tree.check_invariants().map_err(TatError::Invariant)
    }

    fn closed_single(&mut self) -> Result<()> {
        let mut seed: Option<Plan> = None;
        while !self.done() {
            let plan = self.batch(seed.as_ref(), 1)?.swap_remove(0);
            if self.capture && self.snapshot.is_none() {
                self.snapshot = Some(Snapshot {
                    paths: vec![(plan.cells.clone(), plan.artifact)],
                    selected: plan.cells.clone(),
                });
            }
            let ok = self.execute(plan.moves[1]);
            seed = (ok && self.cfg.warm_start == WarmStart::Naive).then(|| plan.advance(self.maze));
        }
        Ok(())
    }

    fn open_loop(&mut self, policy: &Policy) -> Result<()> {
        let moves: Vec<Move> = match policy {
            Policy::Tat { n, config } => {
                let plans = self.batch(None, *n)?;
                let mut tree = Self::fresh_tree(config)?;
                for traj in self.trajectories(&plans) {
                    tree.integrate(&traj)?;
                }
                tree.check_invariants().map_err(TatError::Invariant)?;
                if self.capture {
                    self.snapshot = Some(tree_snapshot(&tree, self.maze, self.pos, self.mode)?);
                }
                tree.best_branch(config.horizon)?
                    .iter()
                    .map(|s| decode(s.values(), self.mode).1)
                    .collect()
            }
            Policy::Single => {
                let plan = self.batch(None, 1)?.swap_remove(0);
                if self.capture {
                    self.snapshot = Some(Snapshot {
                        paths: vec![(plan.cells.clone(), plan.artifact)],
                        selected: plan.cells.clone(),
                    });
                }
                plan.moves[1..].to_vec()
            }
        };
        for m in moves {
            if self.done() {
                break;
            }
            self.execute(m);
        }
        Ok(())
    }
}

/// Warm-started batch: each member repeats `seed` with probability `1 − ε`
/// and is a fresh artifact otherwise.
pub fn warm_batch<R: Rng + ?Sized>(maze: &Maze, pos: Cell, seed: &Plan, cfg: &SurrogateConfig, n: usize, rng: &mut R) -> Vec<Plan> {
    let eps = cfg.effective_eps();
    (0..n)
        .map(|_| {
            if rng::bernoulli(rng, eps) {
                artifact_plan(maze, pos, cfg.horizon)
            } else {
                seed.clone()
            }
        })
        .collect()
}

/// The heaviest branch below the root as a plan starting at `pos`.
fn branch_plan(tree: &AggregationTree, maze: &Maze, pos: Cell, horizon: usize, mode: StateMode) -> Option<Plan> {
    let branch = tree.best_branch(horizon).ok()?;
    let mut cells = vec![pos];
    let mut moves = vec![STAY];
    for s in &branch {
        let (c, m) = decode(s.values(), mode);
        cells.push(c);
        moves.push(m);
    }
    extend(maze, &mut cells, &mut moves, horizon);
    let artifact = maze.count_crossings(&cells) > 0;
    Some(Plan { cells, moves, artifact })
}

/// Root-to-leaf paths of `tree` plus its heaviest branch, as cells.
pub fn tree_snapshot(tree: &AggregationTree, maze: &Maze, pos: Cell, mode: StateMode) -> Result<Snapshot> {
    let mut paths = Vec::new();
    for leaf in tree.nodes().filter(|n| n.is_leaf() && n.depth() > 0) {
        let mut cells = Vec::with_capacity(leaf.depth() + 1);
        let mut node = Some(leaf);
        while let Some(n) = node {
            if n.depth() == 0 {
                break;
            }
            cells.push(decode(n.state().values(), mode).0);
            node = tree.parent(n);
        }
        cells.push(pos);
        cells.reverse();
        let artifact = maze.count_crossings(&cells) > 0;
        paths.push((cells, artifact));
    }
    let mut selected = vec![pos];
    selected.extend(
        tree.best_branch(tree.config().horizon)?
            .iter()
            .map(|s| decode(s.values(), mode).0),
    );
    Ok(Snapshot { paths, selected })
}
