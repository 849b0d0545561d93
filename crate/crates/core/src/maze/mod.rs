//! Grid mazes, a stochastic plan sampler with wall-ignoring artifacts, and
//! episode harnesses comparing the tree planner with single-plan execution.

pub mod episode;
pub mod evaluate;
pub mod grid;
pub mod surrogate;
pub mod svg;

pub use episode::{
    maze_tat_config, run_episode, run_episode_traced, Budget, EpisodeConfig, EpisodeResult, LoopMode, Policy, Snapshot,
    WarmStart,
};
pub use evaluate::{evaluate, resolve_maze, rows_to_csv, Condition, ExperimentSpec, ResultRow, Stat};
pub use grid::{load_maze, preset, Cell, Maze, Move, PRESET_NAMES};
pub use surrogate::{generate_plans, plan_crossings, Plan, QualityCurve, SurrogateConfig};
pub use svg::{render_svg, LabeledPath, PathStyle};
