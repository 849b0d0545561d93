//! Trajectory aggregation trees for diffusion-style planners.
//!
//! A batch of sampled trajectories is folded into a weighted prefix tree whose
//! nodes merge states that are close in cosine similarity. Acting follows the
//! heaviest root child, which makes the chosen step a weighted majority vote
//! over the batch. Alongside the tree the crate ships the majority-vote error
//! bound, Monte Carlo checks of it, and a grid-maze harness for comparing
//! the tree against single-sample planning.

pub mod element;
pub mod error;
pub mod fmt;
pub mod maze;
pub mod rng;
pub mod sim;
pub mod theory;
pub mod tree;

pub use element::{cosine_similarity, weighted_node_state, StateMode, TatConfig, Trajectory, TrajectoryElement};
pub use error::{Result, TatError};
pub use tree::{AggregationTree, Decision, MergeOutcome, NodeId, NodeRef, TreeNode};
