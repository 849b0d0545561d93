//! Trajectory elements, planner configuration and the similarity / weighted
//! averaging primitives the tree is built on.

use std::ops::Deref;

use crate::error::{Result, TatError};

/// Default guard below which a vector norm is treated as zero.
pub const DEFAULT_ZERO_NORM_EPSILON: f64 = 1e-12;

/// How candidate states are matched against existing nodes while merging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateMode {
    /// Cosine similarity against the node state, gated by `alpha`.
    Continuous,
    /// Exact elementwise equality; `alpha` is ignored.
    Discrete,
}

impl StateMode {
    pub fn as_str(self) -> &'static str {
        match self {
            StateMode::Continuous => "continuous",
            StateMode::Discrete => "discrete",
        }
    }
}

impl std::str::FromStr for StateMode {
    type Err = TatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(StateMode::Continuous),
            "discrete" => Ok(StateMode::Discrete),
            other => Err(TatError::InvalidConfig(format!("unknown state mode '{other}'"))),
        }
    }
}

/// Planner configuration.
///
/// `action_dim` is the length of the action suffix of every element in
/// state-action form (`x_t = (s_t, a_{t-1})`). Zero means state-centric
/// elements, for which no action is extracted.
#[derive(Debug, Clone, PartialEq)]
pub struct TatConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub state_mode: StateMode,
    pub horizon: usize,
    pub zero_norm_epsilon: f64,
    pub action_dim: usize,
}

impl Default for TatConfig {
    /// λ = 0.98 and 1 − α = 0.0005, the Maze2D settings.
    fn default() -> Self {
        Self {
            lambda: 0.98,
            alpha: 0.9995,
            state_mode: StateMode::Continuous,
            horizon: 32,
            zero_norm_epsilon: DEFAULT_ZERO_NORM_EPSILON,
            action_dim: 0,
        }
    }
}

impl TatConfig {
    pub fn new(lambda: f64, alpha: f64, horizon: usize) -> Result<Self> {
        let cfg = Self {
            lambda,
            alpha,
            horizon,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mode(mut self, mode: StateMode) -> Self {
        self.state_mode = mode;
        self
    }

    pub fn with_action_dim(mut self, action_dim: usize) -> Self {
        self.action_dim = action_dim;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(TatError::InvalidConfig(format!(
                "lambda must lie in (0, 1], got {}",
                self.lambda
            )));
        }
        if self.state_mode == StateMode::Continuous && !(self.alpha > -1.0 && self.alpha < 1.0) {
            return Err(TatError::InvalidConfig(format!(
                "alpha must lie in (-1, 1), got {}",
                self.alpha
            )));
        }
        if self.horizon == 0 {
            return Err(TatError::InvalidConfig("horizon must be at least 1".into()));
        }
        if !(self.zero_norm_epsilon > 0.0 && self.zero_norm_epsilon.is_finite()) {
            return Err(TatError::InvalidConfig(
                "zero_norm_epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One per-timestep datum `x_t`: a state, or a state followed by the action
/// that produced it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryElement(Vec<f64>);

impl TrajectoryElement {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// The trailing `action_dim` entries, or `None` when `action_dim` is zero
    /// or exceeds the element size.
    pub fn action_suffix(&self, action_dim: usize) -> Option<&[f64]> {
        if action_dim == 0 || action_dim > self.0.len() {
            return None;
        }
        Some(&self.0[self.0.len() - action_dim..])
    }
}

impl Deref for TrajectoryElement {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for TrajectoryElement {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for TrajectoryElement {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

/// A candidate plan `{x_0, ..., x_T}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    elements: Vec<TrajectoryElement>,
}

impl Trajectory {
    pub fn new(elements: Vec<TrajectoryElement>) -> Self {
        Self { elements }
    }

    pub fn from_rows<I, R>(rows: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: Into<TrajectoryElement>,
    {
        Self {
            elements: rows.into_iter().map(Into::into).collect(),
        }
    }

    pub fn elements(&self) -> &[TrajectoryElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Horizon `T`, i.e. `len() - 1`.
    pub fn horizon(&self) -> usize {
        self.elements.len().saturating_sub(1)
    }

    pub fn get(&self, t: usize) -> Option<&TrajectoryElement> {
        self.elements.get(t)
    }

    pub fn into_elements(self) -> Vec<TrajectoryElement> {
        self.elements
    }

    /// Checks length against `horizon`, uniform dimensionality (against
    /// `dim` if given) and finiteness.
    pub fn validate(&self, horizon: usize, dim: Option<usize>) -> Result<usize> {
        if self.elements.len() != horizon + 1 {
            return Err(TatError::HorizonMismatch {
                horizon,
                actual: self.elements.len(),
            });
        }
        let expected = dim.unwrap_or_else(|| self.elements[0].dim());
        for e in &self.elements {
            if e.dim() != expected {
                return Err(TatError::DimensionMismatch {
                    expected,
                    actual: e.dim(),
                });
            }
            if !e.is_finite() {
                return Err(TatError::NonFiniteState);
            }
        }
        Ok(expected)
    }
}

impl std::ops::Index<usize> for Trajectory {
    type Output = TrajectoryElement;

    fn index(&self, t: usize) -> &TrajectoryElement {
        &self.elements[t]
    }
}

/// Cosine similarity `a·b / (‖a‖‖b‖)`, clamped to `[-1, 1]`.
///
/// Two vectors with norms below `zero_norm_epsilon` are identical (1.0); a
/// single degenerate vector is orthogonal to everything (0.0).
pub fn cosine_similarity(a: &[f64], b: &[f64], zero_norm_epsilon: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(TatError::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        if !x.is_finite() || !y.is_finite() {
            return Err(TatError::NonFiniteState);
        }
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    let na = aa.sqrt();
    let nb = bb.sqrt();
    match (na < zero_norm_epsilon, nb < zero_norm_epsilon) {
        (true, true) => Ok(1.0),
        (true, false) | (false, true) => Ok(0.0),
        (false, false) => Ok((dot / (na * nb)).clamp(-1.0, 1.0)),
    }
}

/// Weighted average `Σ x_i w_i / Σ w_i`, elementwise.
pub fn weighted_node_state(elements: &[TrajectoryElement], weights: &[f64]) -> Result<TrajectoryElement> {
    if elements.len() != weights.len() {
        return Err(TatError::LengthMismatch {
            elements: elements.len(),
            weights: weights.len(),
        });
    }
    let Some(first) = elements.first() else {
        return Err(TatError::EmptyNode);
    };
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    let mut total = 0.0;
    for (x, &w) in elements.iter().zip(weights) {
        if x.dim() != dim {
            return Err(TatError::DimensionMismatch {
                expected: dim,
                actual: x.dim(),
            });
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(TatError::InvalidConfig(format!("weight must be positive, got {w}")));
        }
        for (a, &v) in acc.iter_mut().zip(x.iter()) {
            *a += v * w;
        }
        total += w;
    }
    for a in &mut acc {
        *a /= total;
    }
    Ok(TrajectoryElement(acc))
}
