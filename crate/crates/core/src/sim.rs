//! Monte Carlo checks of the voting model against the exact tail and against
//! the tree itself.
//!
//! Trial `i` of a run with seed `s` draws from [`rng::stream`]`(s, i)`. The
//! first `n` uniforms decide which trajectories are artifacts (`u < ε`), in
//! batch order, so the voting simulator and the tree experiment see identical
//! artifact patterns for the same `(seed, i)`. Counts are integers, which makes
//! every result independent of the worker count.

use rayon::prelude::*;

use crate::element::{cosine_similarity, StateMode, TatConfig, Trajectory, TrajectoryElement};
use crate::error::{Result, TatError};
use crate::fmt::sig12;
use crate::rng::{self, Rng};
use crate::theory::{binomial_tail, majority_threshold};
use crate::tree::AggregationTree;

/// Dimension of the synthetic trajectory elements.
const DIM: usize = 3;
const GOOD: [f64; DIM] = [1.0, 0.0, 0.0];
const ARTIFACT: [f64; DIM] = [-1.0, 0.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactModel {
    /// Every artifact carries the same state, opposite to the good one.
    Identical,
    /// Each artifact state is an independent uniform direction on the sphere.
    IidRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub eps: f64,
    pub trials: u64,
    pub seed: u64,
    pub artifact_model: ArtifactModel,
    pub lambda: f64,
    pub tie_to_artifact: bool,
}

impl SimConfig {
    pub fn new(n: usize, eps: f64, trials: u64, seed: u64) -> Self {
        Self {
            n,
            eps,
            trials,
            seed,
            artifact_model: ArtifactModel::Identical,
            lambda: 1.0,
            tie_to_artifact: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(TatError::Domain("n must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(TatError::EpsilonDomain(self.eps));
        }
        if self.trials == 0 {
            return Err(TatError::Domain("trials must be positive".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(TatError::Domain(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        Ok(())
    }

    fn threshold(&self) -> u64 {
        majority_threshold(self.n as u64, self.tie_to_artifact)
    }

    /// Exact probability of the majority event for this `(n, ε)`.
    pub fn exact_reference(&self) -> Result<f64> {
        binomial_tail(self.n as u64, self.eps, self.threshold())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub artifact_frequency: f64,
    pub artifact_count: u64,
    pub trials: u64,
    /// `sqrt(p(1−p)/trials)` at the observed frequency.
    pub std_error: f64,
    pub exact_reference: Option<f64>,
}

impl SimResult {
    fn from_counts(count: u64, trials: u64, exact_reference: Option<f64>) -> Self {
        let p = count as f64 / trials as f64;
        Self {
            artifact_frequency: p,
            artifact_count: count,
            trials,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
            exact_reference,
        }
    }

    /// `|frequency − exact| / σ` with σ the binomial standard error at the
    /// exact probability.
    pub fn z_score(&self) -> Option<f64> {
        let p = self.exact_reference?;
        let sigma = (p * (1.0 - p) / self.trials as f64).sqrt();
        Some(if sigma == 0.0 {
            if self.artifact_frequency == p {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.artifact_frequency - p).abs() / sigma
        })
    }
}

/// Draws the artifact indicator of each of `n` trajectories.
pub fn draw_artifacts<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng::bernoulli(rng, eps)).collect()
}

/// One worst-case voting trial: `n` Bernoulli(ε) draws, artifact wins iff its
/// count reaches the majority threshold.
pub fn worst_case_vote_trial<R: Rng + ?Sized>(n: usize, eps: f64, tie_to_artifact: bool, rng: &mut R) -> bool {
    let count = (0..n).filter(|_| rng::bernoulli(rng, eps)).count() as u64;
    count >= majority_threshold(n as u64, tie_to_artifact)
}

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| TatError::Domain(format!("thread pool: {e}")))
}

fn count_parallel<F>(trials: u64, workers: usize, f: F) -> Result<u64>
where
    F: Fn(u64) -> Result<bool> + Sync,
{
    pool(workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| f(i).map(u64::from))
            .try_reduce(|| 0, |a, b| Ok(a + b))
    })
}

/// Plain Monte Carlo over the voting model. `workers = 0` uses every core.
pub fn monte_carlo_worst_case(cfg: &SimConfig, workers: usize) -> Result<SimResult> {
    cfg.validate()?;
    let count = count_parallel(cfg.trials, workers, |i| {
        let mut r = rng::stream(cfg.seed, i);
        Ok(worst_case_vote_trial(cfg.n, cfg.eps, cfg.tie_to_artifact, &mut r))
    })?;
    Ok(SimResult::from_counts(count, cfg.trials, Some(cfg.exact_reference()?)))
}

fn synthetic_trajectory(first: [f64; DIM], horizon: usize) -> Trajectory {
    let mut rows = Vec::with_capacity(horizon + 1);
    rows.push(TrajectoryElement::zeros(DIM));
    for _ in 0..horizon {
        rows.push(TrajectoryElement::new(first.to_vec()));
    }
    Trajectory::new(rows)
}

fn sphere_direction<R: Rng + ?Sized>(rng: &mut R) -> [f64; DIM] {
    loop {
        let v = [rng::normal(rng), rng::normal(rng), rng::normal(rng)];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-9 {
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    }
}

/// Batch for one trial. Good trajectories go first under the strict rule and
/// artifacts go first when ties favour the artifact, so that the tree's
/// insertion-order tie-break lands on the side the voting rule names.
fn build_batch(pattern: &[bool], artifact_states: &[[f64; DIM]], horizon: usize, tie_to_artifact: bool) -> Vec<Trajectory> {
    let goods = pattern.iter().filter(|&&a| !a).count();
    let good = (0..goods).map(|_| synthetic_trajectory(GOOD, horizon));
    let bad = artifact_states.iter().map(|&s| synthetic_trajectory(s, horizon));
    if tie_to_artifact {
        bad.chain(good).collect()
    } else {
        good.chain(bad).collect()
    }
}

fn is_artifact_target(target: &TrajectoryElement, tat: &TatConfig) -> bool {
    match tat.state_mode {
        StateMode::Discrete => target.values() != GOOD,
        StateMode::Continuous => {
            cosine_similarity(target, &GOOD, tat.zero_norm_epsilon).unwrap_or(-1.0) <= tat.alpha
        }
    }
}

fn tree_trial(pattern: &[bool], artifact_states: &[[f64; DIM]], tat: &TatConfig, tie_to_artifact: bool) -> Result<bool> {
    let batch = build_batch(pattern, artifact_states, tat.horizon, tie_to_artifact);
    let mut tree = AggregationTree::with_dimension(tat.clone(), DIM)?;
    let decision = tree.plan_step(&batch)?;
    Ok(is_artifact_target(&decision.target_state, tat))
}

fn artifact_states<R: Rng + ?Sized>(pattern: &[bool], model: ArtifactModel, rng: &mut R) -> Vec<[f64; DIM]> {
    let m = pattern.iter().filter(|&&a| a).count();
    match model {
        ArtifactModel::Identical => vec![ARTIFACT; m],
        ArtifactModel::IidRandom => (0..m).map(|_| sphere_direction(rng)).collect(),
    }
}

/// Runs `plan_step` on a fresh tree per trial and records whether the chosen
/// node is an artifact.
pub fn tree_artifact_experiment(cfg: &SimConfig, tat: &TatConfig, workers: usize) -> Result<SimResult> {
    cfg.validate()?;
    tat.validate()?;
    if tat.lambda != cfg.lambda {
        return Err(TatError::InvalidConfig(format!(
            "tree lambda {} differs from simulation lambda {}",
            tat.lambda, cfg.lambda
        )));
    }
    let count = count_parallel(cfg.trials, workers, |i| {
        let mut r = rng::stream(cfg.seed, i);
        let pattern = draw_artifacts(cfg.n, cfg.eps, &mut r);
        let states = artifact_states(&pattern, cfg.artifact_model, &mut r);
        tree_trial(&pattern, &states, tat, cfg.tie_to_artifact)
    })?;
    let exact = match cfg.artifact_model {
        ArtifactModel::Identical => Some(cfg.exact_reference()?),
        ArtifactModel::IidRandom => None,
    };
    Ok(SimResult::from_counts(count, cfg.trials, exact))
}

/// Enumerates all `2^n` artifact patterns with identical artifacts and counts
/// the patterns where the tree and the majority vote disagree.
pub fn exhaustive_oracle_mismatches(n: usize, tat: &TatConfig, tie_to_artifact: bool) -> Result<u64> {
    if n == 0 || n > 20 {
        return Err(TatError::Domain(format!("exhaustive enumeration needs 1 <= n <= 20, got {n}")));
    }
    let threshold = majority_threshold(n as u64, tie_to_artifact);
    let mut mismatches = 0;
    for mask in 0u32..(1 << n) {
        let pattern: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
        let m = mask.count_ones() as u64;
        let vote = m >= threshold;
        let tree = tree_trial(&pattern, &vec![ARTIFACT; m as usize], tat, tie_to_artifact)?;
        if vote != tree {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

/// Which simulator a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    Voting,
    TreeIdentical,
    TreeIid,
}

impl SimMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SimMode::Voting => "voting",
            SimMode::TreeIdentical => "tree-identical",
            SimMode::TreeIid => "tree-iid",
        }
    }
}

impl std::str::FromStr for SimMode {
    type Err = TatError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voting" => Ok(SimMode::Voting),
            "tree-identical" => Ok(SimMode::TreeIdentical),
            "tree-iid" => Ok(SimMode::TreeIid),
            other => Err(TatError::Domain(format!("unknown mode '{other}'"))),
        }
    }
}

/// Tree configuration used by the tree simulators: horizon 1, λ from the
/// simulation, default α.
pub fn default_tree_config(cfg: &SimConfig) -> TatConfig {
    TatConfig {
        lambda: cfg.lambda,
        horizon: 1,
        ..TatConfig::default()
    }
}

pub fn run(mode: SimMode, cfg: &SimConfig, tat: &TatConfig, workers: usize) -> Result<SimResult> {
    match mode {
        SimMode::Voting => monte_carlo_worst_case(cfg, workers),
        SimMode::TreeIdentical => tree_artifact_experiment(
            &SimConfig {
                artifact_model: ArtifactModel::Identical,
                ..cfg.clone()
            },
            tat,
            workers,
        ),
        SimMode::TreeIid => tree_artifact_experiment(
            &SimConfig {
                artifact_model: ArtifactModel::IidRandom,
                ..cfg.clone()
            },
            tat,
            workers,
        ),
    }
}

pub const SIM_CSV_HEADER: &str = "n,eps,lambda,mode,trials,frequency,std_error,exact_reference";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: SimConfig,
    pub mode: SimMode,
    pub result: SimResult,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.config.n,
            sig12(self.config.eps),
            sig12(self.config.lambda),
            self.mode.as_str(),
            self.result.trials,
            sig12(self.result.artifact_frequency),
            sig12(self.result.std_error),
            self.result.exact_reference.map(sig12).unwrap_or_default()
        )
    }
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SIM_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// Runs one row per configuration; all rows must share `ε` and `λ`.
pub fn batch_size_sweep(cfgs: &[SimConfig], mode: SimMode, workers: usize) -> Result<Vec<SweepRow>> {
    let Some(first) = cfgs.first() else {
        return Ok(Vec::new());
    };
    if cfgs.iter().any(|c| c.eps != first.eps || c.lambda != first.lambda) {
        return Err(TatError::Domain("sweep rows must share eps and lambda".into()));
    }
    cfgs.iter()
        .map(|c| {
            let tat = default_tree_config(c);
            Ok(SweepRow {
                config: c.clone(),
                mode,
                result: run(mode, c, &tat, workers)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vote_trial_edges() {
        let mut r = rng::stream(1, 0);
        for _ in 0..1000 {
            assert!(!worst_case_vote_trial(7, 0.0, true, &mut r));
        }
        // n = 2 strict: both draws must be artifacts
        let trials = 200_000u64;
        let hits = (0..trials)
            .filter(|&i| worst_case_vote_trial(2, 0.3, false, &mut rng::stream(3, i)))
            .count() as f64;
        let p = hits / trials as f64;
        let sigma = (0.09f64 * 0.91 / trials as f64).sqrt();
        assert!((p - 0.09).abs() < 4.0 * sigma, "{p}");
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(5, 0.2, 0, 1).validate().is_err());
        assert!(SimConfig::new(5, 0.5, 1, 1).validate().is_err());
        assert!(SimConfig::new(0, 0.2, 1, 1).validate().is_err());
        assert!(monte_carlo_worst_case(&SimConfig::new(5, 0.2, 0, 1), 1).is_err());
    }

    #[test]
    fn identical_seed_identical_result() {
        let cfg = SimConfig::new(5, 0.2, 20_000, 42);
        let a = monte_carlo_worst_case(&cfg, 1).unwrap();
        let b = monte_carlo_worst_case(&cfg, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tree_identical_matches_voting_trial_by_trial() {
        for tie in [false, true] {
            let mut cfg = SimConfig::new(6, 0.3, 5_000, 9);
            cfg.tie_to_artifact = tie;
            let tat = default_tree_config(&cfg);
            for i in 0..cfg.trials {
                let vote = worst_case_vote_trial(cfg.n, cfg.eps, tie, &mut rng::stream(cfg.seed, i));
                let mut r = rng::stream(cfg.seed, i);
                let pattern = draw_artifacts(cfg.n, cfg.eps, &mut r);
                let states = artifact_states(&pattern, ArtifactModel::Identical, &mut r);
                assert_eq!(vote, tree_trial(&pattern, &states, &tat, tie).unwrap());
            }
            let v = monte_carlo_worst_case(&cfg, 1).unwrap();
            let t = tree_artifact_experiment(&cfg, &tat, 1).unwrap();
            assert_eq!(v.artifact_count, t.artifact_count);
        }
    }

    #[test]
    fn exhaustive_small_n() {
        for n in 1..=8 {
            for tie in [false, true] {
                let tat = TatConfig { lambda: 1.0, horizon: 1, ..TatConfig::default() };
                assert_eq!(exhaustive_oracle_mismatches(n, &tat, tie).unwrap(), 0);
            }
        }
    }

    #[test]
    fn lambda_mismatch_rejected() {
        let cfg = SimConfig::new(3, 0.2, 10, 0);
        let tat = TatConfig { lambda: 0.5, horizon: 1, ..TatConfig::default() };
        assert!(tree_artifact_experiment(&cfg, &tat, 1).is_err());
    }

    #[test]
    fn iid_artifacts_are_no_more_likely_than_identical() {
        let cfg = SimConfig::new(5, 0.2, 100_000, 11);
        let tat = default_tree_config(&cfg);
        let ident = run(SimMode::TreeIdentical, &cfg, &tat, 1).unwrap();
        let iid = run(SimMode::TreeIid, &cfg, &tat, 1).unwrap();
        assert!(iid.artifact_frequency <= ident.artifact_frequency);
        assert!(iid.exact_reference.is_none());
    }

    #[test]
    fn sweep_rows() {
        let one = batch_size_sweep(&[SimConfig::new(3, 0.2, 1000, 1)], SimMode::Voting, 1).unwrap();
        assert_eq!(one.len(), 1);

        let ns = [1usize, 8, 16, 32, 64];
        let cfgs: Vec<SimConfig> = ns.iter().map(|&n| SimConfig::new(n, 0.2, 20_000, 5)).collect();
        let rows = batch_size_sweep(&cfgs, SimMode::TreeIdentical, 1).unwrap();
        let exact: Vec<f64> = rows.iter().map(|r| r.result.exact_reference.unwrap()).collect();
        assert!((exact[0] - 0.2).abs() < 1e-15);
        assert!(exact.windows(2).all(|w| w[1] < w[0]));
        assert!((rows[0].result.artifact_frequency - 0.2).abs() < 4.0 * (0.16f64 / 20_000.0).sqrt());

        let mut mixed = cfgs.clone();
        mixed[1].eps = 0.3;
        assert!(batch_size_sweep(&mixed, SimMode::Voting, 1).is_err());

        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with("n,eps,lambda,mode,trials,frequency,std_error,exact_reference\n1,0.2,1,tree-identical,20000,"));
    }
}
