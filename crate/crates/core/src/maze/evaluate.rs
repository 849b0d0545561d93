//! Experiment specs and aggregated episode tables.
//!
//! A spec is flat `key = value` text; `#` starts a comment line and later
//! lines override earlier ones. Values of the keys marked *list* may be
//! comma-separated, and it expands to the cartesian product in the key
//! order below (last key varies fastest).
//!
//! | key | default | list | meaning |
//! |-----|---------|------|---------|
//! | `maze` | `large` | yes | preset name or map file path |
//! | `policy` | `tat` | yes | `tat` or `single` |
//! | `n` | `64` | yes | tree batch size |
//! | `eps` | `0.1` | yes | artifact probability without a quality curve |
//! | `steps` | `20` | yes | denoising steps fed to the quality curve |
//! | `path_noise` | `0.25` | yes | per-step chance of a random equally short move |
//! | `horizon` | `32` | yes | plan horizon |
//! | `mode` | `closed` | yes | `closed` or `open` |
//! | `warm_start` | `off` | yes | `off`, `naive`, `tat_branch` |
//! | `state` | `discrete` | yes | `discrete` or `continuous` elements |
//! | `lambda` | `0.98` | yes | tree decay |
//! | `alpha` | `0.9995` | yes | tree similarity threshold |
//! | `budget_factor` | `1` | yes | budget as a multiple of the shortest distance |
//! | `budget` | none | no | fixed step budget, overrides `budget_factor` |
//! | `quality_curve` | none | no | `steps:eps` pairs joined by `;` |
//! | `episodes` | `100` | no | episodes per condition |
//! | `seed` | `0` | no | base seed; episode `i` uses stream `i` |

use rayon::prelude::*;

use crate::element::StateMode;
use crate::error::{Result, TatError};
use crate::fmt::sig12;

use super::episode::{run_episode, Budget, EpisodeConfig, EpisodeResult, LoopMode, Policy, WarmStart};
use super::grid::{load_maze, preset, Maze, PRESET_NAMES};
use super::surrogate::{QualityCurve, SurrogateConfig};

const LIST_KEYS: [&str; 13] = [
    "maze",
    "policy",
    "n",
    "eps",
    "steps",
    "path_noise",
    "horizon",
    "mode",
    "warm_start",
    "state",
    "lambda",
    "alpha",
    "budget_factor",
];
const SCALAR_KEYS: [&str; 4] = ["budget", "quality_curve", "episodes", "seed"];

fn default_value(key: &str) -> Option<&'static str> {
    Some(match key {
        "maze" => "large",
        "policy" => "tat",
        "n" => "64",
        "eps" => "0.1",
        "steps" => "20",
        "path_noise" => "0.25",
        "horizon" => "32",
        "mode" => "closed",
        "warm_start" => "off",
        "state" => "discrete",
        "lambda" => "0.98",
        "alpha" => "0.9995",
        "budget_factor" => "1",
        "episodes" => "100",
        "seed" => "0",
        _ => return None,
    })
}

/// Parsed `key = value` experiment description.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentSpec {
    entries: Vec<(String, String)>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TatError::Spec(format!("line {}: expected key = value", i + 1)))?;
            spec.set(k.trim(), v.trim())?;
        }
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !LIST_KEYS.contains(&key) && !SCALAR_KEYS.contains(&key) {
            return Err(TatError::Spec(format!("unknown key '{key}'")));
        }
        if SCALAR_KEYS.contains(&key) && key != "quality_curve" && value.contains(',') {
            return Err(TatError::Spec(format!("key '{key}' takes a single value")));
        }
        self.entries.retain(|(k, _)| k != key);
        self.entries.push((key.to_string(), value.to_string()));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .or_else(|| default_value(key))
    }

    /// Canonical text with every key, defaults filled in.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in LIST_KEYS.iter().chain(&SCALAR_KEYS) {
            if let Some(v) = self.get(key) {
                out.push_str(&format!("{key} = {v}\n"));
            }
        }
        out
    }

    fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .unwrap_or_default()
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key).unwrap_or_default();
        v.parse()
            .map_err(|_| TatError::Spec(format!("bad value '{v}' for '{key}'")))
    }

    /// Every condition in expansion order.
    pub fn conditions(&self) -> Result<Vec<Condition>> {
        let lists: Vec<Vec<String>> = LIST_KEYS.iter().map(|k| self.list(k)).collect();
        if let Some(k) = LIST_KEYS.iter().zip(&lists).find(|(_, l)| l.is_empty()).map(|(k, _)| k) {
            return Err(TatError::Spec(format!("key '{k}' has no value")));
        }
        let episodes: u64 = self.scalar("episodes")?;
        if episodes == 0 {
            return Err(TatError::Spec("episodes must be positive".into()));
        }
        let seed: u64 = self.scalar("seed")?;
        let budget = match self.entries.iter().find(|(k, _)| k == "budget") {
            Some(_) => Some(self.scalar::<usize>("budget")?),
            None => None,
        };
        let curve = match self.entries.iter().find(|(k, _)| k == "quality_curve") {
            Some((_, v)) => Some(QualityCurve::parse(v)?),
            None => None,
        };

        let mut out = Vec::new();
        let mut idx = vec![0usize; lists.len()];
        loop {
            let picked: Vec<(&str, &str)> = LIST_KEYS
                .iter()
                .zip(&lists)
                .zip(&idx)
                .map(|((&k, l), &i)| (k, l[i].as_str()))
                .collect();
            out.push(Condition::build(&picked, budget, curve.clone(), episodes, seed)?);
            // odometer increment, last key fastest
            let mut k = lists.len();
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < lists[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| TatError::Spec(format!("bad value '{v}' for '{key}'")))
}

/// Preset name or path to a map file.
pub fn resolve_maze(name: &str) -> Result<Maze> {
    if PRESET_NAMES.contains(&name) {
        return preset(name);
    }
    match std::fs::read_to_string(name) {
        Ok(text) => load_maze(&text),
        Err(_) => Err(TatError::UnknownPreset(name.to_string())),
    }
}

/// One fully resolved experimental condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub maze_name: String,
    pub maze: Maze,
    pub episode: EpisodeConfig,
    pub state: StateMode,
    pub episodes: u64,
    pub seed: u64,
}

impl Condition {
    fn build(picked: &[(&str, &str)], budget: Option<usize>, curve: Option<QualityCurve>, episodes: u64, seed: u64) -> Result<Self> {
        let pick = |name: &str| -> &str {
            picked
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .expect("every list key is picked")
        };
        let maze_name = pick("maze").to_string();
        let maze = resolve_maze(&maze_name)?;
        let state: StateMode = pick("state").parse()?;
        let surrogate = SurrogateConfig {
            eps_artifact: parse("eps", pick("eps"))?,
            path_noise: parse("path_noise", pick("path_noise"))?,
            horizon: parse("horizon", pick("horizon"))?,
            denoise_steps: parse("steps", pick("steps"))?,
            quality_curve: curve,
        };
        let policy = match pick("policy") {
            "tat" => {
                let mut p = Policy::tat(parse("n", pick("n"))?, surrogate.horizon, state);
                if let Policy::Tat { config, .. } = &mut p {
                    config.lambda = parse("lambda", pick("lambda"))?;
                    config.alpha = parse("alpha", pick("alpha"))?;
                }
                p
            }
            "single" => Policy::Single,
            other => return Err(TatError::Spec(format!("unknown policy '{other}'"))),
        };
        let mut episode = EpisodeConfig::new(surrogate, policy);
        episode.mode = pick("mode").parse::<LoopMode>()?;
        episode.warm_start = pick("warm_start").parse::<WarmStart>()?;
        episode.budget = match budget {
            Some(b) => Budget::Steps(b),
            None => Budget::Factor(parse("budget_factor", pick("budget_factor"))?),
        };
        episode.validate()?;
        episode.budget.resolve(&maze)?;
        Ok(Self {
            maze_name,
            maze,
            episode,
            state,
            episodes,
            seed,
        })
    }

    /// All episodes of this condition, in index order.
    pub fn run(&self, workers: usize) -> Result<Vec<EpisodeResult>> {
        crate::sim::pool(workers)?.install(|| {
            (0..self.episodes)
                .into_par_iter()
                .map(|i| run_episode(&self.maze, &self.episode, self.seed, i))
                .collect()
        })
    }
}

/// Mean and standard error of the mean (sample deviation; 0 for one value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub stderr: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        if values.len() < 2 || values.iter().all(|&v| v == values[0]) {
            let mean = values.first().copied().unwrap_or(f64::NAN);
            return Self { mean, stderr: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        Self {
            mean,
            stderr: (var / k).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub condition: Condition,
    pub success: Stat,
    pub score: Stat,
    /// Share of episodes with at least one blocked wall move.
    pub violation: Stat,
    pub mean_violations: f64,
    pub mean_steps: f64,
}

impl ResultRow {
    pub fn from_episodes(condition: Condition, results: &[EpisodeResult]) -> Self {
        let col = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(f).collect::<Vec<f64>>();
        let k = results.len() as f64;
        Self {
            success: Stat::of(&col(&|r| f64::from(u8::from(r.reached_goal)))),
            score: Stat::of(&col(&|r| r.score)),
            violation: Stat::of(&col(&|r| f64::from(u8::from(r.wall_violations > 0)))),
            mean_violations: results.iter().map(|r| r.wall_violations as f64).sum::<f64>() / k,
            mean_steps: results.iter().map(|r| r.steps_taken as f64).sum::<f64>() / k,
            condition,
        }
    }

    pub fn csv_line(&self) -> String {
        let c = &self.condition;
        let e = &c.episode;
        let budget = e.budget.resolve(&c.maze).unwrap_or(0);
        [
            c.maze_name.clone(),
            e.policy.name().to_string(),
            e.policy.batch_size().to_string(),
            sig12(e.surrogate.effective_eps()),
            e.surrogate.denoise_steps.to_string(),
            sig12(e.surrogate.path_noise),
            e.surrogate.horizon.to_string(),
            e.mode.as_str().to_string(),
            e.warm_start.as_str().to_string(),
            c.state.as_str().to_string(),
            budget.to_string(),
            c.episodes.to_string(),
            c.seed.to_string(),
            sig12(self.success.mean),
            sig12(self.success.stderr),
            sig12(self.score.mean),
            sig12(self.score.stderr),
            sig12(self.violation.mean),
            sig12(self.violation.stderr),
            sig12(self.mean_violations),
            sig12(self.mean_steps),
        ]
        .join(",")
    }
}

pub const MAZE_CSV_NOTE: &str =
    "# score = success * (1 + 0.1 * shortest / steps); violation_rate = share of episodes with a blocked wall move";
pub const MAZE_CSV_HEADER: &str = "maze,policy,n,eps,steps,path_noise,horizon,mode,warm_start,state,budget,episodes,seed,success_rate,success_stderr,score_mean,score_stderr,violation_rate,violation_stderr,mean_violations,mean_steps";

pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = format!("{MAZE_CSV_NOTE}\n{MAZE_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Runs every condition of `spec`.
pub fn evaluate(spec: &ExperimentSpec, workers: usize) -> Result<Vec<ResultRow>> {
    spec.conditions()?
        .into_iter()
        .map(|c| {
            let results = c.run(workers)?;
            Ok(ResultRow::from_episodes(c, &results))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_expand() {
        let spec = ExperimentSpec::parse("# demo\nmaze = umaze\nn = 1, 4,8\npolicy=tat,single\nepisodes=3\n").unwrap();
        let conds = spec.conditions().unwrap();
        assert_eq!(conds.len(), 6);
        assert_eq!(conds[0].episode.policy.batch_size(), 1);
        assert_eq!(conds[1].episode.policy.batch_size(), 4);
        assert_eq!(conds[3].episode.policy, Policy::Single);
        assert!(ExperimentSpec::parse("colour = red").is_err());
        assert!(ExperimentSpec::parse("just words").is_err());
        assert!(ExperimentSpec::parse("episodes = 1,2").is_err());
        assert!(ExperimentSpec::parse("episodes = 0").unwrap().conditions().is_err());
        assert!(ExperimentSpec::parse("policy = random").unwrap().conditions().is_err());
    }

    #[test]
    fn single_episode_row() {
        let spec = ExperimentSpec::parse("maze=umaze\nepisodes=1\nn=4").unwrap();
        let rows = evaluate(&spec, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].success.stderr, 0.0);
        assert_eq!(rows[0].score.stderr, 0.0);
        let csv = rows_to_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("maze,policy,n,eps"));
    }

    #[test]
    fn quality_curve_sets_eps() {
        let spec = ExperimentSpec::parse("maze=umaze\nquality_curve = 20:0.05;8:0.15;6:0.25;4:0.40\nsteps=6,20\nepisodes=2").unwrap();
        let conds = spec.conditions().unwrap();
        assert_eq!(conds[0].episode.surrogate.effective_eps(), 0.25);
        assert_eq!(conds[1].episode.surrogate.effective_eps(), 0.05);
    }

    #[test]
    fn canonical_text_round_trips() {
        let spec = ExperimentSpec::parse("maze=medium\nn=8,16\nbudget=30").unwrap();
        let again = ExperimentSpec::parse(&spec.to_text()).unwrap();
        assert_eq!(spec.conditions().unwrap(), again.conditions().unwrap());
    }

    #[test]
    fn worker_count_does_not_matter() {
        let spec = ExperimentSpec::parse("maze=medium\nn=16\neps=0.2\nepisodes=24").unwrap();
        let a = rows_to_csv(&evaluate(&spec, 1).unwrap());
        let b = rows_to_csv(&evaluate(&spec, 4).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn stat_values() {
        let s = Stat::of(&[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.mean, 0.5);
        assert!((s.stderr - (1.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
