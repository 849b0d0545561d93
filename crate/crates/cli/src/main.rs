//! `tatkit` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure or failed check, 2 usage or domain
//! error, 3 tree invariant breach.

mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgAction, Args, Parser, Subcommand};
use tatkit::fmt::sig12;
use tatkit::maze::{self, ExperimentSpec, LabeledPath, PathStyle, QualityCurve};
use tatkit::sim::{self, SimConfig, SimMode};
use tatkit::theory::{self, quadrature};
use tatkit::TatError;

use manifest::RunManifest;

const SEED_ENV: &str = "TATKIT_SEED";

#[derive(Parser)]
#[command(name = "tatkit", version, about = "Trajectory aggregation trees: bounds, simulators and maze experiments")]
#[command(after_help = "Any subcommand accepts --config FILE with key = value lines; flags given on the command line override it.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CLT upper bound on an n × eps grid.
    BoundTable(BoundTableArgs),
    /// Artifact-selection frequency by Monte Carlo.
    Montecarlo(MonteCarloArgs),
    /// Maze episodes with the surrogate planner.
    Maze(Box<MazeArgs>),
    /// Compare erf against a quadrature reference.
    ErfCheck(ErfCheckArgs),
}

#[derive(Args)]
#[command(args_override_self = true)]
struct BoundTableArgs {
    #[arg(long, default_value_t = 2)]
    n_min: u64,
    #[arg(long, default_value_t = 100)]
    n_max: u64,
    #[arg(long, default_value_t = 0.01)]
    eps_min: f64,
    #[arg(long, default_value_t = 0.49)]
    eps_max: f64,
    /// Number of evenly spaced eps values, endpoints included.
    #[arg(long, default_value_t = 49)]
    steps: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct MonteCarloArgs {
    /// Batch size, or a comma-separated list of them.
    #[arg(long, default_value = "5")]
    n: String,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    /// Defaults to $TATKIT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "voting")]
    mode: SimMode,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Count exact ties as artifact wins.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = ArgAction::Set)]
    tie_to_artifact: bool,
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Values may be comma-separated lists; every combination becomes one row.
#[derive(Args)]
#[command(args_override_self = true)]
struct MazeArgs {
    /// Preset (umaze, medium, large) or map file.
    #[arg(long)]
    maze: Option<String>,
    /// tat or single.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// Denoising steps, mapped to eps through --quality-curve.
    #[arg(long)]
    steps: Option<String>,
    /// File of `steps:eps` pairs (one per line or `;`-separated), or the pairs inline.
    #[arg(long)]
    quality_curve: Option<String>,
    #[arg(long)]
    path_noise: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    /// closed or open.
    #[arg(long)]
    mode: Option<String>,
    /// off, naive or tat_branch.
    #[arg(long)]
    warm_start: Option<String>,
    /// discrete or continuous.
    #[arg(long)]
    state: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    budget_factor: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    episodes: Option<u64>,
    /// Defaults to $TATKIT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG of the last episode's first decision.
    #[arg(long)]
    render: Option<PathBuf>,
}

#[derive(Args)]
#[command(args_override_self = true)]
struct ErfCheckArgs {
    #[arg(long, default_value_t = -6.0, allow_negative_numbers = true)]
    x_min: f64,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    x_max: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Pass threshold on the maximum absolute deviation.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    /// Per-point CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Tat(TatError),
    Usage(String),
    Io(String),
    CheckFailed(String),
}

impl From<TatError> for CliError {
    fn from(e: TatError) -> Self {
        CliError::Tat(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Tat(TatError::Invariant(_)) => 3,
            CliError::Tat(_) | CliError::Usage(_) => 2,
            CliError::Io(_) | CliError::CheckFailed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Tat(e) => write!(f, "{e}"),
            CliError::Usage(s) | CliError::Io(s) | CliError::CheckFailed(s) => f.write_str(s),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn resolve_seed(flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Writes `text` to `out` plus its manifest, or prints it.
fn emit(text: &str, out: Option<&Path>, mut manifest: RunManifest, started: Instant) -> CliResult<()> {
    let Some(path) = out else {
        print!("{text}");
        return Ok(());
    };
    write_file(path, text)?;
    manifest.outputs.insert(0, path.to_path_buf());
    manifest.duration = started.elapsed();
    manifest
        .write_next_to(path)
        .map_err(|e| CliError::Io(format!("cannot write manifest: {e}")))?;
    Ok(())
}

fn new_manifest(command: &str, params: Vec<(&str, String)>) -> RunManifest {
    RunManifest {
        command: command.into(),
        params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        outputs: Vec::new(),
        duration: Default::default(),
    }
}

fn path_param(p: &Option<PathBuf>) -> Vec<(&'static str, String)> {
    p.iter().map(|p| ("out", p.display().to_string())).collect()
}

fn bound_table(a: &BoundTableArgs) -> CliResult<()> {
    let started = Instant::now();
    if a.n_min < 2 {
        return Err(CliError::Usage(format!("n-min must be at least 2, got {}", a.n_min)));
    }
    if a.n_max < a.n_min {
        return Err(CliError::Usage(format!("n-max ({}) must be at least n-min ({})", a.n_max, a.n_min)));
    }
    for (name, v) in [("eps-min", a.eps_min), ("eps-max", a.eps_max)] {
        if !(v > 0.0 && v < 0.5) {
            return Err(CliError::Usage(format!("{name} must satisfy 0 < eps < 0.5, got {v}")));
        }
    }
    if a.eps_max < a.eps_min {
        return Err(CliError::Usage(format!("eps-max ({}) must be at least eps-min ({})", a.eps_max, a.eps_min)));
    }
    if a.steps == 0 || (a.steps == 1 && a.eps_min != a.eps_max) || (a.steps > 1 && a.eps_min == a.eps_max) {
        return Err(CliError::Usage(
            "steps must be 1 when eps-min equals eps-max and at least 2 otherwise".into(),
        ));
    }
    let n_values: Vec<u64> = (a.n_min..=a.n_max).collect();
    let eps_values: Vec<f64> = if a.steps == 1 {
        vec![a.eps_min]
    } else {
        let h = (a.eps_max - a.eps_min) / (a.steps - 1) as f64;
        (0..a.steps)
            .map(|i| if i + 1 == a.steps { a.eps_max } else { a.eps_min + i as f64 * h })
            .collect()
    };
    let surface = theory::bound_surface(&n_values, &eps_values)?;
    let mut params = vec![
        ("n-min", a.n_min.to_string()),
        ("n-max", a.n_max.to_string()),
        ("eps-min", sig12(a.eps_min)),
        ("eps-max", sig12(a.eps_max)),
        ("steps", a.steps.to_string()),
    ];
    params.extend(path_param(&a.out));
    emit(&surface.to_csv(), a.out.as_deref(), new_manifest("bound-table", params), started)
}

fn montecarlo(a: &MonteCarloArgs) -> CliResult<()> {
    let started = Instant::now();
    let seed = resolve_seed(a.seed)?;
    let ns = a
        .n
        .split(',')
        .map(|v| v.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("n must be a comma-separated list of integers, got '{}'", a.n)))?;
    let cfgs: Vec<SimConfig> = ns
        .iter()
        .map(|&n| SimConfig {
            lambda: a.lambda,
            tie_to_artifact: a.tie_to_artifact,
            ..SimConfig::new(n, a.eps, a.trials, seed)
        })
        .collect();
    for c in &cfgs {
        c.validate()?;
    }
    let rows = sim::batch_size_sweep(&cfgs, a.mode, a.workers)?;
    let mut params = vec![
        ("n", ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")),
        ("eps", sig12(a.eps)),
        ("trials", a.trials.to_string()),
        ("seed", seed.to_string()),
        ("mode", a.mode.as_str().to_string()),
        ("lambda", sig12(a.lambda)),
        ("tie-to-artifact", a.tie_to_artifact.to_string()),
        ("workers", a.workers.to_string()),
    ];
    params.extend(path_param(&a.out));
    emit(&sim::rows_to_csv(&rows), a.out.as_deref(), new_manifest("montecarlo", params), started)
}

/// Accepts a curve file or inline `steps:eps` pairs; returns the pairs joined by `;`.
fn read_quality_curve(arg: &str) -> CliResult<String> {
    let text = if Path::new(arg).is_file() {
        std::fs::read_to_string(arg).map_err(|e| CliError::Io(format!("cannot read {arg}: {e}")))?
    } else {
        arg.to_string()
    };
    let pairs: Vec<String> = text
        .lines()
        .map(|l| l.trim())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .flat_map(|l| l.split(';'))
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| match p.split_once(':') {
            Some(_) => p.to_string(),
            None => p.split_whitespace().collect::<Vec<_>>().join(":"),
        })
        .collect();
    let joined = pairs.join(";");
    let curve = QualityCurve::parse(&joined)?;
    Ok(curve.to_string())
}

fn maze_spec(a: &MazeArgs, seed: u64) -> CliResult<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    let listed = [
        ("maze", &a.maze),
        ("policy", &a.policy),
        ("n", &a.n),
        ("eps", &a.eps),
        ("steps", &a.steps),
        ("path_noise", &a.path_noise),
        ("horizon", &a.horizon),
        ("mode", &a.mode),
        ("warm_start", &a.warm_start),
        ("state", &a.state),
        ("lambda", &a.lambda),
        ("alpha", &a.alpha),
        ("budget_factor", &a.budget_factor),
        ("budget", &a.budget),
    ];
    for (k, v) in listed {
        if let Some(v) = v {
            spec.set(k, v)?;
        }
    }
    if let Some(q) = &a.quality_curve {
        spec.set("quality_curve", &read_quality_curve(q)?)?;
    }
    if let Some(e) = a.episodes {
        spec.set("episodes", &e.to_string())?;
    }
    spec.set("seed", &seed.to_string())?;
    Ok(spec)
}

fn render_last_episode(cond: &maze::Condition) -> CliResult<String> {
    let last = cond.episodes - 1;
    let r = maze::run_episode_traced(&cond.maze, &cond.episode, cond.seed, last)?;
    let kind = cond.episode.policy.name();
    let mut paths = Vec::new();
    if let Some(snap) = &r.snapshot {
        for (i, (cells, artifact)) in snap.paths.iter().enumerate() {
            let style = if *artifact { PathStyle::Artifact } else { PathStyle::Plan };
            let label = if kind == "tat" { format!("branch {i}") } else { format!("plan {i}") };
            paths.push(LabeledPath::new(label, style, cells.clone()));
        }
        paths.push(LabeledPath::new("selected", PathStyle::Selected, snap.selected.clone()));
    }
    paths.push(LabeledPath::new("executed", PathStyle::Executed, r.path.clone()));
    Ok(maze::render_svg(&cond.maze, &paths)?)
}

fn maze_cmd(a: &MazeArgs) -> CliResult<()> {
    let started = Instant::now();
    let seed = resolve_seed(a.seed)?;
    let spec = maze_spec(a, seed)?;
    let conditions = spec.conditions()?;
    let mut rows = Vec::with_capacity(conditions.len());
    for c in &conditions {
        let results = c.run(a.workers)?;
        rows.push(maze::ResultRow::from_episodes(c.clone(), &results));
    }
    let csv = maze::rows_to_csv(&rows);

    let mut params: Vec<(String, String)> = Vec::new();
    let text = spec.to_text();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once(" = ") {
            let flag = match k {
                "path_noise" => "path-noise",
                "warm_start" => "warm-start",
                "budget_factor" => "budget-factor",
                "quality_curve" => "quality-curve",
                other => other,
            };
            params.push((flag.to_string(), v.to_string()));
        }
    }
    params.push(("workers".into(), a.workers.to_string()));
    params.extend(path_param(&a.out).into_iter().map(|(k, v)| (k.to_string(), v)));
    let mut manifest = RunManifest {
        command: "maze".into(),
        params,
        outputs: Vec::new(),
        duration: Default::default(),
    };

    if let Some(svg_path) = &a.render {
        let last = conditions.last().expect("a spec yields at least one condition");
        write_file(svg_path, &render_last_episode(last)?)?;
        manifest.params.push(("render".into(), svg_path.display().to_string()));
        manifest.outputs.push(svg_path.clone());
        if a.out.is_none() {
            manifest.duration = started.elapsed();
            manifest
                .write_next_to(svg_path)
                .map_err(|e| CliError::Io(format!("cannot write manifest: {e}")))?;
        }
    }
    emit(&csv, a.out.as_deref(), manifest, started)
}

fn erf_check(a: &ErfCheckArgs) -> CliResult<()> {
    let started = Instant::now();
    if a.step.is_nan() || a.step <= 0.0 || !a.x_min.is_finite() || !a.x_max.is_finite() || a.x_max < a.x_min {
        return Err(CliError::Usage("need finite x-min <= x-max and step > 0".into()));
    }
    let count = ((a.x_max - a.x_min) / a.step + 1e-9).floor() as u64;
    let mut csv = String::from("x,erf,quadrature,abs_error,odd_sum\n");
    let mut worst = 0.0f64;
    let mut worst_x = a.x_min;
    for i in 0..=count {
        let x = a.x_min + i as f64 * a.step;
        // avoid printing -0 or 1e-17 for the origin of a symmetric grid
        let x = if x.abs() < a.step * 1e-9 { 0.0 } else { x };
        let e = theory::erf(x)?;
        let q = quadrature::erf_by_quadrature(x);
        let dev = (e - q).abs();
        if dev > worst {
            worst = dev;
            worst_x = x;
        }
        let odd = theory::erf(-x)? + e;
        csv.push_str(&format!("{},{},{},{},{}\n", sig12(x), sig12(e), sig12(q), sig12(dev), sig12(odd)));
    }
    let mut params = vec![
        ("x-min", sig12(a.x_min)),
        ("x-max", sig12(a.x_max)),
        ("step", sig12(a.step)),
        ("tolerance", sig12(a.tolerance)),
    ];
    params.extend(path_param(&a.out));
    emit(&csv, a.out.as_deref(), new_manifest("erf-check", params), started)?;
    eprintln!(
        "max |erf - quadrature| = {} at x = {} over {} points",
        sig(worst),
        sig12(worst_x),
        count + 1
    );
    if worst < a.tolerance {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "deviation {} is not below {}",
            sig(worst),
            sig12(a.tolerance)
        )))
    }
}

fn sig(x: f64) -> String {
    tatkit::fmt::sig(x, 3)
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::BoundTable(a) => bound_table(a),
        Command::Montecarlo(a) => montecarlo(a),
        Command::Maze(a) => maze_cmd(a),
        Command::ErfCheck(a) => erf_check(a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
