//! Seeded experiment execution and the artifacts it leaves on disk.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mbd_core::baselines::{run_cem_objective, run_cem_trajopt, run_mppi};
use mbd_core::demos::{path_to_demonstration, rrt_plan, Demonstration, RrtConfig};
use mbd_core::dynamics::TaskSpec;
use mbd_core::trajopt::task_success;
use mbd_core::{run_mbd, run_mbd_trajopt, run_mbd_trajopt_with_demo, DiffusionTrace, MbdError, TrajOptRun, Trajectory};
use serde::{Deserialize, Serialize};

use crate::config::{DemoSettings, Method, RunConfig};
use crate::error::BenchError;
use crate::problems::{self, Problem};

/// Per-seed outcome, as written to `seed_<s>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Cost of the best candidate seen (feasible first).
    pub cost: f64,
    /// Cost of the final iterate.
    pub final_cost: f64,
    pub feasible: bool,
    pub success: bool,
    pub wall_time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub violation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
}

/// Run-level statistics, as written to `aggregate.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub task: String,
    pub method: String,
    pub demo: bool,
    /// NaN (written as `null`) when no seed succeeded, as are the other averages.
    #[serde(deserialize_with = "nan_if_null")]
    pub mean_cost: f64,
    /// Sample standard deviation; 0 for a single seed.
    #[serde(deserialize_with = "nan_if_null")]
    pub std_cost: f64,
    pub success_rate: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub mean_wall_time_ms: f64,
    pub seeds: Vec<SeedSummary>,
    pub failed_seeds: Vec<u64>,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Aggregate {
    pub fn from_seeds(task: &str, method: Method, demo: bool, seeds: Vec<SeedSummary>, failed_seeds: Vec<u64>) -> Self {
        let costs: Vec<f64> = seeds.iter().map(|s| s.cost).collect();
        let times: Vec<f64> = seeds.iter().map(|s| s.wall_time_ms).collect();
        let (mean_cost, std_cost) = mean_std(&costs);
        let n = seeds.len().max(1) as f64;
        Self {
            task: task.to_string(),
            method: method.name().to_string(),
            demo,
            mean_cost,
            std_cost,
            success_rate: seeds.iter().filter(|s| s.success).count() as f64 / n,
            mean_wall_time_ms: mean_std(&times).0,
            seeds,
            failed_seeds,
        }
    }
}

/// Everything one seed produced, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub summary: SeedSummary,
    pub trace: DiffusionTrace,
    pub best_trajectory: Option<Trajectory>,
    pub demo: Option<Demonstration>,
}

/// Builds the demonstration a run attaches for `seed`.
pub fn make_demo(settings: &DemoSettings, task: &TaskSpec, seed: u64) -> Result<Demonstration, BenchError> {
    match settings {
        DemoSettings::Rrt { rrt, sigma } => plan_demo(task, &RrtConfig { seed, ..*rrt }, *sigma),
        DemoSettings::Csv { path } => {
            let f = File::open(path).map_err(|e| BenchError::io(path, e))?;
            let demo = Demonstration::read_csv(BufReader::new(f))
                .map_err(|source| BenchError::Format { path: path.clone(), source })?;
            demo.check_shape(task).map_err(|e| BenchError::ConfigInvalid(format!("{}: {e}", path.display())))?;
            Ok(demo)
        }
    }
}

/// Runs RRT on a planar task and converts the path into a demonstration.
pub fn plan_demo(task: &TaskSpec, rrt: &RrtConfig, sigma: f64) -> Result<Demonstration, BenchError> {
    let layout = task
        .planar
        .as_ref()
        .ok_or_else(|| BenchError::ConfigInvalid(format!("task '{}' has no planar layout for RRT", task.name)))?;
    let path = rrt_plan(layout.start, layout.goal, &layout.region, rrt)?;
    path_to_demonstration(&path, task, sigma).map_err(|e| BenchError::ConfigInvalid(e.to_string()))
}

fn trajectory_summary(seed: u64, task: &TaskSpec, run: &TrajOptRun, ms: f64) -> SeedSummary {
    let best = &run.best_trajectory;
    SeedSummary {
        seed,
        cost: best.total_cost,
        final_cost: run.final_trajectory.total_cost,
        feasible: best.is_feasible(),
        success: task_success(task, best),
        wall_time_ms: ms,
        final_error: Some((task.final_error)(best.final_state())),
        violation: Some(best.violation),
        accuracy: None,
    }
}

/// Runs one seed of `cfg` on an already built problem.
pub fn run_seed(cfg: &RunConfig, problem: &Problem, seed: u64) -> Result<SeedRun, BenchError> {
    let failed = |e: MbdError| BenchError::SeedFailed { seed, reason: e.to_string() };
    match problem {
        Problem::Trajectory(task) => {
            let demo = match &cfg.demo {
                Some(d) => Some(make_demo(d, task, seed)?),
                None => None,
            };
            let start = Instant::now();
            let run = match cfg.method {
                Method::Mbd => {
                    let m = cfg.mbd.to_config(seed)?;
                    match &demo {
                        Some(d) => run_mbd_trajopt_with_demo(task, &m, cfg.constraint_mode, d),
                        None => run_mbd_trajopt(task, &m, cfg.constraint_mode),
                    }
                }
                Method::Cem => run_cem_trajopt(task, &cfg.cem, cfg.constraint_mode, seed),
                Method::Mppi => run_mppi(task, &cfg.mppi, seed),
            }
            .map_err(failed)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(SeedRun {
                summary: trajectory_summary(seed, task, &run, ms),
                best_trajectory: Some(run.best_trajectory),
                trace: run.trace,
                demo,
            })
        }
        Problem::BlackBox { problem, classification } => {
            let start = Instant::now();
            let run = match cfg.method {
                Method::Mbd => run_mbd(problem, &cfg.mbd.to_config(seed)?),
                Method::Cem => run_cem_objective(problem, &cfg.cem, seed),
                Method::Mppi => Err(MbdError::InvalidConfig("mppi needs a trajectory task".into())),
            }
            .map_err(failed)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let success = run.best_cost.is_finite() && cfg.success_threshold.is_none_or(|t| run.best_cost <= t);
            Ok(SeedRun {
                summary: SeedSummary {
                    seed,
                    cost: run.best_cost,
                    final_cost: run.solution_cost,
                    feasible: true,
                    success,
                    wall_time_ms: ms,
                    final_error: None,
                    violation: None,
                    accuracy: classification.as_ref().and_then(|c| c.accuracy(&run.best)),
                },
                trace: run.trace,
                best_trajectory: None,
                demo: None,
            })
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    File::create(path).map(BufWriter::new).map_err(|e| BenchError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| BenchError::io(path, e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| BenchError::io(path, e))
}

pub fn trace_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("seed_{seed}_trace.csv"))
}

fn write_seed(out_dir: &Path, run: &SeedRun) -> Result<(), BenchError> {
    let seed = run.summary.seed;
    let path = trace_path(out_dir, seed);
    let mut w = create(&path)?;
    run.trace.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| BenchError::io(&path, e))?;
    if let Some(traj) = &run.best_trajectory {
        let path = out_dir.join(format!("seed_{seed}_trajectory.csv"));
        let mut w = create(&path)?;
        traj.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| BenchError::io(&path, e))?;
    }
    if let Some(demo) = &run.demo {
        let path = out_dir.join(format!("seed_{seed}_demo.csv"));
        let mut w = create(&path)?;
        demo.write_csv(&mut w).map_err(|source| BenchError::Format { path: path.clone(), source })?;
        w.flush().map_err(|e| BenchError::io(&path, e))?;
    }
    write_json(&out_dir.join(format!("seed_{seed}.json")), &run.summary)
}

/// Obstacle geometry for plotting, when the task has any.
fn write_layout(out_dir: &Path, problem: &Problem) -> Result<(), BenchError> {
    if let Problem::Trajectory(TaskSpec { planar: Some(layout), .. }) = problem {
        #[derive(Serialize)]
        struct Layout<'a> {
            start: [f64; 2],
            goal: [f64; 2],
            region: &'a mbd_core::geometry::ForbiddenRegion,
        }
        let l = Layout { start: layout.start, goal: layout.goal, region: &layout.region };
        write_json(&out_dir.join("layout.json"), &l)?;
    }
    Ok(())
}

/// Runs every seed, writes per-seed artifacts and `aggregate.json`.
///
/// Failed seeds are skipped and listed; the call then returns
/// [`BenchError::SeedsFailed`] after the aggregate is written.
pub fn run_experiment(cfg: &RunConfig) -> Result<Aggregate, BenchError> {
    cfg.validate()?;
    let problem = problems::build(&cfg.task, cfg.horizon, cfg.mnist_dir.as_deref(), cfg.mnist_subset)?;
    if cfg.method == Method::Cem {
        let dim = match &problem {
            Problem::Trajectory(t) => t.control_dim(),
            Problem::BlackBox { problem, .. } => problem.dim(),
        };
        cfg.cem.validate(dim).map_err(|e| BenchError::ConfigInvalid(e.to_string()))?;
    }
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| BenchError::io(&cfg.out_dir, e))?;
    write_layout(&cfg.out_dir, &problem)?;

    let mut summaries = Vec::new();
    let mut failed = Vec::new();
    for &seed in &cfg.seeds {
        match run_seed(cfg, &problem, seed) {
            Ok(run) => {
                write_seed(&cfg.out_dir, &run)?;
                summaries.push(run.summary);
            }
            Err(e @ (BenchError::SeedFailed { .. } | BenchError::Plan(_))) => {
                eprintln!("{e}");
                failed.push(seed);
            }
            Err(e) => return Err(e),
        }
    }
    let agg = Aggregate::from_seeds(&cfg.task, cfg.method, cfg.demo.is_some(), summaries, failed.clone());
    write_json(&cfg.out_dir.join("aggregate.json"), &agg)?;
    if !failed.is_empty() {
        return Err(BenchError::SeedsFailed { failed: failed.len(), total: cfg.seeds.len() });
    }
    Ok(agg)
}

/// Last `j_min` of a trace CSV written by [`DiffusionTrace::write_csv`].
pub fn final_j_min_from_csv(text: &str) -> Option<f64> {
    let last = text.lines().skip(1).filter(|l| !l.trim().is_empty()).last()?;
    last.split(',').nth(1)?.trim().parse().ok()
}
