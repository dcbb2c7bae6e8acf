//! Open-loop trajectory optimization with the diffusion sampler.
//!
//! The decision variable is the control sequence `U ∈ R^{T × n_u}`, written
//! in normalized coordinates: each control bound `[lo, hi]` maps to
//! `[-1, 1]`, and draws are clamped to that box before a rollout.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::demos::{mixed_log_weight, Demonstration};
use crate::diffusion::{diffuse, DiffusionTrace, Evaluation, MbdConfig, Target};
use crate::dynamics::{StepScratch, TaskSpec};
use crate::error::MbdError;

/// How constraint violations enter the log weight.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ConstraintMode {
    /// Any violation gives weight zero.
    #[default]
    Hard,
    /// Subtract `kappa · violation` from the log weight.
    Penalty { kappa: f64 },
}

/// A rolled-out trajectory. Row `t` holds `u_t` and the state `x_t` it
/// produced; `states` has `T + 1` rows with `x_0` first.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n_x: usize,
    pub n_u: usize,
    pub states: Vec<f64>,
    pub controls: Vec<f64>,
    pub stage_costs: Vec<f64>,
    pub terminal_cost: f64,
    /// Constraint values per row, `n_g` columns.
    pub constraints: Vec<f64>,
    pub n_g: usize,
    pub total_cost: f64,
    /// Sum over rows and components of `max(0, g)`.
    pub violation: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.stage_costs.len()
    }

    /// State `x_t`, `t = 0..=T`.
    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.n_x..(t + 1) * self.n_x]
    }

    /// Control `u_t`, `t = 1..=T`.
    pub fn control(&self, t: usize) -> &[f64] {
        &self.controls[(t - 1) * self.n_u..t * self.n_u]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.horizon())
    }

    pub fn is_feasible(&self) -> bool {
        self.violation == 0.0
    }

    /// Columns `t, x*, u*, l, g*`; row 0 has the initial state and empty controls.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n_x).map(|k| format!("x{k}")));
        header.extend((0..self.n_u).map(|k| format!("u{k}")));
        header.push("stage_cost".into());
        header.extend((0..self.n_g).map(|k| format!("g{k}")));
        writeln!(out, "{}", header.join(","))?;
        for t in 0..=self.horizon() {
            let mut row = vec![t.to_string()];
            row.extend(self.state(t).iter().map(f64::to_string));
            if t == 0 {
                row.extend(std::iter::repeat_n(String::new(), self.n_u + 1 + self.n_g));
            } else {
                row.extend(self.control(t).iter().map(f64::to_string));
                row.push(self.stage_costs[t - 1].to_string());
                row.extend(self.constraints[(t - 1) * self.n_g..t * self.n_g].iter().map(f64::to_string));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Simulates `controls` (physical units, `T × n_u` row-major) from `x_init`.
pub fn rollout(task: &TaskSpec, controls: &[f64]) -> Result<Trajectory, MbdError> {
    let (n_x, n_u, horizon) = (task.model.n_x, task.model.n_u, task.horizon);
    if controls.len() != horizon * n_u {
        return Err(MbdError::DimensionMismatch { expected: horizon * n_u, got: controls.len() });
    }
    if task.x_init.len() != n_x {
        return Err(MbdError::DimensionMismatch { expected: n_x, got: task.x_init.len() });
    }
    let mut states = Vec::with_capacity((horizon + 1) * n_x);
    states.extend_from_slice(&task.x_init);
    let mut clamped = Vec::with_capacity(controls.len());
    let mut stage_costs = Vec::with_capacity(horizon);
    let mut constraints = Vec::new();
    let mut scratch = StepScratch::default();
    let mut next = vec![0.0; n_x];
    let mut n_g = 0;
    for t in 1..=horizon {
        let u = task.model.clamp_control(&controls[(t - 1) * n_u..t * n_u]);
        task.model.step_into(&states[(t - 1) * n_x..t * n_x], &u, &mut next, &mut scratch);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(MbdError::NonFiniteState { t });
        }
        states.extend_from_slice(&next);
        stage_costs.push((task.stage_cost)(&next, &u, t));
        if let Some(g) = &task.constraint {
            let before = constraints.len();
            g(&next, &u, &mut constraints);
            n_g = constraints.len() - before;
        }
        clamped.extend_from_slice(&u);
    }
    let terminal_cost = (task.terminal_cost)(&states[horizon * n_x..]);
    let total_cost = stage_costs.iter().sum::<f64>() + terminal_cost;
    let violation = constraints.iter().map(|g| g.max(0.0)).sum();
    Ok(Trajectory {
        n_x,
        n_u,
        states,
        controls: clamped,
        stage_costs,
        terminal_cost,
        constraints,
        n_g,
        total_cost,
        violation,
    })
}

/// `-J/λ`, with hard rejection or a linear penalty for violations.
pub fn traj_log_weight(traj: &Trajectory, temperature: f64, mode: ConstraintMode) -> f64 {
    let base = -traj.total_cost / temperature;
    match mode {
        ConstraintMode::Hard if traj.violation > 0.0 => f64::NEG_INFINITY,
        ConstraintMode::Hard => base,
        ConstraintMode::Penalty { kappa } => base - kappa * traj.violation,
    }
}

/// Penalty weight used when a hard-constrained step rejects every candidate.
pub fn fallback_kappa(temperature: f64) -> f64 {
    10.0 / temperature
}

/// Normalized controls in `[-1, 1]` to physical units.
pub fn denormalize_controls(task: &TaskSpec, z: &[f64]) -> Vec<f64> {
    let m = &task.model;
    z.iter()
        .enumerate()
        .map(|(k, &v)| {
            let (lo, hi) = (m.u_low[k % m.n_u], m.u_high[k % m.n_u]);
            0.5 * (lo + hi) + 0.5 * (hi - lo) * v
        })
        .collect()
}

pub fn normalize_controls(task: &TaskSpec, u: &[f64]) -> Vec<f64> {
    let m = &task.model;
    u.iter()
        .enumerate()
        .map(|(k, &v)| {
            let (lo, hi) = (m.u_low[k % m.n_u], m.u_high[k % m.n_u]);
            (2.0 * v - (lo + hi)) / (hi - lo)
        })
        .collect()
}

/// A task seen by the sampler, optionally guided by a demonstration.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryTarget<'a> {
    pub task: &'a TaskSpec,
    pub mode: ConstraintMode,
    pub demo: Option<&'a Demonstration>,
}

impl<'a> TrajectoryTarget<'a> {
    pub fn new(task: &'a TaskSpec, mode: ConstraintMode) -> Self {
        Self { task, mode, demo: None }
    }

    pub fn with_demo(mut self, demo: &'a Demonstration) -> Self {
        self.demo = Some(demo);
        self
    }

    pub fn rollout_normalized(&self, z: &[f64]) -> Result<Trajectory, MbdError> {
        rollout(self.task, &denormalize_controls(self.task, z))
    }
}

impl Target for TrajectoryTarget<'_> {
    fn dim(&self) -> usize {
        self.task.control_dim()
    }

    fn project(&self, y: &mut [f64]) {
        for v in y {
            *v = v.clamp(-1.0, 1.0);
        }
    }

    fn evaluate(&self, y: &[f64], temperature: f64) -> Evaluation {
        match self.rollout_normalized(y) {
            Ok(traj) => {
                let log_weight = match self.demo {
                    Some(d) => mixed_log_weight(&traj, d, temperature, self.mode),
                    None => traj_log_weight(&traj, temperature, self.mode),
                };
                Evaluation { cost: traj.total_cost, violation: traj.violation, log_weight }
            }
            Err(_) => Evaluation { cost: f64::INFINITY, violation: f64::INFINITY, log_weight: f64::NEG_INFINITY },
        }
    }

    fn fallback_log_weight(&self, eval: &Evaluation, temperature: f64) -> Option<f64> {
        if !eval.cost.is_finite() || !eval.violation.is_finite() {
            return None;
        }
        Some(-eval.cost / temperature - fallback_kappa(temperature) * eval.violation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajOptRun {
    /// Rollout of the final iterate.
    pub final_trajectory: Trajectory,
    /// Best rollout seen anywhere in the run: feasible first, then lowest cost.
    pub best_trajectory: Trajectory,
    pub trace: DiffusionTrace,
}

impl TrajOptRun {
    /// Task success for the best trajectory.
    pub fn succeeded(&self, task: &TaskSpec) -> bool {
        task_success(task, &self.best_trajectory)
    }
}

pub fn task_success(task: &TaskSpec, traj: &Trajectory) -> bool {
    traj.is_feasible() && (task.final_error)(traj.final_state()) < task.success_tol
}

/// Optimizes the control sequence of `task` without demonstrations.
pub fn run_mbd_trajopt(task: &TaskSpec, config: &MbdConfig, mode: ConstraintMode) -> Result<TrajOptRun, MbdError> {
    run_target(TrajectoryTarget::new(task, mode), config)
}

/// Optimizes with demonstration-augmented weights.
pub fn run_mbd_trajopt_with_demo(
    task: &TaskSpec,
    config: &MbdConfig,
    mode: ConstraintMode,
    demo: &Demonstration,
) -> Result<TrajOptRun, MbdError> {
    demo.check_shape(task)?;
    run_target(TrajectoryTarget::new(task, mode).with_demo(demo), config)
}

fn run_target(target: TrajectoryTarget<'_>, config: &MbdConfig) -> Result<TrajOptRun, MbdError> {
    let out = diffuse(&target, config)?;
    TrajOptRun::from_outcome(&target, &out.solution, out.trace)
}

impl TrajOptRun {
    /// Rolls out the final and best iterates of any sampler run on `target`.
    pub fn from_outcome(target: &TrajectoryTarget<'_>, solution: &[f64], trace: DiffusionTrace) -> Result<Self, MbdError> {
        let final_trajectory = target.rollout_normalized(solution)?;
        let best_trajectory = match &trace.best {
            Some(b) => target.rollout_normalized(&b.y)?,
            None => final_trajectory.clone(),
        };
        Ok(Self { final_trajectory, best_trajectory, trace })
    }
}
