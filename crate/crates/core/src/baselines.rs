//! Cross-entropy method and MPPI on the same targets as the diffusion sampler.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{
    batch_mean, draw_candidate, evaluate_batch, with_workers, BestCandidate, DiffusionTrace, Evaluation, Target,
    TraceRecord,
};
use crate::dynamics::TaskSpec;
use crate::error::MbdError;
use crate::objectives::{BlackBoxRun, ObjectiveProblem};
use crate::streams::{Purpose, StreamKey};
use crate::trajopt::{ConstraintMode, TrajOptRun, TrajectoryTarget};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EliteMode {
    /// Mean update by softmax weights `exp(-J/λ)`; the std stays fixed.
    Softmax { temperature: f64 },
    /// Mean and std of the best `k`, blended with the previous values by `smoothing`.
    TopK { k: usize, smoothing: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CemConfig {
    pub n_iters: usize,
    pub n_samples: usize,
    pub elite_mode: EliteMode,
    pub init_std: f64,
    /// Starting mean in sampler coordinates; zeros when absent.
    pub init_mean: Option<Vec<f64>>,
    /// Lower bound on the per-coordinate std in top-k mode.
    pub min_std: f64,
    pub workers: usize,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            n_iters: 100,
            n_samples: 100,
            elite_mode: EliteMode::TopK { k: 10, smoothing: 0.0 },
            init_std: 1.0,
            init_mean: None,
            min_std: 1e-6,
            workers: 0,
        }
    }
}

impl CemConfig {
    /// Top-k CEM keeping a tenth of each batch.
    pub fn top_tenth(n_iters: usize, n_samples: usize, init_std: f64) -> Self {
        Self {
            n_iters,
            n_samples,
            elite_mode: EliteMode::TopK { k: (n_samples / 10).max(1), smoothing: 0.0 },
            init_std,
            ..Self::default()
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), MbdError> {
        if self.n_iters == 0 || self.n_samples == 0 {
            return Err(MbdError::InvalidConfig("CEM needs at least one iteration and one sample".into()));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return Err(MbdError::InvalidConfig(format!("init_std must be positive, got {}", self.init_std)));
        }
        match self.elite_mode {
            EliteMode::Softmax { temperature } if temperature.is_nan() || temperature <= 0.0 => {
                return Err(MbdError::InvalidConfig("softmax temperature must be positive".into()));
            }
            EliteMode::TopK { k, smoothing } => {
                if k == 0 || k > self.n_samples {
                    return Err(MbdError::InvalidConfig(format!("k = {k} must lie in 1..={}", self.n_samples)));
                }
                if !(0.0..1.0).contains(&smoothing) {
                    return Err(MbdError::InvalidConfig("smoothing must lie in [0, 1)".into()));
                }
            }
            _ => {}
        }
        if let Some(m) = &self.init_mean {
            if m.len() != dim {
                return Err(MbdError::DimensionMismatch { expected: dim, got: m.len() });
            }
        }
        Ok(())
    }
}

/// A baseline run in sampler coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOutcome {
    /// Final mean after projection.
    pub solution: Vec<f64>,
    pub solution_eval: Evaluation,
    pub trace: DiffusionTrace,
}

struct Tracker {
    best: Option<BestCandidate>,
    j_min: f64,
    records: Vec<TraceRecord>,
}

impl Tracker {
    fn new() -> Self {
        Self { best: None, j_min: f64::INFINITY, records: Vec::new() }
    }

    fn observe(&mut self, y: &[f64], e: &Evaluation, step: usize) {
        if e.is_feasible() && e.cost < self.j_min {
            self.j_min = e.cost;
        }
        let replace = self.best.as_ref().is_none_or(|b| e.better_than(&b.eval));
        if replace {
            self.best = Some(BestCandidate { y: y.to_vec(), eval: *e, step });
        }
    }

    fn finish<T: Target + ?Sized>(mut self, target: &T, mut mean: Vec<f64>, lambda: f64) -> BaselineOutcome {
        target.project(&mut mean);
        let eval = target.evaluate(&mean, lambda);
        self.observe(&mean, &eval, 0);
        if let Some(last) = self.records.last_mut() {
            last.j_min = self.j_min;
        }
        BaselineOutcome { solution: mean, solution_eval: eval, trace: DiffusionTrace { records: self.records, best: self.best } }
    }
}

/// Runs CEM on `target`. Iteration `k` (1-based) draws its candidates from
/// the candidate streams at step `k`, the same streams the diffusion sampler
/// uses at step `i = k`.
pub fn run_cem<T: Target + ?Sized>(target: &T, cfg: &CemConfig, seed: u64) -> Result<BaselineOutcome, MbdError> {
    let dim = target.dim();
    cfg.validate(dim)?;
    with_workers(cfg.workers, || cem_loop(target, cfg, seed, dim))
}

fn cem_loop<T: Target + ?Sized>(target: &T, cfg: &CemConfig, seed: u64, dim: usize) -> Result<BaselineOutcome, MbdError> {
    let key = StreamKey::new(seed);
    let lambda = match cfg.elite_mode {
        EliteMode::Softmax { temperature } => temperature,
        EliteMode::TopK { .. } => 1.0,
    };
    let mut mean = cfg.init_mean.clone().unwrap_or_else(|| vec![0.0; dim]);
    let mut std = vec![cfg.init_std; dim];
    let mut tr = Tracker::new();

    for k in 1..=cfg.n_iters {
        let draws: Vec<Vec<f64>> = (0..cfg.n_samples)
            .into_par_iter()
            .map(|j| draw_candidate(&mean, &std, key, k, j))
            .collect();
        let batch = evaluate_batch(target, draws, lambda);
        let mut cost_sum = 0.0;
        for (y, e) in &batch {
            cost_sum += e.cost;
            tr.observe(y, e, k);
        }
        let j_mean_batch = cost_sum / batch.len() as f64;

        let (next, ess, used_fallback) = match cfg.elite_mode {
            EliteMode::Softmax { .. } => {
                let (wm, fb) = batch_mean(target, batch, lambda, k)?;
                (wm.mean, wm.ess, fb)
            }
            EliteMode::TopK { k: n_elite, smoothing } => {
                let mut order: Vec<usize> = (0..batch.len()).collect();
                order.sort_by(|&a, &b| {
                    let (ea, eb) = (&batch[a].1, &batch[b].1);
                    ea.violation.total_cmp(&eb.violation).then(ea.cost.total_cmp(&eb.cost))
                });
                let elites = &order[..n_elite];
                let mut e_mean = vec![0.0; dim];
                for &j in elites {
                    for (m, v) in e_mean.iter_mut().zip(&batch[j].0) {
                        *m += v / n_elite as f64;
                    }
                }
                let mut e_var = vec![0.0; dim];
                for &j in elites {
                    for ((s, v), m) in e_var.iter_mut().zip(&batch[j].0).zip(&e_mean) {
                        *s += (v - m) * (v - m) / n_elite as f64;
                    }
                }
                for d in 0..dim {
                    std[d] = (smoothing * std[d] + (1.0 - smoothing) * e_var[d].sqrt()).max(cfg.min_std);
                    e_mean[d] = smoothing * mean[d] + (1.0 - smoothing) * e_mean[d];
                }
                (e_mean, n_elite as f64, false)
            }
        };
        tr.records.push(TraceRecord {
            step: k,
            iterate: std::mem::replace(&mut mean, next.clone()),
            mean: next,
            j_min: tr.j_min,
            j_mean_batch,
            ess,
            used_fallback,
        });
    }
    Ok(tr.finish(target, mean, lambda))
}

/// CEM on an objective, in the same unit coordinates the diffusion sampler uses.
pub fn run_cem_objective(problem: &ObjectiveProblem, cfg: &CemConfig, seed: u64) -> Result<BlackBoxRun, MbdError> {
    let out = run_cem(&problem.target(), cfg, seed)?;
    Ok(BlackBoxRun::from_unit(problem, &out.solution, out.solution_eval.cost, out.trace))
}

/// CEM over a task's normalized control sequence.
pub fn run_cem_trajopt(task: &TaskSpec, cfg: &CemConfig, mode: ConstraintMode, seed: u64) -> Result<TrajOptRun, MbdError> {
    let target = TrajectoryTarget::new(task, mode);
    let out = run_cem(&target, cfg, seed)?;
    TrajOptRun::from_outcome(&target, &out.solution, out.trace)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MppiConfig {
    pub n_iters: usize,
    pub n_samples: usize,
    pub temperature: f64,
    /// Perturbation std in normalized control units.
    pub noise_std: f64,
    pub constraint_mode: ConstraintMode,
    pub workers: usize,
}

impl Default for MppiConfig {
    fn default() -> Self {
        Self {
            n_iters: 100,
            n_samples: 100,
            temperature: 0.1,
            noise_std: 0.3,
            constraint_mode: ConstraintMode::Hard,
            workers: 0,
        }
    }
}

impl MppiConfig {
    pub fn validate(&self) -> Result<(), MbdError> {
        if self.n_iters == 0 || self.n_samples == 0 {
            return Err(MbdError::InvalidConfig("MPPI needs at least one iteration and one sample".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(MbdError::InvalidConfig("MPPI temperature must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(MbdError::InvalidConfig("noise_std must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Iterated open-loop MPPI: perturb the nominal sequence, re-weight by
/// `exp(-J/λ)`, and replace the nominal by the weighted mean.
pub fn run_mppi_target<T: Target + ?Sized>(
    target: &T,
    cfg: &MppiConfig,
    seed: u64,
    nominal: Vec<f64>,
) -> Result<BaselineOutcome, MbdError> {
    cfg.validate()?;
    if nominal.len() != target.dim() {
        return Err(MbdError::DimensionMismatch { expected: target.dim(), got: nominal.len() });
    }
    with_workers(cfg.workers, || {
        let key = StreamKey::new(seed);
        let lambda = cfg.temperature;
        let mut nominal = nominal;
        target.project(&mut nominal);
        let mut tr = Tracker::new();
        for k in 1..=cfg.n_iters {
            let draws: Vec<Vec<f64>> = (0..cfg.n_samples)
                .into_par_iter()
                .map(|j| {
                    let z = key.normals(Purpose::Baseline, k, j, nominal.len());
                    nominal.iter().zip(z).map(|(m, z)| m + cfg.noise_std * z).collect()
                })
                .collect();
            let batch = evaluate_batch(target, draws, lambda);
            let mut cost_sum = 0.0;
            for (y, e) in &batch {
                cost_sum += e.cost;
                tr.observe(y, e, k);
            }
            let j_mean_batch = cost_sum / batch.len() as f64;
            let (wm, used_fallback) = batch_mean(target, batch, lambda, k)?;
            tr.records.push(TraceRecord {
                step: k,
                iterate: std::mem::replace(&mut nominal, wm.mean.clone()),
                mean: wm.mean,
                j_min: tr.j_min,
                j_mean_batch,
                ess: wm.ess,
                used_fallback,
            });
        }
        Ok(tr.finish(target, nominal, lambda))
    })
}

/// MPPI on a trajectory task from a zero nominal control sequence.
pub fn run_mppi(task: &TaskSpec, cfg: &MppiConfig, seed: u64) -> Result<TrajOptRun, MbdError> {
    let target = TrajectoryTarget::new(task, cfg.constraint_mode);
    let out = run_mppi_target(&target, cfg, seed, vec![0.0; task.control_dim()])?;
    TrajOptRun::from_outcome(&target, &out.solution, out.trace)
}
