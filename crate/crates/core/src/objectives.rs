//! Box-bounded black-box test problems.
//!
//! The sampler works in unit coordinates: the box `[lower, upper]` is mapped
//! affinely onto `[-1, 1]^d`, and draws outside the unit box are clamped
//! before the cost is evaluated.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use crate::diffusion::{diffuse, DiffusionTrace, Evaluation, MbdConfig, Target};
use crate::error::MbdError;

pub mod mlp;

pub use mlp::{builtin_spiral, mlp_classification_objective, spiral_dataset, LabeledDataset, Mlp, MlpClassifier, MlpObjective};

pub type CostFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ObjectiveProblem {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: CostFn,
}

impl fmt::Debug for ObjectiveProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveProblem")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .finish()
    }
}

impl ObjectiveProblem {
    pub fn new(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        cost: CostFn,
    ) -> Result<Self, MbdError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(MbdError::InvalidConfig("box bounds must be nonempty and equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l >= u) {
            return Err(MbdError::InvalidConfig("box requires lower < upper elementwise".into()));
        }
        Ok(Self { name: name.into(), lower, upper, cost })
    }

    /// Same box `[lo, hi]` on every coordinate.
    pub fn uniform_box(name: impl Into<String>, dim: usize, lo: f64, hi: f64, cost: CostFn) -> Result<Self, MbdError> {
        Self::new(name, vec![lo; dim], vec![hi; dim], cost)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<f64, MbdError> {
        if y.len() != self.dim() {
            return Err(MbdError::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        Ok((self.cost)(y))
    }

    /// Box coordinates to unit coordinates.
    pub fn map_to_unit(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| (2.0 * v - (l + u)) / (u - l))
            .collect()
    }

    /// Unit coordinates to box coordinates.
    pub fn map_to_box(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&l, &u))| 0.5 * (l + u) + 0.5 * (u - l) * v)
            .collect()
    }

    pub fn target(&self) -> ObjectiveTarget<'_> {
        ObjectiveTarget { problem: self }
    }
}

/// An [`ObjectiveProblem`] viewed in unit coordinates with `log w = -J/λ`.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveTarget<'a> {
    problem: &'a ObjectiveProblem,
}

impl Target for ObjectiveTarget<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn project(&self, y: &mut [f64]) {
        for v in y {
            *v = v.clamp(-1.0, 1.0);
        }
    }

    fn evaluate(&self, y: &[f64], temperature: f64) -> Evaluation {
        let cost = (self.problem.cost)(&self.problem.map_to_box(y));
        Evaluation { cost, violation: 0.0, log_weight: -cost / temperature }
    }
}

/// Outcome of a sampler run on an [`ObjectiveProblem`], in box coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BlackBoxRun {
    pub solution: Vec<f64>,
    pub solution_cost: f64,
    /// Lowest-cost point evaluated anywhere in the run.
    pub best: Vec<f64>,
    pub best_cost: f64,
    pub trace: DiffusionTrace,
}

impl BlackBoxRun {
    /// Converts a run in unit coordinates back to the problem's box.
    pub fn from_unit(problem: &ObjectiveProblem, solution: &[f64], solution_cost: f64, trace: DiffusionTrace) -> Self {
        let (best, best_cost) = match &trace.best {
            Some(b) => (problem.map_to_box(&b.y), b.eval.cost),
            None => (problem.map_to_box(solution), solution_cost),
        };
        Self { solution: problem.map_to_box(solution), solution_cost, best, best_cost, trace }
    }
}

/// Minimizes `problem` with the diffusion sampler.
pub fn run_mbd(problem: &ObjectiveProblem, config: &MbdConfig) -> Result<BlackBoxRun, MbdError> {
    let out = diffuse(&problem.target(), config)?;
    Ok(BlackBoxRun::from_unit(problem, &out.solution, out.solution_eval.cost, out.trace))
}

pub fn ackley_value(y: &[f64]) -> f64 {
    let (a, b, c) = (20.0, 0.2, 2.0 * PI);
    let n = y.len() as f64;
    let sq = y.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = y.iter().map(|v| (c * v).cos()).sum::<f64>() / n;
    -a * (-b * sq.sqrt()).exp() - cs.exp() + a + E
}

pub fn rastrigin_value(y: &[f64]) -> f64 {
    10.0 * y.len() as f64 + y.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

fn bump(y: f64, mu: f64, s: f64) -> f64 {
    (-(y - mu).powi(2) / (2.0 * s * s)).exp()
}

/// One-dimensional landscape with three basins; the deepest sits at 0.8.
pub fn multimodal_1d_value(y: f64) -> f64 {
    1.0 - (0.6 * bump(y, -1.2, 0.12) + 1.0 * bump(y, 0.8, 0.08) + 0.5 * bump(y, 1.6, 0.1))
}

pub const MULTIMODAL_1D_MINIMIZER: f64 = 0.8;

/// Ackley on `[-32.768, 32.768]^d`.
pub fn ackley(d: usize) -> Result<ObjectiveProblem, MbdError> {
    ObjectiveProblem::uniform_box(format!("ackley_{d}d"), d, -32.768, 32.768, Arc::new(ackley_value))
}

/// Rastrigin on `[-5.12, 5.12]^d`.
pub fn rastrigin(d: usize) -> Result<ObjectiveProblem, MbdError> {
    ObjectiveProblem::uniform_box(format!("rastrigin_{d}d"), d, -5.12, 5.12, Arc::new(rastrigin_value))
}

pub fn synthetic_multimodal_1d() -> ObjectiveProblem {
    ObjectiveProblem::uniform_box("multimodal_1d", 1, -3.0, 3.0, Arc::new(|y: &[f64]| multimodal_1d_value(y[0])))
        .expect("fixed box is valid")
}

/// Mass that `p(y) ∝ exp(-f(y)/λ)` on `[lo, hi]` puts on `{f ≤ eps}`,
/// by the midpoint rule on `n` cells.
pub fn grid_mass_below(f: impl Fn(f64) -> f64, lo: f64, hi: f64, temperature: f64, eps: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let values: Vec<f64> = (0..n).map(|k| f(lo + (k as f64 + 0.5) * h)).collect();
    let f_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut below, mut total) = (0.0, 0.0);
    for &v in &values {
        let w = (-(v - f_min) / temperature).exp();
        total += w;
        if v <= eps {
            below += w;
        }
    }
    below / total
}
