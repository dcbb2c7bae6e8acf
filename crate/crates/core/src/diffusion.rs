//! Model-based diffusion for generic optimization.
//!
//! The sampler never learns a score. At each step `i` it draws candidates
//! around the rescaled iterate, weights them by the (unnormalized) target
//! density `exp(-J/λ)`, and turns the weighted mean into a score estimate for
//! the Gaussian-smoothed density `p_i`. A backward step then moves the
//! iterate to step `i - 1`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::MbdError;
use crate::schedule::{IndexConvention, NoiseSchedule};
use crate::streams::{Purpose, StreamKey};

/// A candidate `Y⁰` and the log of its unnormalized target density.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub y: Vec<f64>,
    /// Finite, or `-inf` for a hard-rejected candidate. Never NaN.
    pub log_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMean {
    pub mean: Vec<f64>,
    /// Effective sample size `1 / Σ p_k²`.
    pub ess: f64,
}

/// Normalized softmax of `log_weights`, or `None` if every entry is `-inf`.
pub fn softmax(log_weights: &[f64]) -> Option<Vec<f64>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut w: Vec<f64> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    Some(w)
}

/// Softmax-weighted mean of the candidates and the effective sample size.
///
/// Weights are shifted by their maximum before exponentiation, so log
/// weights of any magnitude are safe.
pub fn weighted_mean(candidates: &[Candidate]) -> Result<WeightedMean, MbdError> {
    let dim = candidates.first().map_or(0, |c| c.y.len());
    let log_weights: Vec<f64> = candidates.iter().map(|c| c.log_weight).collect();
    let probs = softmax(&log_weights).ok_or(MbdError::AllRejected { step: 0 })?;
    let mut mean = vec![0.0; dim];
    for (c, &p) in candidates.iter().zip(&probs) {
        if p == 0.0 {
            continue;
        }
        if c.y.len() != dim {
            return Err(MbdError::DimensionMismatch { expected: dim, got: c.y.len() });
        }
        for (m, &y) in mean.iter_mut().zip(&c.y) {
            *m += p * y;
        }
    }
    let ess = 1.0 / probs.iter().map(|p| p * p).sum::<f64>();
    Ok(WeightedMean { mean, ess })
}

/// Monte Carlo score of `p_i` at `y_i` given the weighted mean `y_bar`:
/// `-y_i/(1-ᾱ_i) + √ᾱ_i/(1-ᾱ_i) · y_bar`.
pub fn estimate_score(y_i: &[f64], y_bar: &[f64], schedule: &NoiseSchedule, i: usize) -> Vec<f64> {
    let ab = schedule.alpha_bar(i);
    let denom = 1.0 - ab;
    let gain = ab.sqrt() / denom;
    y_i.iter()
        .zip(y_bar)
        .map(|(&y, &m)| -y / denom + gain * m)
        .collect()
}

/// Score ascent with step size `1-ᾱ_i`, then rescaling by `1/√α_i`.
pub fn mcsa_step(y_i: &[f64], score: &[f64], schedule: &NoiseSchedule, i: usize) -> Vec<f64> {
    let step = 1.0 - schedule.alpha_bar(i);
    let inv_sqrt_alpha = 1.0 / schedule.alpha(i).sqrt();
    y_i.iter()
        .zip(score)
        .map(|(&y, &s)| (y + step * s) * inv_sqrt_alpha)
        .collect()
}

/// Ancestral reverse-SDE step with caller-supplied standard normal noise `z`.
pub fn reverse_sde_step_with_noise(
    y_i: &[f64],
    score: &[f64],
    schedule: &NoiseSchedule,
    i: usize,
    z: &[f64],
) -> Vec<f64> {
    let alpha = schedule.alpha(i);
    let half_beta = 0.5 * (1.0 - alpha);
    let inv_sqrt_alpha = 1.0 / alpha.sqrt();
    let noise_scale = (1.0 - alpha).sqrt();
    y_i.iter()
        .zip(score)
        .zip(z)
        .map(|((&y, &s), &z)| (y + half_beta * s) * inv_sqrt_alpha + noise_scale * z)
        .collect()
}

/// Reverse-SDE step drawing its noise from `rng`.
pub fn reverse_sde_step<R: rand::Rng + ?Sized>(
    y_i: &[f64],
    score: &[f64],
    schedule: &NoiseSchedule,
    i: usize,
    rng: &mut R,
) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let z: Vec<f64> = (0..y_i.len()).map(|_| StandardNormal.sample(rng)).collect();
    reverse_sde_step_with_noise(y_i, score, schedule, i, &z)
}

/// Draws `center + std · z` using the candidate stream `(step, index)`.
///
/// Shared by the diffusion sampler and the softmax CEM baseline so that both
/// see identical candidates for identical `(seed, step, index)`.
pub fn draw_candidate(center: &[f64], std: &[f64], key: StreamKey, step: usize, index: usize) -> Vec<f64> {
    let z = key.normals(Purpose::Candidate, step, index, center.len());
    center
        .iter()
        .zip(std)
        .zip(z)
        .map(|((&c, &s), z)| c + s * z)
        .collect()
}

/// `n` independent draws from `Normal(y_i · scale, variance · I)` at step `i`.
///
/// A zero variance is floored so the draws stay well-defined.
pub fn sample_candidates(
    y_i: &[f64],
    schedule: &NoiseSchedule,
    i: usize,
    n: usize,
    convention: IndexConvention,
    key: StreamKey,
) -> Result<Vec<Vec<f64>>, MbdError> {
    let params = schedule.sampling_params(i, convention)?;
    let center: Vec<f64> = y_i.iter().map(|y| y * params.scale).collect();
    let std = vec![params.std_dev(); y_i.len()];
    Ok((0..n)
        .into_par_iter()
        .map(|k| draw_candidate(&center, &std, key, i, k))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardKind {
    #[default]
    Mcsa,
    ReverseSde,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbdConfig {
    pub schedule: NoiseSchedule,
    pub n_samples: usize,
    pub temperature: f64,
    pub seed: u64,
    pub backward_kind: BackwardKind,
    pub index_convention: IndexConvention,
    /// Worker threads for candidate evaluation; 0 uses the global pool.
    pub workers: usize,
}

impl Default for MbdConfig {
    fn default() -> Self {
        Self {
            schedule: NoiseSchedule::default_linear(),
            n_samples: 100,
            temperature: 0.1,
            seed: 0,
            backward_kind: BackwardKind::Mcsa,
            index_convention: IndexConvention::Current,
            workers: 0,
        }
    }
}

impl MbdConfig {
    pub fn validate(&self) -> Result<(), MbdError> {
        if self.n_samples == 0 {
            return Err(MbdError::InvalidConfig("n_samples must be at least 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(MbdError::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Result of evaluating one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cost: f64,
    /// Summed positive constraint values; zero when feasible.
    pub violation: f64,
    pub log_weight: f64,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        self.violation == 0.0
    }

    /// Feasible before infeasible, then lower violation, then lower cost.
    pub fn better_than(&self, other: &Evaluation) -> bool {
        match self.violation.total_cmp(&other.violation) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => self.cost < other.cost,
        }
    }
}

/// A problem the sampler can weight, expressed in the sampler's coordinates.
///
/// Implementations must be pure: the same `y` always yields the same
/// evaluation, and evaluation must be safe to run concurrently.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// Maps a raw draw onto the admissible set before evaluation. The
    /// projected point is what enters the weighted mean.
    fn project(&self, _y: &mut [f64]) {}

    fn evaluate(&self, y: &[f64], temperature: f64) -> Evaluation;

    /// Replacement log weight used for a step in which every candidate was
    /// rejected. `None` propagates the rejection.
    fn fallback_log_weight(&self, _eval: &Evaluation, _temperature: f64) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    /// Iterate `Y^i` entering the step.
    pub iterate: Vec<f64>,
    /// Weighted mean `Ȳ⁰` of the step's batch.
    pub mean: Vec<f64>,
    /// Lowest feasible cost seen so far, `inf` until a feasible candidate appears.
    pub j_min: f64,
    /// Mean cost over the batch.
    pub j_mean_batch: f64,
    pub ess: f64,
    pub used_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestCandidate {
    pub y: Vec<f64>,
    pub eval: Evaluation,
    /// Step at which it was drawn; 0 for the final iterate.
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiffusionTrace {
    pub records: Vec<TraceRecord>,
    pub best: Option<BestCandidate>,
}

impl DiffusionTrace {
    /// CSV columns: `step,j_min,j_mean_batch,ess,y_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,j_min,j_mean_batch,ess,y_norm")?;
        for r in &self.records {
            let norm = r.iterate.iter().map(|v| v * v).sum::<f64>().sqrt();
            writeln!(out, "{},{},{},{},{}", r.step, r.j_min, r.j_mean_batch, r.ess, norm)?;
        }
        Ok(())
    }

    pub fn best_cost(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |b| b.eval.cost)
    }

    /// Lowest feasible cost after the last record.
    pub fn final_j_min(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.j_min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOutcome {
    /// Final iterate `Y⁰` in sampler coordinates, after projection.
    pub solution: Vec<f64>,
    pub solution_eval: Evaluation,
    pub trace: DiffusionTrace,
}

/// The starting iterate `Y^N ~ Normal(0, I)` for a given seed.
pub fn initial_iterate(dim: usize, seed: u64) -> Vec<f64> {
    StreamKey::new(seed).normals(Purpose::Init, 0, 0, dim)
}

/// Runs `f` on a pool with `workers` threads, or on the global pool for 0.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Evaluates a batch of draws in parallel, preserving order.
pub fn evaluate_batch<T: Target + ?Sized>(
    target: &T,
    draws: Vec<Vec<f64>>,
    temperature: f64,
) -> Vec<(Vec<f64>, Evaluation)> {
    draws
        .into_par_iter()
        .map(|mut y| {
            target.project(&mut y);
            let e = target.evaluate(&y, temperature);
            (y, e)
        })
        .collect()
}

/// Weighted mean of an evaluated batch, falling back to the target's
/// replacement weights when the whole batch is rejected.
pub fn batch_mean<T: Target + ?Sized>(
    target: &T,
    batch: Vec<(Vec<f64>, Evaluation)>,
    temperature: f64,
    step: usize,
) -> Result<(WeightedMean, bool), MbdError> {
    let all_rejected = batch.iter().all(|(_, e)| e.log_weight == f64::NEG_INFINITY);
    let mut used_fallback = false;
    let candidates: Vec<Candidate> = if all_rejected {
        used_fallback = true;
        batch
            .into_iter()
            .map(|(y, e)| Candidate {
                y,
                log_weight: target.fallback_log_weight(&e, temperature).unwrap_or(f64::NEG_INFINITY),
            })
            .collect()
    } else {
        batch.into_iter().map(|(y, e)| Candidate { y, log_weight: e.log_weight }).collect()
    };
    let wm = weighted_mean(&candidates).map_err(|e| match e {
        MbdError::AllRejected { .. } => MbdError::AllRejected { step },
        other => other,
    })?;
    Ok((wm, used_fallback))
}

fn consider(best: &mut Option<BestCandidate>, y: &[f64], eval: &Evaluation, step: usize) {
    let replace = match best {
        None => true,
        Some(b) => eval.better_than(&b.eval),
    };
    if replace {
        *best = Some(BestCandidate { y: y.to_vec(), eval: *eval, step });
    }
}

/// Runs the full annealed sampler on `target`, from `Y^N ~ Normal(0, I)`
/// down to `Y⁰`.
pub fn diffuse<T: Target + ?Sized>(target: &T, config: &MbdConfig) -> Result<DiffusionOutcome, MbdError> {
    diffuse_from(target, config, initial_iterate(target.dim(), config.seed))
}

/// Same as [`diffuse`] with an explicit starting iterate.
pub fn diffuse_from<T: Target + ?Sized>(
    target: &T,
    config: &MbdConfig,
    start: Vec<f64>,
) -> Result<DiffusionOutcome, MbdError> {
    config.validate()?;
    if start.len() != target.dim() {
        return Err(MbdError::DimensionMismatch { expected: target.dim(), got: start.len() });
    }
    with_workers(config.workers, || run_loop(target, config, start))
}

fn run_loop<T: Target + ?Sized>(
    target: &T,
    config: &MbdConfig,
    start: Vec<f64>,
) -> Result<DiffusionOutcome, MbdError> {
    let schedule = &config.schedule;
    let key = StreamKey::new(config.seed);
    let lambda = config.temperature;
    let mut y = start;
    let mut best: Option<BestCandidate> = None;
    let mut j_min = f64::INFINITY;
    let mut records = Vec::with_capacity(schedule.n_steps());

    for i in (1..=schedule.n_steps()).rev() {
        let draws = sample_candidates(&y, schedule, i, config.n_samples, config.index_convention, key)?;
        let batch = evaluate_batch(target, draws, lambda);

        let mut cost_sum = 0.0;
        for (cand, e) in &batch {
            cost_sum += e.cost;
            if e.is_feasible() && e.cost < j_min {
                j_min = e.cost;
            }
            consider(&mut best, cand, e, i);
        }
        let j_mean_batch = cost_sum / batch.len() as f64;

        let (wm, used_fallback) = batch_mean(target, batch, lambda, i)?;
        let score = estimate_score(&y, &wm.mean, schedule, i);
        let next = match config.backward_kind {
            BackwardKind::Mcsa => mcsa_step(&y, &score, schedule, i),
            BackwardKind::ReverseSde => {
                let z = key.normals(Purpose::BackwardNoise, i, 0, y.len());
                reverse_sde_step_with_noise(&y, &score, schedule, i, &z)
            }
        };
        records.push(TraceRecord {
            step: i,
            iterate: std::mem::replace(&mut y, next),
            mean: wm.mean,
            j_min,
            j_mean_batch,
            ess: wm.ess,
            used_fallback,
        });
    }

    target.project(&mut y);
    let solution_eval = target.evaluate(&y, lambda);
    consider(&mut best, &y, &solution_eval, 0);
    if solution_eval.is_feasible() && solution_eval.cost < j_min {
        if let Some(last) = records.last_mut() {
            last.j_min = solution_eval.cost;
        }
    }
    Ok(DiffusionOutcome { solution: y, solution_eval, trace: DiffusionTrace { records, best } })
}
