//! Forward-process noise schedule.
//!
//! Step indices are 1-based (`1..=n_steps`) to match the diffusion loop,
//! which runs from the noisiest step `N` down to `1`. `alpha_bar(0)` is the
//! empty product and equals one.

use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;

/// Which cumulative product parameterizes the candidate distribution at step `i`.
///
/// `Current` uses `ᾱ_i` and is never degenerate. `Previous` uses `ᾱ_{i-1}`,
/// which collapses to a point mass at `i = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexConvention {
    Previous,
    #[default]
    Current,
}

/// Mean scale and isotropic variance of the candidate distribution
/// `Normal(y_i * scale, variance * I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingParams {
    pub scale: f64,
    pub variance: f64,
}

/// Variance substituted for an exactly-zero candidate variance.
pub const VARIANCE_FLOOR: f64 = 1e-12;

impl SamplingParams {
    pub fn floored_variance(&self) -> f64 {
        self.variance.max(VARIANCE_FLOOR)
    }

    pub fn std_dev(&self) -> f64 {
        self.floored_variance().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    /// Length `n_steps + 1`; entry 0 is 1.
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds a schedule from explicit betas, each in `(0, 1)`.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self, ScheduleError> {
        if betas.is_empty() {
            return Err(ScheduleError::ZeroSteps);
        }
        if let Some((i, &b)) = betas
            .iter()
            .enumerate()
            .find(|(_, b)| !(**b > 0.0 && **b < 1.0))
        {
            return Err(ScheduleError::BetaOutOfRange { index: i + 1, value: b });
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len() + 1);
        alpha_bars.push(1.0);
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        Ok(Self { betas, alphas, alpha_bars })
    }

    /// Linearly spaced betas from `beta_start` (step 1) to `beta_end` (step N).
    pub fn linear(beta_start: f64, beta_end: f64, n_steps: usize) -> Result<Self, ScheduleError> {
        if n_steps == 0 {
            return Err(ScheduleError::ZeroSteps);
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(ScheduleError::InvalidRange { beta_start, beta_end });
        }
        let betas = if n_steps == 1 {
            vec![beta_start]
        } else {
            let span = beta_end - beta_start;
            let denom = (n_steps - 1) as f64;
            (0..n_steps)
                .map(|k| beta_start + k as f64 / denom * span)
                .collect()
        };
        Self::from_betas(betas)
    }

    /// The schedule used throughout: 1e-4 to 1e-2 over 100 steps.
    pub fn default_linear() -> Self {
        Self::linear(1e-4, 1e-2, 100).expect("default schedule is valid")
    }

    pub fn n_steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Cumulative products, index 0 through N.
    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    /// `β_i` for `1 <= i <= N`.
    pub fn beta(&self, i: usize) -> f64 {
        self.betas[i - 1]
    }

    /// `α_i` for `1 <= i <= N`.
    pub fn alpha(&self, i: usize) -> f64 {
        self.alphas[i - 1]
    }

    /// `ᾱ_i` for `0 <= i <= N`.
    pub fn alpha_bar(&self, i: usize) -> f64 {
        self.alpha_bars[i]
    }

    pub fn check_step(&self, i: usize) -> Result<(), ScheduleError> {
        if i == 0 || i > self.n_steps() {
            Err(ScheduleError::StepOutOfRange { step: i, n_steps: self.n_steps() })
        } else {
            Ok(())
        }
    }

    /// Scale `1/√ᾱ_j` and variance `1/ᾱ_j - 1` of the candidate distribution at
    /// step `i`, where `j` is `i - 1` or `i` depending on the convention.
    ///
    /// The variance is returned unfloored; it is exactly zero for
    /// `Previous` at `i = 1`.
    pub fn sampling_params(
        &self,
        i: usize,
        convention: IndexConvention,
    ) -> Result<SamplingParams, ScheduleError> {
        self.check_step(i)?;
        let j = match convention {
            IndexConvention::Previous => i - 1,
            IndexConvention::Current => i,
        };
        let ab = self.alpha_bars[j];
        Ok(SamplingParams { scale: 1.0 / ab.sqrt(), variance: 1.0 / ab - 1.0 })
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::default_linear()
    }
}
