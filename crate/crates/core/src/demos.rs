//! Demonstration-guided weighting.
//!
//! A demonstration is a possibly partial, possibly infeasible reference
//! trajectory. Each candidate gets the larger of its model weight and its
//! demonstration weight, so guidance fades once candidates beat the demo.

use std::io::{BufRead, Write};

use crate::dynamics::TaskSpec;
use crate::error::{FormatError, MbdError};
use crate::geometry::Point2;
use crate::trajopt::{traj_log_weight, ConstraintMode, Trajectory};

pub mod rrt;

pub use rrt::{rrt_plan, write_path_csv, RrtConfig};

pub const DEFAULT_DEMO_SIGMA: f64 = 0.1;

/// Reference states for rows `t = 1..=T`, with a mask of observed entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub horizon: usize,
    pub n_x: usize,
    /// `T × n_x` row-major; unobserved entries are ignored.
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub sigma: f64,
    pub demo_cost: f64,
    pub demo_violation: f64,
}

impl Demonstration {
    pub fn new(
        horizon: usize,
        n_x: usize,
        values: Vec<f64>,
        mask: Vec<bool>,
        sigma: f64,
        demo_cost: f64,
        demo_violation: f64,
    ) -> Result<Self, MbdError> {
        if values.len() != horizon * n_x || mask.len() != horizon * n_x {
            return Err(MbdError::DimensionMismatch { expected: horizon * n_x, got: values.len().min(mask.len()) });
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(MbdError::InvalidConfig(format!("demo sigma must be positive, got {sigma}")));
        }
        if demo_violation.is_nan() || demo_violation < 0.0 {
            return Err(MbdError::InvalidConfig("demo violation must be nonnegative".into()));
        }
        Ok(Self { horizon, n_x, values, mask, sigma, demo_cost, demo_violation })
    }

    /// Replaces the demonstration cost, e.g. when the observable-only cost is meaningless.
    pub fn with_cost(mut self, demo_cost: f64) -> Self {
        self.demo_cost = demo_cost;
        self
    }

    pub fn check_shape(&self, task: &TaskSpec) -> Result<(), MbdError> {
        if self.horizon != task.horizon {
            return Err(MbdError::DimensionMismatch { expected: task.horizon, got: self.horizon });
        }
        if self.n_x != task.model.n_x {
            return Err(MbdError::DimensionMismatch { expected: task.model.n_x, got: self.n_x });
        }
        Ok(())
    }

    /// The demonstration's own log density terms, independent of the candidate.
    pub fn log_constant(&self, temperature: f64, mode: ConstraintMode) -> f64 {
        let base = -self.demo_cost / temperature;
        if self.demo_violation == 0.0 {
            return base;
        }
        match mode {
            ConstraintMode::Hard => f64::NEG_INFINITY,
            ConstraintMode::Penalty { kappa } => base - kappa * self.demo_violation,
        }
    }

    /// `Σ_masked (x - x_demo)² / (2σ²)` over the candidate's states `x_1..x_T`.
    pub fn mismatch(&self, traj: &Trajectory) -> f64 {
        let states = &traj.states[self.n_x..];
        let mut sq = 0.0;
        for ((&x, &d), &m) in states.iter().zip(&self.values).zip(&self.mask) {
            if m {
                sq += (x - d) * (x - d);
            }
        }
        sq / (2.0 * self.sigma * self.sigma)
    }

    /// Writes `# key=value,...` metadata, a header, then one row per step.
    /// Unobserved entries are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), FormatError> {
        writeln!(
            out,
            "# horizon={},n_x={},sigma={},demo_cost={},demo_violation={}",
            self.horizon, self.n_x, self.sigma, self.demo_cost, self.demo_violation
        )?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n_x).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for t in 0..self.horizon {
            let mut row = vec![(t + 1).to_string()];
            for k in 0..self.n_x {
                let j = t * self.n_x + k;
                row.push(if self.mask[j] { self.values[j].to_string() } else { String::new() });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self, FormatError> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        let meta = first
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| FormatError::Malformed("missing metadata line".into()))?;
        let mut horizon = None;
        let mut n_x = None;
        let mut sigma = None;
        let mut demo_cost = None;
        let mut demo_violation = None;
        for kv in meta.split(',') {
            let (k, v) = kv
                .trim()
                .split_once('=')
                .ok_or_else(|| FormatError::Malformed(format!("bad metadata entry {kv:?}")))?;
            let bad = |_| FormatError::Malformed(format!("bad value for {k}: {v:?}"));
            match k {
                "horizon" => horizon = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "n_x" => n_x = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "sigma" => sigma = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "demo_cost" => demo_cost = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "demo_violation" => demo_violation = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                _ => {}
            }
        }
        let need = |name: &str| FormatError::Malformed(format!("metadata lacks {name}"));
        let horizon = horizon.ok_or_else(|| need("horizon"))?;
        let n_x = n_x.ok_or_else(|| need("n_x"))?;
        let mut values = vec![0.0; horizon * n_x];
        let mut mask = vec![false; horizon * n_x];
        let mut reader = csv::Reader::from_reader(input);
        let mut rows = 0;
        for rec in reader.records() {
            let rec = rec?;
            if rec.len() != n_x + 1 {
                return Err(FormatError::Malformed(format!("row has {} fields, expected {}", rec.len(), n_x + 1)));
            }
            let t: usize = rec[0].trim().parse().map_err(|_| FormatError::Malformed(format!("bad step {:?}", &rec[0])))?;
            if t == 0 || t > horizon {
                return Err(FormatError::Malformed(format!("step {t} outside 1..={horizon}")));
            }
            for k in 0..n_x {
                let cell = rec[k + 1].trim();
                if !cell.is_empty() {
                    let j = (t - 1) * n_x + k;
                    values[j] = cell.parse().map_err(|_| FormatError::Malformed(format!("bad value {cell:?}")))?;
                    mask[j] = true;
                }
            }
            rows += 1;
        }
        if rows != horizon {
            return Err(FormatError::Malformed(format!("expected {horizon} rows, found {rows}")));
        }
        Demonstration::new(
            horizon,
            n_x,
            values,
            mask,
            sigma.ok_or_else(|| need("sigma"))?,
            demo_cost.ok_or_else(|| need("demo_cost"))?,
            demo_violation.ok_or_else(|| need("demo_violation"))?,
        )
        .map_err(|e| FormatError::Malformed(e.to_string()))
    }
}

/// Log weight of a candidate under the demonstration:
/// `-Σ_masked (x - x_demo)²/(2σ²) - J_demo/λ`, plus the demo's constraint term.
pub fn demo_log_weight(traj: &Trajectory, demo: &Demonstration, temperature: f64, mode: ConstraintMode) -> f64 {
    let c = demo.log_constant(temperature, mode);
    if c == f64::NEG_INFINITY {
        return c;
    }
    c - demo.mismatch(traj)
}

/// Larger of the model weight and the demonstration weight.
pub fn mixed_log_weight(traj: &Trajectory, demo: &Demonstration, temperature: f64, mode: ConstraintMode) -> f64 {
    traj_log_weight(traj, temperature, mode).max(demo_log_weight(traj, demo, temperature, mode))
}

/// Resamples a polyline to `n` points evenly spaced in arc length, with
/// the first and last points on the polyline's endpoints.
pub fn resample_path(path: &[Point2], n: usize) -> Vec<Point2> {
    if path.is_empty() || n == 0 {
        return Vec::new();
    }
    if n == 1 || path.len() == 1 {
        return vec![path[0]; n];
    }
    let mut cum = Vec::with_capacity(path.len());
    cum.push(0.0);
    for w in path.windows(2) {
        let last = *cum.last().unwrap_or(&0.0);
        cum.push(last + (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
    }
    let total = *cum.last().unwrap_or(&0.0);
    if total == 0.0 {
        return vec![path[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        if k == n - 1 {
            out.push(path[path.len() - 1]);
            break;
        }
        let s = k as f64 / (n - 1) as f64 * total;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let f = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (path[seg], path[seg + 1]);
        out.push([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])]);
    }
    out
}

/// Turns a planar path into a position-only demonstration for `task`.
///
/// The demo cost uses the position terms of the task cost only; the
/// violation is the geometric violation of the waypoints.
pub fn path_to_demonstration(path: &[Point2], task: &TaskSpec, sigma: f64) -> Result<Demonstration, MbdError> {
    let layout = task
        .planar
        .as_ref()
        .ok_or_else(|| MbdError::InvalidConfig(format!("task {} has no planar layout", task.name)))?;
    if path.is_empty() {
        return Err(MbdError::InvalidConfig("demonstration path is empty".into()));
    }
    let (horizon, n_x) = (task.horizon, task.model.n_x);
    let points = resample_path(path, horizon);
    let mut values = vec![0.0; horizon * n_x];
    let mut mask = vec![false; horizon * n_x];
    let [ix, iy] = layout.position_indices;
    let mut cost = 0.0;
    let mut violation = 0.0;
    for (t, p) in points.iter().enumerate() {
        values[t * n_x + ix] = p[0];
        values[t * n_x + iy] = p[1];
        mask[t * n_x + ix] = true;
        mask[t * n_x + iy] = true;
        cost += (layout.stage_position_cost)(*p);
        violation += layout.region.violation(*p);
    }
    cost += (layout.terminal_position_cost)(points[horizon - 1]);
    Demonstration::new(horizon, n_x, values, mask, sigma, cost, violation)
}
