//! Rapidly exploring random tree for a holonomic point in the plane.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::geometry::{ForbiddenRegion, Point2};
use crate::streams::{Purpose, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtConfig {
    pub max_step: f64,
    pub max_iters: usize,
    pub goal_bias: f64,
    /// Extra distance kept from every obstacle and the workspace boundary.
    pub clearance: f64,
    pub seed: u64,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self { max_step: 0.2, max_iters: 1000, goal_bias: 0.05, clearance: 0.0, seed: 0 }
    }
}

fn dist(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Plans a collision-free polyline from `start` to `goal`.
///
/// Samples are drawn uniformly from the region's workspace, or from the
/// bounding box of the endpoints and obstacles when there is none. Edges
/// are checked exactly against the forbidden rectangles, grown by
/// `cfg.clearance`.
pub fn rrt_plan(start: Point2, goal: Point2, region: &ForbiddenRegion, cfg: &RrtConfig) -> Result<Vec<Point2>, PlanError> {
    let inflated;
    let region = if cfg.clearance > 0.0 {
        inflated = region.inflated(cfg.clearance);
        &inflated
    } else {
        region
    };
    if !region.is_free(start) {
        return Err(PlanError::EndpointBlocked("start"));
    }
    if !region.is_free(goal) {
        return Err(PlanError::EndpointBlocked("goal"));
    }
    if start == goal {
        return Ok(vec![start]);
    }
    let (lo, hi) = sampling_box(start, goal, region);
    let mut rng = StreamKey::new(cfg.seed).rng(Purpose::Planner, 0, 0);
    let mut nodes: Vec<Point2> = vec![start];
    let mut parents: Vec<usize> = vec![0];

    let connect = |p: Point2| dist(p, goal) <= cfg.max_step && region.segment_is_clear(p, goal);
    if connect(start) {
        return Ok(vec![start, goal]);
    }
    for _ in 0..cfg.max_iters {
        let q = if rng.random::<f64>() < cfg.goal_bias {
            goal
        } else {
            [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])]
        };
        let (near_idx, near_d) = nodes
            .iter()
            .enumerate()
            .map(|(k, &n)| (k, dist(n, q)))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        if near_d == 0.0 {
            continue;
        }
        let near = nodes[near_idx];
        let f = (cfg.max_step / near_d).min(1.0);
        let new = [near[0] + f * (q[0] - near[0]), near[1] + f * (q[1] - near[1])];
        if !region.segment_is_clear(near, new) {
            continue;
        }
        nodes.push(new);
        parents.push(near_idx);
        if connect(new) {
            let mut path = vec![goal];
            let mut k = nodes.len() - 1;
            loop {
                path.push(nodes[k]);
                if k == 0 {
                    break;
                }
                k = parents[k];
            }
            path.reverse();
            return Ok(path);
        }
    }
    Err(PlanError::NoPathFound { iterations: cfg.max_iters })
}

fn sampling_box(start: Point2, goal: Point2, region: &ForbiddenRegion) -> (Point2, Point2) {
    if let Some(w) = &region.workspace {
        return (w.min, w.max);
    }
    let mut lo = [start[0].min(goal[0]), start[1].min(goal[1])];
    let mut hi = [start[0].max(goal[0]), start[1].max(goal[1])];
    for r in &region.rects {
        for d in 0..2 {
            lo[d] = lo[d].min(r.min[d]);
            hi[d] = hi[d].max(r.max[d]);
        }
    }
    for d in 0..2 {
        let pad = 0.1 * (hi[d] - lo[d]).max(1.0);
        lo[d] -= pad;
        hi[d] += pad;
    }
    (lo, hi)
}

/// Writes the polyline as `x,y` rows with a header.
pub fn write_path_csv<W: Write>(path: &[Point2], mut out: W) -> std::io::Result<()> {
    writeln!(out, "x,y")?;
    for p in path {
        writeln!(out, "{},{}", p[0], p[1])?;
    }
    Ok(())
}
