//! Planar forbidden regions built from axis-aligned rectangles.

use serde::{Deserialize, Serialize};

pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { min: [x0.min(x1), y0.min(y1)], max: [x0.max(x1), y0.max(y1)] }
    }

    /// Grows (or shrinks, for negative `margin`) every side by `margin`.
    pub fn inflated(&self, margin: f64) -> Self {
        Self::new(self.min[0] - margin, self.min[1] - margin, self.max[0] + margin, self.max[1] + margin)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p[0] > self.min[0] && p[0] < self.max[0] && p[1] > self.min[1] && p[1] < self.max[1]
    }

    /// Distance to the nearest edge when inside (positive), minus the
    /// Euclidean distance to the rectangle when outside.
    pub fn signed_penetration(&self, p: Point2) -> f64 {
        let dx = (self.min[0] - p[0]).max(p[0] - self.max[0]);
        let dy = (self.min[1] - p[1]).max(p[1] - self.max[1]);
        if dx <= 0.0 && dy <= 0.0 {
            -dx.max(dy)
        } else {
            -(dx.max(0.0).hypot(dy.max(0.0)))
        }
    }

    /// Parameter interval of `a + t (b - a)`, `t ∈ [0, 1]`, lying in the
    /// closed rectangle (Liang–Barsky clipping).
    pub fn clip_segment(&self, a: Point2, b: Point2) -> Option<(f64, f64)> {
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for d in 0..2 {
            let delta = b[d] - a[d];
            for (p, q) in [(-delta, a[d] - self.min[d]), (delta, self.max[d] - a[d])] {
                if p == 0.0 {
                    if q < 0.0 {
                        return None;
                    }
                } else {
                    let r = q / p;
                    if p < 0.0 {
                        t0 = t0.max(r);
                    } else {
                        t1 = t1.min(r);
                    }
                }
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }

    /// Whether the segment passes through the open interior.
    pub fn segment_hits_interior(&self, a: Point2, b: Point2) -> bool {
        match self.clip_segment(a, b) {
            None => false,
            Some((t0, t1)) => {
                let t = 0.5 * (t0 + t1);
                self.contains([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
            }
        }
    }
}

/// Union of forbidden rectangles, optionally confined to a workspace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ForbiddenRegion {
    pub rects: Vec<Rect>,
    pub workspace: Option<Rect>,
}

impl ForbiddenRegion {
    pub fn new(rects: Vec<Rect>, workspace: Option<Rect>) -> Self {
        Self { rects, workspace }
    }

    /// Obstacles grown and workspace shrunk by `margin`.
    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            rects: self.rects.iter().map(|r| r.inflated(margin)).collect(),
            workspace: self.workspace.map(|w| w.inflated(-margin)),
        }
    }

    /// Deepest signed penetration over all rectangles; `<= 0` outside.
    pub fn penetration(&self, p: Point2) -> f64 {
        self.rects
            .iter()
            .map(|r| r.signed_penetration(p))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// How far `p` lies outside the workspace; `<= 0` inside.
    pub fn workspace_excess(&self, p: Point2) -> f64 {
        match &self.workspace {
            None => f64::NEG_INFINITY,
            Some(w) => (w.min[0] - p[0]).max(p[0] - w.max[0]).max(w.min[1] - p[1]).max(p[1] - w.max[1]),
        }
    }

    pub fn violation(&self, p: Point2) -> f64 {
        self.penetration(p).max(0.0) + self.workspace_excess(p).max(0.0)
    }

    pub fn is_free(&self, p: Point2) -> bool {
        self.violation(p) == 0.0
    }

    /// Exact test that no point of `a -> b` is forbidden.
    pub fn segment_is_clear(&self, a: Point2, b: Point2) -> bool {
        self.workspace_excess(a) <= 0.0
            && self.workspace_excess(b) <= 0.0
            && !self.rects.iter().any(|r| r.segment_hits_interior(a, b))
    }

    /// Checks `a -> b` at spacing no larger than `resolution`, endpoints included.
    pub fn segment_is_free(&self, a: Point2, b: Point2, resolution: f64) -> bool {
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = (len / resolution).ceil().max(1.0) as usize;
        (0..=n).all(|k| {
            let t = k as f64 / n as f64;
            self.is_free([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
        })
    }
}
