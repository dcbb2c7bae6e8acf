//! Deterministic discrete-time models and the trajectory tasks built on them.
//!
//! Every model is a continuous vector field discretized with explicit Euler
//! or classic RK4. Controls are clamped to their bounds before integration,
//! and an optional state projection runs after each step.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{ForbiddenRegion, Point2, Rect};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    Rk4,
}

/// `ẋ = f(x, u)` written into the output slice.
pub type VectorField = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;
pub type StateProjection = Arc<dyn Fn(&mut [f64]) + Send + Sync>;
pub type StageCost = Arc<dyn Fn(&[f64], &[f64], usize) -> f64 + Send + Sync>;
pub type TerminalCost = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Appends `g(x, u)` to the output; entries `<= 0` are satisfied.
pub type ConstraintFn = Arc<dyn Fn(&[f64], &[f64], &mut Vec<f64>) + Send + Sync>;

/// Reusable buffers for one integration step.
#[derive(Debug, Clone, Default)]
pub struct StepScratch {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    u: Vec<f64>,
}

#[derive(Clone)]
pub struct DynamicsModel {
    pub n_x: usize,
    pub n_u: usize,
    pub u_low: Vec<f64>,
    pub u_high: Vec<f64>,
    pub dt: f64,
    pub integrator: Integrator,
    field: VectorField,
    projection: Option<StateProjection>,
}

impl fmt::Debug for DynamicsModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DynamicsModel")
            .field("n_x", &self.n_x)
            .field("n_u", &self.n_u)
            .field("u_low", &self.u_low)
            .field("u_high", &self.u_high)
            .field("dt", &self.dt)
            .field("integrator", &self.integrator)
            .finish()
    }
}

impl DynamicsModel {
    pub fn new(
        n_x: usize,
        u_low: Vec<f64>,
        u_high: Vec<f64>,
        dt: f64,
        integrator: Integrator,
        field: VectorField,
    ) -> Self {
        assert_eq!(u_low.len(), u_high.len());
        Self { n_x, n_u: u_low.len(), u_low, u_high, dt, integrator, field, projection: None }
    }

    pub fn with_projection(mut self, projection: StateProjection) -> Self {
        self.projection = Some(projection);
        self
    }

    pub fn clamp_control(&self, u: &[f64]) -> Vec<f64> {
        let mut out = u.to_vec();
        self.clamp_into(&mut out);
        out
    }

    fn clamp_into(&self, u: &mut [f64]) {
        for ((v, lo), hi) in u.iter_mut().zip(&self.u_low).zip(&self.u_high) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn derivative(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.n_x];
        (self.field)(x, u, &mut dx);
        dx
    }

    /// One clamped, projected step with the model's own integrator and `dt`.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_x];
        self.step_into(x, u, &mut out, &mut StepScratch::default());
        out
    }

    pub fn step_into(&self, x: &[f64], u: &[f64], out: &mut [f64], scratch: &mut StepScratch) {
        scratch.u.clear();
        scratch.u.extend_from_slice(u);
        let mut uc = std::mem::take(&mut scratch.u);
        self.clamp_into(&mut uc);
        self.integrate_into(x, &uc, self.dt, self.integrator, out, scratch);
        scratch.u = uc;
        if let Some(p) = &self.projection {
            p(out);
        }
    }

    /// Raw integration of the vector field: no clamping, no projection.
    pub fn integrate(&self, x: &[f64], u: &[f64], dt: f64, integrator: Integrator) -> Vec<f64> {
        let mut out = vec![0.0; self.n_x];
        self.integrate_into(x, u, dt, integrator, &mut out, &mut StepScratch::default());
        out
    }

    fn integrate_into(
        &self,
        x: &[f64],
        u: &[f64],
        dt: f64,
        integrator: Integrator,
        out: &mut [f64],
        s: &mut StepScratch,
    ) {
        let n = self.n_x;
        for k in s.k.iter_mut() {
            k.resize(n, 0.0);
        }
        s.tmp.resize(n, 0.0);
        let f = &self.field;
        match integrator {
            Integrator::Euler => {
                f(x, u, &mut s.k[0]);
                for j in 0..n {
                    out[j] = x[j] + dt * s.k[0][j];
                }
            }
            Integrator::Rk4 => {
                let [k1, k2, k3, k4] = &mut s.k;
                let tmp = &mut s.tmp;
                f(x, u, k1);
                for j in 0..n {
                    tmp[j] = x[j] + 0.5 * dt * k1[j];
                }
                f(tmp, u, k2);
                for j in 0..n {
                    tmp[j] = x[j] + 0.5 * dt * k2[j];
                }
                f(tmp, u, k3);
                for j in 0..n {
                    tmp[j] = x[j] + dt * k3[j];
                }
                f(tmp, u, k4);
                for j in 0..n {
                    out[j] = x[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
        }
    }
}

/// Planar layout for tasks that have a position, a goal and obstacles.
#[derive(Clone)]
pub struct PlanarLayout {
    /// Which state entries hold the `(x, y)` position.
    pub position_indices: [usize; 2],
    pub start: Point2,
    pub goal: Point2,
    pub region: ForbiddenRegion,
    /// Position-only part of the stage cost.
    pub stage_position_cost: Arc<dyn Fn(Point2) -> f64 + Send + Sync>,
    /// Position-only part of the terminal cost.
    pub terminal_position_cost: Arc<dyn Fn(Point2) -> f64 + Send + Sync>,
}

impl fmt::Debug for PlanarLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanarLayout")
            .field("start", &self.start)
            .field("goal", &self.goal)
            .field("region", &self.region)
            .finish()
    }
}

/// A finite-horizon trajectory optimization problem.
///
/// Row `t` of a trajectory pairs control `u_t` with the state `x_t` it
/// produces; stage costs and constraints are evaluated on those pairs and
/// the terminal cost on the last state.
#[derive(Clone)]
pub struct TaskSpec {
    pub name: String,
    pub model: DynamicsModel,
    pub horizon: usize,
    pub x_init: Vec<f64>,
    pub stage_cost: StageCost,
    pub terminal_cost: TerminalCost,
    pub constraint: Option<ConstraintFn>,
    /// Task-specific error of the final state, e.g. distance to goal.
    pub final_error: TerminalCost,
    /// Success when `final_error < success_tol` and the trajectory is feasible.
    pub success_tol: f64,
    pub planar: Option<PlanarLayout>,
}

impl fmt::Debug for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskSpec")
            .field("name", &self.name)
            .field("model", &self.model)
            .field("horizon", &self.horizon)
            .field("x_init", &self.x_init)
            .finish()
    }
}

impl TaskSpec {
    pub fn control_dim(&self) -> usize {
        self.horizon * self.model.n_u
    }
}

/// Wraps an angle to `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

pub const DOUBLE_INTEGRATOR_GOAL: Point2 = [1.0, 1.0];

/// Point mass in the plane with bounded acceleration; reach `(1, 1)` from rest at the origin.
pub fn double_integrator_2d() -> TaskSpec {
    let field: VectorField = Arc::new(|x, u, dx| {
        dx[0] = x[2];
        dx[1] = x[3];
        dx[2] = u[0];
        dx[3] = u[1];
    });
    let model = DynamicsModel::new(4, vec![-1.0; 2], vec![1.0; 2], 0.1, Integrator::Euler, field);
    let g = DOUBLE_INTEGRATOR_GOAL;
    TaskSpec {
        name: "double_integrator_2d".into(),
        model,
        horizon: 50,
        x_init: vec![0.0; 4],
        stage_cost: Arc::new(move |x, u, _| {
            (x[0] - g[0]).powi(2) + (x[1] - g[1]).powi(2) + 0.01 * (u[0] * u[0] + u[1] * u[1])
        }),
        terminal_cost: Arc::new(|_| 0.0),
        constraint: None,
        final_error: Arc::new(move |x| (x[0] - g[0]).hypot(x[1] - g[1])),
        success_tol: 0.1,
        planar: None,
    }
}

pub const PENDULUM_TORQUE_LIMIT: f64 = 2.0;
/// Ten seconds. Bang-bang pumping under the torque limit needs over five
/// just to gain the energy to reach upright.
pub const PENDULUM_HORIZON: usize = 200;

/// Torque-limited pendulum starting hanging down; θ is measured from upright.
pub fn pendulum_swingup() -> TaskSpec {
    let (m, l, g) = (1.0, 1.0, 9.81);
    let field: VectorField = Arc::new(move |x, u, dx| {
        dx[0] = x[1];
        dx[1] = g / l * x[0].sin() + u[0] / (m * l * l);
    });
    let lim = PENDULUM_TORQUE_LIMIT;
    let model = DynamicsModel::new(2, vec![-lim], vec![lim], 0.05, Integrator::Rk4, field);
    TaskSpec {
        name: "pendulum_swingup".into(),
        model,
        horizon: PENDULUM_HORIZON,
        x_init: vec![PI, 0.0],
        stage_cost: Arc::new(|x, u, _| wrap_angle(x[0]).powi(2) + 0.1 * x[1] * x[1] + 0.001 * u[0] * u[0]),
        terminal_cost: Arc::new(|_| 0.0),
        constraint: None,
        final_error: Arc::new(|x| wrap_angle(x[0]).abs()),
        success_tol: 0.3,
        planar: None,
    }
}

/// Cart-pole vector field; state `(x, θ, ẋ, θ̇)` with θ from upright.
pub fn cartpole_field() -> VectorField {
    let (m_cart, m_pole, half_len, g) = (1.0, 0.1, 0.5, 9.81);
    let total = m_cart + m_pole;
    Arc::new(move |x, u, dx| {
        let (s, c) = x[1].sin_cos();
        let temp = (u[0] + m_pole * half_len * x[3] * x[3] * s) / total;
        let theta_acc = (g * s - c * temp) / (half_len * (4.0 / 3.0 - m_pole * c * c / total));
        let x_acc = temp - m_pole * half_len * theta_acc * c / total;
        dx[0] = x[2];
        dx[1] = x[3];
        dx[2] = x_acc;
        dx[3] = theta_acc;
    })
}

pub fn cartpole_swingup() -> TaskSpec {
    let model = DynamicsModel::new(4, vec![-10.0], vec![10.0], 0.04, Integrator::Rk4, cartpole_field());
    TaskSpec {
        name: "cartpole_swingup".into(),
        model,
        horizon: 60,
        x_init: vec![0.0, PI, 0.0, 0.0],
        stage_cost: Arc::new(|x, u, _| {
            wrap_angle(x[1]).powi(2) + 0.1 * x[0] * x[0] + 0.01 * x[3] * x[3] + 0.001 * u[0] * u[0]
        }),
        terminal_cost: Arc::new(|_| 0.0),
        constraint: None,
        final_error: Arc::new(|x| wrap_angle(x[1]).abs()),
        success_tol: 0.3,
        planar: None,
    }
}

pub const CAR_WHEELBASE: f64 = 0.3;
pub const CAR_START: Point2 = [0.5, 0.5];
pub const CAR_GOAL: Point2 = [3.5, 0.5];
pub const CAR_GOAL_TOL: f64 = 0.3;
pub const CAR_DT: f64 = 0.2;

/// Kinematic bicycle vector field; state `(px, py, θ, v, δ)`, control `(a, δ̇)`.
pub fn bicycle_field(wheelbase: f64) -> VectorField {
    Arc::new(move |x, u, dx| {
        let (s, c) = x[2].sin_cos();
        dx[0] = x[3] * c;
        dx[1] = x[3] * s;
        dx[2] = x[3] / wheelbase * x[4].tan();
        dx[3] = u[0];
        dx[4] = u[1];
    })
}

/// Placement of the U wall and the endpoints for the car task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarLayout {
    pub u_center: Point2,
    pub start: Point2,
    pub goal: Point2,
}

impl Default for CarLayout {
    fn default() -> Self {
        Self { u_center: [2.0, 1.0], start: CAR_START, goal: CAR_GOAL }
    }
}

/// U-shaped wall opening downward, 2 × 2 outer extent with 0.4 thick arms,
/// inside the `[0, 4]²` workspace.
pub fn umaze_region_at(center: Point2) -> ForbiddenRegion {
    let (x0, x1, y0, y1, t) = (center[0] - 1.0, center[0] + 1.0, center[1] - 1.0, center[1] + 1.0, 0.4);
    ForbiddenRegion::new(
        vec![
            Rect::new(x0, y1 - t, x1, y1),
            Rect::new(x0, y0, x0 + t, y1),
            Rect::new(x1 - t, y0, x1, y1),
        ],
        Some(Rect::new(0.0, 0.0, 4.0, 4.0)),
    )
}

pub fn umaze_region() -> ForbiddenRegion {
    umaze_region_at(CarLayout::default().u_center)
}

/// Bicycle car that must get around the U-shaped wall from `(0.5, 0.5)` to `(3.5, 0.5)`.
pub fn car2d_umaze() -> TaskSpec {
    car2d_umaze_with(CarLayout::default())
}

pub fn car2d_umaze_with(layout: CarLayout) -> TaskSpec {
    let model = DynamicsModel::new(
        5,
        vec![-1.0, -2.0],
        vec![1.0, 2.0],
        CAR_DT,
        Integrator::Rk4,
        bicycle_field(CAR_WHEELBASE),
    )
    .with_projection(Arc::new(|x| {
        x[3] = x[3].clamp(-2.0, 2.0);
        x[4] = x[4].clamp(-0.6, 0.6);
    }));
    let region = umaze_region_at(layout.u_center);
    let goal = layout.goal;
    let dist = move |p: Point2| (p[0] - goal[0]).hypot(p[1] - goal[1]);
    let constraint_region = region.clone();
    TaskSpec {
        name: "car2d_umaze".into(),
        model,
        horizon: 50,
        x_init: vec![layout.start[0], layout.start[1], 0.0, 0.0, 0.0],
        stage_cost: Arc::new(move |x, u, _| dist([x[0], x[1]]) + 0.05 * (u[0] * u[0] + u[1] * u[1])),
        terminal_cost: Arc::new(move |x| 10.0 * dist([x[0], x[1]])),
        constraint: Some(Arc::new(move |x, _u, out| {
            let p = [x[0], x[1]];
            out.push(constraint_region.penetration(p));
            out.push(constraint_region.workspace_excess(p));
        })),
        final_error: Arc::new(move |x| dist([x[0], x[1]])),
        success_tol: CAR_GOAL_TOL,
        planar: Some(PlanarLayout {
            position_indices: [0, 1],
            start: layout.start,
            goal,
            region,
            stage_position_cost: Arc::new(dist),
            terminal_position_cost: Arc::new(move |p| 10.0 * dist(p)),
        }),
    }
}

/// Names accepted by [`task_by_name`].
pub const TASK_NAMES: [&str; 4] = ["double_integrator_2d", "pendulum_swingup", "cartpole_swingup", "car2d_umaze"];

pub fn task_by_name(name: &str) -> Option<TaskSpec> {
    match name {
        "double_integrator_2d" => Some(double_integrator_2d()),
        "pendulum_swingup" => Some(pendulum_swingup()),
        "cartpole_swingup" => Some(cartpole_swingup()),
        "car2d_umaze" => Some(car2d_umaze()),
        _ => None,
    }
}
