//! Model-based diffusion: a sampling optimizer that anneals from Gaussian
//! noise toward `exp(-J/λ)` using Monte Carlo score estimates built from
//! model evaluations, with no learned network.
//!
//! - [`schedule`]: the noise schedule and per-step sampling parameters.
//! - [`diffusion`]: candidate weighting, score estimation, backward steps.
//! - [`objectives`]: box-bounded test functions and a small MLP objective.
//! - [`dynamics`], [`trajopt`]: models, tasks, rollouts, trajectory search.
//! - [`demos`]: demonstration-guided weights and an RRT planner.
//! - [`baselines`]: CEM and MPPI on the same targets.

pub mod baselines;
pub mod demos;
pub mod diffusion;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod objectives;
pub mod schedule;
pub mod streams;
pub mod trajopt;

pub use diffusion::{diffuse, BackwardKind, DiffusionOutcome, DiffusionTrace, Evaluation, MbdConfig, Target};
pub use error::{FormatError, MbdError, PlanError, ScheduleError};
pub use objectives::{run_mbd, BlackBoxRun, ObjectiveProblem};
pub use schedule::{IndexConvention, NoiseSchedule};
pub use trajopt::{run_mbd_trajopt, run_mbd_trajopt_with_demo, ConstraintMode, TrajOptRun, Trajectory};
