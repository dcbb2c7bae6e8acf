//! Task names accepted by the harness and the problems they build.

use std::path::Path;
use std::sync::Arc;

use mbd_core::dynamics::{task_by_name, TaskSpec, TASK_NAMES};
use mbd_core::objectives::{
    ackley, builtin_spiral, mlp_classification_objective, rastrigin, synthetic_multimodal_1d, LabeledDataset,
    MlpClassifier, ObjectiveProblem,
};

use crate::error::BenchError;
use crate::idx::load_idx;

pub const SPIRAL_HIDDEN: [usize; 2] = [32, 32];
pub const SPIRAL_BOUND: f64 = 2.0;
pub const MNIST_HIDDEN: [usize; 2] = [32, 32];
pub const MNIST_BOUND: f64 = 1.0;

pub const MNIST_FILES: [&str; 4] =
    ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Trajectory,
    BlackBox,
}

impl ProblemKind {
    pub fn is_trajectory(self) -> bool {
        self == Self::Trajectory
    }
}

/// Parses `prefix_<d>d` into `d`.
fn dim_suffix(name: &str, prefix: &str) -> Option<usize> {
    let d: usize = name.strip_prefix(prefix)?.strip_suffix('d')?.parse().ok()?;
    (d > 0).then_some(d)
}

pub fn kind_of(name: &str) -> Option<ProblemKind> {
    if TASK_NAMES.contains(&name) {
        return Some(ProblemKind::Trajectory);
    }
    let black_box = matches!(name, "multimodal_1d" | "mlp_spiral" | "mlp_mnist")
        || dim_suffix(name, "ackley_").is_some()
        || dim_suffix(name, "rastrigin_").is_some();
    black_box.then_some(ProblemKind::BlackBox)
}

/// Names for `list-tasks`; `<d>` stands for any positive dimension.
pub fn listed_names() -> Vec<String> {
    let mut names: Vec<String> = TASK_NAMES.iter().map(|s| s.to_string()).collect();
    names.extend(["ackley_<d>d", "rastrigin_<d>d", "multimodal_1d", "mlp_spiral", "mlp_mnist"].map(String::from));
    names
}

/// A classifier objective together with the data its accuracy is reported on.
#[derive(Debug, Clone)]
pub struct Classification {
    pub classifier: MlpClassifier,
    pub eval_set: Option<LabeledDataset>,
}

impl Classification {
    pub fn accuracy(&self, params: &[f64]) -> Option<f64> {
        match &self.eval_set {
            Some(d) => self.classifier.accuracy_on(params, d).ok(),
            None => self.classifier.accuracy(params).ok(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Problem {
    Trajectory(TaskSpec),
    BlackBox { problem: ObjectiveProblem, classification: Option<Classification> },
}

fn invalid(e: impl ToString) -> BenchError {
    BenchError::ConfigInvalid(e.to_string())
}

pub fn build(name: &str, horizon: Option<usize>, mnist_dir: Option<&Path>, mnist_subset: usize) -> Result<Problem, BenchError> {
    if let Some(mut task) = task_by_name(name) {
        if let Some(h) = horizon {
            task.horizon = h;
        }
        return Ok(Problem::Trajectory(task));
    }
    let plain = |problem| Problem::BlackBox { problem, classification: None };
    if let Some(d) = dim_suffix(name, "ackley_") {
        return ackley(d).map(plain).map_err(invalid);
    }
    if let Some(d) = dim_suffix(name, "rastrigin_") {
        return rastrigin(d).map(plain).map_err(invalid);
    }
    match name {
        "multimodal_1d" => Ok(plain(synthetic_multimodal_1d())),
        "mlp_spiral" => {
            let obj = mlp_classification_objective(Arc::new(builtin_spiral()), &SPIRAL_HIDDEN, SPIRAL_BOUND).map_err(invalid)?;
            Ok(Problem::BlackBox {
                problem: obj.problem,
                classification: Some(Classification { classifier: obj.classifier, eval_set: None }),
            })
        }
        "mlp_mnist" => {
            let dir = mnist_dir.ok_or_else(|| invalid("mlp_mnist needs mnist_dir"))?;
            let train = load_idx(&dir.join(MNIST_FILES[0]), &dir.join(MNIST_FILES[1]))?;
            let test = load_idx(&dir.join(MNIST_FILES[2]), &dir.join(MNIST_FILES[3]))?;
            let train = head(&train, mnist_subset).map_err(invalid)?;
            let obj = mlp_classification_objective(Arc::new(train), &MNIST_HIDDEN, MNIST_BOUND).map_err(invalid)?;
            Ok(Problem::BlackBox {
                problem: obj.problem,
                classification: Some(Classification { classifier: obj.classifier, eval_set: Some(test) }),
            })
        }
        _ => Err(BenchError::TaskUnknown(name.to_string())),
    }
}

/// The first `n` rows of a dataset.
pub fn head(data: &LabeledDataset, n: usize) -> Result<LabeledDataset, mbd_core::MbdError> {
    let n = n.min(data.len());
    LabeledDataset::new(
        data.n_features,
        data.n_classes,
        data.features[..n * data.n_features].to_vec(),
        data.labels[..n].to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve() {
        for n in TASK_NAMES {
            assert_eq!(kind_of(n), Some(ProblemKind::Trajectory));
        }
        for n in ["ackley_10d", "rastrigin_3d", "multimodal_1d", "mlp_spiral", "mlp_mnist"] {
            assert_eq!(kind_of(n), Some(ProblemKind::BlackBox), "{n}");
        }
        for n in ["ackley_0d", "ackley_d", "ackley10d", "rastrigin_3", "pendulum"] {
            assert_eq!(kind_of(n), None, "{n}");
        }
    }

    #[test]
    fn horizon_override_applies() {
        match build("pendulum_swingup", Some(17), None, 0).unwrap() {
            Problem::Trajectory(t) => assert_eq!(t.horizon, 17),
            _ => panic!(),
        }
    }

    #[test]
    fn spiral_network_has_over_a_thousand_parameters() {
        match build("mlp_spiral", None, None, 0).unwrap() {
            Problem::BlackBox { problem, classification } => {
                assert_eq!(problem.dim(), 2 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
                assert!(classification.is_some());
            }
            _ => panic!(),
        }
    }

    #[test]
    fn mnist_without_directory_is_a_config_error() {
        assert!(matches!(build("mlp_mnist", None, None, 10), Err(BenchError::ConfigInvalid(_))));
        let missing = build("mlp_mnist", None, Some(Path::new("/nonexistent/mnist")), 10).unwrap_err();
        assert_eq!(missing.exit_code(), 3);
    }
}
