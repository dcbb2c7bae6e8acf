//! Gradient-free classifier training: an MLP's flattened parameters as the
//! decision variable and mean cross-entropy as the cost.

use std::f64::consts::PI;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};

use super::ObjectiveProblem;
use crate::error::MbdError;
use crate::streams::{Purpose, StreamKey};

/// Row-major feature table with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub n_features: usize,
    pub n_classes: usize,
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(n_features: usize, n_classes: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self, MbdError> {
        if n_features == 0 || labels.is_empty() {
            return Err(MbdError::InvalidConfig("dataset must be nonempty".into()));
        }
        if features.len() != n_features * labels.len() {
            return Err(MbdError::DimensionMismatch { expected: n_features * labels.len(), got: features.len() });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(MbdError::InvalidConfig(format!("label {bad} >= n_classes {n_classes}")));
        }
        Ok(Self { n_features, n_classes, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.features[k * self.n_features..(k + 1) * self.n_features]
    }
}

/// Two interleaved spiral arms, one per class, with Gaussian jitter.
///
/// Each arm makes `turns` revolutions; points lie within roughly `[-1, 1]²`.
pub fn spiral_dataset(n_points: usize, turns: f64, noise: f64, seed: u64) -> LabeledDataset {
    let per_class = n_points / 2;
    let key = StreamKey::new(seed);
    let mut features = Vec::with_capacity(2 * n_points);
    let mut labels = Vec::with_capacity(n_points);
    for class in 0..2 {
        for k in 0..per_class {
            let t = 0.15 + 0.85 * k as f64 / per_class.max(1) as f64;
            let angle = 2.0 * PI * turns * t + PI * class as f64;
            let mut rng = key.rng(Purpose::Dataset, class, k);
            let jx: f64 = StandardNormal.sample(&mut rng);
            let jy: f64 = StandardNormal.sample(&mut rng);
            features.push(t * angle.cos() + noise * jx);
            features.push(t * angle.sin() + noise * jy);
            labels.push(class);
        }
    }
    LabeledDataset { n_features: 2, n_classes: 2, features, labels }
}

/// The fixed 400-point, one-turn spiral used as the default classification set.
pub fn builtin_spiral() -> LabeledDataset {
    spiral_dataset(400, 1.0, 0.02, 0)
}

/// Fully connected network with ReLU hidden layers and a linear output.
///
/// Parameters are laid out layer by layer: the `out × in` weight matrix in
/// row-major order followed by the `out` biases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    sizes: Vec<usize>,
}

impl Mlp {
    pub fn new(n_inputs: usize, hidden: &[usize], n_outputs: usize) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(n_inputs);
        sizes.extend_from_slice(hidden);
        sizes.push(n_outputs);
        Self { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Writes the logits for input `x` into `out`, using `scratch` for
    /// hidden activations.
    pub fn forward(&self, params: &[f64], x: &[f64], scratch: &mut (Vec<f64>, Vec<f64>), out: &mut Vec<f64>) {
        let (cur, next) = scratch;
        cur.clear();
        cur.extend_from_slice(x);
        let mut offset = 0;
        let n_layers = self.sizes.len() - 1;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &params[offset..offset + n_in * n_out];
            let biases = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            next.clear();
            for (row, &b) in weights.chunks_exact(n_in).zip(biases) {
                let mut acc = b;
                for (wv, xv) in row.iter().zip(cur.iter()) {
                    acc += wv * xv;
                }
                next.push(if l + 1 < n_layers { acc.max(0.0) } else { acc });
            }
            std::mem::swap(cur, next);
        }
        out.clear();
        out.extend_from_slice(cur);
    }
}

#[derive(Debug, Clone)]
pub struct MlpClassifier {
    dataset: Arc<LabeledDataset>,
    mlp: Mlp,
}

impl MlpClassifier {
    pub fn new(dataset: Arc<LabeledDataset>, hidden: &[usize]) -> Self {
        let mlp = Mlp::new(dataset.n_features, hidden, dataset.n_classes);
        Self { dataset, mlp }
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn dataset(&self) -> &LabeledDataset {
        &self.dataset
    }

    fn check(&self, params: &[f64]) -> Result<(), MbdError> {
        if params.len() != self.mlp.n_params() {
            return Err(MbdError::DimensionMismatch { expected: self.mlp.n_params(), got: params.len() });
        }
        Ok(())
    }

    /// Mean softmax cross-entropy over the dataset.
    pub fn cross_entropy(&self, params: &[f64]) -> Result<f64, MbdError> {
        self.check(params)?;
        Ok(self.cross_entropy_unchecked(params))
    }

    fn cross_entropy_unchecked(&self, params: &[f64]) -> f64 {
        let mut scratch = (Vec::new(), Vec::new());
        let mut logits = Vec::new();
        let mut total = 0.0;
        for k in 0..self.dataset.len() {
            self.mlp.forward(params, self.dataset.row(k), &mut scratch, &mut logits);
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - logits[self.dataset.labels[k]];
        }
        total / self.dataset.len() as f64
    }

    /// Fraction of rows whose arg-max logit equals the label.
    pub fn accuracy(&self, params: &[f64]) -> Result<f64, MbdError> {
        self.accuracy_on(params, &self.dataset)
    }

    /// Accuracy on another dataset with the same feature and class counts.
    pub fn accuracy_on(&self, params: &[f64], data: &LabeledDataset) -> Result<f64, MbdError> {
        self.check(params)?;
        if data.n_features != self.dataset.n_features || data.n_classes != self.dataset.n_classes {
            return Err(MbdError::DimensionMismatch { expected: self.dataset.n_features, got: data.n_features });
        }
        let mut scratch = (Vec::new(), Vec::new());
        let mut logits = Vec::new();
        let mut hits = 0usize;
        for k in 0..data.len() {
            self.mlp.forward(params, data.row(k), &mut scratch, &mut logits);
            let pred = logits
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc })
                .0;
            if pred == data.labels[k] {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }
}

/// Objective plus the classifier that can score accuracy for a solution.
#[derive(Debug, Clone)]
pub struct MlpObjective {
    pub problem: ObjectiveProblem,
    pub classifier: MlpClassifier,
}

/// Cross-entropy objective over MLP parameters boxed to `[-bound, bound]`.
pub fn mlp_classification_objective(
    dataset: Arc<LabeledDataset>,
    hidden: &[usize],
    bound: f64,
) -> Result<MlpObjective, MbdError> {
    if dataset.is_empty() {
        return Err(MbdError::InvalidConfig("dataset must be nonempty".into()));
    }
    let classifier = MlpClassifier::new(dataset, hidden);
    let dim = classifier.mlp.n_params();
    let inner = classifier.clone();
    let problem = ObjectiveProblem::uniform_box(
        format!("mlp_{}", classifier.mlp.sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("x")),
        dim,
        -bound,
        bound,
        Arc::new(move |p: &[f64]| inner.cross_entropy_unchecked(p)),
    )?;
    Ok(MlpObjective { problem, classifier })
}
