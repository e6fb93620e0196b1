//! One-vs-rest linear SVM trained with the Pegasos stochastic subgradient
//! schedule: step t uses η = 1/(λt), shrinks weights by (1 − ηλ) and adds
//! η·y·x on margin violations. The bias is unregularized and moves by y/t,
//! keeping its early steps bounded (an η-sized bias step would start at
//! ±1/λ and drown the margin). The returned model is the average iterate
//! over the final epoch, which discards most of the single-step noise the
//! last few violations would otherwise leave in the weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_train_inputs, stream_seed, Classifier, ClassifyError};
use crate::vectorizer::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    classes: Vec<String>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    n_features: usize,
    config: SvmConfig,
    train_accuracy: f64,
}

impl LinearSvmModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn train_accuracy(&self) -> f64 {
        self.train_accuracy
    }

    fn score(&self, class_idx: usize, doc: &SparseVector) -> f64 {
        let w = &self.weights[class_idx];
        let dot: f64 = doc.entries().iter().map(|&(j, x)| w[j as usize] * x).sum();
        dot + self.bias[class_idx]
    }

    /// Argmax of per-class scores; ties go to the lexicographically
    /// smallest class (classes are stored sorted, so strict `>` suffices).
    pub fn predict(&self, doc: &SparseVector) -> &str {
        let mut best = 0;
        let mut best_score = self.score(0, doc);
        for idx in 1..self.classes.len() {
            let s = self.score(idx, doc);
            if s > best_score {
                best = idx;
                best_score = s;
            }
        }
        &self.classes[best]
    }
}

impl Classifier for LinearSvmModel {
    fn predict(&self, doc: &SparseVector) -> &str {
        LinearSvmModel::predict(self, doc)
    }

    fn classes(&self) -> &[String] {
        &self.classes
    }
}

/// Fits one binary Pegasos model per class against the rest.
///
/// Deterministic given `config.seed`: each class trains on its own seeded
/// shuffle stream, so class order and any future parallelism cannot change
/// the result.
pub fn train_linear_svm(
    vectors: &[SparseVector],
    labels: &[String],
    n_features: usize,
    config: &SvmConfig,
) -> Result<LinearSvmModel, ClassifyError> {
    if !(config.lambda > 0.0 && config.lambda.is_finite()) {
        return Err(ClassifyError::InvalidConfig(format!(
            "lambda must be positive and finite, got {}",
            config.lambda
        )));
    }
    if config.epochs == 0 {
        return Err(ClassifyError::InvalidConfig("epochs must be ≥ 1".into()));
    }
    let classes = check_train_inputs(vectors, labels)?;
    debug_assert!(vectors
        .iter()
        .all(|v| v.entries().iter().all(|&(j, _)| (j as usize) < n_features)));

    let mut weights = Vec::with_capacity(classes.len());
    let mut bias = Vec::with_capacity(classes.len());
    for (class_idx, class) in classes.iter().enumerate() {
        let y: Vec<f64> = labels
            .iter()
            .map(|l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, class_idx as u64));
        let mut w = vec![0.0f64; n_features];
        let mut b = 0.0f64;
        let mut w_sum = vec![0.0f64; n_features];
        let mut b_sum = 0.0f64;
        let mut order: Vec<usize> = (0..vectors.len()).collect();
        let mut t: u64 = 0;
        let last_epoch = config.epochs - 1;
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = 1.0 / (config.lambda * t as f64);
                let doc = &vectors[i];
                let dot: f64 = doc.entries().iter().map(|&(j, x)| w[j as usize] * x).sum();
                let violated = y[i] * (dot + b) < 1.0;
                let shrink = 1.0 - eta * config.lambda;
                for v in w.iter_mut() {
                    *v *= shrink;
                }
                if violated {
                    for &(j, x) in doc.entries() {
                        w[j as usize] += eta * y[i] * x;
                    }
                    b += y[i] / t as f64;
                }
                if epoch == last_epoch {
                    for (acc, v) in w_sum.iter_mut().zip(&w) {
                        *acc += v;
                    }
                    b_sum += b;
                }
            }
        }
        let scale = 1.0 / vectors.len() as f64;
        let w: Vec<f64> = w_sum.into_iter().map(|v| v * scale).collect();
        let b = b_sum * scale;
        debug_assert!(w.iter().all(|v| v.is_finite()) && b.is_finite());
        weights.push(w);
        bias.push(b);
    }

    let mut model = LinearSvmModel {
        classes,
        weights,
        bias,
        n_features,
        config: config.clone(),
        train_accuracy: 0.0,
    };
    let hits = vectors
        .iter()
        .zip(labels)
        .filter(|(doc, label)| model.predict(doc) == label.as_str())
        .count();
    model.train_accuracy = hits as f64 / vectors.len() as f64;
    Ok(model)
}
