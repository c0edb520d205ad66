//! Linear one-vs-rest SVM trained by deterministic epoch-based
//! subgradient descent on the L2-regularized hinge loss.
//!
//! The step size follows the 1/(lambda * t) primal schedule with a
//! global update counter t; example order is reshuffled every epoch
//! from the configured seed, so identical (data, config) pairs produce
//! identical weights.

use crate::rng::Xoshiro256pp;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SvmError {
    #[error("training needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("labels ({labels}) and features ({features}) differ in count")]
    LabelCountMismatch { labels: usize, features: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    /// L2 regularization strength.
    pub lambda: f64,
    pub epochs: usize,
    /// Seed for the per-epoch example shuffle.
    #[serde(default)]
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            epochs: 50,
            seed: 0,
        }
    }
}

/// One-vs-rest linear model: a weight vector and bias per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearModel {
    pub classes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// Regularized hinge objective after each epoch, per class; kept
    /// for diagnosing training behavior.
    pub objective_trace: Vec<Vec<f64>>,
    pub config: SvmConfig,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn objective(features: &[Vec<f64>], targets: &[f64], w: &[f64], b: f64, lambda: f64) -> f64 {
    let hinge: f64 = features
        .iter()
        .zip(targets)
        .map(|(x, &y)| (1.0 - y * (dot(w, x) + b)).max(0.0))
        .sum::<f64>()
        / features.len() as f64;
    hinge + 0.5 * lambda * (dot(w, w) + b * b)
}

/// Trains one binary subproblem; returns (weights, bias, per-epoch
/// objective). The bias is trained as a regularized constant-one
/// feature; leaving it unregularized lets the large early steps of
/// the 1/(lambda t) schedule push it onto a random walk that swamps
/// the scores on small training sets.
fn train_binary(
    features: &[Vec<f64>],
    targets: &[f64],
    config: &SvmConfig,
    stream: u64,
) -> (Vec<f64>, f64, Vec<f64>) {
    let dim = features[0].len();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut t = 0u64;
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut rng = Xoshiro256pp::from_seed_stream(config.seed, stream);
    let mut trace = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (config.lambda * t as f64);
            let x = &features[i];
            let y = targets[i];
            let margin = y * (dot(&w, x) + b);
            let shrink = 1.0 - eta * config.lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            b *= shrink;
            if margin < 1.0 {
                let scale = eta * y;
                for (wj, &xj) in w.iter_mut().zip(x) {
                    *wj += scale * xj;
                }
                b += scale;
            }
        }
        trace.push(objective(features, targets, &w, b, config.lambda));
    }
    (w, b, trace)
}

/// One-vs-rest training over all distinct labels, ascending.
pub fn train_svm(
    features: &[Vec<f64>],
    labels: &[usize],
    config: &SvmConfig,
) -> Result<LinearModel, SvmError> {
    if features.is_empty() {
        return Err(SvmError::EmptyTrainingSet);
    }
    if labels.len() != features.len() {
        return Err(SvmError::LabelCountMismatch {
            labels: labels.len(),
            features: features.len(),
        });
    }
    let dim = features[0].len();
    for (index, f) in features.iter().enumerate() {
        if f.len() != dim {
            return Err(SvmError::DimensionMismatch {
                index,
                expected: dim,
                got: f.len(),
            });
        }
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(SvmError::TooFewClasses(classes.len()));
    }

    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    let mut objective_trace = Vec::with_capacity(classes.len());
    for (slot, &class) in classes.iter().enumerate() {
        let targets: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let (w, b, trace) = train_binary(features, &targets, config, slot as u64);
        weights.push(w);
        biases.push(b);
        objective_trace.push(trace);
    }
    Ok(LinearModel {
        classes,
        weights,
        biases,
        objective_trace,
        config: config.clone(),
    })
}

/// Argmax over per-class scores w.x + b; ties break toward the
/// smallest class label.
pub fn predict(model: &LinearModel, feature: &[f64]) -> Result<usize, SvmError> {
    let dim = model.weights[0].len();
    if feature.len() != dim {
        return Err(SvmError::DimensionMismatch {
            index: 0,
            expected: dim,
            got: feature.len(),
        });
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (slot, (w, &b)) in model.weights.iter().zip(&model.biases).enumerate() {
        let score = dot(w, feature) + b;
        // Classes are ascending, so strict improvement implements the
        // smallest-label tie-break.
        if score > best_score {
            best_score = score;
            best = slot;
        }
    }
    Ok(model.classes[best])
}
