//! Classification quality measures.
//!
//! For class i and predicted cluster j with confusion count n_ij:
//! Recall(i,j) = n_ij / n_i, Precision(i,j) = n_ij / n_j,
//! F(i,j) = 2 R P / (R + P), and the overall score is the weighted
//! average F1 = sum_i (n_i / n) max_j F(i,j). 0/0 counts as 0.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot evaluate an empty label set")]
    Empty,
    #[error("true labels ({truth}) and predictions ({predicted}) differ in count")]
    LengthMismatch { truth: usize, predicted: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassF1 {
    pub class: usize,
    /// Items of this class.
    pub support: usize,
    /// Cluster attaining the best F score for this class.
    pub best_cluster: usize,
    pub best_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Distinct labels appearing in truth or predictions, ascending.
    pub labels: Vec<usize>,
    /// counts[i][j] = items of class labels[i] predicted as labels[j].
    pub counts: Vec<Vec<usize>>,
    pub per_class: Vec<ClassF1>,
    pub weighted_f1: f64,
    pub items: usize,
}

/// Builds the confusion matrix and evaluates the weighted F1.
pub fn f1_report(truth: &[usize], predicted: &[usize]) -> Result<EvalReport, MetricsError> {
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let mut labels: Vec<usize> = truth.iter().chain(predicted).copied().collect();
    labels.sort_unstable();
    labels.dedup();
    let slot = |label: usize| labels.binary_search(&label).expect("label listed");

    let k = labels.len();
    let mut counts = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        counts[slot(t)][slot(p)] += 1;
    }
    let class_totals: Vec<usize> = counts.iter().map(|row| row.iter().sum()).collect();
    let cluster_totals: Vec<usize> = (0..k)
        .map(|j| counts.iter().map(|row| row[j]).sum())
        .collect();

    let mut per_class = Vec::with_capacity(k);
    let mut weighted_f1 = 0.0;
    let items = truth.len();
    for i in 0..k {
        let n_i = class_totals[i];
        let mut best_f = 0.0;
        let mut best_cluster = labels[0];
        for j in 0..k {
            let n_ij = counts[i][j];
            let recall = if n_i == 0 {
                0.0
            } else {
                n_ij as f64 / n_i as f64
            };
            let precision = if cluster_totals[j] == 0 {
                0.0
            } else {
                n_ij as f64 / cluster_totals[j] as f64
            };
            let f = if recall + precision == 0.0 {
                0.0
            } else {
                2.0 * recall * precision / (recall + precision)
            };
            if f > best_f {
                best_f = f;
                best_cluster = labels[j];
            }
        }
        if n_i > 0 {
            weighted_f1 += n_i as f64 / items as f64 * best_f;
        }
        per_class.push(ClassF1 {
            class: labels[i],
            support: n_i,
            best_cluster,
            best_f,
        });
    }
    Ok(EvalReport {
        labels,
        counts,
        per_class,
        weighted_f1,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256pp;
    use std::collections::BTreeMap;

    #[test]
    fn perfect_predictions_score_one() {
        let labels = vec![0, 1, 2, 0, 1, 2];
        let report = f1_report(&labels, &labels).unwrap();
        assert_eq!(report.weighted_f1, 1.0);
        for c in &report.per_class {
            assert_eq!(c.best_f, 1.0);
            assert_eq!(c.best_cluster, c.class);
        }
    }

    #[test]
    fn two_class_hand_computation() {
        // Confusion counts n_11 = 8, n_12 = 2, n_21 = 0, n_22 = 10:
        // F(1,.) best = 2*(0.8*1.0)/1.8 = 8/9,
        // F(2,.) best = 2*(1.0*10/12)/(1+10/12) = 10/11,
        // F1 = 0.5*8/9 + 0.5*10/11 = 89/99.
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for _ in 0..8 {
            truth.push(1);
            pred.push(1);
        }
        for _ in 0..2 {
            truth.push(1);
            pred.push(2);
        }
        for _ in 0..10 {
            truth.push(2);
            pred.push(2);
        }
        let report = f1_report(&truth, &pred).unwrap();
        assert!((report.weighted_f1 - 89.0 / 99.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_single_cluster_predictor() {
        // Balanced 6-class truth, everything predicted as class 0.
        // Every class has recall 1 against the single cluster and
        // precision 10/60, so max_j F(i,j) = 2/7 for each class; the
        // empty clusters exercise the 0/0 -> 0 convention.
        let truth: Vec<usize> = (0..60).map(|i| i % 6).collect();
        let pred = vec![0usize; 60];
        let report = f1_report(&truth, &pred).unwrap();
        assert!((report.weighted_f1 - 2.0 / 7.0).abs() < 1e-12);
        for c in &report.per_class {
            assert!((c.best_f - 2.0 / 7.0).abs() < 1e-12);
            assert_eq!(c.best_cluster, 0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(f1_report(&[], &[]), Err(MetricsError::Empty));
        assert!(matches!(
            f1_report(&[0, 1], &[0]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    /// Independent evaluator built on maps instead of matrices.
    fn f1_oracle(truth: &[usize], predicted: &[usize]) -> f64 {
        let mut pairs: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut class_n: BTreeMap<usize, usize> = BTreeMap::new();
        let mut cluster_n: BTreeMap<usize, usize> = BTreeMap::new();
        for (&t, &p) in truth.iter().zip(predicted) {
            *pairs.entry((t, p)).or_default() += 1;
            *class_n.entry(t).or_default() += 1;
            *cluster_n.entry(p).or_default() += 1;
        }
        let mut f1 = 0.0;
        for (&class, &n_i) in &class_n {
            let mut best: f64 = 0.0;
            for (&cluster, &n_j) in &cluster_n {
                let n_ij = *pairs.get(&(class, cluster)).unwrap_or(&0);
                if n_ij == 0 {
                    continue;
                }
                let r = n_ij as f64 / n_i as f64;
                let p = n_ij as f64 / n_j as f64;
                best = best.max(2.0 * r * p / (r + p));
            }
            f1 += n_i as f64 / truth.len() as f64 * best;
        }
        f1
    }

    #[test]
    fn matches_independent_evaluator_on_random_labelings() {
        let mut rng = Xoshiro256pp::from_seed(321);
        for _ in 0..100 {
            let len = 1 + rng.next_below(200) as usize;
            let classes = 1 + rng.next_below(8) as u64;
            let truth: Vec<usize> = (0..len).map(|_| rng.next_below(classes) as usize).collect();
            let pred: Vec<usize> = (0..len)
                .map(|_| rng.next_below(classes + 2) as usize)
                .collect();
            let report = f1_report(&truth, &pred).unwrap();
            let oracle = f1_oracle(&truth, &pred);
            assert!(
                (report.weighted_f1 - oracle).abs() < 1e-12,
                "{} vs {oracle}",
                report.weighted_f1
            );
        }
    }
}
