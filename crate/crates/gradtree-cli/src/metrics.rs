//! Classification metrics for the eval subcommand: accuracy, per-class and
//! macro F1, and the confusion matrix.

use serde::Serialize;

/// Evaluation report; `confusion_matrix[t][p]` counts true class `t`
/// predicted as `p`.
#[derive(Serialize)]
pub struct EvalReport {
    pub seed: u64,
    pub threads: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    pub classes: Vec<String>,
    pub confusion_matrix: Vec<Vec<usize>>,
}

pub fn accuracy(preds: &[usize], y: &[usize]) -> f64 {
    let hits = preds.iter().zip(y).filter(|(p, t)| p == t).count();
    hits as f64 / y.len() as f64
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn confusion_matrix(preds: &[usize], y: &[usize], c: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; c]; c];
    for (&p, &t) in preds.iter().zip(y) {
        m[t][p] += 1;
    }
    m
}

/// Per-class F1 from a confusion matrix; a class with no predicted and no
/// true samples scores 0.
pub fn per_class_f1(matrix: &[Vec<usize>]) -> Vec<f64> {
    let c = matrix.len();
    (0..c)
        .map(|k| {
            let tp = matrix[k][k];
            let fp: usize = (0..c).filter(|&t| t != k).map(|t| matrix[t][k]).sum();
            let fneg: usize = (0..c).filter(|&p| p != k).map(|p| matrix[k][p]).sum();
            let denom = 2 * tp + fp + fneg;
            if denom == 0 {
                0.0
            } else {
                2.0 * tp as f64 / denom as f64
            }
        })
        .collect()
}

pub fn evaluate(
    preds: &[usize],
    y: &[usize],
    classes: &[String],
    seed: u64,
    threads: usize,
) -> EvalReport {
    let matrix = confusion_matrix(preds, y, classes.len());
    let f1 = per_class_f1(&matrix);
    let macro_f1 = f1.iter().sum::<f64>() / f1.len().max(1) as f64;
    EvalReport {
        seed,
        threads,
        accuracy: accuracy(preds, y),
        macro_f1,
        per_class_f1: f1,
        classes: classes.to_vec(),
        confusion_matrix: matrix,
    }
}
