//! Confusion matrix and macro-averaged evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// M×M integer counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    num_classes: usize,
    cells: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(num_classes: usize) -> Self {
        ConfusionMatrix { num_classes, cells: vec![0; num_classes * num_classes] }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.cells[truth * self.num_classes + pred]
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<()> {
        if truth >= self.num_classes || pred >= self.num_classes {
            return Err(Error::invalid(
                "confusion_matrix",
                format!("label ({truth},{pred}) out of range for {} classes", self.num_classes),
            ));
        }
        self.cells[truth * self.num_classes + pred] += 1;
        Ok(())
    }

    /// Merges another matrix into this one (used for sharded evaluation).
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.num_classes != self.num_classes {
            return Err(Error::shape("confusion_matrix", "merge of differently sized matrices"));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.cells.iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.num_classes)
            .map(|t| self.cells[t * self.num_classes..(t + 1) * self.num_classes].to_vec())
            .collect()
    }
}

/// Builds the matrix from parallel truth/prediction sequences.
pub fn confusion_matrix(truths: &[usize], predictions: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if truths.len() != predictions.len() {
        return Err(Error::invalid(
            "confusion_matrix",
            format!("{} truths vs {} predictions", truths.len(), predictions.len()),
        ));
    }
    let mut cm = ConfusionMatrix::zeros(num_classes);
    for (&t, &p) in truths.iter().zip(predictions) {
        cm.record(t, p)?;
    }
    Ok(cm)
}

/// Accuracy and unweighted per-class means of precision/recall/F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

/// Macro metrics with the zero-division rule: a class with no predicted
/// (resp. true) samples gets precision (resp. recall) 0, and F1 is 0 when
/// `p + r = 0`. Every class weighs equally in the means.
pub fn macro_metrics(cm: &ConfusionMatrix) -> Result<MacroMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("macro_metrics", "empty confusion matrix"));
    }
    let m = cm.num_classes();
    let mut trace = 0u64;
    let mut psum = 0.0;
    let mut rsum = 0.0;
    let mut fsum = 0.0;
    for c in 0..m {
        let tp = cm.get(c, c);
        trace += tp;
        let colsum: u64 = (0..m).map(|t| cm.get(t, c)).sum();
        let rowsum: u64 = (0..m).map(|p| cm.get(c, p)).sum();
        let precision = if colsum == 0 { 0.0 } else { tp as f64 / colsum as f64 };
        let recall = if rowsum == 0 { 0.0 } else { tp as f64 / rowsum as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        psum += precision;
        rsum += recall;
        fsum += f1;
    }
    Ok(MacroMetrics {
        accuracy: trace as f64 / total as f64,
        macro_precision: psum / m as f64,
        macro_recall: rsum / m as f64,
        macro_f1: fsum / m as f64,
    })
}
