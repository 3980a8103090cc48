//! Confusion matrix and support-weighted classification metrics.
//!
//! Class 1 (deceased) is the positive class. Weighted aggregates average the
//! per-class values with class support as weights, which makes weighted
//! recall identical to accuracy.

use alloc::format;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tn + self.fp + self.fn_ + self.tp
    }

    pub fn correct(&self) -> u64 {
        self.tn + self.tp
    }

    /// Row of actual class `c`: `(correct, support)`.
    fn class_counts(&self, c: usize) -> (u64, u64, u64) {
        // (true hits, support = actual count, predicted count)
        match c {
            0 => (self.tn, self.tn + self.fp, self.tn + self.fn_),
            _ => (self.tp, self.tp + self.fn_, self.tp + self.fp),
        }
    }
}

pub fn confusion_matrix(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Validation(format!("{} true labels vs {} predictions", y_true.len(), y_pred.len())));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&t, &p)) in y_true.iter().zip(y_pred).enumerate() {
        match (t, p) {
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (1, 1) => cm.tp += 1,
            _ => return Err(Error::Validation(format!("label pair ({t}, {p}) at {i} is not binary"))),
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Index 0 = recovered, 1 = deceased.
    pub per_class: [ClassMetrics; 2],
    pub accuracy: f64,
    pub weighted_recall: f64,
    pub weighted_precision: f64,
    pub weighted_f1: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Validation(format!("empty confusion matrix {cm:?}")));
    }
    let per_class = [0, 1].map(|c| {
        let (hits, support, predicted) = cm.class_counts(c);
        let precision = ratio(hits, predicted);
        let recall = ratio(hits, support);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        ClassMetrics { precision, recall, f1, support }
    });
    let weighted =
        |f: fn(&ClassMetrics) -> f64| per_class.iter().map(|m| m.support as f64 * f(m)).sum::<f64>() / total as f64;
    Ok(ClassificationReport {
        per_class,
        accuracy: ratio(cm.correct(), total),
        weighted_recall: weighted(|m| m.recall),
        weighted_precision: weighted(|m| m.precision),
        weighted_f1: weighted(|m| m.f1),
        total,
    })
}

/// Half-away-from-zero rounding to three decimals, as shown in tables.
pub fn round3(v: f64) -> f64 {
    libm::round(v * 1000.0) / 1000.0
}
