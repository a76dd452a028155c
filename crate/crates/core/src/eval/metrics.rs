//! Accuracy and macro-averaged F1 over binary labels. Ironic is the positive
//! class; any zero denominator yields 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum MetricsError {
    #[error("{preds} predictions for {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("no samples to score")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConfusionMatrix {
    pub fn from_pairs(preds: &[Label], golds: &[Label]) -> Result<ConfusionMatrix, MetricsError> {
        if preds.len() != golds.len() {
            return Err(MetricsError::LengthMismatch {
                preds: preds.len(),
                golds: golds.len(),
            });
        }
        let mut m = ConfusionMatrix::default();
        for (&p, &g) in preds.iter().zip(golds) {
            m.add(p, g);
        }
        Ok(m)
    }

    pub fn add(&mut self, pred: Label, gold: Label) {
        match (pred, gold) {
            (Label::Ironic, Label::Ironic) => self.tp += 1,
            (Label::Ironic, Label::NonIronic) => self.fp += 1,
            (Label::NonIronic, Label::Ironic) => self.fn_ += 1,
            (Label::NonIronic, Label::NonIronic) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Precision, recall and F1 with `label` as the positive class.
    pub fn class(&self, label: Label) -> ClassMetrics {
        let (tp, fp, fn_) = match label {
            Label::Ironic => (self.tp, self.fp, self.fn_),
            Label::NonIronic => (self.tn, self.fn_, self.fp),
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
        }
    }

    pub fn accuracy(&self) -> Result<f64, MetricsError> {
        if self.total() == 0 {
            return Err(MetricsError::Empty);
        }
        Ok(ratio(self.tp + self.tn, self.total()))
    }

    pub fn macro_f1(&self) -> Result<f64, MetricsError> {
        if self.total() == 0 {
            return Err(MetricsError::Empty);
        }
        Ok((self.class(Label::Ironic).f1 + self.class(Label::NonIronic).f1) / 2.0)
    }
}

pub fn accuracy(preds: &[Label], golds: &[Label]) -> Result<f64, MetricsError> {
    ConfusionMatrix::from_pairs(preds, golds)?.accuracy()
}

pub fn macro_f1(preds: &[Label], golds: &[Label]) -> Result<f64, MetricsError> {
    ConfusionMatrix::from_pairs(preds, golds)?.macro_f1()
}
