use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// Confusion counts with fake as the positive class, plus derived scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Human-readable description of the evaluated split.
    #[serde(default)]
    pub split: String,
    /// Classifier kind, feature selector and hyperparameters.
    #[serde(default)]
    pub config: serde_json::Value,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Result<Self> {
        let total = tp + fp + tn + fn_;
        if total == 0 {
            return Err(Error::InvalidArgument("cannot evaluate zero instances".into()));
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Ok(EvalReport {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, total),
            precision,
            recall,
            f1,
            split: String::new(),
            config: serde_json::Value::Null,
        })
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// True when every derived score equals its recomputation from the
    /// counts within `tol`.
    pub fn is_consistent(&self, tol: f64) -> bool {
        match EvalReport::from_counts(self.tp, self.fp, self.tn, self.fn_) {
            Ok(r) => {
                (r.accuracy - self.accuracy).abs() <= tol
                    && (r.precision - self.precision).abs() <= tol
                    && (r.recall - self.recall).abs() <= tol
                    && (r.f1 - self.f1).abs() <= tol
            }
            Err(_) => false,
        }
    }

    pub fn with_context(mut self, split: impl Into<String>, config: serde_json::Value) -> Self {
        self.split = split.into();
        self.config = config;
        self
    }
}

pub fn evaluate(predictions: &[Label], truth: &[Label]) -> Result<EvalReport> {
    if predictions.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, t) in predictions.iter().zip(truth) {
        match (p.is_fake(), t.is_fake()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    EvalReport::from_counts(tp, fp, tn, fn_)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Fake as F, Real as R};

    #[test]
    fn perfect_classifier() {
        let t = [F, R, F, R, R];
        let r = evaluate(&t, &t).unwrap();
        assert_eq!((r.accuracy, r.f1), (1.0, 1.0));
    }

    #[test]
    fn all_fake_on_balanced_truth() {
        let r = evaluate(&[F, F, F, F], &[F, F, R, R]).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.recall, 1.0);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn count_fixture() {
        let r = EvalReport::from_counts(3, 1, 4, 2).unwrap();
        assert_eq!(r.accuracy, 0.7);
        assert_eq!(r.precision, 0.75);
        assert_eq!(r.recall, 0.6);
        assert!((r.f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(evaluate(&[F], &[F, R]).is_err());
        assert!(evaluate(&[], &[]).is_err());
        let r = evaluate(&[R, R], &[R, R]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert!(r.is_consistent(0.0));
    }

    #[test]
    fn fn_field_serializes_as_fn() {
        let r = EvalReport::from_counts(1, 0, 1, 0).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["fn"], 0);
        let back: EvalReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }
}
