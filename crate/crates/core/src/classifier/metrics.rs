use serde::{Deserialize, Serialize};

use super::ClassifierError;

/// Binary confusion matrix: rows are the actual class, columns the prediction.
///
/// ```text
///              predicted 0   predicted 1
/// actual 0         tn            fp
/// actual 1         fn_           tp
/// ```
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
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
}

pub fn confusion(labels: &[u8], predictions: &[u8]) -> Result<ConfusionMatrix, ClassifierError> {
    if labels.len() != predictions.len() {
        return Err(ClassifierError::LengthMismatch {
            left: labels.len(),
            right: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(ClassifierError::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (&a, &p) in labels.iter().zip(predictions) {
        match (a, p) {
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            (1, 1) => cm.tp += 1,
            (0 | 1, bad) | (bad, _) => return Err(ClassifierError::InvalidLabel(bad)),
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub positive: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Set when a ratio had a zero denominator and was reported as 0.
    pub precision_undefined: bool,
    pub recall_undefined: bool,
    pub f1_undefined: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Precision, recall, F1 and accuracy with `positive` as the positive class.
///
/// With `positive = 0` the roles swap: true positives are `tn`, false
/// positives are `fn_` (class 1 predicted as 0) and false negatives are `fp`.
pub fn metrics(cm: &ConfusionMatrix, positive: u8) -> Result<Metrics, ClassifierError> {
    if cm.total() == 0 {
        return Err(ClassifierError::EmptyInput);
    }
    let (tp, fp, fn_) = match positive {
        1 => (cm.tp, cm.fp, cm.fn_),
        0 => (cm.tn, cm.fn_, cm.fp),
        other => return Err(ClassifierError::InvalidLabel(other)),
    };
    let (precision, precision_undefined) = ratio(tp, tp + fp);
    let (recall, recall_undefined) = ratio(tp, tp + fn_);
    let (f1, f1_undefined) = if precision + recall == 0.0 {
        (0.0, true)
    } else {
        (2.0 * precision * recall / (precision + recall), false)
    };
    Ok(Metrics {
        positive,
        precision,
        recall,
        f1,
        accuracy: (cm.tn + cm.tp) as f64 / cm.total() as f64,
        precision_undefined,
        recall_undefined,
        f1_undefined,
    })
}
