//! Accuracy, ROC curves and the area under them.

use thiserror::Error;

use crate::dataset::Label;
use crate::numfmt::g17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("ROC needs both classes present")]
    SingleClass,
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
}

pub fn accuracy(predicted: &[Label], actual: &[Label]) -> Result<f64, MetricsError> {
    if predicted.len() != actual.len() {
        return Err(MetricsError::LengthMismatch(predicted.len(), actual.len()));
    }
    if actual.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / actual.len() as f64)
}

/// ROC curve with one point per distinct score plus the `(0, 0)` origin.
///
/// `thresholds[i]` is the cut producing `points[i]`: rows with
/// `score >= thresholds[i]` are called PD. The origin's threshold is `+inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

pub fn roc_curve(scores: &[f64], actual: &[Label]) -> Result<RocCurve, MetricsError> {
    if scores.len() != actual.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), actual.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    let n_pos = actual.iter().filter(|l| l.is_positive()).count();
    let n_neg = actual.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if actual[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        thresholds.push(t);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

pub fn roc_auc(scores: &[f64], actual: &[Label]) -> Result<f64, MetricsError> {
    roc_curve(scores, actual).map(|c| auc(&c))
}

impl RocCurve {
    /// `threshold,fpr,tpr` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,fpr,tpr\n");
        for (t, (fpr, tpr)) in self.thresholds.iter().zip(&self.points) {
            out.push_str(&format!("{},{},{}\n", g17(*t), g17(*fpr), g17(*tpr)));
        }
        out
    }
}
