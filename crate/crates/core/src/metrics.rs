//! Binary classification metrics.
//!
//! AUC is the Mann-Whitney statistic: the fraction of (positive, negative)
//! pairs ordered correctly, ties counting one half. It is computed from
//! average ranks in `O(n log n)`.

use serde::{Deserialize, Serialize};

use crate::ensemble::threshold;
use crate::error::{Result, SdmError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(SdmError::invalid(format!("length mismatch: {a} labels vs {b} predictions")));
    }
    if a == 0 {
        return Err(SdmError::invalid("empty label vector"));
    }
    Ok(())
}

fn check_binary(v: &[u8], what: &str) -> Result<()> {
    match v.iter().find(|&&l| l > 1) {
        Some(bad) => Err(SdmError::invalid(format!("{what} contains non-binary value {bad}"))),
        None => Ok(()),
    }
}

pub fn confusion(y_true: &[u8], y_pred: &[u8]) -> Result<ConfusionMatrix> {
    check_lengths(y_true.len(), y_pred.len())?;
    check_binary(y_true, "y_true")?;
    check_binary(y_pred, "y_pred")?;
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => cm.tp += 1,
            (0, 1) => cm.fp += 1,
            (1, 0) => cm.fn_ += 1,
            _ => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Rank-based AUC. Fails when `y_true` holds a single class.
pub fn auc_roc(y_true: &[u8], scores: &[f64]) -> Result<f64> {
    check_lengths(y_true.len(), scores.len())?;
    check_binary(y_true, "y_true")?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(SdmError::invalid("scores contain NaN"));
    }
    let n_pos = y_true.iter().filter(|&&l| l == 1).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(SdmError::invalid("AUC is undefined when only one class is present"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of 1-based average ranks of the positives, doubled so tie ranks
    // stay integral.
    let mut rank_sum_x2: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end, average (start + 1 + end) / 2
        let avg_x2 = (start + 1 + end) as u64;
        let pos_in_group = order[start..end].iter().filter(|&&i| y_true[i] == 1).count() as u64;
        rank_sum_x2 += avg_x2 * pos_in_group;
        start = end;
    }
    let (p, q) = (n_pos as u64, n_neg as u64);
    // U = R - p(p+1)/2, kept doubled
    let u_x2 = rank_sum_x2 - p * (p + 1);
    Ok(u_x2 as f64 / (2 * p * q) as f64)
}

/// Metric whose denominator was zero and is reported as 0 (or 0.5 for AUC).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Degenerate {
    Precision,
    Recall,
    F1,
    Auc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub confusion: ConfusionMatrix,
    /// Not part of the report JSON.
    #[serde(skip)]
    pub degenerate: Vec<Degenerate>,
}

/// Thresholds `probs` at `theta` and scores the result.
pub fn classification_report(y_true: &[u8], probs: &[f64], theta: f64) -> Result<MetricsReport> {
    check_lengths(y_true.len(), probs.len())?;
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(SdmError::invalid(format!("probability {p} outside [0, 1]")));
    }
    let cm = confusion(y_true, &threshold(probs, theta))?;
    let mut degenerate = Vec::new();
    let mut ratio = |num: usize, den: usize, tag: Degenerate| {
        if den == 0 {
            degenerate.push(tag);
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(cm.tp, cm.tp + cm.fp, Degenerate::Precision);
    let recall = ratio(cm.tp, cm.tp + cm.fn_, Degenerate::Recall);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate.push(Degenerate::F1);
        0.0
    };
    let auc = match auc_roc(y_true, probs) {
        Ok(a) => a,
        Err(_) => {
            degenerate.push(Degenerate::Auc);
            0.5
        }
    };
    Ok(MetricsReport {
        accuracy: (cm.tp + cm.tn) as f64 / cm.total() as f64,
        precision,
        recall,
        f1,
        auc,
        confusion: cm,
        degenerate,
    })
}

/// A report tagged with what it measured; the serialized metrics document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub species: String,
    pub model: String,
    pub split: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub confusion: ConfusionMatrix,
}

impl MetricsRecord {
    pub fn new(species: &str, model: &str, split: &str, report: &MetricsReport) -> Self {
        MetricsRecord {
            species: species.to_string(),
            model: model.to_string(),
            split: split.to_string(),
            accuracy: report.accuracy,
            precision: report.precision,
            recall: report.recall,
            f1: report.f1,
            auc: report.auc,
            confusion: report.confusion,
        }
    }
}
