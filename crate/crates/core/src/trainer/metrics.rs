use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::logloss as mean_logloss;

/// Area under the ROC curve via the Mann–Whitney rank statistic; tied scores
/// get average ranks, so a tied positive/negative pair counts one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::MetricUndefined("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::MetricUndefined(format!(
            "AUC needs both classes ({positives} positive, {negatives} negative)"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of positives, kept integral so ties are exact.
    let mut rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1..=end, average (start + 1 + end) / 2
        let avg2 = (start + 1 + end) as u128;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        rank_sum2 += avg2 * pos_in_group;
        start = end;
    }
    let p = positives as u128;
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * negatives as u128) as f64)
}

/// Mean binary cross-entropy with probabilities clamped away from 0 and 1.
pub fn logloss(probabilities: &[f64], labels: &[u8]) -> Result<f64> {
    if probabilities.len() != labels.len() || labels.is_empty() {
        return Err(Error::Contract(format!(
            "{} probabilities for {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    Ok(mean_logloss(probabilities, &y))
}

/// AUC and log loss of one split.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub split: String,
    pub samples: usize,
    pub auc: f64,
    pub logloss: f64,
}

impl MetricsReport {
    pub fn compute(split: impl Into<String>, probabilities: &[f64], labels: &[u8]) -> Result<Self> {
        Ok(MetricsReport {
            split: split.into(),
            samples: labels.len(),
            auc: auc(probabilities, labels)?,
            logloss: logloss(probabilities, labels)?,
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} samples={} auc={:.4} logloss={:.4}",
            self.split, self.samples, self.auc, self.logloss
        )
    }
}

/// Mean and sample standard deviation (n − 1); the deviation is 0 for a
/// single value.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// Table-cell formatting: `0.8066+/-0.0012`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.4}+/-{std:.4}")
}
