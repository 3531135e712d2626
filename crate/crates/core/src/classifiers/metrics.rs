use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// ROC AUC by the rank-sum formulation with mid-ranks for ties:
/// `(Σ ranks of positives − n₊(n₊+1)/2) / (n₊·n₋)`. Kept in integer
/// half-rank units until the final division.
pub fn compute_auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Evaluation(format!("score {i} is NaN")));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as u128;
    let n_neg = scores.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the 1-based mid-rank of each tie group is (first + last) with
    // 1-based first/last positions.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let twice = (i + 1 + j + 1) as u128;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                twice_rank_sum += twice;
            }
        }
        i = j + 1;
    }
    let numer = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(numer as f64 / (2 * n_pos * n_neg) as f64)
}

/// Held-out evaluation. Keys are stable: they are the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvalReport {
    /// AUC from raw scores; confusion from `score >= threshold` as positive.
    pub fn from_scores(scores: &[f64], labels: &[usize], threshold: f64, seed: u64, config_hash: &str) -> Result<Self> {
        let auc = compute_auc(scores, labels)?;
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (&s, &l) in scores.iter().zip(labels) {
            match (s >= threshold, l == 1) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
        Ok(EvalReport {
            auc,
            accuracy: (tp + tn) as f64 / scores.len() as f64,
            tp,
            fp,
            tn,
            fn_,
            seed,
            config_hash: config_hash.to_string(),
            warnings: Vec::new(),
        })
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}
