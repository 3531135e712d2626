use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &Tensor) -> Tensor {
    let max = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Tensor::from_vec(exps.into_iter().map(|e| e / total).collect())
}

/// Cross-entropy of `softmax(logits)` against a one-hot target.
/// Returns the loss and `q - onehot(target)`.
pub fn softmax_cross_entropy(logits: &Tensor, target_class: usize) -> Result<(f64, Tensor)> {
    let c = logits.len();
    if target_class >= c {
        return Err(Error::Index(format!("target class {target_class} with {c} logits")));
    }
    let max = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = logits.data().iter().map(|&z| z - max).collect();
    let log_total = shifted.iter().map(|s| s.exp()).sum::<f64>().ln();
    let loss = log_total - shifted[target_class];
    let mut grad: Vec<f64> = shifted.iter().map(|s| (s - log_total).exp()).collect();
    grad[target_class] -= 1.0;
    Ok((loss, Tensor::new(logits.shape().to_vec(), grad)?))
}
