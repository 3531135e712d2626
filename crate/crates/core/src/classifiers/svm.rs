//! Soft-margin SVM trained by SMO with maximal-violating-pair selection.

use serde::{Deserialize, Serialize};

use crate::tensor::kernels::dot;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub kernel: KernelKind,
    /// RBF width; `None` means `1 / feature_dim`.
    pub gamma: Option<f64>,
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: KernelKind::Rbf,
            gamma: None,
            c: 1.0,
            tolerance: 1e-3,
            max_iterations: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: KernelKind,
    pub gamma: f64,
    /// Support vectors with their `α_i · y_i`.
    pub support: Vec<(Vec<f64>, f64)>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn kernel(kind: KernelKind, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match kind {
        KernelKind::Linear => dot(a, b),
        KernelKind::Rbf => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * d2).exp()
        }
    }
}

const TAU: f64 = 1e-12;

pub(crate) fn train(rows: &[Vec<f64>], labels: &[usize], params: &SvmParams) -> Result<SvmModel> {
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::param("SVM C must be positive"));
    }
    if !(params.tolerance > 0.0) {
        return Err(Error::param("SVM tolerance must be positive"));
    }
    let n = rows.len();
    let dim = rows[0].len();
    let gamma = params.gamma.unwrap_or(1.0 / dim.max(1) as f64);
    if params.kernel == KernelKind::Rbf && !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("RBF gamma must be positive"));
    }
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = y[i] * y[j] * kernel(params.kernel, gamma, &rows[i], &rows[j]);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iterations {
        let (mut i, mut g_max) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut g_min) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if up(alpha[t], y[t]) && v > g_max {
                g_max = v;
                i = t;
            }
            if low(alpha[t], y[t]) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (qii, qjj, qij) = (q[i * n + i], q[j * n + j], q[i * n + j]);
        if y[i] != y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q[t * n + i] * di + q[t * n + j] * dj;
        }
    }

    // Offset from free vectors, else the midpoint of the feasible interval.
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 { sum / free as f64 } else { (ub + lb) / 2.0 };
    let support = (0..n)
        .filter(|&t| alpha[t] > 0.0)
        .map(|t| (rows[t].clone(), alpha[t] * y[t]))
        .collect();
    Ok(SvmModel { kernel: params.kernel, gamma, support, bias: -rho, iterations, converged })
}

impl SvmModel {
    /// Decision value `Σ α_i y_i K(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|(sv, coef)| coef * kernel(self.kernel, self.gamma, sv, x))
            .sum::<f64>()
            + self.bias
    }
}
