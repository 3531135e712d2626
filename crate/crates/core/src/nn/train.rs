use serde::{Deserialize, Serialize};

use super::loss::softmax_cross_entropy;
use super::network::Network;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Samples per gradient-accumulation chunk. Chunks are the unit of
/// parallelism; fixing their size keeps the summation order (and so the
/// trained parameters) independent of the thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub l2_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 16,
            epochs: 8,
            seed: 0,
            l2_weight: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be >= 1"));
        }
        if !(self.l2_weight >= 0.0) {
            return Err(Error::param(format!("l2_weight must be >= 0, got {}", self.l2_weight)));
        }
        Ok(())
    }
}

/// One labeled network input (one tensor per branch).
#[derive(Debug, Clone)]
pub struct Example {
    pub inputs: Vec<Tensor>,
    pub label: usize,
}

impl Example {
    pub fn refs(&self) -> Vec<&Tensor> {
        self.inputs.iter().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub epoch_accuracy: Vec<f64>,
}

/// `p ← p − lr·(g + l2·p)` for every tensor, in list order.
pub fn sgd_step(params: &mut [Tensor], grads: &[Tensor], config: &TrainConfig) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape(format!(
            "{} parameter tensors vs {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::shape(format!(
                "parameter {i}: {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    let (lr, l2) = (config.learning_rate, config.l2_weight);
    for (p, g) in params.iter_mut().zip(grads) {
        for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv -= lr * (gv + l2 * *pv);
        }
    }
    Ok(())
}

/// Mean loss gradient over `batch`, plus summed loss and correct count.
pub fn batch_gradient(net: &Network, batch: &[&Example], exec: Execution) -> Result<(Vec<Tensor>, f64, usize)> {
    let chunks: Vec<&[&Example]> = batch.chunks(GRAD_CHUNK).collect();
    let partial = par::map(exec, &chunks, |chunk| -> Result<(Vec<Tensor>, f64, usize)> {
        let mut grads = net.zero_grads();
        let mut loss = 0.0;
        let mut correct = 0;
        for ex in chunk.iter() {
            let trace = net.forward_trace(&ex.refs())?;
            let (l, g) = softmax_cross_entropy(trace.logits(), ex.label)?;
            if argmax(trace.logits().data()) == ex.label {
                correct += 1;
            }
            loss += l;
            net.backward_into(&trace, &g, &mut grads)?;
        }
        Ok((grads, loss, correct))
    });
    let mut total = net.zero_grads();
    let mut loss = 0.0;
    let mut correct = 0;
    for part in partial {
        let (g, l, c) = part?;
        for (t, gi) in total.iter_mut().zip(&g) {
            t.add_scaled(gi, 1.0)?;
        }
        loss += l;
        correct += c;
    }
    let inv = 1.0 / batch.len() as f64;
    for t in &mut total {
        for v in t.data_mut() {
            *v *= inv;
        }
    }
    Ok((total, loss, correct))
}

/// Mini-batch SGD on softmax cross-entropy. Example order is reshuffled each
/// epoch from `config.seed`.
pub fn train(net: &mut Network, examples: &[Example], config: &TrainConfig, exec: Execution) -> Result<TrainReport> {
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::Data("no training examples".into()));
    }
    let mut rng = SplitMix64::new(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut report = TrainReport::default();
    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut loss = 0.0;
        let mut correct = 0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&Example> = idx.iter().map(|&i| &examples[i]).collect();
            let (grads, l, c) = batch_gradient(net, &batch, exec)?;
            loss += l;
            correct += c;
            sgd_step(net.params_mut(), &grads, config)?;
        }
        let mean_loss = loss / examples.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::Training(format!("loss diverged in epoch {epoch}")));
        }
        report.epoch_loss.push(mean_loss);
        report.epoch_accuracy.push(correct as f64 / examples.len() as f64);
    }
    Ok(report)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
