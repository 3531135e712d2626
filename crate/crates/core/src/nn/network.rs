use super::activation::Activation;
use super::layers::{
    conv_backward_into, conv_forward_cached, dense_backward_into, dense_forward, maxpool2x2,
    maxpool2x2_backward, ConvCache, PoolMask,
};
use super::loss::softmax;
use super::spec::{ArchitectureSpec, LayerSpec, ShapePlan};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

/// Layer with indices into the network's flat parameter list.
#[derive(Debug, Clone, Copy)]
enum Layer {
    Conv { pad: usize, kernels: usize, bias: usize },
    Act(Activation),
    MaxPool,
    Flatten,
    Dense { weights: usize, bias: usize },
}

#[derive(Debug, Clone)]
enum Cache {
    Conv(ConvCache),
    Act(Tensor),
    Pool(PoolMask),
    Flatten(Vec<usize>),
    Dense(Tensor),
}

/// Forward-pass record needed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    branches: Vec<Vec<Cache>>,
    trunk: Vec<Cache>,
    logits: Tensor,
}

impl Trace {
    pub fn logits(&self) -> &Tensor {
        &self.logits
    }
}

/// A feed-forward network of one or more convolutional branches whose
/// flattened outputs are concatenated and fed to a dense trunk.
///
/// Parameters live in one flat list in documented order: branch 0 layers,
/// branch 1 layers, ..., then the trunk; a conv layer contributes
/// `kernels [F,C,k,k]` then `bias [F]`, a dense layer `weights [out,in]` then
/// `bias [out]`.
#[derive(Debug, Clone)]
pub struct Network {
    spec: ArchitectureSpec,
    plan: ShapePlan,
    seed: u64,
    params: Vec<Tensor>,
    branch_layers: Vec<Vec<Layer>>,
    trunk_layers: Vec<Layer>,
}

/// Builds a network with Glorot-uniform weights and zero biases.
pub fn init_parameters(spec: &ArchitectureSpec, seed: u64) -> Result<Network> {
    Network::new(spec.clone(), seed)
}

impl Network {
    pub fn new(spec: ArchitectureSpec, seed: u64) -> Result<Self> {
        let plan = spec.plan()?;
        let mut rng = SplitMix64::new(seed);
        let mut params = Vec::new();
        let mut branch_layers = Vec::new();
        for branch in &spec.branches {
            let mut channels = spec.input[0];
            let mut layers = Vec::new();
            for l in branch {
                layers.push(build_layer(l, &mut channels, None, &mut params, &mut rng));
            }
            branch_layers.push(layers);
        }
        let mut width = plan.concat_width;
        let mut trunk_layers = Vec::new();
        for l in &spec.trunk {
            let mut dummy = 0;
            trunk_layers.push(build_layer(l, &mut dummy, Some(&mut width), &mut params, &mut rng));
        }
        Ok(Self { spec, plan, seed, params, branch_layers, trunk_layers })
    }

    /// Rebuilds a network around existing parameters (checkpoint restore).
    pub(crate) fn with_params(spec: ArchitectureSpec, seed: u64, params: Vec<Tensor>) -> Result<Self> {
        let mut net = Self::new(spec, seed)?;
        if params.len() != net.params.len() {
            return Err(Error::Integrity(format!(
                "expected {} parameter tensors, got {}",
                net.params.len(),
                params.len()
            )));
        }
        for (i, (have, want)) in params.iter().zip(&net.params).enumerate() {
            if have.shape() != want.shape() {
                return Err(Error::Integrity(format!(
                    "parameter {i}: shape {:?} does not match spec {:?}",
                    have.shape(),
                    want.shape()
                )));
            }
        }
        net.params = params;
        Ok(net)
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn plan(&self) -> &ShapePlan {
        &self.plan
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Zero tensors shaped like the parameters.
    pub fn zero_grads(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| Tensor::zeros(p.shape())).collect()
    }

    /// Indices into [`Self::params`] of each trainable tensor with its role,
    /// e.g. `(3, "branch1.layer0.kernels")`.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.params.len()];
        for (b, layers) in self.branch_layers.iter().enumerate() {
            for (i, l) in layers.iter().enumerate() {
                name_layer(l, &format!("branch{b}.layer{i}"), &mut names);
            }
        }
        for (i, l) in self.trunk_layers.iter().enumerate() {
            name_layer(l, &format!("trunk.layer{i}"), &mut names);
        }
        names
    }

    fn check_inputs(&self, inputs: &[&Tensor]) -> Result<()> {
        if inputs.len() != self.branch_layers.len() {
            return Err(Error::shape(format!(
                "{} expects {} input view(s), got {}",
                self.spec.name,
                self.branch_layers.len(),
                inputs.len()
            )));
        }
        for (i, x) in inputs.iter().enumerate() {
            if x.shape() != self.spec.input {
                return Err(Error::shape(format!(
                    "input {i} has shape {:?}, network expects {:?}",
                    x.shape(),
                    self.spec.input
                )));
            }
        }
        Ok(())
    }

    fn run_layer(&self, layer: &Layer, x: Tensor, caches: Option<&mut Vec<Cache>>) -> Result<Tensor> {
        let (out, cache) = match *layer {
            Layer::Conv { pad, kernels, bias } => {
                let (y, c) = conv_forward_cached(&x, &self.params[kernels], &self.params[bias], pad)?;
                (y, Cache::Conv(c))
            }
            Layer::Act(a) => {
                let y = x.map(|v| a.eval(v));
                (y, Cache::Act(x))
            }
            Layer::MaxPool => {
                let (y, m) = maxpool2x2(&x)?;
                (y, Cache::Pool(m))
            }
            Layer::Flatten => {
                let shape = x.shape().to_vec();
                let n = x.len();
                (x.reshape(&[n])?, Cache::Flatten(shape))
            }
            Layer::Dense { weights, bias } => {
                let y = dense_forward(&x, &self.params[weights], &self.params[bias])?;
                (y, Cache::Dense(x))
            }
        };
        if let Some(c) = caches {
            c.push(cache);
        }
        Ok(out)
    }

    fn concat_branches(&self, inputs: &[&Tensor], mut caches: Option<&mut Vec<Vec<Cache>>>) -> Result<Tensor> {
        let mut joined = Vec::with_capacity(self.plan.concat_width);
        for (layers, x) in self.branch_layers.iter().zip(inputs) {
            let mut local = caches.as_ref().map(|_| Vec::with_capacity(layers.len()));
            let mut h = (*x).clone();
            for l in layers {
                h = self.run_layer(l, h, local.as_mut())?;
            }
            joined.extend_from_slice(h.data());
            if let (Some(all), Some(local)) = (caches.as_deref_mut(), local) {
                all.push(local);
            }
        }
        Ok(Tensor::from_vec(joined))
    }

    /// Logits for one example (one tensor per branch).
    pub fn forward(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        self.check_inputs(inputs)?;
        let mut h = self.concat_branches(inputs, None)?;
        for l in &self.trunk_layers {
            h = self.run_layer(l, h, None)?;
        }
        Ok(h)
    }

    /// Activations entering the final dense layer.
    pub fn penultimate(&self, inputs: &[&Tensor]) -> Result<Tensor> {
        self.check_inputs(inputs)?;
        let mut h = self.concat_branches(inputs, None)?;
        let n = self.trunk_layers.len();
        for l in &self.trunk_layers[..n - 1] {
            h = self.run_layer(l, h, None)?;
        }
        Ok(h)
    }

    /// Softmax probability of class 1 for a two-way network.
    pub fn predict_positive(&self, inputs: &[&Tensor]) -> Result<f64> {
        let q = softmax(&self.forward(inputs)?);
        q.data()
            .get(1)
            .copied()
            .ok_or_else(|| Error::shape("network has a single output class"))
    }

    pub fn forward_trace(&self, inputs: &[&Tensor]) -> Result<Trace> {
        self.check_inputs(inputs)?;
        let mut branches = Vec::with_capacity(self.branch_layers.len());
        let mut h = self.concat_branches(inputs, Some(&mut branches))?;
        let mut trunk = Vec::with_capacity(self.trunk_layers.len());
        for l in &self.trunk_layers {
            h = self.run_layer(l, h, Some(&mut trunk))?;
        }
        Ok(Trace { branches, trunk, logits: h })
    }

    /// Parameter gradients for one example given `d loss / d logits`.
    pub fn backward(&self, trace: &Trace, grad_logits: &Tensor) -> Result<Vec<Tensor>> {
        let mut grads = self.zero_grads();
        self.backward_into(trace, grad_logits, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Self::backward`] but adds into `grads`.
    pub fn backward_into(&self, trace: &Trace, grad_logits: &Tensor, grads: &mut [Tensor]) -> Result<()> {
        if grad_logits.shape() != trace.logits.shape() {
            return Err(Error::shape(format!(
                "upstream gradient {:?} vs logits {:?}",
                grad_logits.shape(),
                trace.logits.shape()
            )));
        }
        if grads.len() != self.params.len() {
            return Err(Error::shape("gradient list does not match parameters"));
        }
        let mut g = grad_logits.clone();
        for (l, c) in self.trunk_layers.iter().zip(&trace.trunk).rev() {
            g = self.layer_backward(l, c, g, grads, true)?;
        }
        let mut offset = 0;
        for (layers, caches) in self.branch_layers.iter().zip(&trace.branches) {
            let width = match caches.last() {
                Some(Cache::Flatten(shape)) => shape.iter().product::<usize>(),
                _ => return Err(Error::shape("branch trace does not end in flatten")),
            };
            let mut gb = Tensor::from_vec(g.data()[offset..offset + width].to_vec());
            offset += width;
            for (i, (l, c)) in layers.iter().zip(caches).enumerate().rev() {
                // The first layer's input gradient is never consumed.
                gb = self.layer_backward(l, c, gb, grads, i > 0)?;
            }
        }
        Ok(())
    }

    fn layer_backward(
        &self,
        layer: &Layer,
        cache: &Cache,
        upstream: Tensor,
        grads: &mut [Tensor],
        want_input: bool,
    ) -> Result<Tensor> {
        match (*layer, cache) {
            (Layer::Conv { pad, kernels, bias }, Cache::Conv(c)) => {
                let (gk, gb) = two_mut(grads, kernels, bias);
                let gin = conv_backward_into(
                    c,
                    self.params[kernels].data(),
                    upstream.data(),
                    pad,
                    gk.data_mut(),
                    gb.data_mut(),
                    want_input,
                );
                let shape = [c.geom.c_in, c.geom.h - 2 * pad, c.geom.w - 2 * pad];
                match gin {
                    Some(v) => Tensor::new(shape.to_vec(), v),
                    None => Ok(Tensor::zeros(&shape)),
                }
            }
            (Layer::Act(a), Cache::Act(x)) => {
                let data = x
                    .data()
                    .iter()
                    .zip(upstream.data())
                    .map(|(&xi, &gi)| if gi == 0.0 { 0.0 } else { gi * a.derivative(xi) })
                    .collect();
                Tensor::new(x.shape().to_vec(), data)
            }
            (Layer::MaxPool, Cache::Pool(m)) => maxpool2x2_backward(m, &upstream),
            (Layer::Flatten, Cache::Flatten(shape)) => upstream.reshape(shape),
            (Layer::Dense { weights, bias }, Cache::Dense(x)) => {
                let w = &self.params[weights];
                let n_in = w.shape()[1];
                let (gw, gb) = two_mut(grads, weights, bias);
                for (b, u) in gb.data_mut().iter_mut().zip(upstream.data()) {
                    *b += u;
                }
                if want_input {
                    let mut gx = vec![0.0; n_in];
                    dense_backward_into(x.data(), w.data(), upstream.data(), Some(&mut gx), gw.data_mut(), n_in);
                    Ok(Tensor::from_vec(gx))
                } else {
                    dense_backward_into(x.data(), w.data(), upstream.data(), None, gw.data_mut(), n_in);
                    Ok(Tensor::zeros(&[n_in]))
                }
            }
            _ => Err(Error::shape("trace does not match network layers")),
        }
    }
}

fn two_mut(v: &mut [Tensor], a: usize, b: usize) -> (&mut Tensor, &mut Tensor) {
    assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}

fn glorot(rng: &mut SplitMix64, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform(-limit, limit)).collect())
        .expect("shape product matches")
}

fn build_layer(
    spec: &LayerSpec,
    channels: &mut usize,
    width: Option<&mut usize>,
    params: &mut Vec<Tensor>,
    rng: &mut SplitMix64,
) -> Layer {
    match *spec {
        LayerSpec::Conv { filters, kernel, padding } => {
            let kk = kernel * kernel;
            params.push(glorot(rng, &[filters, *channels, kernel, kernel], *channels * kk, filters * kk));
            params.push(Tensor::zeros(&[filters]));
            *channels = filters;
            Layer::Conv { pad: padding, kernels: params.len() - 2, bias: params.len() - 1 }
        }
        LayerSpec::Act(a) => Layer::Act(a),
        LayerSpec::MaxPool => Layer::MaxPool,
        LayerSpec::Flatten => Layer::Flatten,
        LayerSpec::Dense { units } => {
            let width = width.expect("dense layers only appear in the trunk");
            params.push(glorot(rng, &[units, *width], *width, units));
            params.push(Tensor::zeros(&[units]));
            *width = units;
            Layer::Dense { weights: params.len() - 2, bias: params.len() - 1 }
        }
    }
}

fn name_layer(l: &Layer, prefix: &str, names: &mut [String]) {
    match *l {
        Layer::Conv { kernels, bias, .. } => {
            names[kernels] = format!("{prefix}.kernels");
            names[bias] = format!("{prefix}.bias");
        }
        Layer::Dense { weights, bias } => {
            names[weights] = format!("{prefix}.weights");
            names[bias] = format!("{prefix}.bias");
        }
        _ => {}
    }
}
