//! Stateless forward/backward kernels for the parameterized and pooling
//! layers. [`super::Network`] strings these together.

use crate::error::{Error, Result};
use crate::tensor::kernels::{axpy, dot, gemm, Strides};
use crate::tensor::Tensor;

pub(crate) use crate::tensor::conv::ConvGeometry;
use crate::tensor::conv::{col2im, im2col};

/// Winning input index for each 2×2 window, for routing gradients back.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolMask {
    input_shape: Vec<usize>,
    argmax: Vec<usize>,
}

impl PoolMask {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// 2×2 max pooling with stride 2. Ties go to the first element in row-major
/// window order.
pub fn maxpool2x2(x: &Tensor) -> Result<(Tensor, PoolMask)> {
    let [c, h, w] = *x.shape() else {
        return Err(Error::shape(format!("maxpool expects [C,H,W], got {:?}", x.shape())));
    };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!("maxpool needs even extents, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let data = x.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let i0 = base + 2 * y * w + 2 * xx;
                let cands = [i0, i0 + 1, i0 + w, i0 + w + 1];
                let mut best = cands[0];
                for &i in &cands[1..] {
                    if data[i] > data[best] {
                        best = i;
                    }
                }
                out.push(data[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::new(vec![c, oh, ow], out)?,
        PoolMask {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool2x2_backward(mask: &PoolMask, upstream: &Tensor) -> Result<Tensor> {
    if upstream.len() != mask.argmax.len() {
        return Err(Error::shape(format!(
            "maxpool backward: upstream {:?} does not match {} windows",
            upstream.shape(),
            mask.argmax.len()
        )));
    }
    let mut grad = Tensor::zeros(&mask.input_shape);
    let g = grad.data_mut();
    for (&i, &u) in mask.argmax.iter().zip(upstream.data()) {
        g[i] += u;
    }
    Ok(grad)
}

/// `W x + b` for `x: [n_in]`, `W: [n_out, n_in]`, `b: [n_out]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n_out, n_in) = dense_dims(w)?;
    if x.len() != n_in || b.len() != n_out || x.rank() != 1 || b.rank() != 1 {
        return Err(Error::shape(format!(
            "dense: x {:?}, W {:?}, b {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    let wd = w.data();
    let out = (0..n_out)
        .map(|o| b.data()[o] + dot(&wd[o * n_in..(o + 1) * n_in], x.data()))
        .collect();
    Tensor::new(vec![n_out], out)
}

/// Gradients of a dense layer: `(d_input, d_weights, d_bias)`.
pub fn dense_backward(x: &Tensor, w: &Tensor, upstream: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (n_out, n_in) = dense_dims(w)?;
    if x.len() != n_in || upstream.len() != n_out {
        return Err(Error::shape(format!(
            "dense backward: x {:?}, W {:?}, upstream {:?}",
            x.shape(),
            w.shape(),
            upstream.shape()
        )));
    }
    let mut gx = vec![0.0; n_in];
    let mut gw = Tensor::zeros(w.shape());
    dense_backward_into(x.data(), w.data(), upstream.data(), Some(&mut gx), gw.data_mut(), n_in);
    Ok((Tensor::from_vec(gx), gw, upstream.clone()))
}

pub(crate) fn dense_backward_into(
    x: &[f64],
    w: &[f64],
    upstream: &[f64],
    gx: Option<&mut [f64]>,
    gw: &mut [f64],
    n_in: usize,
) {
    for (o, &g) in upstream.iter().enumerate() {
        if g != 0.0 {
            axpy(g, x, &mut gw[o * n_in..(o + 1) * n_in]);
        }
    }
    if let Some(gx) = gx {
        for (o, &g) in upstream.iter().enumerate() {
            if g != 0.0 {
                axpy(g, &w[o * n_in..(o + 1) * n_in], gx);
            }
        }
    }
}

fn dense_dims(w: &Tensor) -> Result<(usize, usize)> {
    match *w.shape() {
        [o, i] => Ok((o, i)),
        _ => Err(Error::shape(format!("dense weights must be [n_out,n_in], got {:?}", w.shape()))),
    }
}

/// Zero-pads each plane of a `[C,H,W]` buffer by `pad` on every side.
pub(crate) fn pad_planes(x: &[f64], c: usize, h: usize, w: usize, pad: usize) -> Vec<f64> {
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut out = vec![0.0; c * ph * pw];
    for ch in 0..c {
        for y in 0..h {
            let src = &x[(ch * h + y) * w..(ch * h + y + 1) * w];
            let dst0 = (ch * ph + y + pad) * pw + pad;
            out[dst0..dst0 + w].copy_from_slice(src);
        }
    }
    out
}

pub(crate) fn crop_planes(x: &[f64], c: usize, h: usize, w: usize, pad: usize) -> Vec<f64> {
    let (ph, pw) = (h + 2 * pad, w + 2 * pad);
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        for y in 0..h {
            let s0 = (ch * ph + y + pad) * pw + pad;
            out.extend_from_slice(&x[s0..s0 + w]);
        }
    }
    out
}

/// Forward state a convolution keeps for its backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ConvCache {
    pub geom: ConvGeometry,
    /// Patch matrix `[C·kh·kw, out_h·out_w]`.
    pub cols: Vec<f64>,
}

/// Convolution with symmetric zero padding, built on the valid kernel.
pub(crate) fn conv_forward_cached(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    pad: usize,
) -> Result<(Tensor, ConvCache)> {
    let [c, h, w] = *input.shape() else {
        return Err(Error::shape(format!("conv input must be [C,H,W], got {:?}", input.shape())));
    };
    let padded_shape = [c, h + 2 * pad, w + 2 * pad];
    let geom = ConvGeometry::check(&padded_shape, kernels.shape())?;
    if bias.shape() != [geom.c_out] {
        return Err(Error::shape(format!("bias {:?} vs {} filters", bias.shape(), geom.c_out)));
    }
    let cols = if pad == 0 {
        im2col(input.data(), &geom)
    } else {
        im2col(&pad_planes(input.data(), c, h, w, pad), &geom)
    };
    let out = geom.forward(&cols, kernels.data(), bias.data());
    Ok((
        Tensor::new(vec![geom.c_out, geom.out_h, geom.out_w], out)?,
        ConvCache { geom, cols },
    ))
}

/// Accumulates kernel/bias gradients and optionally returns the input
/// gradient (cropped back to the unpadded extent).
pub(crate) fn conv_backward_into(
    cache: &ConvCache,
    kernels: &[f64],
    upstream: &[f64],
    pad: usize,
    gk: &mut [f64],
    gb: &mut [f64],
    want_input: bool,
) -> Option<Vec<f64>> {
    let g = &cache.geom;
    let (p_len, q_len) = (g.patch_len(), g.out_len());
    for (o, up) in upstream.chunks(q_len).enumerate() {
        gb[o] += up.iter().sum::<f64>();
    }
    // dK += dY · colsᵀ
    gemm(
        g.c_out,
        q_len,
        p_len,
        upstream,
        Strides::row_major(q_len),
        &cache.cols,
        Strides::transposed(q_len),
        1.0,
        gk,
    );
    if !want_input {
        return None;
    }
    // dcols = Kᵀ · dY
    let mut gcols = vec![0.0; p_len * q_len];
    gemm(
        p_len,
        g.c_out,
        q_len,
        kernels,
        Strides::transposed(p_len),
        upstream,
        Strides::row_major(q_len),
        0.0,
        &mut gcols,
    );
    let gin = col2im(&gcols, g);
    Some(if pad == 0 {
        gin
    } else {
        crop_planes(&gin, g.c_in, g.h - 2 * pad, g.w - 2 * pad, pad)
    })
}

/// Padded convolution forward pass.
pub fn conv_forward(input: &Tensor, kernels: &Tensor, bias: &Tensor, pad: usize) -> Result<Tensor> {
    conv_forward_cached(input, kernels, bias, pad).map(|(t, _)| t)
}

/// Gradients of a padded convolution: `(d_input, d_kernels, d_bias)`.
pub fn conv_backward(
    input: &Tensor,
    kernels: &Tensor,
    bias: &Tensor,
    pad: usize,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (out, cache) = conv_forward_cached(input, kernels, bias, pad)?;
    if out.shape() != upstream.shape() {
        return Err(Error::shape(format!(
            "conv backward: upstream {:?} vs output {:?}",
            upstream.shape(),
            out.shape()
        )));
    }
    let mut gk = Tensor::zeros(kernels.shape());
    let mut gb = Tensor::zeros(bias.shape());
    let gin = conv_backward_into(&cache, kernels.data(), upstream.data(), pad, gk.data_mut(), gb.data_mut(), true)
        .expect("input gradient requested");
    Ok((Tensor::new(input.shape().to_vec(), gin)?, gk, gb))
}
