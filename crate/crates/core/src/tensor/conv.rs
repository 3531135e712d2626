use super::kernels::{gemm, Strides};
use super::Tensor;
use crate::error::{Error, Result};

/// Valid (unpadded) 2-D cross-correlation with full channel connectivity.
///
/// `out[o, y, x] = bias[o] + Σ_{c,i,j} input[c, y+i, x+j] · kernels[o, c, i, j]`
///
/// No kernel flip is applied. Activation is a separate layer.
pub fn conv2d_valid(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let geom = ConvGeometry::check(input.shape(), kernels.shape())?;
    if bias.shape() != [geom.c_out] {
        return Err(Error::shape(format!(
            "bias {:?} does not match {} output channels",
            bias.shape(),
            geom.c_out
        )));
    }
    let cols = im2col(input.data(), &geom);
    let out = geom.forward(&cols, kernels.data(), bias.data());
    Tensor::new(vec![geom.c_out, geom.out_h, geom.out_w], out)
}

/// Extents of one valid convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub(crate) fn check(input: &[usize], kernels: &[usize]) -> Result<Self> {
        let [c_in, h, w] = *input else {
            return Err(Error::shape(format!("conv input must be [C,H,W], got {input:?}")));
        };
        let [c_out, kc, kh, kw] = *kernels else {
            return Err(Error::shape(format!(
                "conv kernels must be [C_out,C_in,kh,kw], got {kernels:?}"
            )));
        };
        if kc != c_in {
            return Err(Error::shape(format!(
                "kernel channels {kc} != input channels {c_in}"
            )));
        }
        if kh > h || kw > w {
            return Err(Error::shape(format!(
                "kernel {kh}x{kw} larger than input {h}x{w}"
            )));
        }
        Ok(Self {
            c_in,
            h,
            w,
            c_out,
            kh,
            kw,
            out_h: h - kh + 1,
            out_w: w - kw + 1,
        })
    }

    pub(crate) fn patch_len(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    pub(crate) fn out_len(&self) -> usize {
        self.out_h * self.out_w
    }

    /// `kernels · cols + bias`.
    pub(crate) fn forward(&self, cols: &[f64], kernels: &[f64], bias: &[f64]) -> Vec<f64> {
        let (p_len, q_len) = (self.patch_len(), self.out_len());
        let mut out = vec![0.0; self.c_out * q_len];
        for (o, row) in out.chunks_mut(q_len).enumerate() {
            row.fill(bias[o]);
        }
        gemm(
            self.c_out,
            p_len,
            q_len,
            kernels,
            Strides::row_major(p_len),
            cols,
            Strides::row_major(q_len),
            1.0,
            &mut out,
        );
        out
    }
}

/// Patch matrix `[C·kh·kw, out_h·out_w]`.
pub(crate) fn im2col(input: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let q_len = g.out_len();
    let mut cols = vec![0.0; g.patch_len() * q_len];
    let mut p = 0;
    for c in 0..g.c_in {
        let plane = &input[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let dst = &mut cols[p * q_len..(p + 1) * q_len];
                for y in 0..g.out_h {
                    let src = &plane[(y + i) * g.w + j..(y + i) * g.w + j + g.out_w];
                    dst[y * g.out_w..(y + 1) * g.out_w].copy_from_slice(src);
                }
                p += 1;
            }
        }
    }
    cols
}

/// Scatter-adds a patch gradient `[C·kh·kw, out_h·out_w]` back onto the
/// input plane layout.
pub(crate) fn col2im(cols: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let q_len = g.out_len();
    let mut out = vec![0.0; g.c_in * g.h * g.w];
    let mut p = 0;
    for c in 0..g.c_in {
        let plane = &mut out[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let src = &cols[p * q_len..(p + 1) * q_len];
                for y in 0..g.out_h {
                    let dst = &mut plane[(y + i) * g.w + j..(y + i) * g.w + j + g.out_w];
                    for (d, s) in dst.iter_mut().zip(&src[y * g.out_w..(y + 1) * g.out_w]) {
                        *d += s;
                    }
                }
                p += 1;
            }
        }
    }
    out
}
