//! Dense row-major `f64` tensors and the handful of kernels the network
//! layers are built from.

pub(crate) mod conv;
mod gradcheck;
pub(crate) mod kernels;

pub use conv::conv2d_valid;
pub use gradcheck::{finite_difference_check, finite_difference_check_at, GradCheckReport};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Second operand of [`Tensor::elementwise`].
#[derive(Debug, Clone, Copy)]
pub enum Operand<'a> {
    Tensor(&'a Tensor),
    Scalar(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    /// Multiply by a scalar. Only valid with [`Operand::Scalar`].
    Scale,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::shape(format!("extents must be positive, got {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} implies {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.contains(&0) {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn elementwise(&self, op: ElementwiseOp, rhs: Operand<'_>) -> Result<Tensor> {
        let data = match (op, rhs) {
            (ElementwiseOp::Scale, Operand::Scalar(s)) | (ElementwiseOp::Mul, Operand::Scalar(s)) => {
                self.data.iter().map(|v| v * s).collect()
            }
            (ElementwiseOp::Add, Operand::Scalar(s)) => self.data.iter().map(|v| v + s).collect(),
            (ElementwiseOp::Sub, Operand::Scalar(s)) => self.data.iter().map(|v| v - s).collect(),
            (ElementwiseOp::Scale, Operand::Tensor(_)) => {
                return Err(Error::param("scale takes a scalar operand"))
            }
            (op, Operand::Tensor(other)) => {
                if self.shape != other.shape {
                    return Err(Error::shape(format!(
                        "elementwise {op:?}: {:?} vs {:?}",
                        self.shape, other.shape
                    )));
                }
                let f: fn(f64, f64) -> f64 = match op {
                    ElementwiseOp::Add => |a, b| a + b,
                    ElementwiseOp::Sub => |a, b| a - b,
                    ElementwiseOp::Mul => |a, b| a * b,
                    ElementwiseOp::Scale => unreachable!(),
                };
                self.data
                    .iter()
                    .zip(&other.data)
                    .map(|(&a, &b)| f(a, b))
                    .collect()
            }
        };
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.elementwise(ElementwiseOp::Add, Operand::Tensor(other))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.elementwise(ElementwiseOp::Sub, Operand::Tensor(other))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.elementwise(ElementwiseOp::Mul, Operand::Tensor(other))
    }

    pub fn scale(&self, s: f64) -> Tensor {
        self.map(|v| v * s)
    }

    /// Matrix product of rank-2 tensors. Each output cell accumulates its
    /// inner products in increasing `k` order, matching a naive triple loop
    /// bit for bit.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || rhs.rank() != 2 {
            return Err(Error::shape(format!(
                "matmul needs rank-2 operands, got {:?} and {:?}",
                self.shape, rhs.shape
            )));
        }
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (rhs.shape[0], rhs.shape[1]);
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner extents differ: {:?} x {:?}",
                self.shape, rhs.shape
            )));
        }
        let mut out = vec![0.0; m * n];
        kernels::gemm_acc(&self.data, &rhs.data, &mut out, m, k, n);
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `self[i] += alpha * other[i]`.
    pub fn add_scaled(&mut self, other: &Tensor, alpha: f64) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "add_scaled: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        kernels::axpy(alpha, &other.data, &mut self.data);
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}
