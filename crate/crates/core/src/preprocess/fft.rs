//! 2-D discrete Fourier transform of grayscale images.
//!
//! Forward is unnormalized (the DC bin holds the pixel sum) and inverse
//! divides by `H·W`. Coefficients are stored DC-centred: frequency bin
//! `(u, v)` lives at `((u + H/2) mod H, (v + W/2) mod W)`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::image::{quantize, GrayImage};

#[derive(Debug, Clone, PartialEq)]
pub struct FreqImage {
    width: usize,
    height: usize,
    coeffs: Vec<Complex64>,
}

impl FreqImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major, DC-centred coefficients.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Position of the zero-frequency bin in the centred layout.
    pub fn dc_position(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    pub fn dc(&self) -> Complex64 {
        let (x, y) = self.dc_position();
        self.coeffs[y * self.width + x]
    }
}

fn transform_2d(data: &mut [Complex64], width: usize, height: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); height];
    for x in 0..width {
        for y in 0..height {
            col[y] = data[y * width + x];
        }
        col_fft.process(&mut col);
        for y in 0..height {
            data[y * width + x] = col[y];
        }
    }
}

/// Moves bin `(0,0)` to the centre (`shift = +n/2`) or back (`-n/2`).
fn shift(data: &[Complex64], width: usize, height: usize, forward: bool) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    let (sx, sy) = (width / 2, height / 2);
    for y in 0..height {
        for x in 0..width {
            let (nx, ny) = if forward {
                ((x + sx) % width, (y + sy) % height)
            } else {
                ((x + width - sx) % width, (y + height - sy) % height)
            };
            out[ny * width + nx] = data[y * width + x];
        }
    }
    out
}

pub fn fft2_forward(img: &GrayImage) -> FreqImage {
    let (w, h) = (img.width(), img.height());
    let mut data: Vec<Complex64> = img.pixels().iter().map(|&p| Complex64::new(f64::from(p), 0.0)).collect();
    transform_2d(&mut data, w, h, false);
    FreqImage { width: w, height: h, coeffs: shift(&data, w, h, true) }
}

/// Inverse transform before quantization (real part, unclamped).
pub fn fft2_inverse_real(f: &FreqImage) -> Vec<f64> {
    let (w, h) = (f.width, f.height);
    let mut data = shift(&f.coeffs, w, h, false);
    transform_2d(&mut data, w, h, true);
    let scale = 1.0 / (w * h) as f64;
    data.iter().map(|c| c.re * scale).collect()
}

pub fn fft2_inverse(f: &FreqImage) -> GrayImage {
    let real = fft2_inverse_real(f);
    GrayImage::new(f.width, f.height, real.into_iter().map(quantize).collect()).expect("extents preserved")
}

/// Butterworth low-pass gain `1 / (1 + (d/d0)^{2n})`.
pub fn butterworth_gain(distance: f64, cutoff_d0: f64, order_n: u32) -> f64 {
    1.0 / (1.0 + (distance / cutoff_d0).powi(2 * order_n as i32))
}

/// Multiplies every coefficient by the Butterworth gain at its Euclidean
/// distance from the centred DC bin.
pub fn butterworth_lowpass(f: &FreqImage, cutoff_d0: f64, order_n: u32) -> Result<FreqImage> {
    if !(cutoff_d0 > 0.0 && cutoff_d0.is_finite()) {
        return Err(Error::param(format!("Butterworth cutoff must be > 0, got {cutoff_d0}")));
    }
    if order_n < 1 {
        return Err(Error::param("Butterworth order must be >= 1"));
    }
    let (cx, cy) = f.dc_position();
    let mut out = f.clone();
    for y in 0..f.height {
        for x in 0..f.width {
            let dx = x as f64 - cx as f64;
            let dy = y as f64 - cy as f64;
            let g = butterworth_gain((dx * dx + dy * dy).sqrt(), cutoff_d0, order_n);
            out.coeffs[y * f.width + x] *= g;
        }
    }
    Ok(out)
}
