//! ROI enhancement chain: median → equalization → Butterworth low-pass in
//! the Fourier domain → open/close → Otsu binarization.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::image::{BinaryMask, GrayImage};
use crate::{Error, Result};

mod equalize;
mod fft;
mod median;
mod morphology;
mod otsu;
mod shape;

pub use equalize::{equalization_lut, histogram_equalize};
pub use fft::{
    butterworth_gain, butterworth_lowpass, fft2_forward, fft2_inverse, fft2_inverse_real,
    FreqImage,
};
pub use median::median_filter;
pub use morphology::{dilate, disk, erode, morph_open_close, Morphology};
pub use otsu::{between_class_variance, binarize_otsu, histogram, otsu_threshold};
pub use shape::{compactness, curvature_variance, largest_component, radial_profile};

/// Which side of the Otsu split is the lesion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Hypoechoic lesion: darker than surrounding tissue.
    #[default]
    Dark,
    Bright,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub median_radius: usize,
    /// Cutoff as a fraction of `min(H, W)`.
    pub cutoff_fraction: f64,
    pub butterworth_order: u32,
    pub disk_radius: usize,
    pub polarity: Polarity,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            median_radius: 1,
            cutoff_fraction: 0.25,
            butterworth_order: 2,
            disk_radius: 1,
            polarity: Polarity::Dark,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if self.median_radius < 1 {
            return Err(Error::param("median_radius must be >= 1"));
        }
        if !(self.cutoff_fraction > 0.0 && self.cutoff_fraction.is_finite()) {
            return Err(Error::param("cutoff_fraction must be positive"));
        }
        if self.butterworth_order < 1 {
            return Err(Error::param("butterworth_order must be >= 1"));
        }
        if self.disk_radius < 1 {
            return Err(Error::param("disk_radius must be >= 1"));
        }
        Ok(())
    }
}

/// Wall-clock seconds spent in each stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub median: f64,
    pub equalize: f64,
    pub butterworth: f64,
    pub morphology: f64,
    pub binarize: f64,
}

pub const STAGES: [&str; 5] = ["median", "equalize", "butterworth", "morphology", "binarize"];

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    })
}

/// Runs the chain and also reports per-stage timings.
pub fn roi_pipeline_timed(
    img: &GrayImage,
    params: &PipelineParams,
) -> Result<(GrayImage, BinaryMask, StageTimings)> {
    stage("params", params.validate())?;
    let mut t = StageTimings::default();

    let clock = Instant::now();
    let x = stage("median", median_filter(img, params.median_radius))?;
    t.median = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let x = histogram_equalize(&x);
    t.equalize = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let d0 = params.cutoff_fraction * x.width().min(x.height()) as f64;
    let spectrum = fft2_forward(&x);
    let filtered = stage(
        "butterworth",
        butterworth_lowpass(&spectrum, d0, params.butterworth_order),
    )?;
    let x = fft2_inverse(&filtered);
    t.butterworth = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let enhanced = morph_open_close(&x, params.disk_radius);
    t.morphology = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let mask = match params.polarity {
        Polarity::Dark => binarize_otsu(&enhanced.invert()),
        Polarity::Bright => binarize_otsu(&enhanced),
    };
    t.binarize = clock.elapsed().as_secs_f64();

    Ok((enhanced, mask, t))
}

/// Enhanced image (before binarization) and the lesion shape mask.
pub fn roi_pipeline(img: &GrayImage, params: &PipelineParams) -> Result<(GrayImage, BinaryMask)> {
    roi_pipeline_timed(img, params).map(|(e, m, _)| (e, m))
}
