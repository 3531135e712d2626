//! Hand-crafted descriptors (HOG, GLCM, gradient-direction histogram) and
//! CNN penultimate-layer features.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::image::GrayImage;
use crate::nn::Network;
use crate::par::{self, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DescriptorId {
    Hgd,
    Hog,
    Glcm,
    Cnn1,
    Cnn2,
    Fused,
}

impl DescriptorId {
    pub const ALL: [DescriptorId; 6] = [
        DescriptorId::Hgd,
        DescriptorId::Hog,
        DescriptorId::Glcm,
        DescriptorId::Cnn1,
        DescriptorId::Cnn2,
        DescriptorId::Fused,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DescriptorId::Hgd => "HGD",
            DescriptorId::Hog => "HOG",
            DescriptorId::Glcm => "GLCM",
            DescriptorId::Cnn1 => "CNN1",
            DescriptorId::Cnn2 => "CNN2",
            DescriptorId::Fused => "FUSED",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub descriptor: DescriptorId,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(descriptor: DescriptorId, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{descriptor} feature {i} is not finite")));
        }
        Ok(FeatureVector { descriptor, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Concatenation tagged `FUSED`.
    pub fn concat(parts: &[&FeatureVector]) -> FeatureVector {
        FeatureVector {
            descriptor: DescriptorId::Fused,
            values: parts.iter().flat_map(|p| p.values.iter().copied()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogParams {
    pub cell: usize,
    pub bins: usize,
    pub block: usize,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams { cell: 8, bins: 9, block: 2 }
    }
}

impl HogParams {
    pub fn length(&self, width: usize, height: usize) -> usize {
        let (cx, cy) = (width / self.cell, height / self.cell);
        (cx + 1).saturating_sub(self.block) * (cy + 1).saturating_sub(self.block) * self.block * self.block * self.bins
    }
}

pub const HOG_EPS: f64 = 1e-6;
pub const GLCM_LEVELS: usize = 16;
/// `(row, col)` offsets: 0°, 45° down-right, 90°, 135° down-left.
pub const GLCM_OFFSETS: [(isize, isize); 4] = [(0, 1), (1, 1), (1, 0), (1, -1)];
pub const HGD_BINS: usize = 32;

/// Central-difference gradients with clamped borders, intensities in `[0, 1]`.
fn gradients(img: &GrayImage) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = |dx: isize, dy: isize| f64::from(img.get_clamped(x as isize + dx, y as isize + dy)) / 255.0;
            gx[y * w + x] = p(1, 0) - p(-1, 0);
            gy[y * w + x] = p(0, 1) - p(0, -1);
        }
    }
    (gx, gy)
}

/// Histogram of oriented gradients: unsigned orientation with linear
/// interpolation between bin centers, overlapping blocks (stride one cell),
/// per-block L2 normalization `v / sqrt(|v|² + ε²)`.
pub fn hog_descriptor(img: &GrayImage, params: HogParams) -> Result<FeatureVector> {
    let HogParams { cell, bins, block } = params;
    if cell == 0 || bins == 0 || block == 0 {
        return Err(Error::param("HOG cell, bins and block must be positive"));
    }
    let (w, h) = (img.width(), img.height());
    if w % cell != 0 || h % cell != 0 {
        return Err(Error::param(format!("image {w}x{h} is not divisible into {cell}-pixel cells")));
    }
    let (cells_x, cells_y) = (w / cell, h / cell);
    if cells_x < block || cells_y < block {
        return Err(Error::param("image has fewer cells than one block"));
    }
    let (gx, gy) = gradients(img);
    let width = 180.0 / bins as f64;
    let mut hist = vec![0.0; cells_x * cells_y * bins];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let mag = gx[i].hypot(gy[i]);
            if mag == 0.0 {
                continue;
            }
            let theta = gy[i].atan2(gx[i]).to_degrees().rem_euclid(180.0);
            // Position relative to bin centers at (k + 0.5)·width.
            let pos = theta / width - 0.5;
            let lo = pos.floor();
            let frac = pos - lo;
            let b0 = (lo as isize).rem_euclid(bins as isize) as usize;
            let b1 = (b0 + 1) % bins;
            let base = ((y / cell) * cells_x + x / cell) * bins;
            hist[base + b0] += mag * (1.0 - frac);
            hist[base + b1] += mag * frac;
        }
    }
    let (bx, by) = (cells_x + 1 - block, cells_y + 1 - block);
    let mut out = Vec::with_capacity(bx * by * block * block * bins);
    let mut buf = Vec::with_capacity(block * block * bins);
    for y in 0..by {
        for x in 0..bx {
            buf.clear();
            for dy in 0..block {
                for dx in 0..block {
                    let base = ((y + dy) * cells_x + x + dx) * bins;
                    buf.extend_from_slice(&hist[base..base + bins]);
                }
            }
            let norm = (buf.iter().map(|v| v * v).sum::<f64>() + HOG_EPS * HOG_EPS).sqrt();
            out.extend(buf.iter().map(|v| v / norm));
        }
    }
    FeatureVector::new(DescriptorId::Hog, out)
}

/// Symmetric, normalized co-occurrence matrix (`levels × levels`,
/// row-major) at a `(row, col)` offset after quantizing to `levels`.
pub fn glcm_matrix(img: &GrayImage, levels: usize, offset: (isize, isize)) -> Result<Vec<f64>> {
    if !(1..=256).contains(&levels) {
        return Err(Error::param("GLCM levels must be in 1..=256"));
    }
    let q = |v: u8| usize::from(v) * levels / 256;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut m = vec![0.0; levels * levels];
    let mut total = 0.0;
    for r in 0..h {
        for c in 0..w {
            let (r2, c2) = (r + offset.0, c + offset.1);
            if r2 < 0 || r2 >= h || c2 < 0 || c2 >= w {
                continue;
            }
            let a = q(img.get(c as usize, r as usize));
            let b = q(img.get(c2 as usize, r2 as usize));
            m[a * levels + b] += 1.0;
            m[b * levels + a] += 1.0;
            total += 2.0;
        }
    }
    if total > 0.0 {
        for v in &mut m {
            *v /= total;
        }
    }
    Ok(m)
}

/// `[contrast, correlation, energy, homogeneity]` of a normalized GLCM.
/// Energy is the angular second moment `Σ p²`; homogeneity is
/// `Σ p / (1 + (i − j)²)`. Correlation is 1 when either marginal has zero
/// variance.
pub fn glcm_statistics(m: &[f64], levels: usize) -> [f64; 4] {
    let (mut mu_i, mut mu_j) = (0.0, 0.0);
    for i in 0..levels {
        for j in 0..levels {
            let p = m[i * levels + j];
            mu_i += i as f64 * p;
            mu_j += j as f64 * p;
        }
    }
    let (mut var_i, mut var_j, mut cov) = (0.0, 0.0, 0.0);
    let (mut contrast, mut energy, mut homogeneity) = (0.0, 0.0, 0.0);
    for i in 0..levels {
        for j in 0..levels {
            let p = m[i * levels + j];
            let (di, dj) = (i as f64 - mu_i, j as f64 - mu_j);
            let d = i as f64 - j as f64;
            var_i += di * di * p;
            var_j += dj * dj * p;
            cov += di * dj * p;
            contrast += d * d * p;
            energy += p * p;
            homogeneity += p / (1.0 + d * d);
        }
    }
    let correlation = if var_i > 1e-15 && var_j > 1e-15 { cov / (var_i * var_j).sqrt() } else { 1.0 };
    [contrast, correlation, energy, homogeneity]
}

pub fn glcm_features(img: &GrayImage) -> Result<FeatureVector> {
    let mut out = Vec::with_capacity(GLCM_OFFSETS.len() * 4);
    for off in GLCM_OFFSETS {
        out.extend(glcm_statistics(&glcm_matrix(img, GLCM_LEVELS, off)?, GLCM_LEVELS));
    }
    FeatureVector::new(DescriptorId::Glcm, out)
}

/// Global histogram of signed gradient directions (0–360°), magnitude
/// weighted, hard-binned and L1-normalized.
pub fn hgd_descriptor(img: &GrayImage, bins: usize) -> Result<FeatureVector> {
    if bins == 0 {
        return Err(Error::param("HGD bins must be positive"));
    }
    let (gx, gy) = gradients(img);
    let mut hist = vec![0.0; bins];
    let width = 360.0 / bins as f64;
    for (&x, &y) in gx.iter().zip(&gy) {
        let mag = x.hypot(y);
        if mag == 0.0 {
            continue;
        }
        let theta = y.atan2(x).to_degrees().rem_euclid(360.0);
        hist[((theta / width) as usize) % bins] += mag;
    }
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        for v in &mut hist {
            *v /= total;
        }
    }
    FeatureVector::new(DescriptorId::Hgd, hist)
}

/// Penultimate activations of a single-input network.
pub fn cnn_penultimate_features(net: &Network, img: &GrayImage, descriptor: DescriptorId) -> Result<FeatureVector> {
    if net.spec().branches.len() != 1 {
        return Err(Error::shape(format!(
            "penultimate features need a single-input network, got {} branches",
            net.spec().branches.len()
        )));
    }
    let t = net.penultimate(&[&img.to_standardized_tensor()])?;
    FeatureVector::new(descriptor, t.into_data())
}

/// Hand-crafted descriptor of one image (ROIs are resized to 64×64 first).
pub fn handcrafted(img: &GrayImage, descriptor: DescriptorId) -> Result<FeatureVector> {
    let img = img.resize_bilinear(64, 64)?;
    match descriptor {
        DescriptorId::Hog => hog_descriptor(&img, HogParams::default()),
        DescriptorId::Glcm => glcm_features(&img),
        DescriptorId::Hgd => hgd_descriptor(&img, HGD_BINS),
        other => Err(Error::param(format!("{other} is not a hand-crafted descriptor"))),
    }
}

/// Extracts one descriptor for a batch and checks the lengths agree.
pub fn extract_batch(images: &[&GrayImage], descriptor: DescriptorId, exec: Execution) -> Result<Vec<FeatureVector>> {
    let out = par::map(exec, images, |img| handcrafted(img, descriptor))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    check_uniform(&out)?;
    Ok(out)
}

pub fn check_uniform(rows: &[FeatureVector]) -> Result<()> {
    if let Some(first) = rows.first() {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != first.len()) {
            return Err(Error::shape(format!(
                "feature row {i} has length {}, expected {}",
                r.len(),
                first.len()
            )));
        }
    }
    Ok(())
}

/// One row per sample: `{ID}_0 … {ID}_{n-1}, label, seed, config_hash, version`.
pub fn write_feature_csv(
    path: &Path,
    rows: &[FeatureVector],
    labels: &[usize],
    seed: u64,
    config_hash: &str,
) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::shape("one label per feature row required"));
    }
    check_uniform(rows)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(first) = rows.first() {
        let mut header: Vec<String> = (0..first.len()).map(|i| format!("{}_{i}", first.descriptor)).collect();
        header.extend(["label", "seed", "config_hash", "version"].map(String::from));
        w.write_record(&header)?;
    }
    for (r, &l) in rows.iter().zip(labels) {
        let mut rec: Vec<String> = r.values.iter().map(|v| format!("{v:e}")).collect();
        rec.push(l.to_string());
        rec.push(seed.to_string());
        rec.push(config_hash.to_string());
        rec.push(crate::ARTIFACT_VERSION.to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    crate::image::write_atomic(path, &bytes)
}
