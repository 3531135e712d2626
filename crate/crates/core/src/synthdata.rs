//! Deterministic synthetic coronal/transverse lesion pairs.
//!
//! Each lesion is an ellipsoid. The coronal view slices it in the (x, y)
//! plane and the transverse view in the (x, z) plane. Malignant lesions get
//! an irregular boundary in both views, radial spicules in the coronal view
//! and a posterior acoustic shadow in the transverse view. Benign lesions
//! stay smooth and get slight posterior brightening. Rayleigh speckle is
//! applied multiplicatively last.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::image::{quantize, write_pgm, GrayImage};
use crate::par::{self, Execution};
use crate::rng::{derive_seed, SplitMix64};
use crate::{Error, Result};

/// Rendered frame side in pixels.
pub const FRAME: usize = 64;
/// Minimum distance between lesion geometry and the frame edge.
pub const MARGIN: f64 = 4.0;

const HARMONICS: usize = 4;
const PARAM_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LesionClass {
    Benign,
    Malignant,
}

impl LesionClass {
    /// `0` benign, `1` malignant.
    pub fn label(self) -> usize {
        match self {
            LesionClass::Benign => 0,
            LesionClass::Malignant => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LesionClass::Benign => "benign",
            LesionClass::Malignant => "malignant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Coronal,
    Transverse,
}

impl View {
    pub fn name(self) -> &'static str {
        match self {
            View::Coronal => "coronal",
            View::Transverse => "transverse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    #[default]
    Standard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionParams {
    pub class: LesionClass,
    /// Ellipsoid center `(x, y, z)`; coronal shows `(x, y)`, transverse `(x, z)`.
    pub center: [f64; 3],
    /// Semi-axes along x, y, z in pixels.
    pub radii: [f64; 3],
    /// In-plane rotation of the coronal ellipse (radians).
    pub rotation: f64,
    pub spicule_count: usize,
    pub spicule_length: f64,
    /// Relative boundary modulation amplitude (0 = smooth ellipse).
    pub irregularity: f64,
    /// Posterior attenuation in the transverse view; negative brightens.
    pub shadow_strength: f64,
    pub interior_intensity: u8,
    pub background_intensity: u8,
    pub speckle_scale: f64,
    pub seed: u64,
}

impl LesionParams {
    /// A centered, noiseless lesion of the given class.
    pub fn centered(class: LesionClass, radius: f64, seed: u64) -> Self {
        let malignant = class == LesionClass::Malignant;
        LesionParams {
            class,
            center: [32.0, 32.0, 26.0],
            radii: [radius, radius, radius * 0.8],
            rotation: 0.0,
            spicule_count: if malignant { 8 } else { 0 },
            spicule_length: if malignant { 6.0 } else { 0.0 },
            irregularity: if malignant { 0.18 } else { 0.0 },
            shadow_strength: if malignant { 0.5 } else { -0.1 },
            interior_intensity: 60,
            background_intensity: 160,
            speckle_scale: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.class {
            LesionClass::Benign if self.spicule_count != 0 => {
                return Err(Error::param("benign lesions carry no spicules"))
            }
            LesionClass::Malignant if self.spicule_count < 4 => {
                return Err(Error::param("malignant lesions need at least 4 spicules"))
            }
            _ => {}
        }
        let finite = self.center.iter().chain(&self.radii).all(|v| v.is_finite())
            && self.spicule_length.is_finite()
            && self.irregularity.is_finite()
            && self.shadow_strength.is_finite()
            && self.speckle_scale.is_finite();
        if !finite {
            return Err(Error::param("lesion parameters must be finite"));
        }
        if self.radii.iter().any(|&r| r < 1.0) {
            return Err(Error::param("radii must be at least 1 pixel"));
        }
        if !(0.0..0.5).contains(&self.irregularity) || self.spicule_length < 0.0 {
            return Err(Error::param("irregularity must lie in [0, 0.5) and spicule length >= 0"));
        }
        if self.speckle_scale < 0.0 {
            return Err(Error::param("speckle_scale must be >= 0"));
        }
        let [cx, cy, cz] = self.center;
        let [rx, ry, rz] = self.radii;
        let grow = 1.0 + self.irregularity;
        let coronal = rx.max(ry) * grow + self.spicule_length;
        let transverse = rx.max(rz) * grow;
        let hi = FRAME as f64 - 1.0 - MARGIN;
        let fits = |c: f64, e: f64| c - e >= MARGIN && c + e <= hi;
        if !(fits(cx, coronal) && fits(cy, coronal) && fits(cx, transverse) && fits(cz, transverse)) {
            return Err(Error::param(format!(
                "lesion geometry leaves the {FRAME}x{FRAME} frame (margin {MARGIN})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualViewSample {
    /// Position in generation order (before shuffling).
    pub id: usize,
    pub params: LesionParams,
    pub coronal: GrayImage,
    pub transverse: GrayImage,
}

impl DualViewSample {
    pub fn label(&self) -> usize {
        self.params.class.label()
    }

    pub fn view(&self, view: View) -> &GrayImage {
        match view {
            View::Coronal => &self.coronal,
            View::Transverse => &self.transverse,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub samples: Vec<DualViewSample>,
    pub difficulty: Difficulty,
    pub seed: u64,
    pub benign_count: usize,
    pub malignant_count: usize,
}

impl SynthDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(DualViewSample::label).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Outline of one view: ellipse with harmonic boundary modulation.
struct Outline {
    center: (f64, f64),
    axes: (f64, f64),
    rotation: f64,
    amps: [f64; HARMONICS],
    phases: [f64; HARMONICS],
}

impl Outline {
    fn new(center: (f64, f64), axes: (f64, f64), rotation: f64, irregularity: f64, rng: &mut SplitMix64) -> Self {
        // Harmonics 3..=6 with weights summing to one, so the boundary stays
        // within (1 ± irregularity) of the ellipse.
        let mut amps = [0.0; HARMONICS];
        let mut phases = [0.0; HARMONICS];
        let mut total = 0.0;
        for k in 0..HARMONICS {
            amps[k] = rng.uniform(0.2, 1.0);
            phases[k] = rng.uniform(0.0, TAU);
            total += amps[k];
        }
        for a in &mut amps {
            *a *= irregularity / total;
        }
        Outline { center, axes, rotation, amps, phases }
    }

    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.rotation.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    fn boundary(&self, phi: f64) -> f64 {
        let mut r = 1.0;
        for k in 0..HARMONICS {
            r += self.amps[k] * ((k as f64 + 3.0) * phi + self.phases[k]).cos();
        }
        r
    }

    /// Soft membership in `[0, 1]` with roughly one pixel of edge blur.
    fn membership(&self, x: f64, y: f64) -> f64 {
        let (u, v) = self.local(x, y);
        let (nu, nv) = (u / self.axes.0, v / self.axes.1);
        let rho = (nu * nu + nv * nv).sqrt();
        let phi = nv.atan2(nu);
        let scale = self.axes.0.min(self.axes.1);
        ((self.boundary(phi) - rho) * scale + 0.5).clamp(0.0, 1.0)
    }

    /// Boundary point and outward direction at elliptical angle `phi`.
    fn anchor(&self, phi: f64) -> ((f64, f64), (f64, f64)) {
        let b = self.boundary(phi);
        let (u, v) = (b * self.axes.0 * phi.cos(), b * self.axes.1 * phi.sin());
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy) = (c * u - s * v, s * u + c * v);
        let n = (dx * dx + dy * dy).sqrt().max(1e-12);
        ((self.center.0 + dx, self.center.1 + dy), (dx / n, dy / n))
    }
}

struct Spicule {
    origin: (f64, f64),
    dir: (f64, f64),
    length: f64,
}

impl Spicule {
    fn membership(&self, x: f64, y: f64) -> f64 {
        let (qx, qy) = (x - self.origin.0, y - self.origin.1);
        let t = qx * self.dir.0 + qy * self.dir.1;
        if t < -1.0 || t > self.length {
            return 0.0;
        }
        let perp = (qx * self.dir.1 - qy * self.dir.0).abs();
        let half_width = 1.5 * (1.0 - t.max(0.0) / self.length);
        (half_width - perp + 0.5).clamp(0.0, 1.0)
    }
}

fn speckle(values: &mut [f64], scale: f64, rng: &mut SplitMix64) {
    if scale == 0.0 {
        return;
    }
    let mean = (PI / 2.0).sqrt();
    for v in values.iter_mut() {
        let r = rng.rayleigh(1.0) / mean;
        *v = (*v * (1.0 + scale * (r - 1.0))).clamp(0.0, 255.0);
    }
}

fn to_image(values: &[f64]) -> GrayImage {
    GrayImage::new(FRAME, FRAME, values.iter().map(|&v| quantize(v)).collect())
        .expect("frame extents are fixed")
}

/// Renders both views of one lesion.
pub fn render_lesion(params: &LesionParams) -> Result<(GrayImage, GrayImage)> {
    params.validate()?;
    let mut rng = SplitMix64::new(params.seed);
    let [cx, cy, cz] = params.center;
    let [rx, ry, rz] = params.radii;
    let bg = f64::from(params.background_intensity);
    let fg = f64::from(params.interior_intensity);

    let coronal_outline = Outline::new((cx, cy), (rx, ry), params.rotation, params.irregularity, &mut rng);
    let spicules: Vec<Spicule> = (0..params.spicule_count)
        .map(|j| {
            // Evenly spread with jitter so spicules never pile up.
            let base = TAU * j as f64 / params.spicule_count as f64;
            let phi = base + rng.uniform(-0.3, 0.3) * TAU / params.spicule_count as f64;
            let (origin, dir) = coronal_outline.anchor(phi);
            let length = params.spicule_length * rng.uniform(0.7, 1.0);
            Spicule { origin, dir, length }
        })
        .collect();
    let transverse_outline = Outline::new((cx, cz), (rx, rz), 0.0, params.irregularity, &mut rng);

    let mut coronal = vec![bg; FRAME * FRAME];
    let mut transverse = vec![bg; FRAME * FRAME];
    for y in 0..FRAME {
        for x in 0..FRAME {
            let (fx, fy) = (x as f64, y as f64);
            let m = spicules
                .iter()
                .map(|s| s.membership(fx, fy))
                .fold(coronal_outline.membership(fx, fy), f64::max);
            coronal[y * FRAME + x] = bg + (fg - bg) * m;

            let m = transverse_outline.membership(fx, fy);
            // Posterior band: below the lesion, tapered across its width.
            let below = fy - (cz + rz);
            let across = (fx - cx).abs() / (rx * 0.9);
            let band = if below > 0.0 && across < 1.0 {
                let fade = (-below / (FRAME as f64 * 0.5)).exp();
                params.shadow_strength * (1.0 - across * across) * fade
            } else {
                0.0
            };
            let tissue = bg * (1.0 - band);
            transverse[y * FRAME + x] = tissue + (fg - tissue) * m;
        }
    }
    speckle(&mut coronal, params.speckle_scale, &mut rng);
    speckle(&mut transverse, params.speckle_scale, &mut rng);
    Ok((to_image(&coronal), to_image(&transverse)))
}

/// Draws lesion parameters for one sample.
pub fn sample_params(class: LesionClass, difficulty: Difficulty, seed: u64) -> LesionParams {
    let mut rng = SplitMix64::new(seed ^ PARAM_STREAM);
    let malignant = class == LesionClass::Malignant;
    let easy = difficulty == Difficulty::Easy;
    let center = [
        32.0 + rng.uniform(-2.0, 2.0),
        32.0 + rng.uniform(-2.0, 2.0),
        26.0 + rng.uniform(-2.0, 2.0),
    ];
    let radii = [rng.uniform(8.0, 13.0), rng.uniform(8.0, 13.0), rng.uniform(6.0, 10.0)];
    let rotation = rng.uniform(0.0, PI);
    let (spicule_count, spicule_length, irregularity, shadow_strength) = match (malignant, easy) {
        (true, true) => (
            6 + rng.below(5),
            rng.uniform(6.0, 9.0),
            rng.uniform(0.15, 0.25),
            rng.uniform(0.5, 0.7),
        ),
        (true, false) => {
            // Each view misses the malignant cues in some cases, so the two
            // views carry partly complementary evidence.
            let u = rng.next_f64();
            let (weak_coronal, weak_transverse) = (u < 0.3, (0.3..0.6).contains(&u));
            let count = 4 + rng.below(5);
            let length = if weak_coronal { rng.uniform(1.5, 3.0) } else { rng.uniform(4.0, 8.0) };
            let irregularity = if weak_coronal { rng.uniform(0.02, 0.06) } else { rng.uniform(0.08, 0.18) };
            let shadow = if weak_transverse { rng.uniform(-0.1, 0.1) } else { rng.uniform(0.25, 0.55) };
            (count, length, irregularity, shadow)
        }
        (false, true) => (0, 0.0, rng.uniform(0.0, 0.03), rng.uniform(-0.15, -0.05)),
        (false, false) => (0, 0.0, rng.uniform(0.0, 0.05), rng.uniform(-0.15, 0.15)),
    };
    let (interior, background, speckle_scale) = if easy {
        let interior = if malignant { rng.uniform(35.0, 50.0) } else { rng.uniform(80.0, 95.0) };
        (interior, rng.uniform(150.0, 170.0), 0.1)
    } else {
        let interior = if malignant { rng.uniform(40.0, 75.0) } else { rng.uniform(55.0, 90.0) };
        (interior, rng.uniform(120.0, 170.0), 0.25)
    };
    LesionParams {
        class,
        center,
        radii,
        rotation,
        spicule_count,
        spicule_length,
        irregularity,
        shadow_strength,
        interior_intensity: quantize(interior),
        background_intensity: quantize(background),
        speckle_scale,
        seed,
    }
}

/// Generates `n_benign + n_malignant` samples with per-sample seeds
/// `seed ⊕ i`, then shuffles them with the master seed.
pub fn generate_dataset(n_benign: usize, n_malignant: usize, difficulty: Difficulty, seed: u64) -> Result<SynthDataset> {
    generate_dataset_with(n_benign, n_malignant, difficulty, seed, Execution::default())
}

pub fn generate_dataset_with(
    n_benign: usize,
    n_malignant: usize,
    difficulty: Difficulty,
    seed: u64,
    exec: Execution,
) -> Result<SynthDataset> {
    let rendered = par::map_range(exec, n_benign + n_malignant, |i| {
        let class = if i < n_benign { LesionClass::Benign } else { LesionClass::Malignant };
        let params = sample_params(class, difficulty, derive_seed(seed, i as u64));
        let (coronal, transverse) = render_lesion(&params)?;
        Ok(DualViewSample { id: i, params, coronal, transverse })
    });
    let mut samples = rendered.into_iter().collect::<Result<Vec<_>>>()?;
    SplitMix64::new(seed).shuffle(&mut samples);
    Ok(SynthDataset { samples, difficulty, seed, benign_count: n_benign, malignant_count: n_malignant })
}

/// Train/test indices into a dataset's `samples`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn class_pools(labels: &[usize], seed: u64) -> [Vec<usize>; 2] {
    let mut pools = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        pools[l.min(1)].push(i);
    }
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut pools[0]);
    rng.shuffle(&mut pools[1]);
    pools
}

/// Class-balanced test split of `round(test_fraction · N / 2)` per class,
/// then a training set with `positive : negative = ratio`. Negatives set
/// the scale: `n_neg = min(neg_left, ⌊pos_left / ratio⌋)`,
/// `n_pos = ⌊ratio · n_neg⌋`. The test split depends only on the labels,
/// `test_fraction` and `seed`, never on `ratio`.
pub fn split_with_ratio(labels: &[usize], test_fraction: f64, ratio: f64, seed: u64) -> Result<Split> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::param("test_fraction must lie in [0, 1)"));
    }
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::param("ratio must be positive"));
    }
    let pools = class_pools(labels, seed);
    let per_class = (test_fraction * labels.len() as f64 / 2.0).round() as usize;
    for (class, pool) in pools.iter().enumerate() {
        if pool.len() <= per_class {
            return Err(Error::param(format!(
                "class {class} has {} samples; the balanced test split needs {per_class} plus at least one for training",
                pool.len()
            )));
        }
    }
    let mut test: Vec<usize> = pools[0][..per_class].iter().chain(&pools[1][..per_class]).copied().collect();
    test.sort_unstable();
    let (neg_left, pos_left) = (&pools[0][per_class..], &pools[1][per_class..]);
    let n_neg = neg_left.len().min((pos_left.len() as f64 / ratio + 1e-9).floor() as usize);
    let n_pos = (ratio * n_neg as f64 + 1e-9).floor() as usize;
    if n_neg == 0 || n_pos == 0 {
        return Err(Error::param(format!(
            "ratio {ratio}:1 infeasible with {} positive and {} negative training samples",
            pos_left.len(),
            neg_left.len()
        )));
    }
    let mut train: Vec<usize> = neg_left[..n_neg].iter().chain(&pos_left[..n_pos]).copied().collect();
    train.sort_unstable();
    Ok(Split { train, test })
}

/// Stratified split keeping the natural class mix in both parts.
pub fn stratified_split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<Split> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::param("test_fraction must lie in [0, 1)"));
    }
    let pools = class_pools(labels, seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for pool in &pools {
        let k = (test_fraction * pool.len() as f64).round() as usize;
        test.extend_from_slice(&pool[..k]);
        train.extend_from_slice(&pool[k..]);
    }
    if train.is_empty() {
        return Err(Error::param("split leaves no training samples"));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub split: String,
    pub class: LesionClass,
    pub coronal: String,
    pub transverse: String,
    pub params: LesionParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub difficulty: Difficulty,
    pub benign_count: usize,
    pub malignant_count: usize,
    pub samples: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "manifest.json";

/// Writes `{split}/{label}/{index}_{view}.pgm` plus `manifest.json`.
pub fn export_dataset(ds: &SynthDataset, split: &Split, dir: &Path, config_hash: &str) -> Result<Manifest> {
    let comment = crate::harness::provenance_comment(ds.seed, config_hash);
    let mut entries = Vec::with_capacity(ds.len());
    for (name, idx) in [("train", &split.train), ("test", &split.test)] {
        for &i in idx {
            let s = &ds.samples[i];
            let sub = format!("{name}/{}", s.params.class.name());
            std::fs::create_dir_all(dir.join(&sub)).map_err(|e| Error::io(dir.join(&sub), e))?;
            let coronal = format!("{sub}/{i:04}_coronal.pgm");
            let transverse = format!("{sub}/{i:04}_transverse.pgm");
            write_pgm(&dir.join(&coronal), &s.coronal, Some(&comment))?;
            write_pgm(&dir.join(&transverse), &s.transverse, Some(&comment))?;
            entries.push(ManifestEntry {
                index: i,
                split: name.to_string(),
                class: s.params.class,
                coronal,
                transverse,
                params: s.params.clone(),
            });
        }
    }
    entries.sort_by_key(|e| e.index);
    let manifest = Manifest {
        seed: ds.seed,
        config_hash: config_hash.to_string(),
        version: crate::ARTIFACT_VERSION.to_string(),
        difficulty: ds.difficulty,
        benign_count: ds.benign_count,
        malignant_count: ds.malignant_count,
        samples: entries,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    crate::image::write_atomic(&dir.join(MANIFEST), &json)?;
    Ok(manifest)
}

/// Reads a dataset written by [`export_dataset`], returning it with the
/// stored split.
pub fn load_dataset(dir: &Path) -> Result<(SynthDataset, Split, Manifest)> {
    let path = dir.join(MANIFEST);
    let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)?;
    let mut samples = Vec::with_capacity(manifest.samples.len());
    let mut split = Split { train: Vec::new(), test: Vec::new() };
    for (pos, e) in manifest.samples.iter().enumerate() {
        if e.index != pos {
            return Err(Error::Data(format!("manifest indices not contiguous at {pos}")));
        }
        let coronal = crate::image::read_pgm(&dir.join(&e.coronal))?;
        let transverse = crate::image::read_pgm(&dir.join(&e.transverse))?;
        match e.split.as_str() {
            "train" => split.train.push(pos),
            "test" => split.test.push(pos),
            other => return Err(Error::Data(format!("unknown split `{other}`"))),
        }
        samples.push(DualViewSample { id: pos, params: e.params.clone(), coronal, transverse });
    }
    let ds = SynthDataset {
        samples,
        difficulty: manifest.difficulty,
        seed: manifest.seed,
        benign_count: manifest.benign_count,
        malignant_count: manifest.malignant_count,
    };
    Ok((ds, split, manifest))
}
