use crate::image::{BinaryMask, GrayImage};

/// Between-class variance `w0·w1·(μ0 − μ1)²` for splitting the histogram
/// into `v < t` and `v ≥ t`; `None` when either side is empty.
pub fn between_class_variance(hist: &[usize; 256], t: usize) -> Option<f64> {
    let (mut n0, mut s0, mut n1, mut s1) = (0usize, 0f64, 0usize, 0f64);
    for (v, &c) in hist.iter().enumerate() {
        if v < t {
            n0 += c;
            s0 += (v * c) as f64;
        } else {
            n1 += c;
            s1 += (v * c) as f64;
        }
    }
    if n0 == 0 || n1 == 0 {
        return None;
    }
    let n = (n0 + n1) as f64;
    let (w0, w1) = (n0 as f64 / n, n1 as f64 / n);
    let d = s0 / n0 as f64 - s1 / n1 as f64;
    Some(w0 * w1 * d * d)
}

pub fn histogram(img: &GrayImage) -> [usize; 256] {
    let mut h = [0usize; 256];
    for &p in img.pixels() {
        h[p as usize] += 1;
    }
    h
}

/// Otsu threshold: the lowest `t` in `1..=255` maximizing between-class
/// variance, where foreground is `v ≥ t`. `None` for single-level images.
pub fn otsu_threshold(img: &GrayImage) -> Option<u8> {
    let hist = histogram(img);
    let mut best: Option<(usize, f64)> = None;
    // Prefix sums make the scan linear.
    let total_n: usize = hist.iter().sum();
    let total_s: f64 = hist.iter().enumerate().map(|(v, &c)| (v * c) as f64).sum();
    let (mut n0, mut s0) = (0usize, 0f64);
    for t in 1..256 {
        n0 += hist[t - 1];
        s0 += ((t - 1) * hist[t - 1]) as f64;
        let n1 = total_n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let s1 = total_s - s0;
        let n = total_n as f64;
        let d = s0 / n0 as f64 - s1 / n1 as f64;
        let var = (n0 as f64 / n) * (n1 as f64 / n) * d * d;
        if best.map_or(true, |(_, b)| var > b) {
            best = Some((t, var));
        }
    }
    best.map(|(t, _)| t as u8)
}

/// Foreground (`1`) where intensity ≥ the Otsu threshold. Single-level
/// images give an all-background mask.
pub fn binarize_otsu(img: &GrayImage) -> BinaryMask {
    match otsu_threshold(img) {
        Some(t) => BinaryMask::new(
            img.width(),
            img.height(),
            img.pixels().iter().map(|&p| p >= t).collect(),
        )
        .expect("extents preserved"),
        None => BinaryMask::empty(img.width(), img.height()),
    }
}
