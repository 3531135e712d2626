use crate::image::GrayImage;

/// Equalization lookup table: `lut[v] = round(255 · cdf(v) / N)`.
///
/// This is the cumulative-histogram mapping without the `cdf_min` offset, so
/// the darkest populated level maps to its own probability mass rather than
/// to 0, and a single-level image maps to 255.
pub fn equalization_lut(img: &GrayImage) -> [u8; 256] {
    let mut hist = [0usize; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let n = img.pixels().len() as f64;
    let mut lut = [0u8; 256];
    let mut cdf = 0usize;
    for v in 0..256 {
        cdf += hist[v];
        lut[v] = (255.0 * cdf as f64 / n).round() as u8;
    }
    lut
}

pub fn histogram_equalize(img: &GrayImage) -> GrayImage {
    let lut = equalization_lut(img);
    let mut out = img.clone();
    for p in out.pixels_mut() {
        *p = lut[*p as usize];
    }
    out
}
