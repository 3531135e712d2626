use crate::image::{BinaryMask, GrayImage};

/// Offsets of a discrete disk: all `(dx, dy)` with `dx² + dy² ≤ r²`.
pub fn disk(radius: usize) -> Vec<(isize, isize)> {
    let r = radius as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

fn rank_filter(img: &GrayImage, se: &[(isize, isize)], take_max: bool) -> GrayImage {
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            let vals = se.iter().map(|&(dx, dy)| img.get_clamped(x as isize + dx, y as isize + dy));
            let v = if take_max { vals.max() } else { vals.min() };
            out.set(x, y, v.expect("structuring element is non-empty"));
        }
    }
    out
}

pub fn erode(img: &GrayImage, radius: usize) -> GrayImage {
    rank_filter(img, &disk(radius), false)
}

pub fn dilate(img: &GrayImage, radius: usize) -> GrayImage {
    rank_filter(img, &disk(radius), true)
}

/// Images and masks both support opening followed by closing.
pub trait Morphology: Sized {
    /// Opening (erode, dilate) then closing (dilate, erode) with a disk.
    fn open_close(&self, radius: usize) -> Self;
}

impl Morphology for GrayImage {
    fn open_close(&self, radius: usize) -> Self {
        let se = disk(radius);
        let opened = rank_filter(&rank_filter(self, &se, false), &se, true);
        rank_filter(&rank_filter(&opened, &se, true), &se, false)
    }
}

impl Morphology for BinaryMask {
    fn open_close(&self, radius: usize) -> Self {
        BinaryMask::from_image(&self.to_image().open_close(radius))
    }
}

/// Opening then closing with a disk of `radius` (≥ 1; 0 is treated as 1).
pub fn morph_open_close<T: Morphology>(x: &T, radius: usize) -> T {
    x.open_close(radius.max(1))
}
