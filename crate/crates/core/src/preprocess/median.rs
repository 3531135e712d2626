use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Median over a `(2r+1)²` window with clamp-to-edge borders.
pub fn median_filter(img: &GrayImage, radius: usize) -> Result<GrayImage> {
    if radius < 1 {
        return Err(Error::param("median radius must be >= 1"));
    }
    let r = radius as isize;
    let side = 2 * radius + 1;
    let mid = side * side / 2;
    let mut window = Vec::with_capacity(side * side);
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            window.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    window.push(img.get_clamped(x as isize + dx, y as isize + dy));
                }
            }
            let (_, m, _) = window.select_nth_unstable(mid);
            out.set(x, y, *m);
        }
    }
    Ok(out)
}
