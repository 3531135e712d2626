//! 8-bit grayscale images, binary masks and binary PGM (P5) I/O.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!("image extents must be positive, got {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::shape(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image extents must be positive");
        Self { width, height, pixels: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image extents must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel at `(x, y)` with coordinates clamped into the frame.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn invert(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| 255 - p).collect(),
        }
    }

    /// `[1, H, W]` tensor of intensities scaled to `[0, 1]`.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![1, self.height, self.width],
            self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
        )
        .expect("extents are positive")
    }

    /// `[1, H, W]` tensor with zero mean and unit variance. Constant images
    /// map to all zeros. This is what the networks consume.
    pub fn to_standardized_tensor(&self) -> Tensor {
        let n = self.pixels.len() as f64;
        let mean = self.pixels.iter().map(|&p| f64::from(p)).sum::<f64>() / n;
        let var = self.pixels.iter().map(|&p| (f64::from(p) - mean).powi(2)).sum::<f64>() / n;
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 0.0 };
        Tensor::new(
            vec![1, self.height, self.width],
            self.pixels.iter().map(|&p| (f64::from(p) - mean) * scale).collect(),
        )
        .expect("extents are positive")
    }

    /// Bilinear resize (pixel-center aligned, clamped borders).
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<GrayImage> {
        if width == 0 || height == 0 {
            return Err(Error::param("resize target must be positive"));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Ok(GrayImage::from_fn(width, height, |x, y| {
            let fx = ((x as f64 + 0.5) * sx - 0.5).max(0.0);
            let fy = ((y as f64 + 0.5) * sy - 0.5).max(0.0);
            let (x0, y0) = (fx.floor() as isize, fy.floor() as isize);
            let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
            let p = |dx: isize, dy: isize| f64::from(self.get_clamped(x0 + dx, y0 + dy));
            let top = p(0, 0) * (1.0 - ax) + p(1, 0) * ax;
            let bottom = p(0, 1) * (1.0 - ax) + p(1, 1) * ax;
            quantize(top * (1.0 - ay) + bottom * ay)
        }))
    }
}

/// Round to nearest and clamp into `0..=255`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height || width == 0 || height == 0 {
            return Err(Error::shape(format!("{width}x{height} mask needs {} bits, got {}", width * height, bits.len())));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Foreground pixels with at least one 4-neighbour outside the
    /// foreground (or outside the frame).
    pub fn perimeter(&self) -> usize {
        let mut n = 0;
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.get(x, y) {
                    continue;
                }
                let edge = x == 0
                    || y == 0
                    || x + 1 == self.width
                    || y + 1 == self.height
                    || !self.get(x - 1, y)
                    || !self.get(x + 1, y)
                    || !self.get(x, y - 1)
                    || !self.get(x, y + 1);
                if edge {
                    n += 1;
                }
            }
        }
        n
    }

    pub fn to_image(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }

    pub fn from_image(img: &GrayImage) -> Self {
        Self {
            width: img.width,
            height: img.height,
            bits: img.pixels.iter().map(|&p| p >= 128).collect(),
        }
    }
}

/// Binary PGM (`P5`, maxval 255). `comment` lines are written as `# ...`
/// between the magic and the extents.
pub fn encode_pgm(img: &GrayImage, comment: Option<&str>) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.pixels.len() + 64);
    out.extend_from_slice(b"P5\n");
    if let Some(c) = comment {
        for line in c.lines() {
            out.extend_from_slice(b"# ");
            out.extend_from_slice(line.as_bytes());
            out.push(b'\n');
        }
    }
    out.extend_from_slice(format!("{} {}\n255\n", img.width, img.height).as_bytes());
    out.extend_from_slice(&img.pixels);
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0;
    let next_token = |pos: &mut usize| -> Result<String> {
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(Error::Parse { offset: start, reason: "unexpected end of PGM header".into() });
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos)?;
    if magic != "P5" {
        return Err(Error::Parse { offset: 0, reason: format!("expected P5 magic, got `{magic}`") });
    }
    let num = |pos: &mut usize, what: &str| -> Result<usize> {
        let at = *pos;
        let tok = next_token(pos)?;
        tok.parse().map_err(|_| Error::Parse { offset: at, reason: format!("bad {what} `{tok}`") })
    };
    let width = num(&mut pos, "width")?;
    let height = num(&mut pos, "height")?;
    let maxval = num(&mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::Parse { offset: pos, reason: format!("only maxval 255 is supported, got {maxval}") });
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(Error::Parse {
            offset: bytes.len(),
            reason: format!("raster truncated: need {need} bytes, have {}", bytes.len().saturating_sub(pos)),
        });
    }
    GrayImage::new(width, height, bytes[pos..pos + need].to_vec())
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes)
}

/// Writes via a temporary file and rename so readers never see partial files.
pub fn write_pgm(path: &Path, img: &GrayImage, comment: Option<&str>) -> Result<()> {
    write_atomic(path, &encode_pgm(img, comment))
}

/// Writes through a sibling temp file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
