//! Binary shape masks: loading, preprocessing, augmentation and synthesis.
//!
//! Foreground is white (value 1). Every scored mask is [`MASK_SIDE`]² pixels.

mod augment;
mod io;
mod preprocess;
mod synth;

pub use augment::{augment, AugmentPlan, MAX_ROTATION_DEG};
pub use io::{list_images, load_image, save_pgm, save_png, ImageFormat};
pub use preprocess::{preprocess, DEFAULT_THRESHOLD};
pub use synth::{desk_corpus, generate_shape, ShapeKind};

use crate::{Error, Result};

pub const MASK_SIDE: usize = 64;
pub const MASK_PIXELS: usize = MASK_SIDE * MASK_SIDE;

/// 8-bit grayscale image as decoded from disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != pixels.len() {
            return Err(Error::Dimension(format!(
                "{width}×{height} image with {} pixels",
                pixels.len()
            )));
        }
        Ok(RawImage {
            width,
            height,
            pixels,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

/// A 64×64 mask with pixel values in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    id: String,
    pixels: Vec<f32>,
}

impl Mask {
    pub fn new(id: impl Into<String>, pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != MASK_PIXELS {
            return Err(Error::Dimension(format!(
                "mask needs {MASK_PIXELS} pixels, got {}",
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Parameter(format!("mask pixel {v} outside [0, 1]")));
        }
        Ok(Mask {
            id: id.into(),
            pixels,
        })
    }

    pub fn from_fn(id: impl Into<String>, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut pixels = vec![0.0; MASK_PIXELS];
        for y in 0..MASK_SIDE {
            for x in 0..MASK_SIDE {
                if f(x, y) {
                    pixels[y * MASK_SIDE + x] = 1.0;
                }
            }
        }
        Mask {
            id: id.into(),
            pixels,
        }
    }

    /// Binarizes an already 64×64 image without cropping or resampling.
    pub fn from_raw(id: impl Into<String>, img: &RawImage, threshold: u8) -> Result<Self> {
        if img.width != MASK_SIDE || img.height != MASK_SIDE {
            return Err(Error::Dimension(format!(
                "mask image must be {MASK_SIDE}×{MASK_SIDE}, got {}×{}",
                img.width, img.height
            )));
        }
        Ok(Self::from_fn(id, |x, y| img.get(x, y) >= threshold))
    }

    pub fn filled(id: impl Into<String>, value: bool) -> Self {
        Self::from_fn(id, |_, _| value)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * MASK_SIDE + x]
    }

    pub fn is_binary(&self) -> bool {
        self.pixels.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Sum of pixel values; the white-pixel count for binary masks.
    pub fn mass(&self) -> f64 {
        self.pixels.iter().map(|&v| v as f64).sum()
    }

    pub fn hflip(&self) -> Self {
        self.remap(|x, y| (MASK_SIDE - 1 - x, y))
    }

    pub fn vflip(&self) -> Self {
        self.remap(|x, y| (x, MASK_SIDE - 1 - y))
    }

    /// `1 − m`.
    pub fn inverted(&self) -> Self {
        Mask {
            id: self.id.clone(),
            pixels: self.pixels.iter().map(|&v| 1.0 - v).collect(),
        }
    }

    fn remap(&self, src: impl Fn(usize, usize) -> (usize, usize)) -> Self {
        let mut pixels = vec![0.0; MASK_PIXELS];
        for y in 0..MASK_SIDE {
            for x in 0..MASK_SIDE {
                let (sx, sy) = src(x, y);
                pixels[y * MASK_SIDE + x] = self.pixels[sy * MASK_SIDE + sx];
            }
        }
        Mask {
            id: self.id.clone(),
            pixels,
        }
    }

    /// 0x00 for black, 0xFF for white (values ≥ 0.5).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| if v >= 0.5 { 0xFF } else { 0x00 })
            .collect()
    }

    pub fn to_raw(&self) -> RawImage {
        let pixels = self
            .pixels
            .iter()
            .map(|&v| (v * 255.0).round() as u8)
            .collect();
        RawImage {
            width: MASK_SIDE,
            height: MASK_SIDE,
            pixels,
        }
    }
}

/// Fraction of white pixels: `Σ pixels / 4096`.
pub fn fill_ratio(m: &Mask) -> f64 {
    m.mass() / MASK_PIXELS as f64
}

/// Number of 4-neighbour pixel pairs whose values differ.
pub fn edge_count(m: &Mask) -> usize {
    let mut n = 0;
    for y in 0..MASK_SIDE {
        for x in 0..MASK_SIDE {
            let v = m.get(x, y);
            if x + 1 < MASK_SIDE && m.get(x + 1, y) != v {
                n += 1;
            }
            if y + 1 < MASK_SIDE && m.get(x, y + 1) != v {
                n += 1;
            }
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_ratio_fixtures() {
        assert_eq!(fill_ratio(&Mask::filled("b", false)), 0.0);
        assert_eq!(fill_ratio(&Mask::filled("w", true)), 1.0);
        let half = Mask::from_fn("h", |_, y| y < 32);
        assert_eq!(fill_ratio(&half), 0.5);
    }

    #[test]
    fn flips_are_involutions_and_keep_fill() {
        let m = Mask::from_fn("l", |x, y| x < 10 || y > 50);
        assert_eq!(m.hflip().hflip(), m);
        assert_eq!(m.vflip().vflip(), m);
        assert_eq!(fill_ratio(&m.hflip()), fill_ratio(&m));
        assert_eq!(m.hflip().get(63, 0), m.get(0, 0));
    }

    #[test]
    fn rejects_bad_masks() {
        assert!(Mask::new("x", vec![0.0; 10]).is_err());
        let mut px = vec![0.0; MASK_PIXELS];
        px[3] = 1.5;
        assert!(Mask::new("x", px).is_err());
    }

    #[test]
    fn edge_count_of_half_plane() {
        let m = Mask::from_fn("h", |x, _| x < 32);
        assert_eq!(edge_count(&m), 64);
    }
}
