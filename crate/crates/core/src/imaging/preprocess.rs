use super::{Mask, RawImage, MASK_PIXELS, MASK_SIDE};
use crate::{Error, Result};

pub const DEFAULT_THRESHOLD: u8 = 128;

/// Binarize, crop to the centered square around the foreground bounding box,
/// and area-resample to 64×64.
///
/// Pixels `≥ threshold` are foreground. The bounding box's shorter side is
/// grown symmetrically (odd remainders go right/down); parts of the square
/// outside the image count as background. Each output pixel is the exact
/// area-weighted mean of its source footprint, re-binarized at 0.5 (ties
/// become foreground). All arithmetic is integral, so the result is exact.
///
/// The returned mask has an empty id.
pub fn preprocess(img: &RawImage, threshold: u8) -> Result<Mask> {
    let fg = |x: usize, y: usize| img.get(x, y) >= threshold;

    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for y in 0..img.height {
        for x in 0..img.width {
            if fg(x, y) {
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        }
    }
    if x0 == usize::MAX {
        return Err(Error::EmptyShape { threshold });
    }
    let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
    let side = bw.max(bh);
    let ox = x0 as i64 - ((side - bw) / 2) as i64;
    let oy = y0 as i64 - ((side - bh) / 2) as i64;

    // Work in units of 1/MASK_SIDE source pixel: source pixel j spans
    // [j·64, (j+1)·64), output pixel i spans [i·side, (i+1)·side).
    let weights = |i: usize| -> Vec<(usize, u64)> {
        let (lo, hi) = (i * side, (i + 1) * side);
        (lo / MASK_SIDE..hi.div_ceil(MASK_SIDE))
            .filter_map(|j| {
                let a = lo.max(j * MASK_SIDE);
                let b = hi.min((j + 1) * MASK_SIDE);
                (b > a).then_some((j, (b - a) as u64))
            })
            .collect()
    };
    let axis: Vec<Vec<(usize, u64)>> = (0..MASK_SIDE).map(weights).collect();

    let inside = |sx: i64, sy: i64| -> bool {
        sx >= 0 && sy >= 0 && (sx as usize) < img.width && (sy as usize) < img.height
    };
    let full = (side * side) as u64;
    let mut pixels = vec![0.0f32; MASK_PIXELS];
    for (y, wy) in axis.iter().enumerate() {
        for (x, wx) in axis.iter().enumerate() {
            let mut acc = 0u64;
            for &(ky, ay) in wy {
                for &(kx, ax) in wx {
                    let (sx, sy) = (ox + kx as i64, oy + ky as i64);
                    if inside(sx, sy) && fg(sx as usize, sy as usize) {
                        acc += ax * ay;
                    }
                }
            }
            if 2 * acc >= full {
                pixels[y * MASK_SIDE + x] = 1.0;
            }
        }
    }
    Mask::new("", pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canvas(w: usize, h: usize, rect: (usize, usize, usize, usize)) -> RawImage {
        let (rx, ry, rw, rh) = rect;
        let mut px = vec![0u8; w * h];
        for y in ry..ry + rh {
            for x in rx..rx + rw {
                px[y * w + x] = 255;
            }
        }
        RawImage::new(w, h, px).unwrap()
    }

    fn bbox(m: &Mask) -> (usize, usize, usize, usize) {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..MASK_SIDE {
            for x in 0..MASK_SIDE {
                if m.get(x, y) == 1.0 {
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
        (x0, y0, x1 - x0 + 1, y1 - y0 + 1)
    }

    #[test]
    fn full_frame_square_is_unchanged() {
        let img = canvas(64, 64, (0, 0, 64, 64));
        let m = preprocess(&img, DEFAULT_THRESHOLD).unwrap();
        assert!(m.pixels().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn tall_rectangle_is_centered() {
        // 10×20 box → 20×20 square, upscaled 3.2×: columns [5,15)/20 of the
        // square map to output columns 16..48.
        let img = canvas(100, 100, (37, 11, 10, 20));
        let m = preprocess(&img, DEFAULT_THRESHOLD).unwrap();
        assert!(m.is_binary());
        assert_eq!(bbox(&m), (16, 0, 32, 64));
    }

    #[test]
    fn square_may_extend_past_the_border() {
        // A wide bar touching the top edge: the square reaches above row 0.
        let img = canvas(50, 50, (0, 0, 40, 10));
        let m = preprocess(&img, DEFAULT_THRESHOLD).unwrap();
        let (_, y0, w, h) = bbox(&m);
        assert_eq!(w, 64);
        assert_eq!(h, 16);
        assert_eq!(y0, 24);
    }

    #[test]
    fn all_black_is_empty_shape() {
        let img = RawImage::new(8, 8, vec![0; 64]).unwrap();
        assert!(matches!(
            preprocess(&img, DEFAULT_THRESHOLD),
            Err(Error::EmptyShape { threshold: 128 })
        ));
    }

    #[test]
    fn threshold_is_inclusive() {
        let img = RawImage::new(2, 1, vec![128, 127]).unwrap();
        let m = preprocess(&img, 128).unwrap();
        // Single foreground pixel fills the whole square.
        assert!(m.pixels().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn idempotent_on_full_frame_masks() {
        let mut px = vec![0u8; 64 * 64];
        for y in 0..64 {
            for x in 0..64 {
                if (x + y) % 7 < 3 || x == 0 || x == 63 || y == 0 || y == 63 {
                    px[y * 64 + x] = 255;
                }
            }
        }
        let img = RawImage::new(64, 64, px).unwrap();
        let once = preprocess(&img, DEFAULT_THRESHOLD).unwrap();
        let twice = preprocess(&once.to_raw(), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.to_raw(), img);
    }
}
