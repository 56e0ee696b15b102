use rand::Rng;

use super::{Mask, MASK_PIXELS, MASK_SIDE};

pub const MAX_ROTATION_DEG: f64 = 85.0;

/// One concrete draw of the training augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentPlan {
    pub hflip: bool,
    pub vflip: bool,
    /// Counter-clockwise rotation in degrees, if any.
    pub rotation_deg: Option<f64>,
}

impl AugmentPlan {
    /// Each of hflip, vflip and rotation fires independently with p = 0.5;
    /// the angle is uniform in [−85°, 85°]. Draw order is fixed.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let hflip = rng.random_bool(0.5);
        let vflip = rng.random_bool(0.5);
        let rotate = rng.random_bool(0.5);
        let angle = rng.random_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG);
        AugmentPlan {
            hflip,
            vflip,
            rotation_deg: rotate.then_some(angle),
        }
    }

    pub fn apply(&self, m: &Mask) -> Mask {
        let mut out = m.clone();
        if self.hflip {
            out = out.hflip();
        }
        if self.vflip {
            out = out.vflip();
        }
        if let Some(deg) = self.rotation_deg {
            out = rotate(&out, deg);
        }
        out
    }
}

pub fn augment<R: Rng + ?Sized>(m: &Mask, rng: &mut R) -> Mask {
    AugmentPlan::sample(rng).apply(m)
}

/// Rotation about the image center with bilinear sampling, zero fill, and
/// re-binarization at 0.5.
fn rotate(m: &Mask, degrees: f64) -> Mask {
    let (sin, cos) = degrees.to_radians().sin_cos();
    let c = MASK_SIDE as f64 / 2.0;
    let sample = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= MASK_SIDE as i64 || y >= MASK_SIDE as i64 {
            0.0
        } else {
            m.get(x as usize, y as usize) as f64
        }
    };
    let mut pixels = vec![0.0f32; MASK_PIXELS];
    for y in 0..MASK_SIDE {
        for x in 0..MASK_SIDE {
            // Inverse-map the output pixel center into the source.
            let (dx, dy) = (x as f64 + 0.5 - c, y as f64 + 0.5 - c);
            let sx = c + dx * cos - dy * sin - 0.5;
            let sy = c + dx * sin + dy * cos - 0.5;
            let (fx, fy) = (sx.floor(), sy.floor());
            let (tx, ty) = (sx - fx, sy - fy);
            let (ix, iy) = (fx as i64, fy as i64);
            let v = (1.0 - tx) * (1.0 - ty) * sample(ix, iy)
                + tx * (1.0 - ty) * sample(ix + 1, iy)
                + (1.0 - tx) * ty * sample(ix, iy + 1)
                + tx * ty * sample(ix + 1, iy + 1);
            if v >= 0.5 {
                pixels[y * MASK_SIDE + x] = 1.0;
            }
        }
    }
    Mask::new(m.id(), pixels).expect("rotation keeps mask shape")
}
