//! Synthetic shapes for tests and desk-scale experiments.
//!
//! Shapes are centered at (32, 32) and rasterized by an inside test at pixel
//! centers `(x + 0.5, y + 0.5)`.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mask, MASK_SIDE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeKind {
    Disc { radius: f64 },
    /// Axis-aligned.
    Rectangle { width: f64, height: f64 },
    /// Random orientation drawn from the generator.
    RegularPolygon { sides: usize, radius: f64 },
    /// Alternating outer/inner vertices; random orientation.
    Star { points: usize, inner_ratio: f64, radius: f64 },
    /// Each pixel white with probability `p`.
    Noise { p: f64 },
}

impl ShapeKind {
    pub const DEFAULT_RADIUS: f64 = 28.0;

    pub fn regular_polygon(sides: usize) -> Self {
        ShapeKind::RegularPolygon {
            sides,
            radius: Self::DEFAULT_RADIUS,
        }
    }

    pub fn star(points: usize, inner_ratio: f64) -> Self {
        ShapeKind::Star {
            points,
            inner_ratio,
            radius: Self::DEFAULT_RADIUS,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ShapeKind::Disc { .. } => "disc",
            ShapeKind::Rectangle { .. } => "rect",
            ShapeKind::RegularPolygon { .. } => "poly",
            ShapeKind::Star { .. } => "star",
            ShapeKind::Noise { .. } => "noise",
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        let max = MASK_SIDE as f64;
        match *self {
            ShapeKind::Disc { radius } | ShapeKind::RegularPolygon { radius, .. } | ShapeKind::Star { radius, .. }
                if !(radius > 0.0 && radius <= max) =>
            {
                bad(format!("radius {radius} outside (0, {max}]"))
            }
            ShapeKind::Rectangle { width, height }
                if !(width > 0.0 && height > 0.0 && width <= max && height <= max) =>
            {
                bad(format!("rectangle {width}×{height} outside (0, {max}]²"))
            }
            ShapeKind::RegularPolygon { sides, .. } if sides < 3 => bad(format!("polygon needs ≥ 3 sides, got {sides}")),
            ShapeKind::Star { points, .. } if points < 2 => bad(format!("star needs ≥ 2 points, got {points}")),
            ShapeKind::Star { inner_ratio, .. } if !(inner_ratio > 0.0 && inner_ratio < 1.0) => {
                bad(format!("star inner ratio {inner_ratio} outside (0, 1)"))
            }
            ShapeKind::Noise { p } if !(0.0..=1.0).contains(&p) => bad(format!("noise probability {p} outside [0, 1]")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ShapeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeKind::Disc { radius } => write!(f, "disc(r={radius})"),
            ShapeKind::Rectangle { width, height } => write!(f, "rect({width}x{height})"),
            ShapeKind::RegularPolygon { sides, radius } => write!(f, "poly({sides}, r={radius})"),
            ShapeKind::Star {
                points,
                inner_ratio,
                radius,
            } => write!(f, "star({points}, {inner_ratio}, r={radius})"),
            ShapeKind::Noise { p } => write!(f, "noise({p})"),
        }
    }
}

const CENTER: f64 = MASK_SIDE as f64 / 2.0;

/// Even-odd point-in-polygon test.
fn inside_polygon(px: f64, py: f64, verts: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let mut j = verts.len() - 1;
    for i in 0..verts.len() {
        let (xi, yi) = verts[i];
        let (xj, yj) = verts[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn polygon_mask(id: String, verts: &[(f64, f64)]) -> Mask {
    Mask::from_fn(id, |x, y| inside_polygon(x as f64 + 0.5, y as f64 + 0.5, verts))
}

pub fn generate_shape<R: Rng + ?Sized>(kind: &ShapeKind, rng: &mut R) -> Result<Mask> {
    kind.validate()?;
    let id = kind.to_string();
    let mask = match *kind {
        ShapeKind::Disc { radius } => Mask::from_fn(id, |x, y| {
            let (dx, dy) = (x as f64 + 0.5 - CENTER, y as f64 + 0.5 - CENTER);
            dx * dx + dy * dy <= radius * radius
        }),
        ShapeKind::Rectangle { width, height } => Mask::from_fn(id, |x, y| {
            let (dx, dy) = (x as f64 + 0.5 - CENTER, y as f64 + 0.5 - CENTER);
            dx.abs() <= width / 2.0 && dy.abs() <= height / 2.0
        }),
        ShapeKind::RegularPolygon { sides, radius } => {
            let phase = rng.random_range(0.0..2.0 * PI);
            let verts: Vec<_> = (0..sides)
                .map(|k| {
                    let a = phase + 2.0 * PI * k as f64 / sides as f64;
                    (CENTER + radius * a.cos(), CENTER + radius * a.sin())
                })
                .collect();
            polygon_mask(id, &verts)
        }
        ShapeKind::Star {
            points,
            inner_ratio,
            radius,
        } => {
            let phase = rng.random_range(0.0..2.0 * PI);
            let verts: Vec<_> = (0..2 * points)
                .map(|k| {
                    let r = if k % 2 == 0 { radius } else { radius * inner_ratio };
                    let a = phase + PI * k as f64 / points as f64;
                    (CENTER + r * a.cos(), CENTER + r * a.sin())
                })
                .collect();
            polygon_mask(id, &verts)
        }
        ShapeKind::Noise { p } => {
            let pixels = (0..MASK_SIDE * MASK_SIDE)
                .map(|_| if rng.random_bool(p) { 1.0 } else { 0.0 })
                .collect();
            Mask::new(id, pixels)?
        }
    };
    Ok(mask)
}

/// Deterministic mixed corpus cycling disc, rectangle, polygon, star, noise.
///
/// Ids are `<family>_<index:03>`. Shapes that happen to rasterize to an
/// all-black mask are redrawn.
pub fn desk_corpus(n: usize, seed: u64) -> Vec<Mask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        loop {
            let kind = match i % 5 {
                0 => ShapeKind::Disc {
                    radius: rng.random_range(8.0..28.0),
                },
                1 => ShapeKind::Rectangle {
                    width: rng.random_range(8.0..60.0),
                    height: rng.random_range(8.0..60.0),
                },
                2 => ShapeKind::RegularPolygon {
                    sides: rng.random_range(3..=8),
                    radius: rng.random_range(12.0..30.0),
                },
                3 => ShapeKind::Star {
                    points: rng.random_range(4..=9),
                    inner_ratio: rng.random_range(0.3..0.7),
                    radius: rng.random_range(16.0..30.0),
                },
                _ => ShapeKind::Noise {
                    p: rng.random_range(0.2..0.8),
                },
            };
            let m = generate_shape(&kind, &mut rng).expect("corpus parameters are valid");
            if m.mass() > 0.0 {
                out.push(m.with_id(format!("{}_{i:03}", kind.family())));
                break;
            }
        }
    }
    out
}
