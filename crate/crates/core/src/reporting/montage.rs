use std::collections::HashMap;
use std::path::Path;

use super::font::{glyph, GLYPH_H, GLYPH_W};
use crate::evaluation::Ranking;
use crate::imaging::{Mask, MASK_SIDE};
use crate::{Error, Result};

pub const LABEL_RGB: [u8; 3] = [255, 165, 0];
pub const MAX_LABEL_LINES: usize = 3;

/// Pixel geometry of a montage.
///
/// With `cell = 64·scale` and `line = 7·font_scale + line_gap`:
///
/// ```text
/// width  = n · (cell + padding)
/// height = padding/2 + cell + padding/2 + lines · line + padding/2
/// ```
///
/// Cell `i` starts at `x = i·(cell + padding) + padding/2`, `y = padding/2`;
/// each label line is centered under its cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MontageLayout {
    pub scale: usize,
    pub padding: usize,
    pub font_scale: usize,
    pub line_gap: usize,
}

impl Default for MontageLayout {
    fn default() -> Self {
        MontageLayout {
            scale: 2,
            padding: 8,
            font_scale: 2,
            line_gap: 4,
        }
    }
}

impl MontageLayout {
    pub fn cell(&self) -> usize {
        MASK_SIDE * self.scale
    }

    pub fn line_height(&self) -> usize {
        GLYPH_H * self.font_scale + self.line_gap
    }

    pub fn width(&self, cells: usize) -> usize {
        cells * (self.cell() + self.padding)
    }

    pub fn height(&self, lines: usize) -> usize {
        let half = self.padding / 2;
        3 * half + self.cell() + lines * self.line_height()
    }

    pub fn cell_origin(&self, i: usize) -> (usize, usize) {
        (i * (self.cell() + self.padding) + self.padding / 2, self.padding / 2)
    }
}

/// Masks in ranking order with their label lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Montage {
    pub cells: Vec<(Mask, Vec<String>)>,
    pub layout: MontageLayout,
}

/// 8-bit RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = (y * self.width + x) * 3;
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header()?;
            w.write_image_data(&self.data)?;
        }
        Ok(out)
    }
}

impl Montage {
    /// Looks up each ranked id in `masks`; `labels` supplies 1 to 3 lines.
    pub fn from_ranking(
        ranking: &Ranking,
        masks: &[Mask],
        mut labels: impl FnMut(&str) -> Vec<String>,
    ) -> Result<Self> {
        let by_id: HashMap<&str, &Mask> = masks.iter().map(|m| (m.id(), m)).collect();
        let mut cells = Vec::with_capacity(ranking.len());
        for id in ranking.ids() {
            let m = by_id
                .get(id)
                .ok_or_else(|| Error::Parameter(format!("no mask for ranked id `{id}`")))?;
            let lines = labels(id);
            if lines.is_empty() || lines.len() > MAX_LABEL_LINES {
                return Err(Error::Parameter(format!(
                    "`{id}` has {} label lines, expected 1 to {MAX_LABEL_LINES}",
                    lines.len()
                )));
            }
            cells.push(((*m).clone(), lines));
        }
        if cells.is_empty() {
            return Err(Error::Parameter("montage needs at least one shape".into()));
        }
        Ok(Montage {
            cells,
            layout: MontageLayout::default(),
        })
    }

    pub fn render(&self) -> RgbImage {
        let l = &self.layout;
        let lines = self.cells.iter().map(|c| c.1.len()).max().unwrap_or(0);
        let (width, height) = (l.width(self.cells.len()), l.height(lines));
        let mut img = RgbImage {
            width,
            height,
            data: vec![0; width * height * 3],
        };
        let cell = l.cell();
        for (i, (mask, labels)) in self.cells.iter().enumerate() {
            let (ox, oy) = l.cell_origin(i);
            for y in 0..cell {
                for x in 0..cell {
                    let v = (mask.get(x / l.scale, y / l.scale) * 255.0).round() as u8;
                    img.put(ox + x, oy + y, [v; 3]);
                }
            }
            let advance = (GLYPH_W + 1) * l.font_scale;
            for (li, text) in labels.iter().enumerate() {
                let text_w = text.chars().count() * advance;
                let tx = ox + cell.saturating_sub(text_w) / 2;
                let ty = oy + cell + l.padding / 2 + li * l.line_height();
                draw_text(&mut img, text, tx, ty, l.font_scale, ox + cell);
            }
        }
        img
    }
}

fn draw_text(img: &mut RgbImage, text: &str, x0: usize, y0: usize, scale: usize, clip_x: usize) {
    let advance = (GLYPH_W + 1) * scale;
    for (ci, c) in text.chars().enumerate() {
        let rows = glyph(c);
        for (gy, row) in rows.iter().enumerate() {
            for gx in 0..GLYPH_W {
                if row >> (GLYPH_W - 1 - gx) & 1 == 0 {
                    continue;
                }
                for dy in 0..scale {
                    for dx in 0..scale {
                        let x = x0 + ci * advance + gx * scale + dx;
                        if x < clip_x {
                            img.put(x, y0 + gy * scale + dy, LABEL_RGB);
                        }
                    }
                }
            }
        }
    }
}

pub fn render_montage(
    ranking: &Ranking,
    masks: &[Mask],
    labels: impl FnMut(&str) -> Vec<String>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let png = Montage::from_ranking(ranking, masks, labels)?.render().encode_png()?;
    std::fs::write(path, png).map_err(|e| Error::io(path, e))
}
