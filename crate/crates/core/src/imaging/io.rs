//! PGM (P2/P5) and PNG file handling.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use super::RawImage;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn from_extension(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" => Some(ImageFormat::Pgm),
            "png" => Some(ImageFormat::Png),
            _ => None,
        }
    }
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

pub fn load_image(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Decodes by content sniffing, not by file extension.
pub(crate) fn decode(bytes: &[u8]) -> Result<RawImage> {
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        decode_pgm(bytes)
    } else if bytes.starts_with(b"GIF8") {
        Err(Error::UnsupportedFormat(
            "GIF is not supported; convert to PNG or PGM first (e.g. `convert in.gif out.png`)".into(),
        ))
    } else {
        Err(Error::UnsupportedFormat(
            "expected a PNG or a P2/P5 PGM file".into(),
        ))
    }
}

struct PgmHeader {
    width: usize,
    height: usize,
    maxval: u32,
    data_offset: usize,
}

fn parse_pgm_header(bytes: &[u8]) -> Result<PgmHeader> {
    // Magic, then whitespace- or comment-separated width, height, maxval.
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Decode {
                offset: pos,
                reason: "expected a header number".into(),
            });
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Decode {
                offset: start,
                reason: "header number out of range".into(),
            })?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Decode {
            offset: pos,
            reason: "missing whitespace after maxval".into(),
        });
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(Error::Decode {
            offset: pos,
            reason: format!("degenerate size {width}×{height}"),
        });
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Decode {
            offset: pos,
            reason: format!("maxval {maxval} outside 1..=65535"),
        });
    }
    Ok(PgmHeader {
        width: width as usize,
        height: height as usize,
        maxval,
        data_offset: pos + 1,
    })
}

fn rescale(v: u32, maxval: u32) -> u8 {
    if maxval == 255 {
        v as u8
    } else {
        ((v.min(maxval) as u64 * 255 + maxval as u64 / 2) / maxval as u64) as u8
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<RawImage> {
    let h = parse_pgm_header(bytes)?;
    let n = h.width * h.height;
    let mut pixels = Vec::with_capacity(n);
    if bytes[1] == b'5' {
        let bpp = if h.maxval < 256 { 1 } else { 2 };
        let body = &bytes[h.data_offset..];
        if body.len() < n * bpp {
            return Err(Error::Decode {
                offset: bytes.len(),
                reason: format!("truncated P5 data: need {} bytes, have {}", n * bpp, body.len()),
            });
        }
        for i in 0..n {
            let v = if bpp == 1 {
                body[i] as u32
            } else {
                u16::from_be_bytes([body[2 * i], body[2 * i + 1]]) as u32
            };
            pixels.push(rescale(v, h.maxval));
        }
    } else {
        let mut pos = h.data_offset;
        for _ in 0..n {
            while bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
                pos += 1;
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Decode {
                    offset: pos,
                    reason: "truncated or malformed P2 sample".into(),
                });
            }
            let v: u32 = std::str::from_utf8(&bytes[start..pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or(Error::Decode {
                    offset: start,
                    reason: "P2 sample out of range".into(),
                })?;
            pixels.push(rescale(v, h.maxval));
        }
    }
    RawImage::new(h.width, h.height, pixels)
}

fn decode_png(bytes: &[u8]) -> Result<RawImage> {
    let png_err = |e: png::DecodingError, offset: usize| Error::Decode {
        offset,
        reason: format!("png: {e}"),
    };
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info().map_err(|e| png_err(e, 0))?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    // The decoder does not expose its stream position; a failure while
    // reading image data is reported at the end of the available bytes.
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| png_err(e, bytes.len()))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let luma = |r: u8, g: u8, b: u8| -> u8 {
        // ITU-R BT.601 luma, integer-rounded.
        ((299 * r as u32 + 587 * g as u32 + 114 * b as u32 + 500) / 1000) as u8
    };
    let pixels: Vec<u8> = match info.color_type {
        png::ColorType::Grayscale => data.to_vec(),
        png::ColorType::GrayscaleAlpha => data.chunks_exact(2).map(|p| p[0]).collect(),
        png::ColorType::Rgb => data.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect(),
        png::ColorType::Rgba => data.chunks_exact(4).map(|p| luma(p[0], p[1], p[2])).collect(),
        png::ColorType::Indexed => {
            return Err(Error::UnsupportedFormat("unexpanded indexed PNG".into()));
        }
    };
    RawImage::new(w, h, pixels)
}

pub fn encode_pgm(img: &RawImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn encode_png_gray(img: &RawImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&img.pixels)?;
        writer.finish()?;
    }
    Ok(out)
}

pub fn save_pgm(img: &RawImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))
}

pub fn save_png(img: &RawImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_png_gray(img)?).map_err(|e| Error::io(path, e))
}

/// Regular files in `dir` with a `.png`/`.pgm` extension, sorted by file name.
///
/// Other files are returned separately so callers can report them.
pub fn list_images(dir: impl AsRef<Path>) -> Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let dir = dir.as_ref();
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        if ImageFormat::from_extension(&path).is_some() {
            images.push(path);
        } else {
            skipped.push(path);
        }
    }
    images.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    skipped.sort();
    Ok((images, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p5_fixture() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend_from_slice(&[0x00, 0xFF, 0x00, 0xFF]);
        let img = decode(&bytes).unwrap();
        assert_eq!((img.width, img.height), (2, 2));
        assert_eq!(img.pixels, vec![0, 255, 0, 255]);
    }

    #[test]
    fn p2_with_comment_and_maxval() {
        let img = decode(b"P2\n# hi\n3 1\n15\n0 15 7\n").unwrap();
        assert_eq!(img.pixels, vec![0, 255, 119]);
    }

    #[test]
    fn truncated_p5_names_offset() {
        let err = decode(b"P5 4 4 255\n\x00\x01").unwrap_err();
        match err {
            Error::Decode { offset, .. } => assert_eq!(offset, 13),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn gif_is_rejected_with_advice() {
        let err = decode(b"GIF89a\x01\x00\x01\x00").unwrap_err();
        assert!(matches!(err, Error::UnsupportedFormat(ref m) if m.contains("convert")));
    }

    #[test]
    fn png_roundtrip_is_pixel_exact() {
        let img = RawImage::new(2, 2, vec![0, 17, 200, 255]).unwrap();
        let bytes = encode_png_gray(&img).unwrap();
        assert_eq!(decode(&bytes).unwrap(), img);
    }

    #[test]
    fn rgb_png_converts_by_luma() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 2, 1);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[255, 255, 255, 255, 0, 0]).unwrap();
        }
        let img = decode(&out).unwrap();
        assert_eq!(img.pixels, vec![255, 76]);
    }

    #[test]
    fn truncated_png_is_an_error() {
        let img = RawImage::new(8, 8, (0..64).map(|v| v as u8 * 3).collect()).unwrap();
        let bytes = encode_png_gray(&img).unwrap();
        let err = decode(&bytes[..bytes.len() - 20]).unwrap_err();
        assert!(matches!(err, Error::Decode { .. }), "{err}");
    }
}
