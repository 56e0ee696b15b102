use crate::imaging::{fill_ratio, Mask};
use crate::{Error, Result};

/// Compression level used for every score; part of the score definition.
pub const DEFLATE_LEVEL: u8 = 9;

/// Raw RFC 1951 stream (no zlib header) at [`DEFLATE_LEVEL`].
pub fn deflate(bytes: &[u8]) -> Vec<u8> {
    miniz_oxide::deflate::compress_to_vec(bytes, DEFLATE_LEVEL)
}

/// `min(1, deflate_len / 4096) · (1 − fill_ratio)` over the 0x00/0xFF
/// serialization of the mask.
pub fn compression_complexity(m: &Mask) -> f64 {
    let raw = m.to_bytes();
    let ratio = deflate(&raw).len() as f64 / raw.len() as f64;
    ratio.min(1.0) * (1.0 - fill_ratio(m))
}

struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    bit: u32,
}

impl BitReader<'_> {
    fn err(&self, reason: &str) -> Error {
        Error::Decode {
            offset: self.pos,
            reason: reason.to_owned(),
        }
    }

    fn bits(&mut self, n: u32) -> Result<u32> {
        let mut v = 0;
        for i in 0..n {
            let byte = *self.data.get(self.pos).ok_or_else(|| self.err("truncated deflate stream"))?;
            v |= ((byte >> self.bit) as u32 & 1) << i;
            self.bit += 1;
            if self.bit == 8 {
                self.bit = 0;
                self.pos += 1;
            }
        }
        Ok(v)
    }

    fn align(&mut self) {
        if self.bit != 0 {
            self.bit = 0;
            self.pos += 1;
        }
    }
}

/// Canonical Huffman decoder built from code lengths.
struct Huffman {
    counts: [u16; 16],
    symbols: Vec<u16>,
}

impl Huffman {
    fn new(lengths: &[u8]) -> Self {
        let mut counts = [0u16; 16];
        for &l in lengths {
            counts[l as usize] += 1;
        }
        counts[0] = 0;
        let mut offs = [0u16; 16];
        for i in 1..16 {
            offs[i] = offs[i - 1] + counts[i - 1];
        }
        let mut symbols = vec![0; lengths.len()];
        for (s, &l) in lengths.iter().enumerate() {
            if l != 0 {
                symbols[offs[l as usize] as usize] = s as u16;
                offs[l as usize] += 1;
            }
        }
        Huffman { counts, symbols }
    }

    fn decode(&self, r: &mut BitReader<'_>) -> Result<u16> {
        let (mut code, mut first, mut index) = (0i32, 0i32, 0i32);
        for len in 1..16 {
            code |= r.bits(1)? as i32;
            let count = self.counts[len] as i32;
            if code - count < first {
                return Ok(self.symbols[(index + code - first) as usize]);
            }
            index += count;
            first = (first + count) << 1;
            code <<= 1;
        }
        Err(r.err("invalid Huffman code"))
    }
}

const LEN_BASE: [u16; 29] = [
    3, 4, 5, 6, 7, 8, 9, 10, 11, 13, 15, 17, 19, 23, 27, 31, 35, 43, 51, 59, 67, 83, 99, 115, 131, 163, 195, 227, 258,
];
const LEN_EXTRA: [u8; 29] = [0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4, 5, 5, 5, 5, 0];
const DIST_BASE: [u16; 30] = [
    1, 2, 3, 4, 5, 7, 9, 13, 17, 25, 33, 49, 65, 97, 129, 193, 257, 385, 513, 769, 1025, 1537, 2049, 3073, 4097, 6145,
    8193, 12289, 16385, 24577,
];
const DIST_EXTRA: [u8; 30] = [0, 0, 0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11, 12, 12, 13, 13];
const CLEN_ORDER: [usize; 19] = [16, 17, 18, 0, 8, 7, 9, 6, 10, 5, 11, 4, 12, 3, 13, 2, 14, 1, 15];

fn fixed_tables() -> (Huffman, Huffman) {
    let mut lit = [0u8; 288];
    lit[..144].fill(8);
    lit[144..256].fill(9);
    lit[256..280].fill(7);
    lit[280..].fill(8);
    (Huffman::new(&lit), Huffman::new(&[5; 30]))
}

fn dynamic_tables(r: &mut BitReader<'_>) -> Result<(Huffman, Huffman)> {
    let hlit = r.bits(5)? as usize + 257;
    let hdist = r.bits(5)? as usize + 1;
    let hclen = r.bits(4)? as usize + 4;
    let mut clen = [0u8; 19];
    for &i in &CLEN_ORDER[..hclen] {
        clen[i] = r.bits(3)? as u8;
    }
    let clen = Huffman::new(&clen);
    let mut lengths = Vec::with_capacity(hlit + hdist);
    while lengths.len() < hlit + hdist {
        let sym = clen.decode(r)?;
        let (value, repeat) = match sym {
            0..=15 => (sym as u8, 1),
            16 => {
                let prev = *lengths.last().ok_or_else(|| r.err("repeat with no previous length"))?;
                (prev, 3 + r.bits(2)? as usize)
            }
            17 => (0, 3 + r.bits(3)? as usize),
            _ => (0, 11 + r.bits(7)? as usize),
        };
        if lengths.len() + repeat > hlit + hdist {
            return Err(r.err("code lengths overflow"));
        }
        lengths.extend(std::iter::repeat_n(value, repeat));
    }
    Ok((Huffman::new(&lengths[..hlit]), Huffman::new(&lengths[hlit..])))
}

/// Decoder for raw RFC 1951 streams, independent of the compressor.
pub fn inflate(data: &[u8]) -> Result<Vec<u8>> {
    let mut r = BitReader { data, pos: 0, bit: 0 };
    let mut out = Vec::new();
    loop {
        let last = r.bits(1)? == 1;
        match r.bits(2)? {
            0 => {
                r.align();
                let header = data.get(r.pos..r.pos + 4).ok_or_else(|| r.err("truncated stored block"))?;
                let len = u16::from_le_bytes([header[0], header[1]]);
                let nlen = u16::from_le_bytes([header[2], header[3]]);
                if len != !nlen {
                    return Err(r.err("stored block length check failed"));
                }
                r.pos += 4;
                let body = data.get(r.pos..r.pos + len as usize).ok_or_else(|| r.err("truncated stored block"))?;
                out.extend_from_slice(body);
                r.pos += len as usize;
            }
            kind @ (1 | 2) => {
                let (lit, dist) = if kind == 1 { fixed_tables() } else { dynamic_tables(&mut r)? };
                loop {
                    let sym = lit.decode(&mut r)? as usize;
                    if sym < 256 {
                        out.push(sym as u8);
                    } else if sym == 256 {
                        break;
                    } else {
                        let i = sym - 257;
                        if i >= 29 {
                            return Err(r.err("invalid length symbol"));
                        }
                        let len = LEN_BASE[i] as usize + r.bits(LEN_EXTRA[i] as u32)? as usize;
                        let d = dist.decode(&mut r)? as usize;
                        if d >= 30 {
                            return Err(r.err("invalid distance symbol"));
                        }
                        let back = DIST_BASE[d] as usize + r.bits(DIST_EXTRA[d] as u32)? as usize;
                        if back > out.len() {
                            return Err(r.err("distance before start of output"));
                        }
                        let start = out.len() - back;
                        for k in 0..len {
                            out.push(out[start + k]);
                        }
                    }
                }
            }
            _ => return Err(r.err("reserved block type")),
        }
        if last {
            return Ok(out);
        }
    }
}
