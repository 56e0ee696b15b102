//! Binary checkpoint format (all integers little-endian u32):
//!
//! ```text
//! magic "SCVX" | version | latent_dim
//! n_enc | n_enc × layer | n_dec | n_dec × layer
//!     layer = kind code, kh, kw, sh, sw, in_channels, out_channels
//! n_params | n_params × (name_len, UTF-8 name, rank, rank × dim, f32 LE data)
//! epochs | seed_lo | seed_hi | n_epochs × ... loss curve (count, f32s), BCE curve (count, f32s)
//! ```
//!
//! The training trailer follows the parameters so a reader that stops after
//! the weights sees the same prefix layout.

use std::fs;
use std::path::Path;

use super::{Architecture, LayerKind, LayerSpec, TrainingMeta, VaeModel};
use crate::numerics::{ParamSet, Parameter, Tensor};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SCVX";
pub const CHECKPOINT_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f32s(&mut self, vs: &[f32]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn encode_model(model: &VaeModel) -> Vec<u8> {
    let mut w = Writer(CHECKPOINT_MAGIC.to_vec());
    w.u32(CHECKPOINT_VERSION as usize);
    w.u32(model.latent_dim());
    let arch = model.architecture();
    for table in [&arch.encoder, &arch.decoder] {
        w.u32(table.len());
        for l in table {
            w.u32(l.kind.code() as usize);
            for v in [l.kernel.0, l.kernel.1, l.stride.0, l.stride.1, l.in_channels, l.out_channels] {
                w.u32(v);
            }
        }
    }
    w.u32(model.params().len());
    for p in model.params().iter() {
        w.u32(p.name.len());
        w.0.extend_from_slice(p.name.as_bytes());
        w.u32(p.value.shape().len());
        for &d in p.value.shape() {
            w.u32(d);
        }
        w.f32s(p.value.data());
    }
    let meta = &model.meta;
    w.u32(meta.epochs as usize);
    w.u32((meta.seed & 0xFFFF_FFFF) as usize);
    w.u32((meta.seed >> 32) as usize);
    for curve in [&meta.loss_curve, &meta.bce_curve] {
        w.u32(curve.len());
        w.f32s(curve);
    }
    w.0
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} while reading {what}",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    /// A count that must fit in the remaining bytes at `unit` bytes each.
    fn count(&mut self, unit: usize, what: &str) -> Result<usize> {
        let n = self.u32(what)?;
        if n.saturating_mul(unit) > self.bytes.len() - self.pos {
            return Err(Error::Checkpoint(format!(
                "{what} count {n} exceeds remaining {} bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(n)
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let b = self.take(n * 4, what)?;
        Ok(b.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<VaeModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic, not a shape-complexity checkpoint".into()));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(Error::Checkpoint(format!(
            "format version {version}, this build reads {CHECKPOINT_VERSION}"
        )));
    }
    let latent = r.u32("latent_dim")?;
    let mut tables = Vec::new();
    for section in ["encoder", "decoder"] {
        let n = r.count(28, section)?;
        let mut table = Vec::with_capacity(n);
        for _ in 0..n {
            let code = r.u32("layer kind")? as u32;
            let kind = LayerKind::from_code(code)
                .ok_or_else(|| Error::Checkpoint(format!("unknown layer kind {code}")))?;
            let mut f = [0usize; 6];
            for v in &mut f {
                *v = r.u32("layer field")?;
            }
            table.push(LayerSpec {
                kind,
                kernel: (f[0], f[1]),
                stride: (f[2], f[3]),
                in_channels: f[4],
                out_channels: f[5],
            });
        }
        tables.push(table);
    }
    let decoder = tables.pop().expect("two tables");
    let encoder = tables.pop().expect("two tables");
    let arch = Architecture { encoder, decoder };
    arch.validate().map_err(|e| Error::Checkpoint(format!("layer table: {e}")))?;
    if arch.latent_dim() != latent {
        return Err(Error::Checkpoint(format!(
            "header latent_dim {latent} disagrees with layer table ({})",
            arch.latent_dim()
        )));
    }

    let n_params = r.count(12, "parameter")?;
    let mut params = ParamSet::new();
    for _ in 0..n_params {
        let name_len = r.count(1, "name length")?;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?
            .to_owned();
        let rank = r.count(4, "rank")?;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dimension")?);
        }
        let numel = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let numel = numel
            .filter(|&n| n.saturating_mul(4) <= bytes.len() - r.pos)
            .ok_or_else(|| Error::Checkpoint(format!("parameter `{name}`: dims {dims:?} exceed file")))?;
        let data = r.f32s(numel, "parameter data")?;
        let value = Tensor::new(dims, data).map_err(|e| Error::Checkpoint(format!("`{name}`: {e}")))?;
        params.push(Parameter::new(name, value))?;
    }

    let epochs = r.u32("epochs")? as u32;
    let seed = r.u32("seed")? as u64 | (r.u32("seed")? as u64) << 32;
    let n = r.count(4, "loss curve")?;
    let loss_curve = r.f32s(n, "loss curve")?;
    let n = r.count(4, "bce curve")?;
    let bce_curve = r.f32s(n, "bce curve")?;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let meta = TrainingMeta {
        epochs,
        seed,
        loss_curve,
        bce_curve,
    };
    VaeModel::from_parts(arch, params, meta)
}

pub fn save_model(model: &VaeModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<VaeModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

/// Loads a checkpoint that must have the given latent size.
pub fn load_model_for_slot(path: impl AsRef<Path>, latent_dim: usize) -> Result<VaeModel> {
    let model = load_model(path)?;
    if model.latent_dim() != latent_dim {
        return Err(Error::Contract(format!(
            "checkpoint has latent_dim {}, slot expects {latent_dim}",
            model.latent_dim()
        )));
    }
    Ok(model)
}
