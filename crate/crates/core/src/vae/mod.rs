//! The two bottlenecked variational autoencoders and the reconstruction
//! disagreement score.
//!
//! A shape is encoded and decoded (with `z = mean`, no sampling) by a model
//! with a 16-neuron latent and one with 64 neurons. The score is
//!
//! ```text
//! CS = min(1, Σ |recon₆₄ − recon₁₆| / Σ mask)
//! ```
//!
//! over unthresholded reconstructions. Simple shapes are reconstructed
//! equally well by both models; detail that only the wider bottleneck can
//! carry shows up as disagreement.

mod arch;
mod checkpoint;
mod train;

use rand::Rng;
use rand_distr::StandardNormal;

pub use arch::{Architecture, LayerKind, LayerSpec};
pub use checkpoint::{load_model, load_model_for_slot, save_model, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{mean_reconstruction_bce, train, train_with, EpochStats, TrainConfig};

use crate::imaging::Mask;
use crate::numerics::tape::{bce, kl_divergence};
use crate::numerics::{ParamSet, Parameter, Real, Tape, Tensor, Var};
use crate::{Error, Result};

/// Training provenance stored alongside the weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingMeta {
    pub epochs: u32,
    pub seed: u64,
    /// Mean per-sample loss (BCE + β·KL) for each epoch.
    pub loss_curve: Vec<f32>,
    /// Mean per-sample BCE for each epoch.
    pub bce_curve: Vec<f32>,
}

/// Encoder/decoder pair with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Vae<T> {
    arch: Architecture,
    params: ParamSet<T>,
    /// `(weight, bias)` parameter indices per encoder/decoder layer.
    enc_slots: Vec<Option<(usize, usize)>>,
    dec_slots: Vec<Option<(usize, usize)>>,
    pub meta: TrainingMeta,
}

/// The single-precision model used for training and scoring.
pub type VaeModel = Vae<f32>;

/// Decoder output: `H·W` probabilities in (0, 1), not thresholded.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction<T = f32> {
    pub pixels: Vec<T>,
}

/// Node handles of one recorded forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardVars {
    pub mean: Var,
    pub logvar: Var,
    pub z: Var,
    pub recon: Var,
}

fn param_name(section: &str, layer: usize, what: &str) -> String {
    format!("{section}.{layer}.{what}")
}

fn expected_params(arch: &Architecture) -> Vec<(String, Vec<usize>, usize)> {
    let mut out = Vec::new();
    for (section, table) in [("enc", &arch.encoder), ("dec", &arch.decoder)] {
        for (i, l) in table.iter().enumerate() {
            if let Some((shape, fan_in)) = l.weight_shape() {
                out.push((param_name(section, i, "weight"), shape, fan_in));
                out.push((param_name(section, i, "bias"), vec![l.out_channels], fan_in));
            }
        }
    }
    out
}

impl<T: Real> Vae<T> {
    /// Fresh model: weights uniform in ±√(6/fan_in), biases zero.
    pub fn new<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut params = ParamSet::new();
        for (name, shape, fan_in) in expected_params(&arch) {
            let n: usize = shape.iter().product();
            let data = if name.ends_with(".weight") {
                let bound = (6.0 / fan_in as f64).sqrt();
                (0..n).map(|_| T::lit(rng.random_range(-bound..bound))).collect()
            } else {
                vec![T::zero(); n]
            };
            params.push(Parameter::new(name, Tensor::new(shape, data)?))?;
        }
        Self::from_parts(arch, params, TrainingMeta::default())
    }

    /// Assembles a model, checking parameter names and shapes.
    pub fn from_parts(arch: Architecture, params: ParamSet<T>, meta: TrainingMeta) -> Result<Self> {
        arch.validate()?;
        let expected = expected_params(&arch);
        if expected.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "architecture needs {} parameter tensors, got {}",
                expected.len(),
                params.len()
            )));
        }
        for (name, shape, _) in &expected {
            match params.by_name(name) {
                Some(p) if p.value.shape() == shape.as_slice() => {}
                Some(p) => {
                    return Err(Error::Checkpoint(format!(
                        "parameter `{name}` has shape {:?}, expected {shape:?}",
                        p.value.shape()
                    )))
                }
                None => return Err(Error::Checkpoint(format!("missing parameter `{name}`"))),
            }
        }
        let slots = |section: &str, table: &[LayerSpec]| -> Vec<Option<(usize, usize)>> {
            table
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    l.kind.has_params().then(|| {
                        let w = params.index_of(&param_name(section, i, "weight")).expect("checked");
                        let b = params.index_of(&param_name(section, i, "bias")).expect("checked");
                        (w, b)
                    })
                })
                .collect()
        };
        let enc_slots = slots("enc", &arch.encoder);
        let dec_slots = slots("dec", &arch.decoder);
        Ok(Vae {
            arch,
            params,
            enc_slots,
            dec_slots,
            meta,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn latent_dim(&self) -> usize {
        self.arch.latent_dim()
    }

    pub fn input_len(&self) -> usize {
        self.arch.input_len()
    }

    /// Same architecture and weights in another precision.
    pub fn cast<U: Real>(&self) -> Vae<U> {
        Vae {
            arch: self.arch.clone(),
            params: self.params.cast(),
            enc_slots: self.enc_slots.clone(),
            dec_slots: self.dec_slots.clone(),
            meta: self.meta.clone(),
        }
    }

    fn apply_layer(
        tape: &mut Tape<'_, T>,
        layer: &LayerSpec,
        slot: Option<(usize, usize)>,
        x: Var,
        batch: usize,
    ) -> Result<Var> {
        let wb = |tape: &mut Tape<'_, T>| -> Result<(Var, Var)> {
            let (w, b) = slot.expect("parameterized layer has a slot");
            Ok((tape.param(w)?, tape.param(b)?))
        };
        Ok(match layer.kind {
            LayerKind::Conv2d => {
                let (w, b) = wb(tape)?;
                tape.conv2d(x, w, b, layer.stride)?
            }
            LayerKind::TConv2d => {
                let (w, b) = wb(tape)?;
                tape.tconv2d(x, w, b, layer.stride)?
            }
            LayerKind::Linear => {
                let (w, b) = wb(tape)?;
                tape.linear(x, w, b)?
            }
            LayerKind::MaxPool2d => tape.maxpool2d(x, layer.kernel)?,
            LayerKind::Relu => tape.relu(x),
            LayerKind::Sigmoid => tape.sigmoid(x),
            LayerKind::Flatten => {
                let n = tape.value(x).len() / batch;
                tape.reshape(x, &[batch, n])?
            }
            LayerKind::Reshape => {
                let (h, w) = layer.kernel;
                tape.reshape(x, &[batch, layer.out_channels, h, w])?
            }
        })
    }

    /// Records encoder → reparameterization → decoder on `tape`.
    ///
    /// `input` is `[N, H·W]`. With `noise = None` the latent is the mean.
    pub fn forward(&self, tape: &mut Tape<'_, T>, input: Var, noise: Option<Vec<T>>) -> Result<ForwardVars> {
        let shape = tape.value(input).shape().to_vec();
        let &[batch, len] = shape.as_slice() else {
            return Err(Error::Dimension(format!("VAE input must be [N, H·W], got {shape:?}")));
        };
        if len != self.input_len() {
            return Err(Error::Dimension(format!(
                "VAE expects {} pixels per sample, got {len}",
                self.input_len()
            )));
        }
        let n_trunk = self.arch.trunk().len();
        let mut h = input;
        for (layer, slot) in self.arch.trunk().iter().zip(&self.enc_slots) {
            h = Self::apply_layer(tape, layer, *slot, h, batch)?;
        }
        let (mean_spec, logvar_spec) = self.arch.heads();
        let mean = Self::apply_layer(tape, mean_spec, self.enc_slots[n_trunk], h, batch)?;
        let logvar = Self::apply_layer(tape, logvar_spec, self.enc_slots[n_trunk + 1], h, batch)?;
        let z = match noise {
            Some(eps) => tape.reparameterize(mean, logvar, eps)?,
            None => mean,
        };
        let mut y = z;
        for (layer, slot) in self.arch.decoder.iter().zip(&self.dec_slots) {
            y = Self::apply_layer(tape, layer, *slot, y, batch)?;
        }
        let recon = tape.reshape(y, &[batch, len])?;
        Ok(ForwardVars { mean, logvar, z, recon })
    }

    fn batch_input(&self, inputs: &[&[T]]) -> Result<Tensor<T>> {
        let len = self.input_len();
        let mut data = Vec::with_capacity(inputs.len() * len);
        for x in inputs {
            if x.len() != len {
                return Err(Error::Dimension(format!(
                    "VAE expects {len} pixels per sample, got {}",
                    x.len()
                )));
            }
            data.extend_from_slice(x);
        }
        Tensor::new([inputs.len(), len], data)
    }

    /// `(mean, logvar)` per input.
    pub fn encode_raw(&self, inputs: &[&[T]]) -> Result<Vec<(Vec<T>, Vec<T>)>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new(&self.params);
        let x = tape.input(self.batch_input(inputs)?);
        let n_trunk = self.arch.trunk().len();
        let mut h = x;
        for (layer, slot) in self.arch.trunk().iter().zip(&self.enc_slots) {
            h = Self::apply_layer(&mut tape, layer, *slot, h, inputs.len())?;
        }
        let (ms, ls) = self.arch.heads();
        let mean = Self::apply_layer(&mut tape, ms, self.enc_slots[n_trunk], h, inputs.len())?;
        let logvar = Self::apply_layer(&mut tape, ls, self.enc_slots[n_trunk + 1], h, inputs.len())?;
        let l = self.latent_dim();
        Ok(tape
            .value(mean)
            .data()
            .chunks(l)
            .zip(tape.value(logvar).data().chunks(l))
            .map(|(m, v)| (m.to_vec(), v.to_vec()))
            .collect())
    }

    /// Decodes latent vectors.
    pub fn decode_raw(&self, latents: &[&[T]]) -> Result<Vec<Reconstruction<T>>> {
        if latents.is_empty() {
            return Ok(Vec::new());
        }
        let l = self.latent_dim();
        let mut data = Vec::with_capacity(latents.len() * l);
        for z in latents {
            if z.len() != l {
                return Err(Error::Dimension(format!("latent of length {}, model has {l}", z.len())));
            }
            data.extend_from_slice(z);
        }
        let mut tape = Tape::new(&self.params);
        let mut y = tape.input(Tensor::new([latents.len(), l], data)?);
        for (layer, slot) in self.arch.decoder.iter().zip(&self.dec_slots) {
            y = Self::apply_layer(&mut tape, layer, *slot, y, latents.len())?;
        }
        Ok(tape
            .value(y)
            .data()
            .chunks(self.input_len())
            .map(|p| Reconstruction { pixels: p.to_vec() })
            .collect())
    }

    /// Deterministic reconstructions (`z = mean`).
    pub fn reconstruct_raw(&self, inputs: &[&[T]]) -> Result<Vec<Reconstruction<T>>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let mut tape = Tape::new(&self.params);
        let x = tape.input(self.batch_input(inputs)?);
        let fv = self.forward(&mut tape, x, None)?;
        Ok(tape
            .value(fv.recon)
            .data()
            .chunks(self.input_len())
            .map(|p| Reconstruction { pixels: p.to_vec() })
            .collect())
    }
}

fn check_mask_geometry<T: Real>(model: &Vae<T>) -> Result<()> {
    if model.arch.input_shape() != [1, crate::MASK_SIDE, crate::MASK_SIDE] {
        return Err(Error::Dimension(format!(
            "model input is {:?}, masks are 1×{s}×{s}",
            model.arch.input_shape(),
            s = crate::MASK_SIDE
        )));
    }
    Ok(())
}

impl VaeModel {
    /// Fresh model with the standard 64×64 architecture.
    pub fn standard<R: Rng + ?Sized>(latent_dim: usize, rng: &mut R) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::Parameter("latent dimension must be positive".into()));
        }
        Vae::new(Architecture::standard(latent_dim), rng)
    }

    pub fn encode(&self, m: &Mask) -> Result<(Vec<f32>, Vec<f32>)> {
        check_mask_geometry(self)?;
        Ok(self.encode_raw(&[m.pixels()])?.remove(0))
    }

    pub fn decode(&self, z: &[f32]) -> Result<Reconstruction> {
        check_mask_geometry(self)?;
        Ok(self.decode_raw(&[z])?.remove(0))
    }

    pub fn reconstruct(&self, m: &Mask) -> Result<Reconstruction> {
        check_mask_geometry(self)?;
        Ok(self.reconstruct_raw(&[m.pixels()])?.remove(0))
    }

    pub fn reconstruct_many(&self, masks: &[&Mask]) -> Result<Vec<Reconstruction>> {
        check_mask_geometry(self)?;
        let inputs: Vec<&[f32]> = masks.iter().map(|m| m.pixels()).collect();
        self.reconstruct_raw(&inputs)
    }
}

/// `z = mean + exp(½·logvar) ⊙ ε` with ε ~ N(0, I); `rng = None` gives `z = mean`.
pub fn reparameterize<R: Rng + ?Sized>(mean: &[f32], logvar: &[f32], rng: Option<&mut R>) -> Result<Vec<f32>> {
    if mean.len() != logvar.len() {
        return Err(Error::Dimension(format!(
            "mean has {} entries, logvar {}",
            mean.len(),
            logvar.len()
        )));
    }
    Ok(match rng {
        None => mean.to_vec(),
        Some(rng) => mean
            .iter()
            .zip(logvar)
            .map(|(&m, &lv)| {
                let e: f32 = rng.sample(StandardNormal);
                m + (0.5 * lv).exp() * e
            })
            .collect(),
    })
}

/// Per-sample objective: summed BCE + β·KL.
pub fn loss(m: &Mask, recon: &Reconstruction, mean: &[f32], logvar: &[f32], beta: f64) -> Result<f64> {
    if recon.pixels.len() != m.pixels().len() || mean.len() != logvar.len() {
        return Err(Error::Dimension("loss operands disagree in size".into()));
    }
    let target: Vec<f64> = m.pixels().iter().map(|&v| v as f64).collect();
    let pred: Vec<f64> = recon.pixels.iter().map(|&v| v as f64).collect();
    let mean: Vec<f64> = mean.iter().map(|&v| v as f64).collect();
    let logvar: Vec<f64> = logvar.iter().map(|&v| v as f64).collect();
    Ok(bce(&pred, &target) + beta * kl_divergence(&mean, &logvar))
}

fn disagreement(a: &Reconstruction, b: &Reconstruction, mass: f64) -> f64 {
    let diff: f64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    (diff / mass).min(1.0)
}

/// Reconstruction disagreement `min(1, Σ|r_a − r_b| / Σ m)`.
///
/// Symmetric in the two models. Fails for masks without white pixels.
pub fn vae_complexity(model_a: &VaeModel, model_b: &VaeModel, m: &Mask) -> Result<f64> {
    let mass = m.mass();
    if mass <= 0.0 {
        return Err(Error::UndefinedScore(m.id().to_owned()));
    }
    let ra = model_a.reconstruct(m)?;
    let rb = model_b.reconstruct(m)?;
    Ok(disagreement(&ra, &rb, mass))
}

/// [`vae_complexity`] over many masks, spread over `jobs` threads.
///
/// Each mask gets its own forward pass so a score never depends on which
/// other masks were scored with it. Order of results matches `masks`.
pub fn vae_complexity_many(
    model_a: &VaeModel,
    model_b: &VaeModel,
    masks: &[Mask],
    jobs: usize,
) -> Vec<Result<f64>> {
    const BATCH: usize = 1;
    let score_chunk = |chunk: &[Mask]| -> Vec<Result<f64>> {
        let valid: Vec<&Mask> = chunk.iter().filter(|m| m.mass() > 0.0).collect();
        let recons = model_a
            .reconstruct_many(&valid)
            .and_then(|a| Ok((a, model_b.reconstruct_many(&valid)?)));
        let (ra, rb) = match recons {
            Ok(r) => r,
            Err(e) => {
                let msg = e.to_string();
                return chunk.iter().map(|_| Err(Error::Contract(msg.clone()))).collect();
            }
        };
        let mut k = 0;
        chunk
            .iter()
            .map(|m| {
                if m.mass() <= 0.0 {
                    return Err(Error::UndefinedScore(m.id().to_owned()));
                }
                let s = disagreement(&ra[k], &rb[k], m.mass());
                k += 1;
                Ok(s)
            })
            .collect()
    };
    let chunks: Vec<&[Mask]> = masks.chunks(BATCH).collect();
    let jobs = jobs.max(1).min(chunks.len().max(1));
    if jobs == 1 {
        return chunks.into_iter().flat_map(score_chunk).collect();
    }
    let mut results: Vec<Vec<Result<f64>>> = (0..chunks.len()).map(|_| Vec::new()).collect();
    std::thread::scope(|s| {
        let per = chunks.len().div_ceil(jobs);
        let handles: Vec<_> = chunks
            .chunks(per)
            .map(|group| s.spawn(move || group.iter().map(|c| score_chunk(c)).collect::<Vec<_>>()))
            .collect();
        let mut i = 0;
        for h in handles {
            for r in h.join().expect("scoring thread panicked") {
                results[i] = r;
                i += 1;
            }
        }
    });
    results.into_iter().flatten().collect()
}
