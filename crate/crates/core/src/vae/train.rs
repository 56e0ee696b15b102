use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{TrainingMeta, VaeModel};
use crate::imaging::{augment, Mask};
use crate::numerics::{adam_step, AdamConfig, Tape, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub epochs: u32,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Weight on the KL term.
    pub kl_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            latent_dim: 16,
            epochs: 50,
            batch_size: 32,
            adam: AdamConfig::default(),
            kl_weight: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: u32,
    pub mean_loss: f64,
    pub mean_bce: f64,
}

pub fn train(dataset: &[Mask], cfg: &TrainConfig) -> Result<VaeModel> {
    train_with(dataset, cfg, |_| {})
}

/// Trains a fresh standard-architecture model.
///
/// One ChaCha8 stream seeded from `cfg.seed` drives, in order: weight
/// initialization, then per epoch the shuffle, and per sample the
/// augmentation draw and the latent noise. Identical inputs therefore give
/// bit-identical weights.
pub fn train_with(
    dataset: &[Mask],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(EpochStats),
) -> Result<VaeModel> {
    if dataset.is_empty() {
        return Err(Error::Parameter("training set is empty".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Parameter("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = VaeModel::standard(cfg.latent_dim, &mut rng)?;
    let latent = cfg.latent_dim;
    let len = model.input_len();
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut meta = TrainingMeta {
        epochs: cfg.epochs,
        seed: cfg.seed,
        ..Default::default()
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut bce_sum) = (0.0f64, 0.0f64);
        for batch in order.chunks(cfg.batch_size) {
            let n = batch.len();
            let mut input = Vec::with_capacity(n * len);
            for &i in batch {
                input.extend_from_slice(augment(&dataset[i], &mut rng).pixels());
            }
            let eps: Vec<f32> = (0..n * latent).map(|_| rng.sample(StandardNormal)).collect();
            let grads = {
                let mut tape = Tape::new(model.params());
                let x = tape.input(Tensor::new([n, len], input.clone())?);
                let fv = model.forward(&mut tape, x, Some(eps))?;
                let rec = tape.bce_sum(fv.recon, input)?;
                let kl = tape.kl_sum(fv.mean, fv.logvar)?;
                let kl_w = tape.scale(kl, cfg.kl_weight as f32);
                let total = tape.add(rec, kl_w)?;
                let loss = tape.scale(total, 1.0 / n as f32);
                bce_sum += tape.value(rec).data()[0] as f64;
                loss_sum += tape.value(total).data()[0] as f64;
                tape.backward(loss)?
            };
            grads.accumulate_into(model.params_mut())?;
            adam_step(model.params_mut(), &cfg.adam)?;
        }
        let stats = EpochStats {
            epoch,
            mean_loss: loss_sum / dataset.len() as f64,
            mean_bce: bce_sum / dataset.len() as f64,
        };
        meta.loss_curve.push(stats.mean_loss as f32);
        meta.bce_curve.push(stats.mean_bce as f32);
        on_epoch(stats);
    }
    model.meta = meta;
    Ok(model)
}

/// Mean per-mask BCE of deterministic reconstructions (no augmentation).
pub fn mean_reconstruction_bce(model: &VaeModel, masks: &[Mask]) -> Result<f64> {
    if masks.is_empty() {
        return Err(Error::Parameter("no masks to evaluate".into()));
    }
    let mut total = 0.0;
    for chunk in masks.chunks(32) {
        let refs: Vec<&Mask> = chunk.iter().collect();
        for (m, r) in chunk.iter().zip(model.reconstruct_many(&refs)?) {
            let t: Vec<f64> = m.pixels().iter().map(|&v| v as f64).collect();
            let p: Vec<f64> = r.pixels.iter().map(|&v| v as f64).collect();
            total += crate::numerics::tape::bce(&p, &t);
        }
    }
    Ok(total / masks.len() as f64)
}
