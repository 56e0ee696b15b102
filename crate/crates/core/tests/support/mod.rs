//! Brute-force oracles shared by the integration suites.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapecx::numerics::{Tape, Tensor};
use shapecx::vae::{Architecture, Vae};
use shapecx::Mask;

pub fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn max_rel_err(got: &[f64], want: &[f64]) -> f64 {
    assert_eq!(got.len(), want.len());
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

pub fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, s: (usize, usize)) -> Vec<f64> {
    let [n, c, h, wd] = x.shape().try_into().unwrap();
    let [o, _, kh, kw] = w.shape().try_into().unwrap();
    let (oh, ow) = ((h - kh) / s.0 + 1, (wd - kw) / s.1 + 1);
    let xi = |a, b, y, x| x + wd * (y + h * (b + c * a));
    let wi = |a, b, y, x| x + kw * (y + kh * (b + c * a));
    let mut out = vec![0.0; n * o * oh * ow];
    for i in 0..n {
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = b.data()[oc];
                    for ic in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                acc += x.data()[xi(i, ic, oy * s.0 + ky, ox * s.1 + kx)] * w.data()[wi(oc, ic, ky, kx)];
                            }
                        }
                    }
                    out[((i * o + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

/// Transposed convolution as a scatter-add of weighted kernels.
pub fn tconv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>, s: (usize, usize)) -> Vec<f64> {
    let [n, c, h, wd] = x.shape().try_into().unwrap();
    let [_, o, kh, kw] = w.shape().try_into().unwrap();
    let (oh, ow) = ((h - 1) * s.0 + kh, (wd - 1) * s.1 + kw);
    let mut out = vec![0.0; n * o * oh * ow];
    for i in 0..n {
        for oc in 0..o {
            for v in &mut out[(i * o + oc) * oh * ow..(i * o + oc + 1) * oh * ow] {
                *v = b.data()[oc];
            }
        }
        for ic in 0..c {
            for y in 0..h {
                for xx in 0..wd {
                    let v = x.data()[((i * c + ic) * h + y) * wd + xx];
                    for oc in 0..o {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let wv = w.data()[((ic * o + oc) * kh + ky) * kw + kx];
                                out[((i * o + oc) * oh + y * s.0 + ky) * ow + xx * s.1 + kx] += v * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn pool_oracle(x: &Tensor<f64>, win: usize) -> Vec<f64> {
    let [n, c, h, w] = x.shape().try_into().unwrap();
    let (oh, ow) = (h / win, w / win);
    let mut out = Vec::new();
    for plane in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..win {
                    for dx in 0..win {
                        m = m.max(x.data()[(plane * h + oy * win + dy) * w + ox * win + dx]);
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

/// Loss of the full VAE objective, averaged over the batch, with fixed noise.
pub fn vae_loss(model: &Vae<f64>, x: &[f64], n: usize, eps: &[f64]) -> f64 {
    let mut tape = Tape::new(model.params());
    let input = tape.input(Tensor::new([n, x.len() / n], x.to_vec()).unwrap());
    let fv = model.forward(&mut tape, input, Some(eps.to_vec())).unwrap();
    let rec = tape.bce_sum(fv.recon, x.to_vec()).unwrap();
    let kl = tape.kl_sum(fv.mean, fv.logvar).unwrap();
    let total = tape.add(rec, kl).unwrap();
    let loss = tape.scale(total, 1.0 / n as f64);
    tape.value(loss).data()[0]
}

pub fn vae_gradients(model: &mut Vae<f64>, x: &[f64], n: usize, eps: &[f64]) -> Vec<Vec<f64>> {
    let grads = {
        let mut tape = Tape::new(model.params());
        let input = tape.input(Tensor::new([n, x.len() / n], x.to_vec()).unwrap());
        let fv = model.forward(&mut tape, input, Some(eps.to_vec())).unwrap();
        let rec = tape.bce_sum(fv.recon, x.to_vec()).unwrap();
        let kl = tape.kl_sum(fv.mean, fv.logvar).unwrap();
        let total = tape.add(rec, kl).unwrap();
        let loss = tape.scale(total, 1.0 / n as f64);
        tape.backward(loss).unwrap()
    };
    grads.accumulate_into(model.params_mut()).unwrap();
    model.params().iter().map(|p| p.value.grad().unwrap().to_vec()).collect()
}

/// Worst relative error of analytic against central-difference gradients.
pub fn gradient_check(arch: Architecture, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Vae::<f64>::new(arch, &mut rng).unwrap();
    // Zero biases put all-background patches exactly on the ReLU kink.
    for p in model.params_mut().iter_mut().filter(|p| p.name.ends_with(".bias")) {
        for v in p.value.data_mut() {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    let (n, len, latent) = (2, model.input_len(), model.latent_dim());
    let x: Vec<f64> = (0..n * len).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let eps: Vec<f64> = (0..n * latent).map(|_| rng.random_range(-1.0..1.0)).collect();
    let analytic = vae_gradients(&mut model, &x, n, &eps);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (pi, g) in analytic.iter().enumerate() {
        for j in 0..g.len() {
            let orig = model.params().get(pi).value.data()[j];
            let set = |m: &mut Vae<f64>, v: f64| m.params_mut().get_mut(pi).value.data_mut()[j] = v;
            set(&mut model, orig + h);
            let plus = vae_loss(&model, &x, n, &eps);
            set(&mut model, orig - h);
            let minus = vae_loss(&model, &x, n, &eps);
            set(&mut model, orig);
            let fd = (plus - minus) / (2.0 * h);
            let denom = g[j].abs().max(fd.abs()).max(1e-6);
            worst = worst.max((g[j] - fd).abs() / denom);
            count += 1;
        }
    }
    (worst, count)
}

/// Direct DFT of the mask, indexed `[v * 64 + u]`, as row sums then
/// column sums with table twiddles (no butterflies).
pub fn direct_dft(m: &Mask) -> Vec<Complex64> {
    use Complex64 as C;
    let n = 64;
    let tw: Vec<C> = (0..n).map(|k| C::from_polar(1.0, -2.0 * std::f64::consts::PI * k as f64 / n as f64)).collect();
    let mut rows = vec![C::new(0.0, 0.0); n * n];
    for y in 0..n {
        for u in 0..n {
            rows[y * n + u] = (0..n).map(|x| tw[(u * x) % n] * m.get(x, y) as f64).sum();
        }
    }
    let mut out = vec![C::new(0.0, 0.0); n * n];
    for v in 0..n {
        for u in 0..n {
            out[v * n + u] = (0..n).map(|y| tw[(v * y) % n] * rows[y * n + u]).sum();
        }
    }
    out
}

pub fn linear_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
    let [n, d] = x.shape().try_into().unwrap();
    let k = w.shape()[1];
    let mut out = vec![0.0; n * k];
    for i in 0..n {
        for j in 0..k {
            out[i * k + j] = b.data()[j] + (0..d).map(|e| x.data()[i * d + e] * w.data()[e * k + j]).sum::<f64>();
        }
    }
    out
}

/// Average ranks by counting: `1 + #less + (#equal − 1) / 2`.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn brute_spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (brute_ranks(a), brute_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// `1 − 6Σd² / (n(n² − 1))`, valid without ties.
pub fn closed_form_spearman(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let d2: f64 = brute_ranks(a).iter().zip(brute_ranks(b)).map(|(x, y)| (x - y).powi(2)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}
