//! Optimized kernels against direct loop implementations, and backward
//! passes against central finite differences, all in f64.

mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shapecx::numerics::kernels::{
    conv2d_backward, conv2d_forward, linear_forward, maxpool2d_forward, tconv2d_backward, tconv2d_forward,
};
use shapecx::numerics::Tensor;
use shapecx::vae::{Architecture, LayerSpec, Vae};
use support::*;

#[test]
fn conv_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let (c, o) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let (h, w) = (rng.random_range(3..=8), rng.random_range(3..=8));
        let (kh, kw) = (rng.random_range(1..=3), rng.random_range(1..=3));
        let s = (rng.random_range(1..=2), rng.random_range(1..=2));
        let x = random(&mut rng, &[2, c, h, w]);
        let wt = random(&mut rng, &[o, c, kh, kw]);
        let b = random(&mut rng, &[o]);
        let got = conv2d_forward(&x, &wt, &b, s).unwrap();
        assert!(max_rel_err(got.data(), &conv_oracle(&x, &wt, &b, s)) <= 1e-10);
    }
}

#[test]
fn conv_fixture_from_random_small_case() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random(&mut rng, &[1, 2, 5, 5]);
    let w = random(&mut rng, &[3, 2, 2, 2]);
    let b = Tensor::zeros([3]);
    let got = conv2d_forward(&x, &w, &b, (1, 1)).unwrap();
    assert_eq!(got.shape(), [1, 3, 4, 4]);
    assert!(max_rel_err(got.data(), &conv_oracle(&x, &w, &b, (1, 1))) <= 1e-10);
}

#[test]
fn tconv_matches_scatter_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let (c, o) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let (h, w) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let (kh, kw) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let s = (rng.random_range(1..=3), rng.random_range(1..=3));
        let x = random(&mut rng, &[2, c, h, w]);
        let wt = random(&mut rng, &[c, o, kh, kw]);
        let b = random(&mut rng, &[o]);
        let got = tconv2d_forward(&x, &wt, &b, s).unwrap();
        assert!(max_rel_err(got.data(), &tconv_oracle(&x, &wt, &b, s)) <= 1e-10);
    }
}

#[test]
fn tconv_is_adjoint_of_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for s in [(1, 1), (2, 2), (2, 1)] {
        let x = random(&mut rng, &[1, 3, 8, 7]);
        let w = random(&mut rng, &[2, 3, 3, 2]);
        let zero = Tensor::zeros([2]);
        let y = conv2d_forward(&x, &w, &zero, s).unwrap();
        let g = random(&mut rng, y.shape());
        let back = conv2d_backward(&x, &w, &g, s).unwrap().input;
        // Reusing the conv weight as [C_in = 2, O = 3, k, k].
        let t = tconv2d_forward(&g, &w, &Tensor::zeros([3]), s).unwrap();
        // Valid conv can drop trailing rows/columns; compare the covered region.
        let [_, c, h, wd] = x.shape().try_into().unwrap();
        let [_, _, th, tw] = t.shape().try_into().unwrap();
        for ch in 0..c {
            for yy in 0..h {
                for xx in 0..wd {
                    let b = back.data()[(ch * h + yy) * wd + xx];
                    let tv = if yy < th && xx < tw { t.data()[(ch * th + yy) * tw + xx] } else { 0.0 };
                    assert!((b - tv).abs() <= 1e-12, "stride {s:?}");
                }
            }
        }
        let lhs: f64 = y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(back.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
    }
}

#[test]
fn pool_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (h, w) in [(8, 8), (7, 8), (5, 3)] {
        let x = random(&mut rng, &[2, 3, h, w]);
        let (got, argmax) = maxpool2d_forward(&x, (2, 2)).unwrap();
        assert_eq!(got.data(), pool_oracle(&x, 2).as_slice());
        for (&i, &v) in argmax.iter().zip(got.data()) {
            assert_eq!(x.data()[i], v);
        }
    }
}

#[test]
fn linear_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random(&mut rng, &[3, 7]);
    let w = random(&mut rng, &[7, 5]);
    let b = random(&mut rng, &[5]);
    let got = linear_forward(&x, &w, &b).unwrap();
    let want = linear_oracle(&x, &w, &b);
    assert!(max_rel_err(got.data(), &want) <= 1e-10);
}

/// Weight and input gradients of conv/tconv against finite differences of
/// `Σ g ⊙ f(x)`.
#[test]
fn layer_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 1e-5;
    let x = random(&mut rng, &[2, 2, 5, 4]);
    let w = random(&mut rng, &[3, 2, 2, 2]);
    let b = random(&mut rng, &[3]);
    type Fwd = fn(&Tensor<f64>, &Tensor<f64>, &Tensor<f64>, (usize, usize)) -> shapecx::Result<Tensor<f64>>;
    let cases: [(Fwd, Tensor<f64>); 2] = [(conv2d_forward, w.clone()), (tconv2d_forward, random(&mut rng, &[2, 3, 2, 2]))];
    for (i, (fwd, w)) in cases.into_iter().enumerate() {
        let b = if i == 0 { b.clone() } else { random(&mut rng, &[3]) };
        let y = fwd(&x, &w, &b, (2, 1)).unwrap();
        let g = random(&mut rng, y.shape());
        let grads = if i == 0 {
            conv2d_backward(&x, &w, &g, (2, 1)).unwrap()
        } else {
            tconv2d_backward(&x, &w, &g, (2, 1)).unwrap()
        };
        let objective = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            fwd(x, w, b, (2, 1)).unwrap().data().iter().zip(g.data()).map(|(a, b)| a * b).sum()
        };
        let fd = |t: &Tensor<f64>, which: usize| -> Vec<f64> {
            (0..t.len())
                .map(|j| {
                    let mut plus = t.clone();
                    let mut minus = t.clone();
                    plus.data_mut()[j] += h;
                    minus.data_mut()[j] -= h;
                    let (p, m) = match which {
                        0 => (objective(&plus, &w, &b), objective(&minus, &w, &b)),
                        1 => (objective(&x, &plus, &b), objective(&x, &minus, &b)),
                        _ => (objective(&x, &w, &plus), objective(&x, &w, &minus)),
                    };
                    (p - m) / (2.0 * h)
                })
                .collect()
        };
        assert!(max_rel_err(grads.input.data(), &fd(&x, 0)) < 1e-7);
        assert!(max_rel_err(grads.weight.data(), &fd(&w, 1)) < 1e-7);
        assert!(max_rel_err(grads.bias.data(), &fd(&b, 2)) < 1e-7);
    }
}

#[test]
fn toy_vae_gradient_check() {
    let (worst, count) = gradient_check(Architecture::toy(2), 11);
    assert!(count <= 5000);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn strided_vae_gradient_check() {
    use LayerSpec as L;
    let arch = Architecture {
        encoder: vec![
            L::reshape(1, 8, 8),
            L::conv2d(1, 2, 3, 1),
            L::relu(),
            L::maxpool2d(2),
            L::flatten(),
            L::linear(18, 3),
            L::linear(18, 3),
        ],
        decoder: vec![
            L::linear(3, 18),
            L::reshape(2, 3, 3),
            L::tconv2d(2, 2, 2, 2),
            L::relu(),
            L::tconv2d(2, 1, 3, 1),
            L::sigmoid(),
        ],
    };
    let (worst, count) = gradient_check(arch, 12);
    assert!(count <= 5000, "{count} parameters");
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn identical_passes_give_identical_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut model = Vae::<f64>::new(Architecture::toy(2), &mut rng).unwrap();
    let x: Vec<f64> = (0..32).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let eps = vec![0.3, -0.2, 0.1, 0.5];
    let a = vae_gradients(&mut model, &x, 2, &eps);
    model.params_mut().zero_grads();
    let b = vae_gradients(&mut model, &x, 2, &eps);
    assert_eq!(a, b);
}

#[test]
fn fft_matches_direct_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..100 {
        let density = rng.random_range(0.01..0.99);
        let bits: Vec<bool> = (0..4096).map(|_| rng.random_bool(density)).collect();
        let m = shapecx::Mask::from_fn(format!("r{i}"), |x, y| bits[y * 64 + x]);
        let fast = shapecx::measures::fft2d(&m);
        let slow = direct_dft(&m);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "mask {i}: {err}");
    }
}

#[test]
fn f32_sigmoid_stays_open() {
    use shapecx::numerics::kernels::sigmoid_scalar;
    assert!(sigmoid_scalar(40.0f32) < 1.0);
    assert!(sigmoid_scalar(-200.0f32) > 0.0);
    assert!(sigmoid_scalar(40.0f64) < 1.0);
}

#[test]
fn spearman_matches_rank_then_pearson_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..1000 {
        let n = rng.random_range(2..=30);
        // Small integer scores force ties in most vectors.
        let levels = rng.random_range(2..40);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
        match shapecx::evaluation::spearman_values(&a, &b) {
            Some(r) => assert!((r - brute_spearman(&a, &b)).abs() <= 1e-12),
            None => assert!(brute_spearman(&a, &b).is_nan()),
        }
    }
}

#[test]
fn spearman_matches_closed_form_without_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let n = rng.random_range(2..=30);
        let a: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let r = shapecx::evaluation::spearman_values(&a, &b).unwrap();
        assert!((r - closed_form_spearman(&a, &b)).abs() <= 1e-12);
    }
}
