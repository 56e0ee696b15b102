use num_complex::Complex64;

use crate::imaging::{Mask, MASK_SIDE};

/// In-place iterative radix-2 Cooley-Tukey transform (forward, unscaled).
///
/// Panics if the length is not a power of two.
pub fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "radix-2 FFT needs a power-of-two length, got {n}");
    let bits = n.trailing_zeros();
    if bits == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let step = -2.0 * std::f64::consts::PI / len as f64;
        let half = len / 2;
        // Twiddles from direct sin/cos, not a running product, to keep
        // rounding error flat across the butterfly stages.
        let twiddles: Vec<Complex64> = (0..half).map(|k| Complex64::from_polar(1.0, step * k as f64)).collect();
        for chunk in buf.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(&twiddles) {
                let t = *b * w;
                *b = *a - t;
                *a += t;
            }
        }
        len <<= 1;
    }
}

/// 2D DFT of a mask, row-major `F[v * 64 + u]` with `u` the horizontal index.
pub fn fft2d(m: &Mask) -> Vec<Complex64> {
    fft2d_real(m.pixels().iter().map(|&p| p as f64), MASK_SIDE)
}

fn fft2d_real(values: impl Iterator<Item = f64>, side: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.map(|v| Complex64::new(v, 0.0)).collect();
    for row in data.chunks_exact_mut(side) {
        fft_in_place(row);
    }
    let mut col = vec![Complex64::default(); side];
    for x in 0..side {
        for y in 0..side {
            col[y] = data[y * side + x];
        }
        fft_in_place(&mut col);
        for y in 0..side {
            data[y * side + x] = col[y];
        }
    }
    data
}

/// |signed frequency| in cycles per pixel for DFT bin `k` of `n`.
fn abs_frequency(k: usize, n: usize) -> f64 {
    let signed = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
    signed.abs() / n as f64
}

/// Normalized mean spatial frequency of the mask in [0, 1].
///
/// The power spectrum `|F|²` (DC excluded) weights the absolute frequency of
/// each axis; the two per-axis means form a vector whose length is divided
/// by its maximum √0.5. The mean is removed before the transform, which
/// zeroes DC without touching any other bin and makes `m` and `1 − m`
/// produce identical spectra up to sign.
pub fn fft_complexity(m: &Mask) -> f64 {
    let mean = m.mass() / m.pixels().len() as f64;
    let spec = fft2d_real(m.pixels().iter().map(|&p| p as f64 - mean), MASK_SIDE);
    let (mut total, mut fx, mut fy) = (0.0, 0.0, 0.0);
    for v in 0..MASK_SIDE {
        for u in 0..MASK_SIDE {
            if u == 0 && v == 0 {
                continue;
            }
            let p = spec[v * MASK_SIDE + u].norm_sqr();
            total += p;
            fx += p * abs_frequency(u, MASK_SIDE);
            fy += p * abs_frequency(v, MASK_SIDE);
        }
    }
    // Rounding leaves ~1e-25 power on constant images.
    if total <= 1e-12 {
        return 0.0;
    }
    let (fx, fy) = (fx / total, fy / total);
    ((fx * fx + fy * fy).sqrt() / 0.5f64.sqrt()).min(1.0)
}
