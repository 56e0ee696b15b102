//! Forward and backward kernels for the supported layer kinds.
//!
//! Convolutions are lowered to `im2col` + GEMM. All padding is "valid":
//! a convolution output has `(H − kh)/sh + 1` rows, a transposed convolution
//! `(H − 1)·sh + kh`. Tensors are `[N, C, H, W]`.

use super::{Real, Tensor};
use crate::{Error, Result};

pub type Pair = (usize, usize);

fn dims4<T: Real>(t: &Tensor<T>, what: &str) -> Result<[usize; 4]> {
    match *t.shape() {
        [n, c, h, w] => Ok([n, c, h, w]),
        ref s => Err(Error::Dimension(format!("{what} must be 4-D, got {s:?}"))),
    }
}

fn check_bias<T: Real>(bias: &Tensor<T>, channels: usize) -> Result<()> {
    if bias.len() != channels {
        return Err(Error::Dimension(format!(
            "bias has {} values, expected {channels}",
            bias.len()
        )));
    }
    Ok(())
}

fn check_stride(stride: Pair) -> Result<()> {
    if stride.0 == 0 || stride.1 == 0 {
        return Err(Error::Dimension(format!("stride {stride:?} must be ≥ 1")));
    }
    Ok(())
}

/// Geometry of one sliding-window pass over a `channels × h × w` plane stack.
#[derive(Debug, Clone, Copy)]
struct Window {
    channels: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    oh: usize,
    ow: usize,
}

impl Window {
    fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// `cols[(c·kh + i)·kw + j][oy·ow + ox] = x[c][oy·sh + i][ox·sw + j]`
    fn im2col<T: Real>(&self, x: &[T], cols: &mut [T]) {
        let p = self.cols();
        for c in 0..self.channels {
            let plane = &x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = ((c * self.kh + i) * self.kw + j) * p;
                    for oy in 0..self.oh {
                        let src = &plane[(oy * self.sh + i) * self.w + j..];
                        let dst = &mut cols[row + oy * self.ow..row + (oy + 1) * self.ow];
                        if self.sw == 1 {
                            dst.copy_from_slice(&src[..self.ow]);
                        } else {
                            for (ox, d) in dst.iter_mut().enumerate() {
                                *d = src[ox * self.sw];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Window::im2col`]: scatter-adds columns back into `x`.
    fn col2im<T: Real>(&self, cols: &[T], x: &mut [T]) {
        let p = self.cols();
        for c in 0..self.channels {
            let plane = &mut x[c * self.h * self.w..(c + 1) * self.h * self.w];
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = ((c * self.kh + i) * self.kw + j) * p;
                    for oy in 0..self.oh {
                        let base = (oy * self.sh + i) * self.w + j;
                        let src = &cols[row + oy * self.ow..row + (oy + 1) * self.ow];
                        if self.sw == 1 {
                            plane[base..base + self.ow]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(d, &s)| *d += s);
                        } else {
                            for (ox, &s) in src.iter().enumerate() {
                                plane[base + ox * self.sw] += s;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn conv2d_output_size(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    (input >= kernel && stride > 0).then(|| (input - kernel) / stride + 1)
}

pub fn tconv2d_output_size(input: usize, kernel: usize, stride: usize) -> usize {
    (input - 1) * stride + kernel
}

fn conv_window<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: Pair,
) -> Result<([usize; 4], [usize; 4], Window)> {
    check_stride(stride)?;
    let [n, c, h, w] = dims4(input, "conv2d input")?;
    let [o, wc, kh, kw] = dims4(weight, "conv2d weight")?;
    if wc != c {
        return Err(Error::Dimension(format!(
            "conv2d input has {c} channels, weight expects {wc}"
        )));
    }
    let (Some(oh), Some(ow)) = (
        conv2d_output_size(h, kh, stride.0),
        conv2d_output_size(w, kw, stride.1),
    ) else {
        return Err(Error::Dimension(format!(
            "conv2d kernel {kh}×{kw} larger than input {h}×{w}"
        )));
    };
    let win = Window {
        channels: c,
        h,
        w,
        kh,
        kw,
        sh: stride.0,
        sw: stride.1,
        oh,
        ow,
    };
    Ok(([n, c, h, w], [o, wc, kh, kw], win))
}

/// Valid 2-D cross-correlation. `weight` is `[O, C, kh, kw]`.
pub fn conv2d_forward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: Pair,
) -> Result<Tensor<T>> {
    let ([n, c, h, w], [o, ..], win) = conv_window(input, weight, stride)?;
    check_bias(bias, o)?;
    let (k, p) = (win.rows(), win.cols());
    let mut cols = vec![T::zero(); k * p];
    let mut out = Tensor::zeros([n, o, win.oh, win.ow]);
    let x = input.data();
    for s in 0..n {
        win.im2col(&x[s * c * h * w..(s + 1) * c * h * w], &mut cols);
        let dst = &mut out.data_mut()[s * o * p..(s + 1) * o * p];
        for (oc, row) in dst.chunks_mut(p).enumerate() {
            row.iter_mut().for_each(|v| *v = bias.data()[oc]);
        }
        T::gemm(
            o,
            k,
            p,
            T::one(),
            weight.data(),
            k as isize,
            1,
            &cols,
            p as isize,
            1,
            T::one(),
            dst,
            p as isize,
            1,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct LayerGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: Pair,
) -> Result<LayerGrads<T>> {
    let ([n, c, h, w], [o, ..], win) = conv_window(input, weight, stride)?;
    if grad_out.shape() != [n, o, win.oh, win.ow] {
        return Err(Error::Dimension(format!(
            "conv2d grad_out shape {:?}, expected {:?}",
            grad_out.shape(),
            [n, o, win.oh, win.ow]
        )));
    }
    let (k, p) = (win.rows(), win.cols());
    let mut cols = vec![T::zero(); k * p];
    let mut gcols = vec![T::zero(); k * p];
    let mut g_in = Tensor::zeros(input.shape().to_vec());
    let mut g_w = Tensor::zeros(weight.shape().to_vec());
    let mut g_b = Tensor::zeros([o]);
    let x = input.data();
    let plane = c * h * w;
    for s in 0..n {
        let go = &grad_out.data()[s * o * p..(s + 1) * o * p];
        win.im2col(&x[s * plane..(s + 1) * plane], &mut cols);
        // dW += dY · colsᵀ
        T::gemm(
            o,
            p,
            k,
            T::one(),
            go,
            p as isize,
            1,
            &cols,
            1,
            p as isize,
            T::one(),
            g_w.data_mut(),
            k as isize,
            1,
        );
        // dcols = Wᵀ · dY
        T::gemm(
            k,
            o,
            p,
            T::one(),
            weight.data(),
            1,
            k as isize,
            go,
            p as isize,
            1,
            T::zero(),
            &mut gcols,
            p as isize,
            1,
        );
        win.col2im(&gcols, &mut g_in.data_mut()[s * plane..(s + 1) * plane]);
        for (oc, row) in go.chunks(p).enumerate() {
            g_b.data_mut()[oc] += row.iter().copied().sum::<T>();
        }
    }
    Ok(LayerGrads {
        input: g_in,
        weight: g_w,
        bias: g_b,
    })
}

fn tconv_window<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: Pair,
) -> Result<([usize; 4], [usize; 4], Window)> {
    check_stride(stride)?;
    let [n, c, h, w] = dims4(input, "tconv2d input")?;
    let [wc, o, kh, kw] = dims4(weight, "tconv2d weight")?;
    if wc != c {
        return Err(Error::Dimension(format!(
            "tconv2d input has {c} channels, weight expects {wc}"
        )));
    }
    // The window runs over the *output* plane; its column grid is the input.
    let win = Window {
        channels: o,
        h: tconv2d_output_size(h, kh, stride.0),
        w: tconv2d_output_size(w, kw, stride.1),
        kh,
        kw,
        sh: stride.0,
        sw: stride.1,
        oh: h,
        ow: w,
    };
    Ok(([n, c, h, w], [wc, o, kh, kw], win))
}

/// Valid transposed convolution. `weight` is `[C_in, O, kh, kw]`.
pub fn tconv2d_forward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: Pair,
) -> Result<Tensor<T>> {
    let ([n, c, h, w], [_, o, ..], win) = tconv_window(input, weight, stride)?;
    check_bias(bias, o)?;
    let (k, p) = (win.rows(), win.cols());
    let out_plane = o * win.h * win.w;
    let mut cols = vec![T::zero(); k * p];
    let mut out = Tensor::zeros([n, o, win.h, win.w]);
    for s in 0..n {
        let xs = &input.data()[s * c * h * w..(s + 1) * c * h * w];
        // cols = Wᵀ · X
        T::gemm(
            k,
            c,
            p,
            T::one(),
            weight.data(),
            1,
            k as isize,
            xs,
            p as isize,
            1,
            T::zero(),
            &mut cols,
            p as isize,
            1,
        );
        let dst = &mut out.data_mut()[s * out_plane..(s + 1) * out_plane];
        for (oc, plane) in dst.chunks_mut(win.h * win.w).enumerate() {
            plane.iter_mut().for_each(|v| *v = bias.data()[oc]);
        }
        win.col2im(&cols, dst);
    }
    Ok(out)
}

pub fn tconv2d_backward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
    stride: Pair,
) -> Result<LayerGrads<T>> {
    let ([n, c, h, w], [_, o, ..], win) = tconv_window(input, weight, stride)?;
    if grad_out.shape() != [n, o, win.h, win.w] {
        return Err(Error::Dimension(format!(
            "tconv2d grad_out shape {:?}, expected {:?}",
            grad_out.shape(),
            [n, o, win.h, win.w]
        )));
    }
    let (k, p) = (win.rows(), win.cols());
    let out_plane = o * win.h * win.w;
    let mut gcols = vec![T::zero(); k * p];
    let mut g_in = Tensor::zeros(input.shape().to_vec());
    let mut g_w = Tensor::zeros(weight.shape().to_vec());
    let mut g_b = Tensor::zeros([o]);
    for s in 0..n {
        let go = &grad_out.data()[s * out_plane..(s + 1) * out_plane];
        win.im2col(go, &mut gcols);
        let xs = &input.data()[s * c * h * w..(s + 1) * c * h * w];
        // dX = W · gcols
        T::gemm(
            c,
            k,
            p,
            T::one(),
            weight.data(),
            k as isize,
            1,
            &gcols,
            p as isize,
            1,
            T::zero(),
            &mut g_in.data_mut()[s * c * p..(s + 1) * c * p],
            p as isize,
            1,
        );
        // dW += X · gcolsᵀ
        T::gemm(
            c,
            p,
            k,
            T::one(),
            xs,
            p as isize,
            1,
            &gcols,
            1,
            p as isize,
            T::one(),
            g_w.data_mut(),
            k as isize,
            1,
        );
        for (oc, plane) in go.chunks(win.h * win.w).enumerate() {
            g_b.data_mut()[oc] += plane.iter().copied().sum::<T>();
        }
    }
    Ok(LayerGrads {
        input: g_in,
        weight: g_w,
        bias: g_b,
    })
}

/// Non-overlapping max pooling (stride = window, trailing rows/cols dropped).
///
/// Returns the pooled tensor and, per output cell, the flat input index of
/// the selected maximum. The first maximum in row-major window order wins.
pub fn maxpool2d_forward<T: Real>(input: &Tensor<T>, window: Pair) -> Result<(Tensor<T>, Vec<usize>)> {
    let [n, c, h, w] = dims4(input, "maxpool2d input")?;
    let (wh, ww) = window;
    if wh == 0 || ww == 0 || wh > h || ww > w {
        return Err(Error::Dimension(format!(
            "pool window {window:?} invalid for {h}×{w} input"
        )));
    }
    let (oh, ow) = (h / wh, w / ww);
    let mut out = Tensor::zeros([n, c, oh, ow]);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    let x = input.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + oy * wh * w + ox * ww;
                for i in 0..wh {
                    for j in 0..ww {
                        let idx = base + (oy * wh + i) * w + ox * ww + j;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                dst[argmax.len()] = x[best];
                argmax.push(best);
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2d_backward<T: Real>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(Error::Dimension(format!(
            "maxpool2d backward: {} indices for {} gradients",
            argmax.len(),
            grad_out.len()
        )));
    }
    let mut g = Tensor::zeros(input_shape.to_vec());
    let gd = g.data_mut();
    for (&idx, &v) in argmax.iter().zip(grad_out.data()) {
        gd[idx] += v;
    }
    Ok(g)
}

fn linear_dims<T: Real>(input: &Tensor<T>, weight: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (&[n, d], &[wd, k]) = (input.shape(), weight.shape()) else {
        return Err(Error::Dimension(format!(
            "linear expects [N,D]·[D,K], got {:?}·{:?}",
            input.shape(),
            weight.shape()
        )));
    };
    if d != wd {
        return Err(Error::Dimension(format!(
            "linear inner dimension mismatch: input {d}, weight {wd}"
        )));
    }
    Ok((n, d, k))
}

/// `out = input · weight + bias`, with `weight` stored `[D, K]`.
pub fn linear_forward<T: Real>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, d, k) = linear_dims(input, weight)?;
    check_bias(bias, k)?;
    let mut out = Tensor::zeros([n, k]);
    for row in out.data_mut().chunks_mut(k) {
        row.copy_from_slice(bias.data());
    }
    T::gemm(
        n,
        d,
        k,
        T::one(),
        input.data(),
        d as isize,
        1,
        weight.data(),
        k as isize,
        1,
        T::one(),
        out.data_mut(),
        k as isize,
        1,
    );
    Ok(out)
}

pub fn linear_backward<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<LayerGrads<T>> {
    let (n, d, k) = linear_dims(input, weight)?;
    if grad_out.shape() != [n, k] {
        return Err(Error::Dimension(format!(
            "linear grad_out shape {:?}, expected [{n}, {k}]",
            grad_out.shape()
        )));
    }
    let mut g_in = Tensor::zeros([n, d]);
    let mut g_w = Tensor::zeros([d, k]);
    T::gemm(
        n,
        k,
        d,
        T::one(),
        grad_out.data(),
        k as isize,
        1,
        weight.data(),
        1,
        k as isize,
        T::zero(),
        g_in.data_mut(),
        d as isize,
        1,
    );
    T::gemm(
        d,
        n,
        k,
        T::one(),
        input.data(),
        1,
        d as isize,
        grad_out.data(),
        k as isize,
        1,
        T::zero(),
        g_w.data_mut(),
        k as isize,
        1,
    );
    let mut g_b = Tensor::zeros([k]);
    for row in grad_out.data().chunks(k) {
        g_b.data_mut().iter_mut().zip(row).for_each(|(b, &g)| *b += g);
    }
    Ok(LayerGrads {
        input: g_in,
        weight: g_w,
        bias: g_b,
    })
}

pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Logistic function, kept strictly inside (0, 1).
///
/// In `f32` the exact logistic rounds to 1.0 for x ≳ 17 (and to 0 below
/// about −104). Outputs are clamped to `[min_positive, 1 − ε/2]`, the
/// extreme representable values of the open interval, so downstream
/// log-likelihoods stay finite.
pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    x.map(sigmoid_scalar)
}

#[inline]
pub fn sigmoid_scalar<T: Real>(v: T) -> T {
    let s = if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    };
    let hi = T::one() - T::epsilon() / T::lit(2.0);
    s.max(T::min_positive_value()).min(hi)
}
