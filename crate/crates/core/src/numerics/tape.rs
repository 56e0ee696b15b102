//! Reverse-mode differentiation over a recorded forward pass.
//!
//! A [`Tape`] borrows a [`ParamSet`] immutably while the forward pass is
//! built, so [`Tape::backward`] returns owned [`Gradients`] that are applied
//! to the parameters once the tape is gone.

use super::kernels::{self, Pair};
use super::{ParamSet, Real, Tensor};
use crate::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Input,
    Param(usize),
    Conv2d { x: Var, w: Var, b: Var, stride: Pair },
    TConv2d { x: Var, w: Var, b: Var, stride: Pair },
    MaxPool { x: Var, argmax: Vec<usize> },
    Linear { x: Var, w: Var, b: Var },
    Relu(Var),
    Sigmoid(Var),
    Reshape(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
    Reparam { mean: Var, logvar: Var, eps: Vec<T> },
    BceSum { pred: Var, target: Vec<T> },
    KlSum { mean: Var, logvar: Var },
}

#[derive(Debug)]
struct Node<T> {
    /// `None` for parameter nodes, whose value lives in the borrowed set.
    value: Option<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Probability clamp applied inside binary cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug)]
pub struct Tape<'p, T> {
    params: Option<&'p ParamSet<T>>,
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<'_, T> {
    fn default() -> Self {
        Tape {
            params: None,
            nodes: Vec::new(),
        }
    }
}

impl<'p, T: Real> Tape<'p, T> {
    pub fn new(params: &'p ParamSet<T>) -> Self {
        Tape {
            params: Some(params),
            nodes: Vec::new(),
        }
    }

    /// A tape without parameters; only constants and their functions.
    pub fn constant_only() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Option<Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 >= self.nodes.len() {
            return Err(Error::Contract(format!("node {} not on this tape", v.0)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(i)) => &self.params.expect("param node without set").get(*i).value,
            _ => unreachable!("valueless non-parameter node"),
        }
    }

    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(Some(t), Op::Input, false)
    }

    pub fn param(&mut self, idx: usize) -> Result<Var> {
        let set = self
            .params
            .ok_or_else(|| Error::Contract("tape has no parameter set".into()))?;
        if idx >= set.len() {
            return Err(Error::Contract(format!("parameter index {idx} out of range")));
        }
        Ok(self.push(None, Op::Param(idx), true))
    }

    pub fn param_named(&mut self, name: &str) -> Result<Var> {
        let idx = self
            .params
            .and_then(|s| s.index_of(name))
            .ok_or_else(|| Error::Contract(format!("unknown parameter `{name}`")))?;
        self.param(idx)
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: Pair) -> Result<Var> {
        let y = kernels::conv2d_forward(self.value(x), self.value(w), self.value(b), stride)?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(Some(y), Op::Conv2d { x, w, b, stride }, rg))
    }

    pub fn tconv2d(&mut self, x: Var, w: Var, b: Var, stride: Pair) -> Result<Var> {
        let y = kernels::tconv2d_forward(self.value(x), self.value(w), self.value(b), stride)?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(Some(y), Op::TConv2d { x, w, b, stride }, rg))
    }

    pub fn maxpool2d(&mut self, x: Var, window: Pair) -> Result<Var> {
        let (y, argmax) = kernels::maxpool2d_forward(self.value(x), window)?;
        let rg = self.rg(x);
        Ok(self.push(Some(y), Op::MaxPool { x, argmax }, rg))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = kernels::linear_forward(self.value(x), self.value(w), self.value(b))?;
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(Some(y), Op::Linear { x, w, b }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = kernels::relu(self.value(x));
        let rg = self.rg(x);
        self.push(Some(y), Op::Relu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = kernels::sigmoid(self.value(x));
        let rg = self.rg(x);
        self.push(Some(y), Op::Sigmoid(x), rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(x).clone().reshape(shape.to_vec())?;
        let rg = self.rg(x);
        Ok(self.push(Some(y), Op::Reshape(x), rg))
    }

    fn same_len(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).len() != self.value(b).len() {
            return Err(Error::Dimension(format!(
                "{what}: operand shapes {:?} and {:?} differ",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "add")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let y = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Some(y), Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "mul")?;
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let y = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Some(y), Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        let y = self.value(x).map(|v| v * s);
        let rg = self.rg(x);
        self.push(Some(y), Op::Scale(x, s), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let y = Tensor::scalar(self.value(x).data().iter().copied().sum());
        let rg = self.rg(x);
        self.push(Some(y), Op::Sum(x), rg)
    }

    /// `z = mean + exp(½·logvar) ⊙ eps`, with `eps` treated as a constant.
    pub fn reparameterize(&mut self, mean: Var, logvar: Var, eps: Vec<T>) -> Result<Var> {
        self.same_len(mean, logvar, "reparameterize")?;
        if eps.len() != self.value(mean).len() {
            return Err(Error::Dimension(format!(
                "reparameterize: {} noise values for {} latents",
                eps.len(),
                self.value(mean).len()
            )));
        }
        let half = T::lit(0.5);
        let data = self
            .value(mean)
            .data()
            .iter()
            .zip(self.value(logvar).data())
            .zip(&eps)
            .map(|((&m, &lv), &e)| m + (half * lv).exp() * e)
            .collect();
        let z = Tensor::new(self.value(mean).shape().to_vec(), data)?;
        let rg = self.rg(mean) || self.rg(logvar);
        Ok(self.push(Some(z), Op::Reparam { mean, logvar, eps }, rg))
    }

    /// Summed binary cross-entropy of `pred` against a constant `target`.
    ///
    /// Probabilities are clamped to `[1e-7, 1 − 1e-7]` for the value; the
    /// gradient is that of the unclamped expression evaluated at the clamped
    /// probability, so saturated outputs still receive a signal.
    pub fn bce_sum(&mut self, pred: Var, target: Vec<T>) -> Result<Var> {
        if target.len() != self.value(pred).len() {
            return Err(Error::Dimension(format!(
                "bce: {} targets for {} predictions",
                target.len(),
                self.value(pred).len()
            )));
        }
        let total = self
            .value(pred)
            .data()
            .iter()
            .zip(&target)
            .map(|(&p, &t)| bce_term(p, t))
            .sum();
        let rg = self.rg(pred);
        Ok(self.push(Some(Tensor::scalar(total)), Op::BceSum { pred, target }, rg))
    }

    /// `KL(N(mean, exp(logvar)) ‖ N(0, I)) = −½·Σ(1 + logvar − mean² − exp(logvar))`.
    pub fn kl_sum(&mut self, mean: Var, logvar: Var) -> Result<Var> {
        self.same_len(mean, logvar, "kl")?;
        let total = kl_divergence(self.value(mean).data(), self.value(logvar).data());
        let rg = self.rg(mean) || self.rg(logvar);
        Ok(self.push(Some(Tensor::scalar(total)), Op::KlSum { mean, logvar }, rg))
    }

    /// Propagates d(loss)/d(node) back through the tape.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        self.check(loss)?;
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let out = self.value(Var(idx));
            let send = |v: Var, delta: Vec<T>, grads: &mut Vec<Option<Vec<T>>>| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, &d)| *a += d),
                    slot @ None => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Input => {}
                Op::Param(_) => {
                    grads[idx] = Some(g);
                }
                Op::Conv2d { x, w, b, stride } => {
                    let go = Tensor::new(out.shape().to_vec(), g)?;
                    let lg = kernels::conv2d_backward(self.value(*x), self.value(*w), &go, *stride)?;
                    send(*x, lg.input.into_data(), &mut grads);
                    send(*w, lg.weight.into_data(), &mut grads);
                    send(*b, lg.bias.into_data(), &mut grads);
                }
                Op::TConv2d { x, w, b, stride } => {
                    let go = Tensor::new(out.shape().to_vec(), g)?;
                    let lg = kernels::tconv2d_backward(self.value(*x), self.value(*w), &go, *stride)?;
                    send(*x, lg.input.into_data(), &mut grads);
                    send(*w, lg.weight.into_data(), &mut grads);
                    send(*b, lg.bias.into_data(), &mut grads);
                }
                Op::MaxPool { x, argmax } => {
                    let go = Tensor::new(out.shape().to_vec(), g)?;
                    let gi = kernels::maxpool2d_backward(self.value(*x).shape(), argmax, &go)?;
                    send(*x, gi.into_data(), &mut grads);
                }
                Op::Linear { x, w, b } => {
                    let go = Tensor::new(out.shape().to_vec(), g)?;
                    let lg = kernels::linear_backward(self.value(*x), self.value(*w), &go)?;
                    send(*x, lg.input.into_data(), &mut grads);
                    send(*w, lg.weight.into_data(), &mut grads);
                    send(*b, lg.bias.into_data(), &mut grads);
                }
                Op::Relu(x) => {
                    let d = g
                        .iter()
                        .zip(out.data())
                        .map(|(&g, &y)| if y > T::zero() { g } else { T::zero() })
                        .collect();
                    send(*x, d, &mut grads);
                }
                Op::Sigmoid(x) => {
                    let d = g
                        .iter()
                        .zip(out.data())
                        .map(|(&g, &y)| g * y * (T::one() - y))
                        .collect();
                    send(*x, d, &mut grads);
                }
                Op::Reshape(x) => send(*x, g, &mut grads),
                Op::Add(a, b) => {
                    send(*a, g.clone(), &mut grads);
                    send(*b, g, &mut grads);
                }
                Op::Mul(a, b) => {
                    let da = g.iter().zip(self.value(*b).data()).map(|(&g, &v)| g * v).collect();
                    let db = g.iter().zip(self.value(*a).data()).map(|(&g, &v)| g * v).collect();
                    send(*a, da, &mut grads);
                    send(*b, db, &mut grads);
                }
                Op::Scale(x, s) => send(*x, g.iter().map(|&v| v * *s).collect(), &mut grads),
                Op::Sum(x) => send(*x, vec![g[0]; self.value(*x).len()], &mut grads),
                Op::Reparam { mean, logvar, eps } => {
                    let half = T::lit(0.5);
                    let dlv = g
                        .iter()
                        .zip(self.value(*logvar).data())
                        .zip(eps)
                        .map(|((&g, &lv), &e)| g * half * (half * lv).exp() * e)
                        .collect();
                    send(*mean, g, &mut grads);
                    send(*logvar, dlv, &mut grads);
                }
                Op::BceSum { pred, target } => {
                    let lo = T::lit(BCE_CLAMP);
                    let hi = T::one() - lo;
                    let d = self
                        .value(*pred)
                        .data()
                        .iter()
                        .zip(target)
                        .map(|(&p, &t)| {
                            let p = p.max(lo).min(hi);
                            g[0] * (p - t) / (p * (T::one() - p))
                        })
                        .collect();
                    send(*pred, d, &mut grads);
                }
                Op::KlSum { mean, logvar } => {
                    let half = T::lit(0.5);
                    let dm = self.value(*mean).data().iter().map(|&m| g[0] * m).collect();
                    let dlv = self
                        .value(*logvar)
                        .data()
                        .iter()
                        .map(|&lv| g[0] * half * (lv.exp() - T::one()))
                        .collect();
                    send(*mean, dm, &mut grads);
                    send(*logvar, dlv, &mut grads);
                }
            }
        }

        let param_of = self
            .nodes
            .iter()
            .map(|n| match n.op {
                Op::Param(i) => Some(i),
                _ => None,
            })
            .collect();
        Ok(Gradients {
            nodes: grads,
            param_of,
        })
    }
}

fn bce_term<T: Real>(p: T, t: T) -> T {
    let lo = T::lit(BCE_CLAMP);
    let p = p.max(lo).min(T::one() - lo);
    -(t * p.ln() + (T::one() - t) * (T::one() - p).ln())
}

/// Summed binary cross-entropy with the tape's clamping rule.
pub fn bce<T: Real>(pred: &[T], target: &[T]) -> T {
    pred.iter().zip(target).map(|(&p, &t)| bce_term(p, t)).sum()
}

pub fn kl_divergence<T: Real>(mean: &[T], logvar: &[T]) -> T {
    let s: T = mean
        .iter()
        .zip(logvar)
        .map(|(&m, &lv)| T::one() + lv - m * m - lv.exp())
        .sum();
    T::lit(-0.5) * s
}

/// Result of [`Tape::backward`].
///
/// Only parameter nodes and explicitly requested leaves keep their gradient.
#[derive(Debug)]
pub struct Gradients<T> {
    nodes: Vec<Option<Vec<T>>>,
    param_of: Vec<Option<usize>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient w.r.t. a parameter node, if it was reached.
    pub fn of(&self, v: Var) -> Option<&[T]> {
        self.nodes.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds every parameter gradient into the matching parameter's grad slot.
    pub fn accumulate_into(self, params: &mut ParamSet<T>) -> Result<()> {
        for (g, p) in self.nodes.into_iter().zip(self.param_of) {
            if let (Some(g), Some(p)) = (g, p) {
                params.get_mut(p).value.accumulate_grad(&g)?;
            }
        }
        Ok(())
    }
}
