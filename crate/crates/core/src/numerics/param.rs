use super::{Real, Tensor};
use crate::{Error, Result};

/// A trainable tensor plus its Adam moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub adam_m: Tensor<T>,
    pub adam_v: Tensor<T>,
    pub step_count: u64,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let adam_m = Tensor::zeros(value.shape().to_vec());
        let adam_v = Tensor::zeros(value.shape().to_vec());
        Parameter {
            name: name.into(),
            value,
            adam_m,
            adam_v,
            step_count: 0,
        }
    }
}

/// Ordered collection of parameters, addressed by index or name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    pub fn push(&mut self, p: Parameter<T>) -> Result<usize> {
        if self.index_of(&p.name).is_some() {
            return Err(Error::Contract(format!("duplicate parameter `{}`", p.name)));
        }
        self.params.push(p);
        Ok(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, idx: usize) -> &Parameter<T> {
        &self.params[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Parameter<T> {
        &mut self.params[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    /// Total number of scalar weights.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        self.params.iter_mut().for_each(|p| p.value.clear_grad());
    }

    /// Re-types the set, dropping optimizer state.
    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Parameter::new(p.name.clone(), p.value.cast()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every parameter, then clears grads.
///
/// Fails without touching anything if any parameter has no gradient.
pub fn adam_step<T: Real>(params: &mut ParamSet<T>, cfg: &AdamConfig) -> Result<()> {
    if let Some(p) = params.iter().find(|p| p.value.grad().is_none()) {
        return Err(Error::Contract(format!(
            "parameter `{}` has no gradient",
            p.name
        )));
    }
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let eps = T::lit(cfg.eps);
    for p in params.iter_mut() {
        p.step_count += 1;
        let t = p.step_count as i32;
        let step = T::lit(cfg.lr / (1.0 - cfg.beta1.powi(t)));
        let v_corr = T::lit(1.0 / (1.0 - cfg.beta2.powi(t)));
        let grad = p.value.take_grad().expect("checked above");
        let m = p.adam_m.data_mut();
        let v = p.adam_v.data_mut();
        for (i, (w, &g)) in p.value.data_mut().iter_mut().zip(&grad).enumerate() {
            m[i] = b1 * m[i] + (T::one() - b1) * g;
            v[i] = b2 * v[i] + (T::one() - b2) * g * g;
            *w -= step * m[i] / ((v[i] * v_corr).sqrt() + eps);
        }
    }
    Ok(())
}
