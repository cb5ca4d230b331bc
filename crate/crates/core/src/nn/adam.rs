use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::mlp::ParameterSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
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

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok =
            self.lr > 0.0 && (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// First and second moment estimates mirroring a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub config: AdamConfig,
    m: ParameterSet,
    v: ParameterSet,
}

impl AdamState {
    pub fn new(params: &ParameterSet, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            step: 0,
            config,
            m: params.zeros_like(),
            v: params.zeros_like(),
        })
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut ParameterSet, grads: &ParameterSet, state: &mut AdamState) -> Result<()> {
    if params.layers.len() != grads.layers.len() || params.layers.len() != state.m.layers.len() {
        return Err(Error::Shape("adam_step: layer counts differ".into()));
    }
    for (p, g) in params.tensors().zip(grads.tensors()) {
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!(
                "adam_step: parameter {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    let tensors = params
        .tensors_mut()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().zip(state.v.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
        for i in 0..p.len() {
            let gi = g.data()[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
