use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::{Scalar, Tensor};

/// Adam hyperparameters; defaults match the common framework defaults.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates and the number of steps taken.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[Tensor<T>]) -> Self {
        Self {
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(
    params: &mut [Tensor<T>],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return dim_err("adam_step: params, grads and state disagree in length");
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let bc1 = T::one() - b1.powi(t);
    let bc2_sqrt = (T::one() - b2.powi(t)).sqrt();
    let step_size = T::of(cfg.lr) / bc1;
    let eps = T::of(cfg.eps);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        if p.shape() != g.shape() {
            return dim_err(format!("adam_step: grad shape {:?} != param {:?}", g.shape(), p.shape()));
        }
        for (((pi, &gi), mi), vi) in
            p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut())
        {
            *mi = b1 * *mi + (T::one() - b1) * gi;
            *vi = b2 * *vi + (T::one() - b2) * gi * gi;
            let denom = vi.sqrt() / bc2_sqrt + eps;
            *pi -= step_size * *mi / denom;
        }
    }
    Ok(())
}
