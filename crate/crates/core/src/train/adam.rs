use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::smcf::{ModelConfig, ModelParameters};

/// Moment coefficients and the denominator guard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !unit(self.beta1) || !unit(self.beta2) || !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::param("adam needs 0 <= beta < 1 and eps > 0"));
        }
        Ok(())
    }
}

/// First and second moments plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: ModelParameters<T>,
    pub v: ModelParameters<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(cfg: &ModelConfig) -> Self {
        Self {
            m: ModelParameters::zeros(cfg),
            v: ModelParameters::zeros(cfg),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Non-finite gradients leave parameters
/// and state untouched.
pub fn adam_step<T: Real>(
    params: &mut ModelParameters<T>,
    grads: &ModelParameters<T>,
    state: &mut AdamState<T>,
    lr: f64,
    hyper: &AdamHyper,
) -> Result<()> {
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::NonFinite(format!("gradient of {name}")));
    }
    state.t += 1;
    let (b1, b2) = (T::lit(hyper.beta1), T::lit(hyper.beta2));
    let c1 = T::one() - T::lit(hyper.beta1.powi(state.t as i32));
    let c2 = T::one() - T::lit(hyper.beta2.powi(state.t as i32));
    let (lr, eps) = (T::lit(lr), T::lit(hyper.eps));
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().into_iter().zip(state.v.tensors_mut()));
    for (((_, mut p), (_, g)), ((_, mut m), (_, mut v))) in tensors {
        ndarray::Zip::from(&mut p)
            .and(&g)
            .and(&mut m)
            .and(&mut v)
            .for_each(|p, &g, m, v| {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            });
    }
    Ok(())
}
