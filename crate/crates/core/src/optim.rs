//! Adam with per-coordinate step counters.
//!
//! Keeping a step count per coordinate lets the value regression skip
//! categories that are absent from a batch without disturbing their moment
//! estimates or bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamConfig<T> {
    pub fn with_lr(lr: T) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    config: AdamConfig<T>,
    m: Vec<T>,
    v: Vec<T>,
    t: Vec<u32>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(dim: usize, config: AdamConfig<T>) -> Result<Self> {
        let c = &config;
        if !(c.lr > T::zero() && c.lr.is_finite()) {
            return invalid_arg(format!("learning rate must be positive, got {}", c.lr));
        }
        let unit = |b: T| b >= T::zero() && b < T::one();
        if !unit(c.beta1) || !unit(c.beta2) {
            return invalid_arg("Adam decay rates must lie in [0, 1)");
        }
        if !(c.eps > T::zero()) {
            return invalid_arg("Adam stabiliser must be positive");
        }
        Ok(Self {
            config,
            m: vec![T::zero(); dim],
            v: vec![T::zero(); dim],
            t: vec![0; dim],
        })
    }

    pub fn config(&self) -> &AdamConfig<T> {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// Moves `params` uphill along `grad` (gradient ascent).
    pub fn ascend(&mut self, params: &mut [T], grad: &[T]) {
        self.step_where(params, grad, |_| true, T::one());
    }

    /// Moves `params` downhill along `grad`.
    pub fn descend(&mut self, params: &mut [T], grad: &[T]) {
        self.step_where(params, grad, |_| true, -T::one());
    }

    /// Descent that only touches coordinates with `mask[i]`; the rest keep
    /// their parameters and optimizer state.
    pub fn descend_masked(&mut self, params: &mut [T], grad: &[T], mask: &[bool]) {
        assert_eq!(mask.len(), params.len(), "mask length");
        self.step_where(params, grad, |i| mask[i], -T::one());
    }

    fn step_where(
        &mut self,
        params: &mut [T],
        grad: &[T],
        active: impl Fn(usize) -> bool,
        sign: T,
    ) {
        assert_eq!(params.len(), self.m.len(), "parameter length");
        assert_eq!(grad.len(), self.m.len(), "gradient length");
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let one = T::one();
        for i in 0..params.len() {
            if !active(i) {
                continue;
            }
            let g = grad[i];
            self.t[i] += 1;
            self.m[i] = beta1 * self.m[i] + (one - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (one - beta2) * g * g;
            let t = self.t[i] as i32;
            let m_hat = self.m[i] / (one - beta1.powi(t));
            let v_hat = self.v[i] / (one - beta2.powi(t));
            params[i] = params[i] + sign * lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
