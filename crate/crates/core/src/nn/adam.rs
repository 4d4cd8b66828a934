use crate::error::{Error, Result};

use super::{ParamSet, Real, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates for one group of parameter sets, in set-then-parameter
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(sets: &[&ParamSet<T>]) -> Self {
        let zeros: Vec<Tensor<T>> = sets
            .iter()
            .flat_map(|s| s.iter().map(|p| Tensor::zeros(p.value.shape())))
            .collect();
        AdamState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }

    /// Bias-corrected Adam with decoupled weight decay: each parameter is
    /// first shrunk by `lr·weight_decay·p`, then moved by the Adam delta.
    /// Gradients are zeroed afterwards.
    pub fn step(&mut self, sets: &mut [&mut ParamSet<T>], lr: f64, weight_decay: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
        }
        if !(weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(format!("weight decay must be >= 0, got {weight_decay}")));
        }
        let expected: usize = sets.iter().map(|s| s.len()).sum();
        if expected != self.first_moment.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, parameter group has {expected}",
                self.first_moment.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::of(1.0 - self.beta1.powi(t));
        let bc2 = T::of(1.0 - self.beta2.powi(t));
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - self.beta1), T::of(1.0 - self.beta2));
        let eps = T::of(self.epsilon);
        let lr_t = T::of(lr);
        let decay = T::of(lr * weight_decay);

        let params = sets.iter_mut().flat_map(|s| s.iter_mut());
        for ((p, m), v) in params.zip(&mut self.first_moment).zip(&mut self.second_moment) {
            if m.shape() != p.value.shape() {
                return Err(Error::Shape(format!("moment shape mismatch for {}", p.name)));
            }
            let values = p.value.data_mut();
            let grads = p.grad.data_mut();
            for (((w, g), mi), vi) in values
                .iter_mut()
                .zip(grads.iter_mut())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + one_b1 * *g;
                *vi = b2 * *vi + one_b2 * *g * *g;
                *w -= decay * *w;
                *w -= lr_t * (*mi / bc1) / ((*vi / bc2).sqrt() + eps);
                *g = T::zero();
            }
        }
        Ok(())
    }
}

pub fn adam_step<T: Real>(params: &mut ParamSet<T>, state: &mut AdamState<T>, lr: f64, weight_decay: f64) -> Result<()> {
    state.step(&mut [params], lr, weight_decay)
}
