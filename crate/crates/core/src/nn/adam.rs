use serde::{Deserialize, Serialize};

use super::{Module, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// L2 coefficient added to the gradient of decaying parameters.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam with L2 weight decay folded into the gradient. Moment buffers are
/// matched to parameters by visitation order, which is fixed per model.
pub struct Adam<T: Real> {
    config: AdamConfig,
    step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    pub fn step<M: Module<T> + ?Sized>(&mut self, module: &mut M) {
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let lr = T::of(c.learning_rate);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let correction1 = T::one() - T::of(c.beta1.powi(t));
        let correction2 = T::one() - T::of(c.beta2.powi(t));
        let eps = T::of(c.epsilon);
        let wd = T::of(c.weight_decay);
        let first = &mut self.first;
        let second = &mut self.second;
        let mut index = 0;
        module.visit_params_mut(&mut |p| {
            if first.len() <= index {
                first.push(vec![T::zero(); p.len()]);
                second.push(vec![T::zero(); p.len()]);
            }
            let (m, v) = (&mut first[index], &mut second[index]);
            assert_eq!(m.len(), p.len(), "parameter `{}` changed size", p.name);
            for i in 0..p.value.len() {
                let mut g = p.grad[i];
                if p.decay {
                    g += wd * p.value[i];
                }
                m[i] = b1 * m[i] + (T::one() - b1) * g;
                v[i] = b2 * v[i] + (T::one() - b2) * g * g;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                p.grad[i] = T::zero();
            }
            index += 1;
        });
    }
}
