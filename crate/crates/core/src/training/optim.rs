use serde::{Deserialize, Serialize};

use crate::model::Params;
use crate::real::Real;

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

#[derive(Debug, Clone)]
pub struct Adam {
    pub cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    /// Tensors excluded from updates.
    frozen: Vec<bool>,
}

impl Adam {
    /// `frozen` holds name prefixes; any tensor whose name starts with one is left untouched.
    pub fn new<T: Real>(cfg: AdamConfig, params: &Params<T>, frozen: &[String]) -> Self {
        Adam {
            cfg,
            step: 0,
            m: params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect(),
            v: params.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect(),
            frozen: params
                .tensors
                .iter()
                .map(|t| frozen.iter().any(|p| t.name.starts_with(p.as_str())))
                .collect(),
        }
    }

    pub fn is_frozen(&self, tensor: usize) -> bool {
        self.frozen[tensor]
    }

    pub fn update<T: Real>(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (ti, (p, g)) in params.tensors.iter_mut().zip(&grads.tensors).enumerate() {
            if self.frozen[ti] {
                continue;
            }
            let (m, v) = (&mut self.m[ti], &mut self.v[ti]);
            for k in 0..p.data.len() {
                let gk = g.data[k].as_f64();
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
                let step = c.lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + c.eps);
                p.data[k] -= T::lit(step);
            }
        }
    }
}
