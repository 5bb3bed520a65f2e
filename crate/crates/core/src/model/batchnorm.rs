//! Per-channel batch normalisation over `batch × grid` positions.
//!
//! Each sample is a channel-major `C × L` buffer.

use serde::{Deserialize, Serialize};

use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
        }
    }

    /// Exponential update with the batch mean and unbiased variance.
    pub fn update(&mut self, batch_mean: &[T], batch_var: &[T], momentum: f64) {
        let m = T::lit(momentum);
        let keep = T::one() - m;
        for c in 0..self.mean.len() {
            self.mean[c] = keep * self.mean[c] + m * batch_mean[c];
            self.var[c] = keep * self.var[c] + m * batch_var[c];
        }
    }

    pub fn cast<U: Real>(&self) -> RunningStats<U> {
        RunningStats {
            mean: crate::real::cast_slice(&self.mean),
            var: crate::real::cast_slice(&self.var),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Vec<Vec<T>>,
    pub inv_std: Vec<T>,
    /// Whether the statistics came from the batch (and so carry gradient).
    pub batch_statistics: bool,
    /// Batch mean and unbiased variance, when computed.
    pub batch_mean: Vec<T>,
    pub batch_var: Vec<T>,
}

/// Normalises `z` in place into `γ x̂ + β`.
pub fn forward<T: Real>(
    z: &mut [Vec<T>],
    channels: usize,
    gamma: &[T],
    beta: &[T],
    eps: f64,
    running: Option<&RunningStats<T>>,
) -> BnCache<T> {
    let len = z.first().map_or(0, |s| s.len() / channels);
    let n = (z.len() * len) as f64;
    let (mean, inv_std, batch_mean, batch_var) = match running {
        Some(r) => {
            let inv: Vec<T> = r.var.iter().map(|&v| T::one() / (v + T::lit(eps)).sqrt()).collect();
            (r.mean.clone(), inv, vec![], vec![])
        }
        None => {
            let mut mean = vec![T::zero(); channels];
            let mut inv = vec![T::zero(); channels];
            let mut unbiased = vec![T::zero(); channels];
            for c in 0..channels {
                let mut s = 0.0;
                for sample in z.iter() {
                    s += sample[c * len..(c + 1) * len].iter().map(|v| v.as_f64()).sum::<f64>();
                }
                let mu = s / n;
                let mut ss = 0.0;
                for sample in z.iter() {
                    ss += sample[c * len..(c + 1) * len]
                        .iter()
                        .map(|v| (v.as_f64() - mu).powi(2))
                        .sum::<f64>();
                }
                let var = ss / n;
                mean[c] = T::lit(mu);
                inv[c] = T::lit(1.0 / (var + eps).sqrt());
                unbiased[c] = T::lit(if n > 1.0 { ss / (n - 1.0) } else { var });
            }
            (mean.clone(), inv, mean, unbiased)
        }
    };
    let mut xhat = Vec::with_capacity(z.len());
    for sample in z.iter_mut() {
        let mut xs = vec![T::zero(); sample.len()];
        for c in 0..channels {
            for i in c * len..(c + 1) * len {
                let x = (sample[i] - mean[c]) * inv_std[c];
                xs[i] = x;
                sample[i] = gamma[c] * x + beta[c];
            }
        }
        xhat.push(xs);
    }
    BnCache {
        xhat,
        inv_std,
        batch_statistics: running.is_none(),
        batch_mean,
        batch_var,
    }
}

/// Overwrites `dy` with `dz` and returns `(dγ, dβ)`.
pub fn backward<T: Real>(dy: &mut [Vec<T>], channels: usize, gamma: &[T], cache: &BnCache<T>) -> (Vec<T>, Vec<T>) {
    let len = dy.first().map_or(0, |s| s.len() / channels);
    let n = (dy.len() * len) as f64;
    let mut dgamma = vec![T::zero(); channels];
    let mut dbeta = vec![T::zero(); channels];
    for c in 0..channels {
        let mut sd = 0.0;
        let mut sdx = 0.0;
        for (d, xh) in dy.iter().zip(&cache.xhat) {
            for i in c * len..(c + 1) * len {
                sd += d[i].as_f64();
                sdx += (d[i] * xh[i]).as_f64();
            }
        }
        dgamma[c] = T::lit(sdx);
        dbeta[c] = T::lit(sd);
        let g = gamma[c] * cache.inv_std[c];
        if cache.batch_statistics {
            let (mean_d, mean_dx) = (T::lit(sd / n), T::lit(sdx / n));
            for (d, xh) in dy.iter_mut().zip(&cache.xhat) {
                for i in c * len..(c + 1) * len {
                    d[i] = g * (d[i] - mean_d - xh[i] * mean_dx);
                }
            }
        } else {
            for d in dy.iter_mut() {
                for v in &mut d[c * len..(c + 1) * len] {
                    *v *= g;
                }
            }
        }
    }
    (dgamma, dbeta)
}
