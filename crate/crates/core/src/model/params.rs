//! Named parameter tensors.
//!
//! Complex filter coefficients are stored interleaved `(re, im)`, so every
//! tensor is a flat real vector and optimizers treat all groups alike. The
//! matching gradient of a complex coefficient `z` is `∂L/∂Re z + i ∂L/∂Im z`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::harmonic::so3_len;
use crate::real::{Complex, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            name: name.into(),
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn as_complex(&self) -> Vec<Complex<T>> {
        self.data.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect()
    }

    pub fn set_complex(&mut self, z: &[Complex<T>]) {
        for (dst, v) in self.data.chunks_exact_mut(2).zip(z) {
            dst[0] = v.re;
            dst[1] = v.im;
        }
    }
}

/// Positions of each parameter group in [`Params::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Slots {
    pub filters: Vec<usize>,
    pub bn_gamma: Vec<Option<usize>>,
    pub bn_beta: Vec<Option<usize>>,
    pub bias: Vec<Option<usize>>,
    pub wq: Option<usize>,
    pub wk: Option<usize>,
    pub wv: Option<usize>,
    pub omega: Option<usize>,
    pub centroids: usize,
    pub vlad_w: usize,
    pub vlad_b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub tensors: Vec<Tensor<T>>,
    pub slots: Slots,
}

/// Shapes of every tensor a configuration needs, in storage order.
pub fn layout(cfg: &ModelConfig) -> (Vec<(String, Vec<usize>)>, Slots) {
    let mut shapes = Vec::new();
    let mut push = |name: String, shape: Vec<usize>| {
        shapes.push((name, shape));
        shapes.len() - 1
    };
    let mut slots = Slots {
        filters: vec![],
        bn_gamma: vec![],
        bn_beta: vec![],
        bias: vec![],
        wq: None,
        wk: None,
        wv: None,
        omega: None,
        centroids: 0,
        vlad_w: 0,
        vlad_b: 0,
    };
    let mut c_in = 1;
    for (i, l) in cfg.layers.iter().enumerate() {
        let per_filter = if i == 0 {
            l.bandwidth * l.bandwidth
        } else {
            so3_len(l.bandwidth)
        };
        slots
            .filters
            .push(push(format!("layer{i}.filter"), vec![l.channels, c_in, per_filter, 2]));
        if cfg.batchnorm {
            slots.bn_gamma.push(Some(push(format!("layer{i}.bn_gamma"), vec![l.channels])));
            slots.bn_beta.push(Some(push(format!("layer{i}.bn_beta"), vec![l.channels])));
            slots.bias.push(None);
        } else {
            slots.bn_gamma.push(None);
            slots.bn_beta.push(None);
            slots.bias.push(Some(push(format!("layer{i}.bias"), vec![l.channels])));
        }
        c_in = l.channels;
    }
    let c = cfg.feature_channels();
    if cfg.attention {
        let cp = cfg.attention_channels();
        slots.wq = Some(push("attention.wq".into(), vec![cp, c]));
        slots.wk = Some(push("attention.wk".into(), vec![cp, c]));
        slots.wv = Some(push("attention.wv".into(), vec![c, c]));
        slots.omega = Some(push("attention.omega".into(), vec![1]));
    }
    slots.centroids = push("vlad.centroids".into(), vec![cfg.clusters, c]);
    slots.vlad_w = push("vlad.w".into(), vec![cfg.clusters, c]);
    slots.vlad_b = push("vlad.b".into(), vec![cfg.clusters]);
    (shapes, slots)
}

impl<T: Real> Params<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (shapes, slots) = layout(cfg);
        Params {
            tensors: shapes.into_iter().map(|(n, s)| Tensor::zeros(n, s)).collect(),
            slots,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.name.clone(), t.shape.clone()))
                .collect(),
            slots: self.slots.clone(),
        }
    }

    /// Random initialisation; `ω` starts at 0.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut p = Self::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |t: &mut Tensor<T>, std: &dyn Fn(usize) -> f64| {
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            for (i, v) in t.data.iter_mut().enumerate() {
                *v = T::lit(unit.sample(&mut rng) * std(i));
            }
        };
        let four_pi = 4.0 * std::f64::consts::PI;
        let vol = 8.0 * std::f64::consts::PI.powi(2);
        let mut c_in = 1;
        for (i, l) in cfg.layers.iter().enumerate() {
            let slot = p.slots.filters[i];
            if i == 0 {
                // Output variance ≈ σ² Σ_i ‖f_i‖² with ‖f‖² ≈ 4π · E[f²], E[f²] ≈ 1/4.
                let s = (1.0 / (c_in as f64 * four_pi * 0.25)).sqrt();
                fill(&mut p.tensors[slot], &|_| s);
            } else {
                // Per-degree scale √((2l+1)/8π²) keeps output variance ≈ input variance.
                let b = l.bandwidth;
                let stride = so3_len(b);
                let degree: Vec<f64> = (0..b)
                    .flat_map(|d| std::iter::repeat_n(d, (2 * d + 1) * (2 * d + 1)))
                    .map(|d| ((2 * d + 1) as f64 / vol).sqrt())
                    .collect();
                let s = (2.0 / (c_in as f64 * vol)).sqrt();
                fill(&mut p.tensors[slot], &|k| s * degree[(k / 2) % stride]);
            }
            if let Some(g) = p.slots.bn_gamma[i] {
                p.tensors[g].data.fill(T::one());
            }
            c_in = l.channels;
        }
        let c = cfg.feature_channels() as f64;
        let inv = (1.0 / c).sqrt();
        for slot in [p.slots.wq, p.slots.wk, p.slots.wv].into_iter().flatten() {
            fill(&mut p.tensors[slot], &|_| inv);
        }
        let (cs, ws, bs) = (p.slots.centroids, p.slots.vlad_w, p.slots.vlad_b);
        fill(&mut p.tensors[cs], &|_| 0.1);
        fill(&mut p.tensors[ws], &|_| inv);
        fill(&mut p.tensors[bs], &|_| 0.1);
        p
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.tensors.iter_mut().find(|t| t.name == name)
    }

    pub fn omega(&self) -> Option<T> {
        self.slots.omega.map(|s| self.tensors[s].data[0])
    }

    pub fn total_len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn cast<U: Real>(&self) -> Params<U> {
        Params {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::lit(v.as_f64())).collect(),
                })
                .collect(),
            slots: self.slots.clone(),
        }
    }

    /// Fails unless names and shapes match what `cfg` requires.
    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let (shapes, _) = layout(cfg);
        if shapes.len() != self.tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "configuration needs {} tensors, weights hold {}",
                shapes.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), t) in shapes.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape || t.data.len() != shape.iter().product::<usize>() {
                return Err(Error::ShapeMismatch(format!(
                    "tensor `{}` {:?} does not match expected `{name}` {shape:?}",
                    t.name, t.shape
                )));
            }
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Params<T>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in &mut self.tensors {
            for x in &mut t.data {
                *x *= s;
            }
        }
    }
}
