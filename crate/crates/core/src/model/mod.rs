//! The place-recognition network: spherical encoder, optional self-attention,
//! NetVLAD pooling.

pub mod attention;
pub mod batchnorm;
pub mod checkpoint;
pub mod config;
pub mod encoder;
pub mod netvlad;
pub mod params;

pub use batchnorm::RunningStats;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::{Ablation, LayerSpec, ModelConfig, Variant};
pub use params::{Params, Tensor};

use crate::error::{Error, Result};
use crate::harmonic::S2Grid;
use crate::parallel;
use crate::projection::SphericalPanorama;
use crate::real::Real;

use attention::AttentionCache;
use encoder::{add, LayerCache};
use netvlad::VladCache;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in every normalisation layer.
    Train,
    /// Running statistics; samples are independent.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: Params<T>,
    /// One entry per layer when batch norm is on, else empty.
    pub running: Vec<RunningStats<T>>,
}

/// Intermediate values of a batched forward pass, kept for back-propagation.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub mode: Mode,
    pub use_attention: bool,
    pub layers: Vec<LayerCache<T>>,
    pub attention: Vec<AttentionCache<T>>,
    pub attended: Vec<Vec<T>>,
    pub vlad: Vec<VladCache<T>>,
    pub descriptors: Vec<Vec<T>>,
}

impl<T> Forward<T> {
    /// Local features entering VLAD for sample `s`, channel-major `C × L`.
    pub fn local_features(&self, s: usize) -> &[T] {
        if self.use_attention {
            &self.attended[s]
        } else {
            &self.layers.last().expect("at least one layer").out[s]
        }
    }
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, seed);
        Ok(Self::with_params(config, params))
    }

    fn with_params(config: ModelConfig, params: Params<T>) -> Self {
        let running = if config.batchnorm {
            config.layers.iter().map(|l| RunningStats::new(l.channels)).collect()
        } else {
            Vec::new()
        };
        Model {
            config,
            params,
            running,
        }
    }

    pub fn from_parts(config: ModelConfig, params: Params<T>, running: Vec<RunningStats<T>>) -> Result<Self> {
        config.validate()?;
        params.check(&config)?;
        let expected = if config.batchnorm { config.layers.len() } else { 0 };
        if running.len() != expected
            || running
                .iter()
                .zip(&config.layers)
                .any(|(r, l)| r.mean.len() != l.channels || r.var.len() != l.channels)
        {
            return Err(Error::ShapeMismatch("running statistics do not match the layer schedule".into()));
        }
        Ok(Model {
            config,
            params,
            running,
        })
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
            running: self.running.iter().map(|r| r.cast()).collect(),
        }
    }

    pub fn variant(&self) -> Variant {
        self.config.variant()
    }

    fn check_input(&self, g: &S2Grid<T>) -> Result<()> {
        g.check()?;
        if g.bandwidth != self.config.input_bandwidth {
            return Err(Error::BandwidthMismatch(g.bandwidth, self.config.input_bandwidth));
        }
        Ok(())
    }

    /// Batched forward pass. `use_attention` may only be set when the weights
    /// carry an attention block.
    pub fn forward(&self, inputs: &[S2Grid<T>], mode: Mode, use_attention: bool) -> Result<Forward<T>> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("forward batch"));
        }
        if use_attention && self.params.slots.omega.is_none() {
            return Err(Error::UninitializedWeights("attention block requested but absent".into()));
        }
        for g in inputs {
            self.check_input(g)?;
        }
        let cfg = &self.config;
        let mut layers: Vec<LayerCache<T>> = Vec::with_capacity(cfg.layers.len());
        for i in 0..cfg.layers.len() {
            let running = match mode {
                Mode::Eval => self.running.get(i),
                Mode::Train => None,
            };
            let cache = {
                let xs: Vec<&[T]> = match layers.last() {
                    None => inputs.iter().map(|g| g.data.as_slice()).collect(),
                    Some(prev) => prev.out.iter().map(|v| v.as_slice()).collect(),
                };
                encoder::layer_forward(cfg, &self.params, i, &xs, running)?
            };
            layers.push(cache);
        }
        let c = cfg.feature_channels();
        let l = cfg.local_count();
        let p = &self.params;
        let feats = &layers.last().expect("validated schedule").out;
        let (attended, attention) = if use_attention {
            let s = &p.slots;
            let (wq, wk, wv) = (
                &p.tensors[s.wq.expect("wq")].data,
                &p.tensors[s.wk.expect("wk")].data,
                &p.tensors[s.wv.expect("wv")].data,
            );
            let omega = p.omega().expect("omega");
            parallel::map(feats, |f| attention::forward(f, c, l, wq, wk, wv, omega))
                .into_iter()
                .unzip()
        } else {
            (Vec::new(), Vec::new())
        };
        let locals: &Vec<Vec<T>> = if use_attention { &attended } else { feats };
        let (cent, w, b) = (
            &p.tensors[p.slots.centroids].data,
            &p.tensors[p.slots.vlad_w].data,
            &p.tensors[p.slots.vlad_b].data,
        );
        let (descriptors, vlad): (Vec<_>, Vec<_>) = parallel::map(locals, |f| netvlad::forward(f, c, l, cent, w, b))
            .into_iter()
            .unzip();
        Ok(Forward {
            mode,
            use_attention,
            layers,
            attention,
            attended,
            vlad,
            descriptors,
        })
    }

    /// Gradients of `Σ_s ⟨ddesc[s], descriptor[s]⟩` with respect to all parameters.
    pub fn backward(&self, fwd: &Forward<T>, ddesc: &[Vec<T>]) -> Params<T> {
        let cfg = &self.config;
        let p = &self.params;
        let s = &p.slots;
        let (c, l) = (cfg.feature_channels(), cfg.local_count());
        let mut grads = p.zeros_like();
        let (cent, w, b) = (
            &p.tensors[s.centroids].data,
            &p.tensors[s.vlad_w].data,
            &p.tensors[s.vlad_b].data,
        );
        let per_sample = parallel::map_range(ddesc.len(), |i| {
            let f = fwd.local_features(i);
            let vg = netvlad::backward(f, c, l, cent, w, b, &fwd.vlad[i], &ddesc[i]);
            let ag = fwd.use_attention.then(|| {
                attention::backward(
                    &fwd.layers.last().expect("layers").out[i],
                    c,
                    l,
                    &p.tensors[s.wq.expect("wq")].data,
                    &p.tensors[s.wk.expect("wk")].data,
                    &p.tensors[s.wv.expect("wv")].data,
                    p.omega().expect("omega"),
                    &fwd.attention[i],
                    &vg.df,
                )
            });
            (vg, ag)
        });
        let mut dfeat = Vec::with_capacity(per_sample.len());
        for (vg, ag) in per_sample {
            add(&mut grads.tensors[s.centroids].data, &vg.dcentroids);
            add(&mut grads.tensors[s.vlad_w].data, &vg.dw);
            add(&mut grads.tensors[s.vlad_b].data, &vg.db);
            match ag {
                Some(ag) => {
                    add(&mut grads.tensors[s.wq.expect("wq")].data, &ag.dwq);
                    add(&mut grads.tensors[s.wk.expect("wk")].data, &ag.dwk);
                    add(&mut grads.tensors[s.wv.expect("wv")].data, &ag.dwv);
                    grads.tensors[s.omega.expect("omega")].data[0] += ag.domega;
                    dfeat.push(ag.df);
                }
                None => dfeat.push(vg.df),
            }
        }
        let mut d = dfeat;
        for i in (0..cfg.layers.len()).rev() {
            d = encoder::layer_backward(cfg, p, i, &fwd.layers[i], d, &mut grads);
        }
        grads
    }

    /// Folds the batch statistics of a training-mode pass into the running averages.
    pub fn commit_running_stats(&mut self, fwd: &Forward<T>) {
        if fwd.mode != Mode::Train {
            return;
        }
        for (r, layer) in self.running.iter_mut().zip(&fwd.layers) {
            if let Some(bn) = &layer.bn {
                r.update(&bn.batch_mean, &bn.batch_var, self.config.bn_momentum);
            }
        }
    }

    /// Inference-mode descriptor of one S² signal.
    pub fn describe_grid(&self, grid: &S2Grid<T>) -> Result<Vec<T>> {
        let fwd = self.forward(std::slice::from_ref(grid), Mode::Eval, self.config.attention)?;
        Ok(fwd.descriptors.into_iter().next().expect("one sample"))
    }

    pub fn describe(&self, pano: &SphericalPanorama) -> Result<Vec<T>> {
        pano.check()?;
        self.describe_grid(&pano.to_grid())
    }

    /// Descriptors for many panoramas, one independent pass each.
    pub fn describe_all(&self, panos: &[SphericalPanorama]) -> Result<Vec<Vec<T>>> {
        parallel::map(panos, |p| self.describe(p)).into_iter().collect()
    }

    /// Descriptor with an explicit variant and ablation. The batch-norm switch
    /// must match the weights; attention can be dropped from a `++` model.
    pub fn describe_as(&self, pano: &SphericalPanorama, variant: Variant, ablation: Ablation) -> Result<Vec<T>> {
        if ablation.batchnorm != self.config.batchnorm {
            return Err(Error::ShapeMismatch(format!(
                "ablation asks for batchnorm={} but the weights were built with batchnorm={}",
                ablation.batchnorm, self.config.batchnorm
            )));
        }
        let use_attention = variant == Variant::SphereVladPp && ablation.attention;
        pano.check()?;
        let fwd = self.forward(&[pano.to_grid()], Mode::Eval, use_attention)?;
        Ok(fwd.descriptors.into_iter().next().expect("one sample"))
    }

    /// Inference-mode soft assignments (row-major `L × K`) of one panorama's local features.
    pub fn assignments(&self, pano: &SphericalPanorama) -> Result<Vec<T>> {
        pano.check()?;
        let fwd = self.forward(&[pano.to_grid()], Mode::Eval, self.config.attention)?;
        let p = &self.params;
        Ok(netvlad::soft_assign(
            fwd.local_features(0),
            self.config.feature_channels(),
            self.config.local_count(),
            &p.tensors[p.slots.vlad_w].data,
            &p.tensors[p.slots.vlad_b].data,
        ))
    }
}

/// Descriptor of `pano` under `model`, in the precision of the model.
pub fn describe<T: Real>(
    pano: &SphericalPanorama,
    model: &Model<T>,
    variant: Variant,
    ablation: Ablation,
) -> Result<Vec<T>> {
    model.describe_as(pano, variant, ablation)
}
