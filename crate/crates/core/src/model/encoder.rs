//! Spherical convolution layers: S²/SO(3) correlation, normalisation, ReLU.

use crate::error::{Error, Result};
use crate::harmonic::correlate::{
    s2_correlate_backward, s2_correlate_coeffs, so3_correlate_backward, so3_correlate_coeffs, symmetrize_s2,
    symmetrize_so3, synthesize_channels,
};
use crate::harmonic::sht::sht_forward_lmax;
use crate::harmonic::so3ft::{so3_forward, so3_forward_adjoint, so3_inverse_adjoint};
use crate::harmonic::{S2Coefficients, S2FilterBank, S2Grid, So3Coefficients, So3FilterBank};
use crate::parallel;
use crate::real::{Complex, Real};

use super::batchnorm::{self, BnCache, RunningStats};
use super::config::ModelConfig;
use super::params::Params;

enum Bank<T> {
    S2(S2FilterBank<T>),
    So3(So3FilterBank<T>),
}

#[derive(Debug, Clone)]
pub enum LayerInput<T> {
    S2(Vec<S2Coefficients<T>>),
    So3(Vec<So3Coefficients<T>>),
}

#[derive(Debug, Clone)]
pub struct LayerCache<T> {
    /// Harmonic coefficients of each sample's input, truncated to the layer bandwidth.
    pub inputs: Vec<LayerInput<T>>,
    pub bn: Option<BnCache<T>>,
    /// Post-ReLU activations, channel-major `C × (2B)³` per sample.
    pub out: Vec<Vec<T>>,
}

fn bank<T: Real>(cfg: &ModelConfig, params: &Params<T>, layer: usize) -> Bank<T> {
    let spec = cfg.layers[layer];
    let c_in = if layer == 0 { 1 } else { cfg.layers[layer - 1].channels };
    let raw = params.tensors[params.slots.filters[layer]].as_complex();
    if layer == 0 {
        Bank::S2(S2FilterBank {
            c_out: spec.channels,
            c_in,
            bandwidth: spec.bandwidth,
            coeffs: symmetrize_s2(&raw, spec.bandwidth),
        })
    } else {
        Bank::So3(So3FilterBank {
            c_out: spec.channels,
            c_in,
            bandwidth: spec.bandwidth,
            coeffs: symmetrize_so3(&raw, spec.bandwidth),
        })
    }
}

fn input_bandwidth(cfg: &ModelConfig, layer: usize) -> usize {
    if layer == 0 {
        cfg.input_bandwidth
    } else {
        cfg.layers[layer - 1].bandwidth
    }
}

/// Runs one layer over the batch. `inputs` are S² grids for layer 0 and
/// `C_in × (2B_in)³` activations otherwise. `running` selects inference-mode
/// normalisation.
pub fn layer_forward<T: Real>(
    cfg: &ModelConfig,
    params: &Params<T>,
    layer: usize,
    inputs: &[&[T]],
    running: Option<&RunningStats<T>>,
) -> Result<LayerCache<T>> {
    let spec = cfg.layers[layer];
    let b_in = input_bandwidth(cfg, layer);
    let b = spec.bandwidth;
    let filters = bank(cfg, params, layer);
    let pre = parallel::map(inputs, |x| -> Result<(LayerInput<T>, Vec<T>)> {
        let (input, coeffs) = match &filters {
            Bank::S2(psi) => {
                let grid = S2Grid {
                    bandwidth: b_in,
                    data: x.to_vec(),
                };
                let fh = vec![sht_forward_lmax(&grid, b)?];
                let out = s2_correlate_coeffs(&fh, psi)?;
                (LayerInput::S2(fh), out)
            }
            Bank::So3(psi) => {
                let n = 2 * b_in;
                let per = n * n * n;
                if x.len() != psi.c_in * per {
                    return Err(Error::BadGridShape {
                        expected: psi.c_in * per,
                        actual: x.len(),
                    });
                }
                let gh = x
                    .chunks(per)
                    .map(|ch| so3_forward(ch, b_in, b))
                    .collect::<Result<Vec<_>>>()?;
                let out = so3_correlate_coeffs(&gh, psi, b)?;
                (LayerInput::So3(gh), out)
            }
        };
        Ok((input, synthesize_channels(&coeffs, b).data))
    });
    let mut cached = Vec::with_capacity(inputs.len());
    let mut z = Vec::with_capacity(inputs.len());
    for r in pre {
        let (i, zz) = r?;
        cached.push(i);
        z.push(zz);
    }
    let bn = match (params.slots.bn_gamma[layer], params.slots.bn_beta[layer]) {
        (Some(g), Some(bt)) => Some(batchnorm::forward(
            &mut z,
            spec.channels,
            &params.tensors[g].data,
            &params.tensors[bt].data,
            cfg.bn_eps,
            running,
        )),
        _ => {
            let bias = &params.tensors[params.slots.bias[layer].expect("bias slot without batch norm")].data;
            let len = z.first().map_or(0, |s| s.len() / spec.channels);
            for sample in z.iter_mut() {
                for (c, chunk) in sample.chunks_mut(len).enumerate() {
                    chunk.iter_mut().for_each(|v| *v += bias[c]);
                }
            }
            None
        }
    };
    for sample in z.iter_mut() {
        for v in sample.iter_mut() {
            if *v < T::zero() {
                *v = T::zero();
            }
        }
    }
    Ok(LayerCache {
        inputs: cached,
        bn,
        out: z,
    })
}

/// Back-propagates `dout` (gradient w.r.t. the layer's post-ReLU output),
/// accumulating parameter gradients into `grads`. Returns the gradient with
/// respect to the layer input, or an empty batch for layer 0.
pub fn layer_backward<T: Real>(
    cfg: &ModelConfig,
    params: &Params<T>,
    layer: usize,
    cache: &LayerCache<T>,
    mut dout: Vec<Vec<T>>,
    grads: &mut Params<T>,
) -> Vec<Vec<T>> {
    let spec = cfg.layers[layer];
    let b = spec.bandwidth;
    let b_in = input_bandwidth(cfg, layer);
    for (d, a) in dout.iter_mut().zip(&cache.out) {
        for (g, &v) in d.iter_mut().zip(a) {
            if v <= T::zero() {
                *g = T::zero();
            }
        }
    }
    match &cache.bn {
        Some(bn) => {
            let gs = params.slots.bn_gamma[layer].expect("gamma slot");
            let bs = params.slots.bn_beta[layer].expect("beta slot");
            let (dg, db) = batchnorm::backward(&mut dout, spec.channels, &params.tensors[gs].data, bn);
            add(&mut grads.tensors[gs].data, &dg);
            add(&mut grads.tensors[bs].data, &db);
        }
        None => {
            let slot = params.slots.bias[layer].expect("bias slot");
            let len = dout.first().map_or(0, |s| s.len() / spec.channels);
            for d in &dout {
                for (c, chunk) in d.chunks(len).enumerate() {
                    grads.tensors[slot].data[c] += chunk.iter().copied().sum::<T>();
                }
            }
        }
    }
    let filters = bank(cfg, params, layer);
    let zero = Complex::new(T::zero(), T::zero());
    let per_sample = parallel::map_range(dout.len(), |s| {
        let len = dout[s].len() / spec.channels;
        let dcoeffs: Vec<Vec<Complex<T>>> = dout[s]
            .chunks(len)
            .map(|ch| so3_inverse_adjoint(ch, b, b))
            .collect();
        match (&filters, &cache.inputs[s]) {
            (Bank::S2(psi), LayerInput::S2(fh)) => {
                let (_, dpsi) = s2_correlate_backward(fh, psi, &dcoeffs);
                (dpsi, Vec::new())
            }
            (Bank::So3(psi), LayerInput::So3(gh)) => {
                let (dg, dpsi) = so3_correlate_backward(gh, psi, b, &dcoeffs);
                let din: Vec<T> = dg.iter().flat_map(|d| so3_forward_adjoint(d, b, b_in)).collect();
                (dpsi, din)
            }
            _ => unreachable!("layer input kind matches its filter bank"),
        }
    });
    let stride_len = per_sample.first().map_or(0, |(d, _)| d.len());
    let mut dpsi = vec![zero; stride_len];
    let mut din = Vec::with_capacity(per_sample.len());
    for (dp, di) in per_sample {
        for (acc, v) in dpsi.iter_mut().zip(&dp) {
            *acc += *v;
        }
        din.push(di);
    }
    let raw = if layer == 0 {
        symmetrize_s2(&dpsi, b)
    } else {
        symmetrize_so3(&dpsi, b)
    };
    let slot = params.slots.filters[layer];
    let t = &mut grads.tensors[slot].data;
    for (dst, v) in t.chunks_exact_mut(2).zip(&raw) {
        dst[0] += v.re;
        dst[1] += v.im;
    }
    if layer == 0 {
        Vec::new()
    } else {
        din
    }
}

pub(crate) fn add<T: Real>(dst: &mut [T], src: &[T]) {
    for (a, &b) in dst.iter_mut().zip(src) {
        *a += b;
    }
}
