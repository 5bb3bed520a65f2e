//! Model checkpoints: one `.npz` holding every tensor in `f64`, the running
//! batch-norm statistics and the JSON-encoded configuration.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array1, ArrayD, IxDyn};
use ndarray_npy::{NpzReader, NpzWriter};
use serde::{Deserialize, Serialize};

use super::batchnorm::RunningStats;
use super::config::{ModelConfig, Variant};
use super::params::Params;
use super::Model;
use crate::error::{Error, Result};
use crate::real::{cast_slice, Real};

const CONFIG_KEY: &str = "config_json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    variant: Variant,
    clusters: usize,
    channels: usize,
    input_bandwidth: usize,
    bandwidths: Vec<usize>,
    config: ModelConfig,
}

fn archive_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Archive(format!("{}: {e}", path.display()))
}

pub fn save_checkpoint<T: Real>(model: &Model<T>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let file = File::create(path).map_err(|e| Error::unreadable(path, e))?;
    let mut npz = NpzWriter::new(BufWriter::new(file));
    let c = &model.config;
    let header = Header {
        version: FORMAT_VERSION,
        variant: c.variant(),
        clusters: c.clusters,
        channels: c.feature_channels(),
        input_bandwidth: c.input_bandwidth,
        bandwidths: c.layers.iter().map(|l| l.bandwidth).collect(),
        config: c.clone(),
    };
    let cfg = serde_json::to_vec(&header)?;
    npz.add_array(CONFIG_KEY, &Array1::from(cfg))
        .map_err(|e| archive_err(path, e))?;
    for t in &model.params.tensors {
        let arr = ArrayD::from_shape_vec(IxDyn(&t.shape), cast_slice::<T, f64>(&t.data))
            .map_err(|e| archive_err(path, e))?;
        npz.add_array(format!("param/{}", t.name), &arr)
            .map_err(|e| archive_err(path, e))?;
    }
    for (i, r) in model.running.iter().enumerate() {
        npz.add_array(format!("running/layer{i}.mean"), &Array1::from(cast_slice::<T, f64>(&r.mean)))
            .map_err(|e| archive_err(path, e))?;
        npz.add_array(format!("running/layer{i}.var"), &Array1::from(cast_slice::<T, f64>(&r.var)))
            .map_err(|e| archive_err(path, e))?;
    }
    npz.finish().map_err(|e| archive_err(path, e))?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Model<T>> {
    let file = File::open(path).map_err(|e| Error::unreadable(path, e))?;
    let mut npz = NpzReader::new(BufReader::new(file)).map_err(|e| archive_err(path, e))?;
    let cfg_bytes: Array1<u8> = npz.by_name(CONFIG_KEY).map_err(|e| archive_err(path, e))?;
    let header: Header = serde_json::from_slice(&cfg_bytes.to_vec())?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Archive(format!(
            "{}: checkpoint format {} is not supported (expected {FORMAT_VERSION})",
            path.display(),
            header.version
        )));
    }
    let config = header.config;
    if header.variant != config.variant() || header.clusters != config.clusters {
        return Err(Error::ShapeMismatch(format!("{}: header disagrees with its config", path.display())));
    }
    config.validate()?;
    let mut params = Params::<T>::zeros(&config);
    for t in &mut params.tensors {
        let arr: ArrayD<f64> = npz
            .by_name(&format!("param/{}", t.name))
            .map_err(|_| Error::UninitializedWeights(format!("tensor `{}` missing from {}", t.name, path.display())))?;
        if arr.shape() != t.shape.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "tensor `{}` has shape {:?} in {}, expected {:?}",
                t.name,
                arr.shape(),
                path.display(),
                t.shape
            )));
        }
        t.data = arr.iter().map(|&v| T::lit(v)).collect();
    }
    let mut running = Vec::new();
    if config.batchnorm {
        for i in 0..config.layers.len() {
            let mean: Array1<f64> = npz
                .by_name(&format!("running/layer{i}.mean"))
                .map_err(|e| archive_err(path, e))?;
            let var: Array1<f64> = npz
                .by_name(&format!("running/layer{i}.var"))
                .map_err(|e| archive_err(path, e))?;
            running.push(RunningStats {
                mean: mean.iter().map(|&v| T::lit(v)).collect(),
                var: var.iter().map(|&v| T::lit(v)).collect(),
            });
        }
    }
    Model::from_parts(config, params, running)
}
