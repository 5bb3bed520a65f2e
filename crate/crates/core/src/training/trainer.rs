//! Training loop over mined tuples.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::loss::lazy_quadruplet_loss;
use super::optim::Adam;
use crate::error::{Error, Result};
use crate::harmonic::S2Grid;
use crate::ingest::{TrainingTuple, TupleMiner};
use crate::model::{save_checkpoint, Mode, Model};
use crate::projection::{rotate_panorama_yaw, SphericalPanorama};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentEvent {
    pub step: usize,
    pub tuple: usize,
    pub frame: usize,
    pub yaw_steps: i64,
}

#[derive(Default)]
pub struct TrainHooks<'a> {
    pub on_augment: Option<Box<dyn FnMut(AugmentEvent) + 'a>>,
    pub on_step: Option<Box<dyn FnMut(&StepRecord) + 'a>>,
    /// Checked between steps; when set the loop stops early.
    pub stop: Option<&'a AtomicBool>,
}

pub struct TrainOutcome<T> {
    pub model: Model<T>,
    pub curve: Vec<StepRecord>,
    pub interrupted: bool,
    pub checkpoints: Vec<PathBuf>,
}

/// Panoramas (all at the model's input bandwidth) and sensor positions, index-aligned.
pub struct TrainData<'a> {
    pub panoramas: &'a [SphericalPanorama],
    pub positions: &'a [[f64; 3]],
}

#[derive(Serialize)]
struct NonFiniteDump<'a> {
    step: usize,
    loss: f64,
    tuples: &'a [TrainingTuple],
}

/// Mean loss over `tuples` and, when `grad` is set, the parameter gradient.
fn batch_loss<T: Real>(
    model: &Model<T>,
    grids: &[S2Grid<T>],
    tuples: &[TrainingTuple],
    cfg: &TrainConfig,
    mode: Mode,
    grad: bool,
) -> Result<(f64, Option<(crate::model::Params<T>, crate::model::Forward<T>)>)> {
    let fwd = model.forward(grids, mode, model.config.attention)?;
    let dim = model.config.descriptor_dim();
    let mut total = 0.0;
    let mut ddesc = vec![vec![T::zero(); dim]; grids.len()];
    let scale = T::lit(1.0 / tuples.len() as f64);
    let mut base = 0;
    for tuple in tuples {
        let per = 2 + tuple.positives.len() + tuple.negatives.len();
        let d = &fwd.descriptors[base..base + per];
        let np = tuple.positives.len();
        let pos: Vec<&[T]> = d[1..1 + np].iter().map(|v| v.as_slice()).collect();
        let neg: Vec<&[T]> = d[1 + np..per - 1].iter().map(|v| v.as_slice()).collect();
        let l = lazy_quadruplet_loss(&d[0], &pos, &neg, &d[per - 1], cfg.margins())?;
        total += l.value.as_f64();
        let g = l.grads;
        let parts = std::iter::once(g.anchor)
            .chain(g.positives)
            .chain(g.negatives)
            .chain(std::iter::once(g.extra_negative));
        for (k, gv) in parts.enumerate() {
            for (dst, v) in ddesc[base + k].iter_mut().zip(gv) {
                *dst += v * scale;
            }
        }
        base += per;
    }
    let mean = total / tuples.len() as f64;
    if !grad || !mean.is_finite() {
        return Ok((mean, None));
    }
    let grads = model.backward(&fwd, &ddesc);
    Ok((mean, Some((grads, fwd))))
}

fn gather<T: Real>(panos: &[SphericalPanorama], tuples: &[TrainingTuple]) -> Vec<S2Grid<T>> {
    tuples
        .iter()
        .flat_map(|t| t.members())
        .map(|i| panos[i].to_grid())
        .collect()
}

fn sample_tuples(miner: &TupleMiner, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<TrainingTuple>> {
    (0..n).map(|_| miner.sample(rng)).collect()
}

/// Frozen validation tuples for a dataset, drawn from a stream independent of training.
pub fn validation_tuples(data: &TrainData<'_>, cfg: &TrainConfig) -> Result<Vec<TrainingTuple>> {
    let miner = TupleMiner::new(data.positions.to_vec(), cfg.tuples())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a11d);
    sample_tuples(&miner, cfg.val_tuples.max(1), &mut rng)
}

/// Inference-mode mean loss over fixed tuples.
pub fn evaluate_loss<T: Real>(
    model: &Model<T>,
    panos: &[SphericalPanorama],
    tuples: &[TrainingTuple],
    cfg: &TrainConfig,
) -> Result<f64> {
    let grids = gather(panos, tuples);
    Ok(batch_loss(model, &grids, tuples, cfg, Mode::Eval, false)?.0)
}

pub fn train<T: Real>(
    mut model: Model<T>,
    data: TrainData<'_>,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    mut hooks: TrainHooks<'_>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if data.panoramas.len() != data.positions.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} panoramas but {} positions",
            data.panoramas.len(),
            data.positions.len()
        )));
    }
    if let Some(p) = data.panoramas.iter().find(|p| p.bandwidth != model.config.input_bandwidth) {
        return Err(Error::BandwidthMismatch(p.bandwidth, model.config.input_bandwidth));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let miner = TupleMiner::new(data.positions.to_vec(), cfg.tuples())?;
    let val = validation_tuples(&data, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.adam(), &model.params, &cfg.frozen);
    let mut curve = Vec::with_capacity(cfg.steps + 1);
    let mut checkpoints = Vec::new();
    let mut interrupted = false;

    let first = StepRecord {
        step: 0,
        train_loss: None,
        val_loss: Some(evaluate_loss(&model, data.panoramas, &val, cfg)?),
    };
    if let Some(f) = hooks.on_step.as_mut() {
        f(&first);
    }
    curve.push(first);

    let n_side = 2 * model.config.input_bandwidth as i64;
    for step in 1..=cfg.steps {
        if hooks.stop.is_some_and(|s| s.load(Ordering::SeqCst)) {
            interrupted = true;
            break;
        }
        let tuples = sample_tuples(&miner, cfg.batch_tuples, &mut rng)?;
        let mut grids: Vec<S2Grid<T>> = Vec::with_capacity(tuples.len() * (2 + cfg.n_pos + cfg.n_neg));
        for (ti, t) in tuples.iter().enumerate() {
            for (k, idx) in t.members().into_iter().enumerate() {
                let pano = &data.panoramas[idx];
                if k == 0 && cfg.rotation_augmentation {
                    let shift = rng.random_range(0..n_side);
                    if let Some(f) = hooks.on_augment.as_mut() {
                        f(AugmentEvent {
                            step,
                            tuple: ti,
                            frame: idx,
                            yaw_steps: shift,
                        });
                    }
                    grids.push(rotate_panorama_yaw(pano, shift).to_grid());
                } else {
                    grids.push(pano.to_grid());
                }
            }
        }
        let (loss, result) = batch_loss(&model, &grids, &tuples, cfg, Mode::Train, true)?;
        let finite_grads = result
            .as_ref()
            .is_some_and(|(g, _)| g.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite())));
        if !loss.is_finite() || !finite_grads {
            if let Some(dir) = out_dir {
                let dump = NonFiniteDump {
                    step,
                    loss,
                    tuples: &tuples,
                };
                std::fs::write(
                    dir.join(format!("nonfinite_step{step}.json")),
                    serde_json::to_vec_pretty(&dump)?,
                )?;
            }
            return Err(Error::NonFiniteLoss { step });
        }
        let (grads, fwd) = result.expect("gradients computed for finite loss");
        opt.update(&mut model.params, &grads);
        model.commit_running_stats(&fwd);

        let do_val = step == cfg.steps || (cfg.val_every > 0 && step % cfg.val_every == 0);
        let record = StepRecord {
            step,
            train_loss: Some(loss),
            val_loss: if do_val {
                Some(evaluate_loss(&model, data.panoramas, &val, cfg)?)
            } else {
                None
            },
        };
        if let Some(f) = hooks.on_step.as_mut() {
            f(&record);
        }
        curve.push(record);
        if let Some(dir) = out_dir {
            if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != cfg.steps {
                let p = dir.join(format!("checkpoint_step{step:06}.npz"));
                save_checkpoint(&model, &p)?;
                checkpoints.push(p);
            }
        }
    }
    if let Some(dir) = out_dir {
        let p = dir.join("final.npz");
        save_checkpoint(&model, &p)?;
        checkpoints.push(p);
        write_loss_curve(&dir.join("loss_curve.csv"), &curve)?;
    }
    Ok(TrainOutcome {
        model,
        curve,
        interrupted,
        checkpoints,
    })
}

/// `step,train_loss,val_loss`, blank where a value was not computed.
pub fn write_loss_curve(path: &Path, curve: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "train_loss", "val_loss"])?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.9}")).unwrap_or_default();
    for r in curve {
        w.write_record([r.step.to_string(), fmt(r.train_loss), fmt(r.val_loss)])?;
    }
    w.flush()?;
    Ok(())
}
