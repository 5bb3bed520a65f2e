//! Analytic gradients of the tuple loss against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::loss::{lazy_quadruplet_loss, Margins};
use crate::error::Result;
use crate::harmonic::S2Grid;
use crate::model::{Mode, Model, ModelConfig};

#[derive(Debug, Clone, Serialize)]
pub struct GradRow {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    /// Coordinates whose difference interval crossed a ReLU or hinge switch and were re-measured with a smaller step.
    pub refined: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub tol: f64,
    pub passed: bool,
    pub rows: Vec<GradRow>,
}

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Times the step is divided by 10 when `θ ± h` changes the activation pattern.
    pub max_refinements: usize,
    /// Denominator floor in `|fd − an| / max(|fd|, |an|, floor)`.
    pub floor: f64,
    /// Only tensors whose name starts with one of these are checked (all when empty).
    pub only: Vec<String>,
    /// Value `ω` is set to before checking, so the attention weights receive gradient.
    pub omega: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-6,
            max_refinements: 3,
            floor: 1e-6,
            only: Vec::new(),
            omega: 0.25,
            seed: 0,
        }
    }
}

/// Random tuple of `n_pos = n_neg = 2` plus an extra negative.
fn random_batch(b: usize, rng: &mut ChaCha8Rng) -> Vec<S2Grid<f64>> {
    (0..6)
        .map(|_| S2Grid {
            bandwidth: b,
            data: (0..4 * b * b).map(|_| rng.random::<f64>()).collect(),
        })
        .collect()
}

struct Eval {
    value: f64,
    ddesc: Vec<Vec<f64>>,
    /// ReLU on/off bits of every layer plus the chosen hinge pairs.
    pattern: (Vec<bool>, Option<(usize, usize)>, Option<(usize, usize)>),
}

fn loss_of(model: &Model<f64>, grids: &[S2Grid<f64>], margins: Margins) -> Result<Eval> {
    let fwd = model.forward(grids, Mode::Train, model.config.attention)?;
    let d = &fwd.descriptors;
    let l = lazy_quadruplet_loss(&d[0], &[&d[1], &d[2]], &[&d[3], &d[4]], &d[5], margins)?;
    let relu = fwd
        .layers
        .iter()
        .flat_map(|c| c.out.iter().flatten().map(|&v| v > 0.0))
        .collect();
    let g = l.grads;
    let ddesc = std::iter::once(g.anchor)
        .chain(g.positives)
        .chain(g.negatives)
        .chain(std::iter::once(g.extra_negative))
        .collect();
    Ok(Eval {
        value: l.value,
        ddesc,
        pattern: (relu, l.first, l.second),
    })
}

/// Checks every coordinate of every (selected) parameter tensor on a random tuple.
pub fn grad_check(cfg: &ModelConfig, tol: f64, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let mut model = Model::<f64>::new(cfg.clone(), opts.seed)?;
    if let Some(s) = model.params.slots.omega {
        model.params.tensors[s].data[0] = opts.omega;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let grids = random_batch(cfg.input_bandwidth, &mut rng);
    // Loosen margins so both hinges are active on random inputs.
    let margins = Margins { m1: 2.0, m2: 2.0 };
    let base = loss_of(&model, &grids, margins)?;
    let fwd = model.forward(&grids, Mode::Train, cfg.attention)?;
    let grads = model.backward(&fwd, &base.ddesc);
    let mut rows = Vec::new();
    for ti in 0..model.params.tensors.len() {
        let name = model.params.tensors[ti].name.clone();
        if !opts.only.is_empty() && !opts.only.iter().any(|p| name.starts_with(p.as_str())) {
            continue;
        }
        let mut worst = 0.0f64;
        let mut refined = 0;
        let n = model.params.tensors[ti].data.len();
        for k in 0..n {
            let orig = model.params.tensors[ti].data[k];
            let mut h = opts.step;
            let mut fd;
            let mut tries = 0;
            loop {
                model.params.tensors[ti].data[k] = orig + h;
                let up = loss_of(&model, &grids, margins)?;
                model.params.tensors[ti].data[k] = orig - h;
                let down = loss_of(&model, &grids, margins)?;
                fd = (up.value - down.value) / (2.0 * h);
                let smooth = up.pattern == base.pattern && down.pattern == base.pattern;
                if smooth || tries == opts.max_refinements {
                    break;
                }
                tries += 1;
                h /= 10.0;
            }
            model.params.tensors[ti].data[k] = orig;
            if tries > 0 {
                refined += 1;
            }
            let an = grads.tensors[ti].data[k];
            let err = (fd - an).abs() / fd.abs().max(an.abs()).max(opts.floor);
            worst = worst.max(err);
        }
        rows.push(GradRow {
            name,
            checked: n,
            max_rel_err: worst,
            refined,
        });
    }
    let max_rel_err = rows.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_err,
        tol,
        passed: max_rel_err <= tol,
        rows,
    })
}
