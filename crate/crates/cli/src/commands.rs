use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;

use serde::Serialize;
use spherevlad::eval::{self, report, ActivityRule, DescriptorIndex, FrameSet, YawSweepConfig};
use spherevlad::ingest::{
    load_directory, split_query_database, write_world, DistanceMetric, SplitSpec, SplitStrategy, SubmapFrame,
    SyntheticWorld, WorldParams,
};
use spherevlad::model::{load_checkpoint, Ablation, Model, ModelConfig, Variant};
use spherevlad::projection::{project, write_panorama, ProjectionConfig, SphericalPanorama};
use spherevlad::training::{train, write_loss_curve, Precision, TrainConfig, TrainData, TrainHooks};
use spherevlad::{parallel, Error, Real};

use crate::manifest::{self, STOP};
use crate::{
    BenchArgs, Command, EvalArgs, IndexArgs, PrecisionArg, Preset, ProjectArgs, QueryArgs, SnrArgs,
    SplitArgs, StrategyKind, SynthArgs, TrainArgs,
};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
    Interrupted,
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Interrupted => 130,
            CliError::Lib(e) => match e {
                Error::Config(_)
                | Error::ShapeMismatch(_)
                | Error::BandwidthMismatch(..)
                | Error::UninitializedWeights(_)
                | Error::UnknownRecordingLabel(_) => 2,
                Error::NonFiniteLoss { .. } => 4,
                _ => 3,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Interrupted => f.write_str("interrupted"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Float32 => Precision::Float32,
            PrecisionArg::Float64 => Precision::Float64,
        }
    }
}

fn precision_name(p: Precision) -> &'static str {
    match p {
        Precision::Float32 => f32::NAME,
        Precision::Float64 => f64::NAME,
    }
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} not found: {}", path.display())))
    }
}

fn load_frames(dir: &Path) -> Result<Vec<SubmapFrame>> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("data directory not found: {}", dir.display())));
    }
    let frames = load_directory(dir)?;
    if frames.is_empty() {
        return Err(CliError::Usage(format!("no frames found in {}", dir.display())));
    }
    Ok(frames)
}

fn manifest_path(explicit: &Option<PathBuf>, default: PathBuf) -> PathBuf {
    explicit.clone().unwrap_or(default)
}

/// `<file>.manifest.json` beside a file output.
fn beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    file.with_file_name(name)
}

fn split_for(frames: &[SubmapFrame], a: &SplitArgs) -> Result<SplitSpec> {
    let strategy = match a.strategy {
        StrategyKind::KeyposeRest => SplitStrategy::KeyposeRest { spacing_m: a.spacing_m },
        StrategyKind::Revisit => SplitStrategy::Revisit {
            radius_m: a.revisit_radius_m,
            min_gap_frames: a.min_gap_frames,
        },
        StrategyKind::CrossRecording => SplitStrategy::CrossRecording {
            database_label: a.db_label,
            query_labels: a.query_labels.clone(),
        },
    };
    Ok(split_query_database(frames, &strategy, a.threshold_m, DistanceMetric::Euclidean3d)?)
}

fn projection<T: Real>(model: &Model<T>, max_range: f64) -> ProjectionConfig {
    ProjectionConfig {
        bandwidth: model.config.input_bandwidth,
        max_range_m: max_range,
        ..Default::default()
    }
}

fn load_model<T: Real>(path: &Path) -> Result<Model<T>> {
    require(path, "checkpoint")?;
    Ok(load_checkpoint::<T>(path)?)
}

fn project_all(frames: &[SubmapFrame], proj: &ProjectionConfig) -> Vec<SphericalPanorama> {
    parallel::map(frames, |f| project(f, proj))
}

/// `start:step:end` (inclusive) or `a,b,c`.
pub fn parse_yaws(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Usage(format!("bad yaw list `{spec}`: use start:step:end or a comma list"));
    let nums = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if spec.contains(':') {
        let parts: Vec<f64> = spec.split(':').map(nums).collect::<Result<_>>()?;
        let [start, step, end] = parts[..] else { return Err(bad()) };
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + step * i as f64).collect())
    } else {
        spec.split(',').map(nums).collect()
    }
}

pub fn run(cmd: Command, manifest_override: Option<PathBuf>) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a, &manifest_override),
        Command::Project(a) => project_cmd(a, &manifest_override),
        Command::Train(a) => {
            let precision = match (a.precision, &a.config) {
                (Some(p), _) => Precision::from(p),
                (None, Some(path)) => {
                    require(path, "config file")?;
                    TrainConfig::load(path)?.precision
                }
                (None, None) => Precision::default(),
            };
            match precision {
                Precision::Float32 => train_cmd::<f32>(a, &manifest_override),
                Precision::Float64 => train_cmd::<f64>(a, &manifest_override),
            }
        }
        Command::Index(a) => match a.input.precision {
            PrecisionArg::Float32 => index_cmd::<f32>(a, &manifest_override),
            PrecisionArg::Float64 => index_cmd::<f64>(a, &manifest_override),
        },
        Command::Query(a) => match a.input.precision {
            PrecisionArg::Float32 => query_cmd::<f32>(a, &manifest_override),
            PrecisionArg::Float64 => query_cmd::<f64>(a, &manifest_override),
        },
        Command::Eval(a) => match a.input.precision {
            PrecisionArg::Float32 => eval_cmd::<f32>(a, &manifest_override),
            PrecisionArg::Float64 => eval_cmd::<f64>(a, &manifest_override),
        },
        Command::Snr(a) => match a.precision {
            PrecisionArg::Float32 => snr_cmd::<f32>(a, &manifest_override),
            PrecisionArg::Float64 => snr_cmd::<f64>(a, &manifest_override),
        },
        Command::Bench(a) => match a.input.precision {
            PrecisionArg::Float32 => bench_cmd::<f32>(a, &manifest_override),
            PrecisionArg::Float64 => bench_cmd::<f64>(a, &manifest_override),
        },
    }
}

fn synth(a: SynthArgs, mf: &Option<PathBuf>) -> Result<()> {
    let mut params = match &a.config {
        Some(path) => {
            require(path, "world config")?;
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let parsed: std::result::Result<WorldParams, String> = if path.extension().is_some_and(|e| e == "toml") {
                toml::from_str(&text).map_err(|e| e.to_string())
            } else {
                serde_json::from_str(&text).map_err(|e| e.to_string())
            };
            parsed.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => WorldParams::default(),
    };
    if let Some(n) = a.landmarks {
        params.n_landmarks = n;
    }
    if let Some(r) = a.loop_radius_m {
        params.trajectory.loop_radius_m = r;
    }
    if let Some(s) = a.spacing_m {
        params.trajectory.spacing_m = s;
    }
    let params = params.sanitized();
    manifest::begin(
        manifest_path(mf, a.out.join("run_manifest.json")),
        "synth",
        serde_json::json!({ "args": json(&a), "world": json(&params) }),
        Some(a.seed),
        None,
    );
    let frames = SyntheticWorld::generate(a.seed, &params).record_all();
    let m = write_world(&a.out, a.seed, &params, &frames)?;
    manifest::artifact(a.out.join("manifest.json"));
    println!("wrote {} frames to {}", m.frame_count, a.out.display());
    Ok(())
}

fn project_cmd(a: ProjectArgs, mf: &Option<PathBuf>) -> Result<()> {
    if a.bandwidth == 0 || !(a.max_range > 0.0) {
        return Err(CliError::Usage("bandwidth and max range must be positive".into()));
    }
    manifest::begin(
        manifest_path(mf, a.out.join("run_manifest.json")),
        "project",
        json(&a),
        None,
        None,
    );
    let frames = load_frames(&a.input)?;
    let proj = ProjectionConfig {
        bandwidth: a.bandwidth,
        max_range_m: a.max_range,
        ..Default::default()
    };
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    let panos = project_all(&frames, &proj);
    for p in &panos {
        let stem = a.out.join(format!("pano_{:06}", p.frame_id));
        write_panorama(&stem, p)?;
        manifest::artifact(stem);
    }
    println!("projected {} frames ({}×{}) to {}", panos.len(), proj.bandwidth * 2, proj.bandwidth * 2, a.out.display());
    Ok(())
}

fn train_cmd<T: Real>(a: TrainArgs, mf: &Option<PathBuf>) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            require(path, "config file")?;
            TrainConfig::load(path)?
        }
        None => TrainConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(lr) = a.lr {
        cfg.lr = lr;
    }
    cfg.precision = if T::NAME == f32::NAME {
        Precision::Float32
    } else {
        Precision::Float64
    };
    cfg.validate()?;
    let variant: Variant = a.variant.parse()?;
    let preset = match a.model {
        Preset::Tiny => ModelConfig::tiny(),
        Preset::Desk => ModelConfig::desk(),
        Preset::Full => ModelConfig::full(),
    };
    let model_cfg = preset.with_ablation(Ablation {
        batchnorm: !a.no_batchnorm,
        attention: variant == Variant::SphereVladPp && !a.no_attention,
    });
    manifest::begin(
        manifest_path(mf, a.out.join("run_manifest.json")),
        "train",
        serde_json::json!({ "args": json(&a), "train": json(&cfg), "model": json(&model_cfg) }),
        Some(cfg.seed),
        Some(precision_name(cfg.precision)),
    );
    let frames = load_frames(&a.data)?;
    let model = Model::<T>::new(model_cfg, cfg.seed)?;
    let proj = projection(&model, a.max_range);
    let panos = project_all(&frames, &proj);
    let positions: Vec<[f64; 3]> = frames.iter().map(|f| f.position()).collect();
    manifest::cooperative(true);
    let hooks = TrainHooks {
        on_step: Some(Box::new(|r| {
            if let Some(v) = r.val_loss {
                log::info!("step {} validation loss {v:.5}", r.step);
            }
        })),
        stop: Some(&STOP),
        ..Default::default()
    };
    let data = TrainData {
        panoramas: &panos,
        positions: &positions,
    };
    let outcome = train(model, data, &cfg, Some(&a.out), hooks);
    manifest::cooperative(false);
    let outcome = outcome?;
    for p in &outcome.checkpoints {
        manifest::artifact(p.clone());
    }
    let curve = a.out.join("loss_curve.csv");
    write_loss_curve(&curve, &outcome.curve)?;
    manifest::artifact(curve);
    let last = outcome.curve.iter().rev().find_map(|r| r.val_loss);
    println!(
        "trained {} steps; final validation loss {}",
        outcome.curve.len() - 1,
        last.map_or("n/a".into(), |v| format!("{v:.5}"))
    );
    if outcome.interrupted || STOP.load(Ordering::SeqCst) {
        return Err(CliError::Interrupted);
    }
    Ok(())
}

fn index_cmd<T: Real>(a: IndexArgs, mf: &Option<PathBuf>) -> Result<()> {
    manifest::begin(manifest_path(mf, beside(&a.out)), "index", json(&a), None, Some(T::NAME));
    let model = load_model::<T>(&a.input.checkpoint)?;
    let frames = load_frames(&a.input.data)?;
    let split = split_for(&frames, &a.split)?;
    let set = FrameSet::new(&frames)?;
    let index = eval::build_index(&model, &set, &split.database_ids, &projection(&model, a.input.max_range))?;
    index.save(&a.out)?;
    manifest::artifact(a.out.clone());
    println!("indexed {} database frames (D = {}) into {}", index.len(), index.dim(), a.out.display());
    Ok(())
}

fn query_cmd<T: Real>(a: QueryArgs, mf: &Option<PathBuf>) -> Result<()> {
    manifest::begin(manifest_path(mf, beside(&a.out)), "query", json(&a), None, Some(T::NAME));
    require(&a.index, "index file")?;
    let model = load_model::<T>(&a.input.checkpoint)?;
    let index = DescriptorIndex::load(&a.index)?;
    let frames = load_frames(&a.input.data)?;
    let set = FrameSet::new(&frames)?;
    let ids: Vec<usize> = if a.ids.is_empty() {
        let in_db: std::collections::HashSet<usize> = index.entries().iter().map(|e| e.id).collect();
        frames.iter().map(|f| f.frame_id).filter(|id| !in_db.contains(id)).collect()
    } else {
        a.ids.clone()
    };
    let queries = set.select(&ids)?;
    let descs = eval::describe_frames(&model, &queries, &projection(&model, a.input.max_range))?;
    let q: Vec<(usize, [f64; 3], Vec<T>)> = queries
        .iter()
        .zip(descs)
        .map(|(f, d)| (f.frame_id, f.position(), d))
        .collect();
    let results = index.query_all(&q, a.top_n)?;
    report::write_results_csv(&a.out, &results)?;
    manifest::artifact(a.out.clone());
    for r in &results {
        if let Some(nb) = r.neighbors.first() {
            println!("query {} -> db {} (distance {:.4}, {:.1} m)", r.query_id, nb.id, nb.distance, nb.geo_m);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary<'a> {
    database_size: usize,
    queries: usize,
    recall: &'a eval::RecallCurve,
}

fn eval_cmd<T: Real>(a: EvalArgs, mf: &Option<PathBuf>) -> Result<()> {
    let yaws = a.yaw_sweep.as_deref().map(parse_yaws).transpose()?;
    if a.ablation_table && a.train_data.is_none() {
        return Err(CliError::Usage("--ablation-table needs --train-data".into()));
    }
    manifest::begin(
        manifest_path(mf, a.out.join("run_manifest.json")),
        "eval",
        json(&a),
        Some(a.seed),
        Some(T::NAME),
    );
    let model = load_model::<T>(&a.input.checkpoint)?;
    let frames = load_frames(&a.input.data)?;
    let split = split_for(&frames, &a.split)?;
    let proj = projection(&model, a.input.max_range);
    std::fs::create_dir_all(&a.out).map_err(Error::from)?;
    let out = |name: &str| {
        let p = a.out.join(name);
        manifest::artifact(p.clone());
        p
    };

    let set = FrameSet::new(&frames)?;
    let index = eval::build_index(&model, &set, &split.database_ids, &proj)?;
    let ev = eval::evaluate_queries(&model, &index, &set, &split, &proj, a.top_n)?;
    report::write_recall_csv(&out("recall.csv"), &ev.recall)?;
    report::write_results_csv(&out("results.csv"), &ev.results)?;
    let summary = EvalSummary {
        database_size: index.len(),
        queries: split.query_ids.len(),
        recall: &ev.recall,
    };
    std::fs::write(out("summary.json"), serde_json::to_string_pretty(&summary).map_err(Error::from)?).map_err(Error::from)?;
    if a.plot {
        report::plot_recall(&out("recall.svg"), &ev.recall)?;
    }
    println!(
        "AR@1 {:.4}  AR@1% {:.4} (cutoff {}, {} queries evaluated, {} without a true match)",
        ev.recall.ar1, ev.recall.ar1_percent, ev.recall.cutoff, ev.recall.evaluated, ev.recall.skipped
    );

    if let Some(yaws_deg) = yaws {
        let cfg = YawSweepConfig {
            yaws_deg,
            translation_noise_m: a.noise_m,
            seed: a.seed,
            max_n: a.top_n,
        };
        let sweep = eval::yaw_sweep_eval(&model, &index, &set, &split, &proj, &cfg)?;
        report::write_yaw_csv(&out("yaw_sweep.csv"), &sweep.rows)?;
        if a.plot {
            report::plot_yaw_sweep(&out("yaw_sweep.svg"), &sweep.rows)?;
        }
        for r in &sweep.rows {
            println!("yaw {:>6.1}°  AR@1 {:.4}  AR@1% {:.4}", r.yaw_deg, r.ar1, r.ar1_percent);
        }
    }

    if a.snr {
        let panos = project_all(&frames, &proj);
        let hist = eval::cluster_histogram(&model, &panos)?;
        let rep = eval::snr_from_histogram(
            &hist,
            ActivityRule {
                min_argmax_fraction: a.min_fraction,
            },
        );
        report::write_snr_csv(&out("snr.csv"), &rep)?;
        report::write_histogram_csv(&out("cluster_histogram.csv"), &hist)?;
        if a.plot {
            report::plot_histogram(&out("cluster_histogram.svg"), &hist)?;
        }
        print_snr(&rep);
    }

    if a.ablation_table {
        let train_dir = a.train_data.as_ref().expect("checked above");
        let train_cfg = match &a.train_config {
            Some(p) => {
                require(p, "train config")?;
                TrainConfig::load(p)?
            }
            None => TrainConfig::default(),
        };
        let train_frames = load_frames(train_dir)?;
        let train_panos = project_all(&train_frames, &proj);
        let positions: Vec<[f64; 3]> = train_frames.iter().map(|f| f.position()).collect();
        let abl_dir = a.out.join("ablation");
        let setup = eval::AblationSetup {
            base: model.config.clone(),
            train: train_cfg.clone(),
            model_seed: train_cfg.seed,
            train_data: TrainData {
                panoramas: &train_panos,
                positions: &positions,
            },
            eval_frames: &frames,
            split: &split,
            proj,
            max_n: a.top_n,
            out_dir: Some(&abl_dir),
        };
        let rows = eval::run_ablation::<T>(&setup)?;
        report::write_ablation_csv(&out("ablation.csv"), &rows)?;
        for r in &rows {
            println!("{:16} AR@1 {:.4}  AR@1% {:.4}", r.label, r.ar1, r.ar1_percent);
        }
    }

    if a.bench {
        let rep = eval::benchmark_runtime(&model, &frames, &proj, a.runs, a.warmup)?;
        report::write_bench_csv(&out("bench.csv"), &rep)?;
        print_bench(&rep);
    }
    Ok(())
}

fn print_snr(r: &eval::SnrReport) {
    let snr = if r.degenerate {
        "inf (every centroid active)".to_string()
    } else {
        format!("{:.3}", r.snr)
    };
    println!("active centroids {}/{}  SNR {snr}", r.n_active, r.n_total);
}

fn print_bench(r: &eval::BenchReport) {
    println!(
        "{} runs ({}, parallel={}): projection {:.3} ms, inference {:.3} ms, total {:.3} ms, peak RSS {}",
        r.runs,
        r.precision,
        r.parallel,
        r.mean_preprocess_ms,
        r.mean_inference_ms,
        r.mean_total_ms,
        r.peak_rss_mb.map_or("n/a".into(), |m| format!("{m:.1} MB"))
    );
}

fn snr_cmd<T: Real>(a: SnrArgs, mf: &Option<PathBuf>) -> Result<()> {
    let default_manifest = match &a.out {
        Some(dir) => dir.join("run_manifest.json"),
        None => PathBuf::from("run_manifest.json"),
    };
    manifest::begin(manifest_path(mf, default_manifest), "snr", json(&a), None, Some(T::NAME));
    let rule = ActivityRule {
        min_argmax_fraction: a.min_fraction,
    };
    let hist = match (&a.assignments, &a.checkpoint, &a.data) {
        (Some(path), _, _) => {
            require(path, "assignment file")?;
            let (k, values) = eval::read_assignments(path)?;
            eval::argmax_histogram(&values, k)
        }
        (None, Some(ck), Some(data)) => {
            let model = load_model::<T>(ck)?;
            let frames = load_frames(data)?;
            let panos = project_all(&frames, &projection(&model, a.max_range));
            eval::cluster_histogram(&model, &panos)?
        }
        _ => return Err(CliError::Usage("give --assignments, or --checkpoint with --data".into())),
    };
    let rep = eval::snr_from_histogram(&hist, rule);
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        report::write_snr_csv(&dir.join("snr.csv"), &rep)?;
        report::write_histogram_csv(&dir.join("cluster_histogram.csv"), &hist)?;
        manifest::artifact(dir.join("snr.csv"));
        manifest::artifact(dir.join("cluster_histogram.csv"));
        if a.plot {
            report::plot_histogram(&dir.join("cluster_histogram.svg"), &hist)?;
            manifest::artifact(dir.join("cluster_histogram.svg"));
        }
    }
    print_snr(&rep);
    Ok(())
}

fn bench_cmd<T: Real>(a: BenchArgs, mf: &Option<PathBuf>) -> Result<()> {
    let default_manifest = match &a.out {
        Some(f) => beside(f),
        None => PathBuf::from("run_manifest.json"),
    };
    manifest::begin(manifest_path(mf, default_manifest), "bench", json(&a), None, Some(T::NAME));
    let model = load_model::<T>(&a.input.checkpoint)?;
    let frames = load_frames(&a.input.data)?;
    let rep = eval::benchmark_runtime(&model, &frames, &projection(&model, a.input.max_range), a.runs, a.warmup)?;
    if let Some(p) = &a.out {
        report::write_bench_csv(p, &rep)?;
        manifest::artifact(p.clone());
    }
    print_bench(&rep);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaw_grid_parses() {
        assert_eq!(
            parse_yaws("0:30:180").unwrap(),
            vec![0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0]
        );
        assert_eq!(parse_yaws("0, 45,90").unwrap(), vec![0.0, 45.0, 90.0]);
        assert!(parse_yaws("0:0:10").is_err());
        assert!(parse_yaws("a:b").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::Usage("x".into()).code(), 2);
        assert_eq!(CliError::Lib(Error::Config("x".into())).code(), 2);
        assert_eq!(CliError::Lib(Error::NonFiniteLoss { step: 3 }).code(), 4);
        assert_eq!(CliError::Lib(Error::EmptyDatabase).code(), 3);
        assert_eq!(CliError::Interrupted.code(), 130);
    }
}
