//! CSV tables and optional SVG plots.

use std::path::Path;

use plotters::prelude::*;

use super::ablation::AblationRow;
use super::bench::BenchReport;
use super::index::RetrievalResult;
use super::recall::RecallCurve;
use super::snr::SnrReport;
use super::viewpoint::YawRow;
use crate::error::{Error, Result};

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<std::fs::File>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

fn f(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_recall_csv(path: &Path, curve: &RecallCurve) -> Result<()> {
    let mut w = writer(path, &["n", "recall"])?;
    for (i, r) in curve.recall.iter().enumerate() {
        w.write_record([(i + 1).to_string(), f(*r)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (query, rank).
pub fn write_results_csv(path: &Path, results: &[RetrievalResult]) -> Result<()> {
    let mut w = writer(path, &["query_id", "rank", "db_id", "distance", "geo_m"])?;
    for r in results {
        for (k, nb) in r.neighbors.iter().enumerate() {
            w.write_record([
                r.query_id.to_string(),
                (k + 1).to_string(),
                nb.id.to_string(),
                format!("{:.9}", nb.distance),
                format!("{:.3}", nb.geo_m),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_yaw_csv(path: &Path, rows: &[YawRow]) -> Result<()> {
    let mut w = writer(path, &["yaw_deg", "ar1", "ar1_percent", "evaluated"])?;
    for r in rows {
        w.write_record([format!("{}", r.yaw_deg), f(r.ar1), f(r.ar1_percent), r.evaluated.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv(path: &Path, histogram: &[u64]) -> Result<()> {
    let total: u64 = histogram.iter().sum();
    let mut w = writer(path, &["cluster", "count", "fraction"])?;
    for (k, &c) in histogram.iter().enumerate() {
        let frac = if total == 0 { 0.0 } else { c as f64 / total as f64 };
        w.write_record([k.to_string(), c.to_string(), f(frac)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snr_csv(path: &Path, r: &SnrReport) -> Result<()> {
    let mut w = writer(path, &["n_total", "n_active", "snr", "degenerate", "min_argmax_fraction"])?;
    w.write_record([
        r.n_total.to_string(),
        r.n_active.to_string(),
        if r.snr.is_infinite() { "inf".into() } else { f(r.snr) },
        r.degenerate.to_string(),
        r.min_argmax_fraction.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = writer(path, &["variant", "batchnorm", "attention", "ar1", "ar1_percent", "final_val_loss"])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.batchnorm.to_string(),
            r.attention.to_string(),
            f(r.ar1),
            f(r.ar1_percent),
            r.final_val_loss.map(f).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bench_csv(path: &Path, r: &BenchReport) -> Result<()> {
    let mut w = writer(
        path,
        &[
            "runs",
            "warmup",
            "precision",
            "parallel",
            "mean_preprocess_ms",
            "mean_inference_ms",
            "mean_total_ms",
            "peak_rss_mb",
        ],
    )?;
    w.write_record([
        r.runs.to_string(),
        r.warmup.to_string(),
        r.precision.to_string(),
        r.parallel.to_string(),
        f(r.mean_preprocess_ms),
        f(r.mean_inference_ms),
        f(r.mean_total_ms),
        r.peak_rss_mb.map(|m| format!("{m:.1}")).unwrap_or_default(),
    ])?;
    w.flush()?;
    Ok(())
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Config(format!("plot: {e}"))
}

fn line_plot(path: &Path, title: &str, x_desc: &str, y_desc: &str, pts: &[(f64, f64)], x_max: f64) -> Result<()> {
    let root = SVGBackend::new(path, (640, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let x_min = pts.first().map_or(0.0, |p| p.0);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x_min..x_max.max(x_min + 1.0), 0.0..1.0)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(pts.iter().copied(), &BLUE))
        .map_err(plot_err)?;
    chart
        .draw_series(pts.iter().map(|&p| Circle::new(p, 3, BLUE.filled())))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

pub fn plot_recall(path: &Path, curve: &RecallCurve) -> Result<()> {
    let pts: Vec<(f64, f64)> = curve.recall.iter().enumerate().map(|(i, &r)| ((i + 1) as f64, r)).collect();
    line_plot(path, "Recall@N", "N", "recall", &pts, curve.recall.len() as f64)
}

pub fn plot_yaw_sweep(path: &Path, rows: &[YawRow]) -> Result<()> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.yaw_deg, r.ar1)).collect();
    let x_max = rows.iter().map(|r| r.yaw_deg).fold(0.0, f64::max);
    line_plot(path, "AR@1 vs yaw", "yaw (deg)", "AR@1", &pts, x_max)
}

pub fn plot_histogram(path: &Path, histogram: &[u64]) -> Result<()> {
    let root = SVGBackend::new(path, (640, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let top = histogram.iter().copied().max().unwrap_or(0).max(1);
    let k = histogram.len() as u32;
    let mut chart = ChartBuilder::on(&root)
        .caption("Cluster assignment", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((0u32..k.max(1)).into_segmented(), 0u64..top + top / 10 + 1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("cluster")
        .y_desc("argmax count")
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(
            Histogram::vertical(&chart)
                .style(BLUE.filled())
                .margin(1)
                .data(histogram.iter().enumerate().map(|(i, &c)| (i as u32, c))),
        )
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_and_tables_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let curve = RecallCurve {
            threshold_m: 5.0,
            database_size: 10,
            recall: vec![0.5, 0.75, 1.0],
            cutoff: 1,
            ar1: 0.5,
            ar1_percent: 0.5,
            evaluated: 4,
            skipped: 0,
        };
        plot_recall(&dir.path().join("r.svg"), &curve).unwrap();
        plot_histogram(&dir.path().join("h.svg"), &[5, 0, 2]).unwrap();
        let rows = vec![
            YawRow { yaw_deg: 0.0, ar1: 1.0, ar1_percent: 1.0, evaluated: 3 },
            YawRow { yaw_deg: 30.0, ar1: 0.5, ar1_percent: 1.0, evaluated: 3 },
        ];
        plot_yaw_sweep(&dir.path().join("y.svg"), &rows).unwrap();
        write_yaw_csv(&dir.path().join("y.csv"), &rows).unwrap();
        let svg = std::fs::read_to_string(dir.path().join("h.svg")).unwrap();
        assert!(svg.starts_with("<svg"));
        let csv = std::fs::read_to_string(dir.path().join("y.csv")).unwrap();
        assert_eq!(csv.lines().next(), Some("yaw_deg,ar1,ar1_percent,evaluated"));
        assert_eq!(csv.lines().count(), 3);
    }
}
