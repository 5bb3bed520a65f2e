//! Spherical range panoramas.
//!
//! A submap is reduced to the range of the nearest return in each cell of the
//! equiangular `2B × 2B` grid, normalised by the maximum range. Rows are
//! azimuth cells, columns polar cells, matching [`crate::harmonic::S2Grid`].

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::quadrature::{alpha_cell, beta_cell};
use crate::harmonic::S2Grid;
use crate::ingest::SubmapFrame;
use crate::real::Real;

/// Which sensor axis points up. Points are remapped so that it becomes `+z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpAxis {
    #[default]
    Z,
    Y,
    X,
}

impl UpAxis {
    /// Cyclic permutation, so handedness is preserved.
    pub fn remap(self, p: [f64; 3]) -> [f64; 3] {
        match self {
            UpAxis::Z => p,
            UpAxis::Y => [p[2], p[0], p[1]],
            UpAxis::X => [p[1], p[2], p[0]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub bandwidth: usize,
    pub max_range_m: f64,
    #[serde(default)]
    pub up_axis: UpAxis,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            bandwidth: 32,
            max_range_m: 50.0,
            up_axis: UpAxis::Z,
        }
    }
}

/// Normalised range image on the `2B × 2B` grid, values in `[0, 1]`, 0 = empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalPanorama {
    pub bandwidth: usize,
    pub max_range_m: f64,
    pub frame_id: usize,
    /// `[α][β]`, row-major.
    pub values: Vec<f32>,
}

impl SphericalPanorama {
    pub fn empty(bandwidth: usize, max_range_m: f64, frame_id: usize) -> Self {
        SphericalPanorama {
            bandwidth,
            max_range_m,
            frame_id,
            values: vec![0.0; 4 * bandwidth * bandwidth],
        }
    }

    pub fn side(&self) -> usize {
        2 * self.bandwidth
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> f32 {
        self.values[a * self.side() + b]
    }

    pub fn to_grid<T: Real>(&self) -> S2Grid<T> {
        S2Grid {
            bandwidth: self.bandwidth,
            data: self.values.iter().map(|&v| T::lit(v as f64)).collect(),
        }
    }

    pub fn check(&self) -> Result<()> {
        let expected = 4 * self.bandwidth * self.bandwidth;
        if self.values.len() != expected {
            return Err(Error::BadGridShape {
                expected,
                actual: self.values.len(),
            });
        }
        Ok(())
    }
}

/// `(α ∈ [0, 2π), β ∈ [0, π], r)` of a point; `α = 0` on the polar axis.
pub fn to_spherical_coords(p: [f64; 3]) -> Result<(f64, f64, f64)> {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    if r == 0.0 {
        return Err(Error::OriginPoint);
    }
    let mut alpha = p[1].atan2(p[0]);
    if alpha < 0.0 {
        alpha += 2.0 * PI;
    }
    if alpha >= 2.0 * PI {
        alpha = 0.0;
    }
    let beta = (p[2] / r).clamp(-1.0, 1.0).acos();
    Ok((alpha, beta, r))
}

pub fn project(frame: &SubmapFrame, cfg: &ProjectionConfig) -> SphericalPanorama {
    project_points(&frame.points, frame.frame_id, cfg)
}

pub fn project_points(points: &[[f64; 3]], frame_id: usize, cfg: &ProjectionConfig) -> SphericalPanorama {
    let b = cfg.bandwidth;
    let n = 2 * b;
    let mut nearest = vec![f64::INFINITY; n * n];
    for &p in points {
        let Ok((alpha, beta, r)) = to_spherical_coords(cfg.up_axis.remap(p)) else {
            continue;
        };
        if r > cfg.max_range_m {
            continue;
        }
        let cell = alpha_cell(b, alpha) * n + beta_cell(b, beta);
        if r < nearest[cell] {
            nearest[cell] = r;
        }
    }
    let values = nearest
        .iter()
        .map(|&r| if r.is_finite() { (r / cfg.max_range_m) as f32 } else { 0.0 })
        .collect();
    SphericalPanorama {
        bandwidth: b,
        max_range_m: cfg.max_range_m,
        frame_id,
        values,
    }
}

/// Circular shift of the azimuth axis: cell `a` moves to `a + steps`.
pub fn rotate_panorama_yaw(pano: &SphericalPanorama, steps: i64) -> SphericalPanorama {
    let n = pano.side();
    let shift = steps.rem_euclid(n as i64) as usize;
    let mut values = vec![0.0; n * n];
    for a in 0..n {
        let dst = (a + shift) % n;
        values[dst * n..(dst + 1) * n].copy_from_slice(&pano.values[a * n..(a + 1) * n]);
    }
    SphericalPanorama {
        values,
        ..pano.clone()
    }
}

/// Rotates points about `+z` by `yaw` radians.
pub fn yaw_points(points: &[[f64; 3]], yaw: f64) -> Vec<[f64; 3]> {
    let (s, c) = yaw.sin_cos();
    points.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    bandwidth: usize,
    max_range_m: f64,
    frame_id: usize,
}

/// Writes `<stem>.f32` (raw little-endian grid) and `<stem>.json`.
pub fn write_panorama(stem: &Path, pano: &SphericalPanorama) -> Result<()> {
    let mut raw = vec![0u8; 4 * pano.values.len()];
    LittleEndian::write_f32_into(&pano.values, &mut raw);
    fs::File::create(stem.with_extension("f32"))?.write_all(&raw)?;
    let side = Sidecar {
        bandwidth: pano.bandwidth,
        max_range_m: pano.max_range_m,
        frame_id: pano.frame_id,
    };
    fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_panorama(stem: &Path) -> Result<SphericalPanorama> {
    let json_path = stem.with_extension("json");
    let text = fs::read_to_string(&json_path).map_err(|e| Error::unreadable(&json_path, e))?;
    let side: Sidecar = serde_json::from_str(&text)?;
    let raw_path = stem.with_extension("f32");
    let raw = fs::read(&raw_path).map_err(|e| Error::unreadable(&raw_path, e))?;
    let expected = 4 * side.bandwidth * side.bandwidth;
    if raw.len() != 4 * expected {
        return Err(Error::malformed(
            &raw_path,
            format!("{} bytes, expected {}", raw.len(), 4 * expected),
        ));
    }
    let mut values = vec![0.0f32; expected];
    LittleEndian::read_f32_into(&raw, &mut values);
    Ok(SphericalPanorama {
        bandwidth: side.bandwidth,
        max_range_m: side.max_range_m,
        frame_id: side.frame_id,
        values,
    })
}
