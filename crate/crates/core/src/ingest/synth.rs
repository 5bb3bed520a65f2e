//! Deterministic synthetic worlds for desk-scale experiments.
//!
//! A flat square world is populated with boxes, cylinders and wall segments
//! whose surfaces are sampled once into a world point cloud. A closed loop
//! road winds through it; recordings drive along the loop (either direction,
//! optionally offset sideways) and each frame keeps the world points within
//! sensor range, expressed in the sensor frame. There is no occlusion model:
//! the nearest-return rule of the projection acts as the z-buffer.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::formats::write_npz;
use super::frame::{Pose, SubmapFrame};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSpec {
    /// Drive the loop against its nominal direction.
    #[serde(default)]
    pub reverse: bool,
    /// Sideways offset from the loop centre line, metres (positive = left of
    /// the nominal direction).
    #[serde(default)]
    pub lateral_offset_m: f64,
    /// Arc-length position of the first frame, metres.
    #[serde(default)]
    pub phase_m: f64,
    /// Uniform heading perturbation amplitude, radians.
    #[serde(default)]
    pub heading_jitter_rad: f64,
    /// Uniform planar position perturbation amplitude, metres.
    #[serde(default)]
    pub position_jitter_m: f64,
}

impl Default for RecordingSpec {
    fn default() -> Self {
        RecordingSpec {
            reverse: false,
            lateral_offset_m: 0.0,
            phase_m: 0.0,
            heading_jitter_rad: 0.0,
            position_jitter_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySpec {
    /// Mean radius of the closed loop, metres.
    pub loop_radius_m: f64,
    /// Distance between consecutive frames along the loop, metres.
    pub spacing_m: f64,
    pub recordings: Vec<RecordingSpec>,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        TrajectorySpec {
            loop_radius_m: 64.0,
            spacing_m: 2.0,
            recordings: vec![
                RecordingSpec::default(),
                RecordingSpec {
                    reverse: true,
                    lateral_offset_m: 1.0,
                    phase_m: 1.0,
                    heading_jitter_rad: 0.05,
                    position_jitter_m: 0.3,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldParams {
    /// Side of the square world, metres.
    pub area_m: f64,
    pub n_landmarks: usize,
    /// Sampled points per square metre of landmark surface.
    pub surface_density: f64,
    /// Sampled points per square metre of ground; 0 disables the ground.
    pub ground_density: f64,
    pub sensor_height_m: f64,
    pub sensor_range_m: f64,
    /// Landmarks keep this distance from the loop centre line, metres.
    pub road_half_width_m: f64,
    pub trajectory: TrajectorySpec,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            area_m: 200.0,
            n_landmarks: 160,
            surface_density: 1.5,
            ground_density: 0.2,
            sensor_height_m: 1.8,
            sensor_range_m: 50.0,
            road_half_width_m: 5.0,
            trajectory: TrajectorySpec::default(),
        }
    }
}

impl WorldParams {
    /// Clamps out-of-range values, logging each change.
    pub fn sanitized(&self) -> WorldParams {
        let mut p = self.clone();
        let fix = |name: &str, v: &mut f64, lo: f64| {
            if !(*v >= lo) {
                log::warn!("world parameter {name} = {v} clamped to {lo}");
                *v = lo;
            }
        };
        fix("area_m", &mut p.area_m, 20.0);
        fix("surface_density", &mut p.surface_density, 0.01);
        fix("ground_density", &mut p.ground_density, 0.0);
        fix("sensor_height_m", &mut p.sensor_height_m, 0.0);
        fix("sensor_range_m", &mut p.sensor_range_m, 1.0);
        fix("road_half_width_m", &mut p.road_half_width_m, 0.0);
        fix("trajectory.spacing_m", &mut p.trajectory.spacing_m, 0.1);
        fix("trajectory.loop_radius_m", &mut p.trajectory.loop_radius_m, 5.0);
        let max_radius = 0.4 * p.area_m;
        if p.trajectory.loop_radius_m > max_radius {
            log::warn!("loop radius {} clamped to {max_radius}", p.trajectory.loop_radius_m);
            p.trajectory.loop_radius_m = max_radius;
        }
        if p.n_landmarks == 0 {
            log::warn!("n_landmarks = 0 clamped to 1");
            p.n_landmarks = 1;
        }
        if p.trajectory.recordings.is_empty() {
            log::warn!("no recordings given; using one forward pass");
            p.trajectory.recordings.push(RecordingSpec::default());
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Landmark {
    Box {
        center: [f64; 2],
        half: [f64; 2],
        height: f64,
        yaw: f64,
    },
    Cylinder {
        center: [f64; 2],
        radius: f64,
        height: f64,
    },
    Wall {
        center: [f64; 2],
        half_length: f64,
        height: f64,
        yaw: f64,
    },
}

impl Landmark {
    fn sample(&self, density: f64, rng: &mut ChaCha8Rng, out: &mut Vec<[f64; 3]>) {
        let count = |area: f64, rng: &mut ChaCha8Rng| {
            let x = area * density;
            x.floor() as usize + usize::from(rng.random::<f64>() < x.fract())
        };
        match *self {
            Landmark::Box { center, half, height, yaw } => {
                let (s, c) = yaw.sin_cos();
                let local = |u: f64, v: f64, z: f64| [center[0] + c * u - s * v, center[1] + s * u + c * v, z];
                for face in 0..4 {
                    let (len, fixed) = if face < 2 { (half[0], half[1]) } else { (half[1], half[0]) };
                    let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                    for _ in 0..count(2.0 * len * height, rng) {
                        let t = rng.random_range(-len..len);
                        let z = rng.random_range(0.0..height);
                        out.push(if face < 2 { local(t, sign * fixed, z) } else { local(sign * fixed, t, z) });
                    }
                }
                for _ in 0..count(4.0 * half[0] * half[1], rng) {
                    let u = rng.random_range(-half[0]..half[0]);
                    let v = rng.random_range(-half[1]..half[1]);
                    out.push(local(u, v, height));
                }
            }
            Landmark::Cylinder { center, radius, height } => {
                for _ in 0..count(2.0 * PI * radius * height, rng) {
                    let t = rng.random_range(0.0..2.0 * PI);
                    let z = rng.random_range(0.0..height);
                    out.push([center[0] + radius * t.cos(), center[1] + radius * t.sin(), z]);
                }
                for _ in 0..count(PI * radius * radius, rng) {
                    let t = rng.random_range(0.0..2.0 * PI);
                    let r = radius * rng.random::<f64>().sqrt();
                    out.push([center[0] + r * t.cos(), center[1] + r * t.sin(), height]);
                }
            }
            Landmark::Wall { center, half_length, height, yaw } => {
                let (s, c) = yaw.sin_cos();
                for _ in 0..count(2.0 * half_length * height, rng) {
                    let t = rng.random_range(-half_length..half_length);
                    let z = rng.random_range(0.0..height);
                    out.push([center[0] + c * t, center[1] + s * t, z]);
                }
            }
        }
    }

    fn footprint_radius(&self) -> f64 {
        match *self {
            Landmark::Box { half, .. } => half[0].hypot(half[1]),
            Landmark::Cylinder { radius, .. } => radius,
            Landmark::Wall { half_length, .. } => half_length,
        }
    }

    fn center(&self) -> [f64; 2] {
        match *self {
            Landmark::Box { center, .. } | Landmark::Cylinder { center, .. } | Landmark::Wall { center, .. } => center,
        }
    }
}

/// Closed loop `r(θ) = R (1 + Σ a_k cos(kθ + φ_k))`, resampled by arc length.
#[derive(Debug, Clone)]
struct LoopPath {
    points: Vec<[f64; 2]>,
    arc: Vec<f64>,
}

const LOOP_SAMPLES: usize = 4096;

impl LoopPath {
    fn new(radius: f64, rng: &mut ChaCha8Rng) -> Self {
        let harmonics: Vec<(f64, f64, f64)> = (2..=4)
            .map(|k| (k as f64, rng.random_range(0.0..0.12 / (k as f64 - 1.0)), rng.random_range(0.0..2.0 * PI)))
            .collect();
        let points: Vec<[f64; 2]> = (0..=LOOP_SAMPLES)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / LOOP_SAMPLES as f64;
                let r = radius * (1.0 + harmonics.iter().map(|(k, a, p)| a * (k * t + p).cos()).sum::<f64>());
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let mut arc = vec![0.0];
        for w in points.windows(2) {
            arc.push(arc.last().unwrap() + (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
        }
        LoopPath { points, arc }
    }

    fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Position and unit tangent at arc length `s` (wrapped).
    fn at(&self, s: f64) -> ([f64; 2], [f64; 2]) {
        let s = s.rem_euclid(self.length());
        let i = self.arc.partition_point(|&a| a <= s).clamp(1, self.arc.len() - 1);
        let (a, b) = (self.points[i - 1], self.points[i]);
        let seg = self.arc[i] - self.arc[i - 1];
        let t = if seg > 0.0 { (s - self.arc[i - 1]) / seg } else { 0.0 };
        let d = [b[0] - a[0], b[1] - a[1]];
        let n = d[0].hypot(d[1]).max(1e-12);
        ([a[0] + t * d[0], a[1] + t * d[1]], [d[0] / n, d[1] / n])
    }

    fn distance_to(&self, p: [f64; 2]) -> f64 {
        self.points
            .iter()
            .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// A generated world: landmarks, their sampled surface points, and the loop.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub seed: u64,
    pub params: WorldParams,
    pub landmarks: Vec<Landmark>,
    pub points: Vec<[f64; 3]>,
    path: LoopPath,
}

impl SyntheticWorld {
    pub fn generate(seed: u64, params: &WorldParams) -> Self {
        let params = params.sanitized();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let path = LoopPath::new(params.trajectory.loop_radius_m, &mut rng);
        let half = params.area_m / 2.0;
        let mut landmarks = Vec::with_capacity(params.n_landmarks);
        let mut attempts = 0;
        while landmarks.len() < params.n_landmarks {
            attempts += 1;
            let center = [rng.random_range(-half..half), rng.random_range(-half..half)];
            let kind = rng.random_range(0..10);
            let height = rng.random_range(2.0..14.0);
            let yaw = rng.random_range(0.0..PI);
            let lm = if kind < 5 {
                Landmark::Box {
                    center,
                    half: [rng.random_range(1.0..7.0), rng.random_range(1.0..7.0)],
                    height,
                    yaw,
                }
            } else if kind < 8 {
                Landmark::Cylinder {
                    center,
                    radius: rng.random_range(0.3..2.5),
                    height,
                }
            } else {
                Landmark::Wall {
                    center,
                    half_length: rng.random_range(3.0..12.0),
                    height: height.min(6.0),
                    yaw,
                }
            };
            // Keep the road clear; give up on the clearance after many tries so
            // tiny worlds still terminate.
            if attempts < 100 * params.n_landmarks
                && path.distance_to(lm.center()) < params.road_half_width_m + lm.footprint_radius()
            {
                continue;
            }
            landmarks.push(lm);
        }
        let mut points = Vec::new();
        for lm in &landmarks {
            lm.sample(params.surface_density, &mut rng, &mut points);
        }
        if params.ground_density > 0.0 {
            let n = (params.area_m * params.area_m * params.ground_density).round() as usize;
            for _ in 0..n {
                points.push([rng.random_range(-half..half), rng.random_range(-half..half), 0.0]);
            }
        }
        SyntheticWorld {
            seed,
            params,
            landmarks,
            points,
            path,
        }
    }

    pub fn loop_length(&self) -> f64 {
        self.path.length()
    }

    /// World points within sensor range of `pose`, in the sensor frame.
    pub fn observe(&self, pose: &Pose) -> Vec<[f64; 3]> {
        let r2 = self.params.sensor_range_m * self.params.sensor_range_m;
        let t = pose.translation;
        self.points
            .iter()
            .filter(|p| {
                let d = [p[0] - t[0], p[1] - t[1], p[2] - t[2]];
                d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r2
            })
            .map(|&p| pose.to_sensor(p))
            .collect()
    }

    /// Sensor poses of one recording along the loop.
    pub fn recording_poses(&self, spec: &RecordingSpec, rng: &mut ChaCha8Rng) -> Vec<Pose> {
        let spacing = self.params.trajectory.spacing_m;
        let n = (self.path.length() / spacing).floor() as usize;
        (0..n)
            .map(|i| {
                let s = if spec.reverse {
                    spec.phase_m - i as f64 * spacing
                } else {
                    spec.phase_m + i as f64 * spacing
                };
                let (p, tan) = self.path.at(s);
                let normal = [-tan[1], tan[0]];
                let dir = if spec.reverse { -1.0 } else { 1.0 };
                let off = dir * spec.lateral_offset_m;
                let mut jitter = [0.0; 2];
                if spec.position_jitter_m > 0.0 {
                    let j = spec.position_jitter_m;
                    jitter = [rng.random_range(-j..j), rng.random_range(-j..j)];
                }
                let mut yaw = (dir * tan[1]).atan2(dir * tan[0]);
                if spec.heading_jitter_rad > 0.0 {
                    let j = spec.heading_jitter_rad;
                    yaw += rng.random_range(-j..j);
                }
                Pose::planar(
                    p[0] + off * normal[0] + jitter[0],
                    p[1] + off * normal[1] + jitter[1],
                    self.params.sensor_height_m,
                    yaw,
                )
            })
            .collect()
    }

    /// Frames of one recording; ids start at `first_id`.
    pub fn record(&self, spec: &RecordingSpec, trajectory_id: usize, first_id: usize, seed: u64) -> Vec<SubmapFrame> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(trajectory_id as u64 + 1)));
        let dt = 1.0;
        self.recording_poses(spec, &mut rng)
            .into_iter()
            .enumerate()
            .map(|(i, pose)| SubmapFrame {
                frame_id: first_id + i,
                trajectory_id,
                points: self.observe(&pose),
                pose,
                timestamp: Some(i as f64 * dt),
            })
            .collect()
    }

    /// All recordings of the trajectory spec, ids consecutive across recordings.
    pub fn record_all(&self) -> Vec<SubmapFrame> {
        let mut frames = Vec::new();
        for (t, spec) in self.params.trajectory.recordings.iter().enumerate() {
            let next = frames.len();
            frames.extend(self.record(spec, t, next, self.seed));
        }
        frames
    }
}

pub fn make_synthetic_world(seed: u64, params: &WorldParams) -> Vec<SubmapFrame> {
    SyntheticWorld::generate(seed, params).record_all()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldManifest {
    pub seed: u64,
    pub params: WorldParams,
    pub frame_count: usize,
}

/// Writes `frame_XXXXXX.npz` archives plus `manifest.json` into `dir`.
pub fn write_world(dir: &Path, seed: u64, params: &WorldParams, frames: &[SubmapFrame]) -> Result<WorldManifest> {
    fs::create_dir_all(dir)?;
    for f in frames {
        write_npz(&dir.join(format!("frame_{:06}.npz", f.frame_id)), f)?;
    }
    let manifest = WorldManifest {
        seed,
        params: params.sanitized(),
        frame_count: frames.len(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WorldParams {
        WorldParams {
            area_m: 80.0,
            n_landmarks: 12,
            surface_density: 0.5,
            ground_density: 0.05,
            trajectory: TrajectorySpec {
                loop_radius_m: 25.0,
                spacing_m: 5.0,
                recordings: vec![RecordingSpec::default()],
            },
            ..WorldParams::default()
        }
    }

    #[test]
    fn same_seed_same_world() {
        let a = make_synthetic_world(7, &small());
        let b = make_synthetic_world(7, &small());
        assert_eq!(a, b);
        assert_ne!(a, make_synthetic_world(8, &small()));
    }

    #[test]
    fn zero_landmarks_clamped() {
        let mut p = small();
        p.n_landmarks = 0;
        p.ground_density = 0.0;
        let w = SyntheticWorld::generate(1, &p);
        assert_eq!(w.landmarks.len(), 1);
        assert!(!w.points.is_empty());
    }

    #[test]
    fn loop_has_expected_frame_count() {
        let w = SyntheticWorld::generate(3, &small());
        let frames = w.record_all();
        assert_eq!(frames.len(), (w.loop_length() / 5.0).floor() as usize);
        for f in &frames {
            f.pose.validate().unwrap();
        }
    }
}
