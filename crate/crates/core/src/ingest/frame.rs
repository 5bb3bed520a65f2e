use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::rotation::{apply, matmul, orthonormality_error, rot_z, transpose, Matrix3};

/// Rigid transform from the sensor frame to the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Matrix3,
    pub translation: [f64; 3],
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// Heading `yaw` about `+z` at position `t`.
    pub fn planar(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Pose {
            rotation: rot_z(yaw),
            translation: [x, y, z],
        }
    }

    /// From the 12 values of a row-major `3 × 4` matrix `[R | t]`.
    pub fn from_row_major(v: &[f64]) -> Self {
        let mut rotation = [[0.0; 3]; 3];
        let mut translation = [0.0; 3];
        for r in 0..3 {
            for c in 0..3 {
                rotation[r][c] = v[4 * r + c];
            }
            translation[r] = v[4 * r + 3];
        }
        Pose { rotation, translation }
    }

    pub fn to_row_major(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for r in 0..3 {
            for c in 0..3 {
                out[4 * r + c] = self.rotation[r][c];
            }
            out[4 * r + 3] = self.translation[r];
        }
        out
    }

    /// Fails unless the rotation is orthonormal with determinant +1 (1e-6).
    pub fn validate(&self) -> Result<()> {
        let err = orthonormality_error(&self.rotation);
        let det = crate::harmonic::rotation::determinant(&self.rotation);
        if err > 1e-6 || (det - 1.0).abs() > 1e-6 || self.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "pose rotation is not a proper rotation (‖RᵀR − I‖ = {err:.2e}, det = {det:.6})"
            )));
        }
        Ok(())
    }

    pub fn to_world(&self, p: [f64; 3]) -> [f64; 3] {
        let q = apply(&self.rotation, p);
        [q[0] + self.translation[0], q[1] + self.translation[1], q[2] + self.translation[2]]
    }

    pub fn to_sensor(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [p[0] - self.translation[0], p[1] - self.translation[1], p[2] - self.translation[2]];
        apply(&transpose(&self.rotation), d)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: matmul(&self.rotation, &other.rotation),
            translation: self.to_world(other.translation),
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = transpose(&self.rotation);
        let t = apply(&rt, self.translation);
        Pose {
            rotation: rt,
            translation: [-t[0], -t[1], -t[2]],
        }
    }
}

/// One accumulated submap: points in the sensor frame and the sensor pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmapFrame {
    pub frame_id: usize,
    pub trajectory_id: usize,
    pub points: Vec<[f64; 3]>,
    pub pose: Pose,
    #[serde(default)]
    pub timestamp: Option<f64>,
}

impl SubmapFrame {
    pub fn position(&self) -> [f64; 3] {
        self.pose.translation
    }
}

/// How pose translations are compared when labelling neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    Euclidean3d,
    Planar,
}

impl DistanceMetric {
    pub fn between(self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        match self {
            DistanceMetric::Euclidean3d => {
                let dz = a[2] - b[2];
                (dx * dx + dy * dy + dz * dz).sqrt()
            }
            DistanceMetric::Planar => (dx * dx + dy * dy).sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_round_trip_and_inverse() {
        let p = Pose::planar(3.0, -1.0, 2.0, 0.7);
        assert_eq!(Pose::from_row_major(&p.to_row_major()), p);
        p.validate().unwrap();
        let id = p.compose(&p.inverse());
        for r in 0..3 {
            for c in 0..3 {
                let e = if r == c { 1.0 } else { 0.0 };
                assert!((id.rotation[r][c] - e).abs() < 1e-12);
            }
            assert!(id.translation[r].abs() < 1e-12);
        }
        let x = [1.0, 2.0, 3.0];
        let back = p.to_sensor(p.to_world(x));
        assert!((0..3).all(|i| (back[i] - x[i]).abs() < 1e-12));
    }

    #[test]
    fn reflection_is_rejected() {
        let mut p = Pose::identity();
        p.rotation[2][2] = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn planar_metric_ignores_height() {
        assert_eq!(DistanceMetric::Planar.between([0.0, 0.0, 0.0], [3.0, 4.0, 10.0]), 5.0);
        assert_eq!(DistanceMetric::Euclidean3d.between([0.0, 0.0, 0.0], [2.0, 3.0, 6.0]), 7.0);
    }
}
