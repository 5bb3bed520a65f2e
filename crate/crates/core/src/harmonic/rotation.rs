//! Rotations and their action on S² and SO(3) signals.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::real::{Complex, Real};

use super::sht::{s2_index, sht_forward, sht_inverse};
use super::so3ft::{so3_forward, so3_inverse};
use super::wigner::{block_offset, so3_len, wigner_d_blocks};
use super::{S2Coefficients, S2Grid, So3Coefficients, So3FeatureMap};

pub type Matrix3 = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RotationSpec {
    /// ZYZ Euler angles in radians.
    Euler { alpha: f64, beta: f64, gamma: f64 },
    Matrix(Matrix3),
}

pub fn rot_z(t: f64) -> Matrix3 {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn rot_y(t: f64) -> Matrix3 {
    let (s, c) = t.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn matmul(a: &Matrix3, b: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Matrix3) -> Matrix3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

pub fn apply(a: &Matrix3, v: [f64; 3]) -> [f64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

pub fn determinant(a: &Matrix3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// `‖RᵀR − I‖_F`.
pub fn orthonormality_error(a: &Matrix3) -> f64 {
    let p = matmul(&transpose(a), a);
    let mut s = 0.0;
    for (i, row) in p.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let e = if i == j { v - 1.0 } else { *v };
            s += e * e;
        }
    }
    s.sqrt()
}

pub fn euler_to_matrix(alpha: f64, beta: f64, gamma: f64) -> Matrix3 {
    matmul(&matmul(&rot_z(alpha), &rot_y(beta)), &rot_z(gamma))
}

/// ZYZ Euler angles with `β ∈ [0, π]`; at gimbal lock `γ = 0`.
pub fn matrix_to_euler(r: &Matrix3) -> (f64, f64, f64) {
    let cb = r[2][2].clamp(-1.0, 1.0);
    let beta = cb.acos();
    let sb = (r[0][2] * r[0][2] + r[1][2] * r[1][2]).sqrt();
    if sb > 1e-12 {
        let alpha = r[1][2].atan2(r[0][2]);
        let gamma = r[2][1].atan2(-r[2][0]);
        (alpha, beta, gamma)
    } else if cb > 0.0 {
        (r[1][0].atan2(r[0][0]), 0.0, 0.0)
    } else {
        ((-r[0][1]).atan2(r[1][1]), std::f64::consts::PI, 0.0)
    }
}

impl RotationSpec {
    pub fn identity() -> Self {
        RotationSpec::Euler {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
        }
    }

    pub fn yaw(angle: f64) -> Self {
        RotationSpec::Euler {
            alpha: angle,
            beta: 0.0,
            gamma: 0.0,
        }
    }

    pub fn matrix(&self) -> Matrix3 {
        match *self {
            RotationSpec::Euler { alpha, beta, gamma } => euler_to_matrix(alpha, beta, gamma),
            RotationSpec::Matrix(m) => m,
        }
    }

    pub fn euler(&self) -> (f64, f64, f64) {
        match *self {
            RotationSpec::Euler { alpha, beta, gamma } => (alpha, beta, gamma),
            RotationSpec::Matrix(m) => matrix_to_euler(&m),
        }
    }

    /// `self ∘ other`, i.e. rotate by `other` first.
    pub fn compose(&self, other: &RotationSpec) -> RotationSpec {
        RotationSpec::Matrix(matmul(&self.matrix(), &other.matrix()))
    }

    pub fn inverse(&self) -> RotationSpec {
        RotationSpec::Matrix(transpose(&self.matrix()))
    }

    /// Uniformly distributed rotation from three uniform numbers in `[0, 1)`.
    pub fn from_uniform(u1: f64, u2: f64, u3: f64) -> Self {
        use std::f64::consts::PI;
        RotationSpec::Euler {
            alpha: 2.0 * PI * u1,
            beta: (1.0 - 2.0 * u2).clamp(-1.0, 1.0).acos(),
            gamma: 2.0 * PI * u3,
        }
    }
}

/// Blocks `D^l(R)` for `l < lmax`, laid out like SO(3) coefficients.
pub fn wigner_big_d(lmax: usize, rot: &RotationSpec) -> Vec<Complex<f64>> {
    let (alpha, beta, gamma) = rot.euler();
    let d = wigner_d_blocks(lmax, beta);
    let mut out = vec![Complex::new(0.0, 0.0); so3_len(lmax)];
    for l in 0..lmax {
        let li = l as i64;
        let w = 2 * l + 1;
        for m in -li..=li {
            for n in -li..=li {
                let idx = block_offset(l) + ((m + li) as usize) * w + (n + li) as usize;
                let phase = -(m as f64) * alpha - (n as f64) * gamma;
                out[idx] = Complex::from_polar(d[idx], phase);
            }
        }
    }
    out
}

/// `f̂^l ↦ D^l(R) f̂^l`.
pub fn rotate_s2_coefficients<T: Real>(coeffs: &S2Coefficients<T>, rot: &RotationSpec) -> S2Coefficients<T> {
    let b = coeffs.bandwidth;
    let big_d = wigner_big_d(b, rot);
    let mut out = S2Coefficients::zeros(b);
    for l in 0..b {
        let li = l as i64;
        let w = 2 * l + 1;
        for m in -li..=li {
            let mut acc = Complex::new(0.0, 0.0);
            for n in -li..=li {
                let dz = big_d[block_offset(l) + ((m + li) as usize) * w + (n + li) as usize];
                let f = coeffs.get(l, n);
                acc += dz * Complex::new(f.re.as_f64(), f.im.as_f64());
            }
            out.data[s2_index(l, m)] = Complex::new(T::lit(acc.re), T::lit(acc.im));
        }
    }
    out
}

/// `ĝ^l ↦ D^l(R) ĝ^l` (left action).
pub fn rotate_so3_coefficients<T: Real>(coeffs: &So3Coefficients<T>, rot: &RotationSpec) -> So3Coefficients<T> {
    let b = coeffs.bandwidth;
    let big_d = wigner_big_d(b, rot);
    let mut out = So3Coefficients::zeros(b);
    for l in 0..b {
        let w = 2 * l + 1;
        let off = block_offset(l);
        for i in 0..w {
            for j in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for k in 0..w {
                    let g = coeffs.data[off + k * w + j];
                    acc += big_d[off + i * w + k] * Complex::new(g.re.as_f64(), g.im.as_f64());
                }
                out.data[off + i * w + j] = Complex::new(T::lit(acc.re), T::lit(acc.im));
            }
        }
    }
    out
}

/// `L_R f` for a grid signal, exact for signals bandlimited below `B`.
pub fn rotate_s2<T: Real>(grid: &S2Grid<T>, rot: &RotationSpec) -> Result<S2Grid<T>> {
    let coeffs = sht_forward(grid)?;
    Ok(sht_inverse(&rotate_s2_coefficients(&coeffs, rot)))
}

/// `L_R g` for every channel of an SO(3) feature map.
pub fn rotate_so3<T: Real>(map: &So3FeatureMap<T>, rot: &RotationSpec) -> Result<So3FeatureMap<T>> {
    map.check()?;
    let mut out = So3FeatureMap::zeros(map.channels, map.bandwidth);
    for c in 0..map.channels {
        let coeffs = so3_forward(map.channel(c), map.bandwidth, map.bandwidth)?;
        let rotated = rotate_so3_coefficients(&coeffs, rot);
        out.channel_mut(c).copy_from_slice(&so3_inverse(&rotated, map.bandwidth));
    }
    Ok(out)
}
