//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the transform code paths it is used to check:
//! spherical harmonics come from the associated-Legendre recurrence and Wigner
//! matrices from the closed-form sum, evaluated directly on rotation matrices.

#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spherevlad::harmonic::correlate::{symmetrize_s2, symmetrize_so3};
use spherevlad::harmonic::rotation::{matrix_to_euler, Matrix3};
use spherevlad::harmonic::{quadrature, so3_len, S2Coefficients, So3Coefficients};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn factorial(n: i64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Associated Legendre `P_l^m(x)` for `m ≥ 0`, including the Condon–Shortley phase.
pub fn legendre(l: usize, m: usize, x: f64) -> f64 {
    let mut pmm = 1.0;
    let s = (1.0 - x * x).max(0.0).sqrt();
    for i in 0..m {
        pmm *= -((2 * i + 1) as f64) * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2 * m + 1) as f64 * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut p0 = pmm;
    for ll in (m + 2)..=l {
        let p = ((2 * ll - 1) as f64 * x * pm1 - (ll + m - 1) as f64 * p0) / (ll - m) as f64;
        p0 = pm1;
        pm1 = p;
    }
    pm1
}

/// Orthonormal `Y_l^m(β, α)`.
pub fn ylm(l: usize, m: i64, beta: f64, alpha: f64) -> Complex<f64> {
    let am = m.unsigned_abs() as usize;
    let norm = ((2 * l + 1) as f64 / (4.0 * PI) * factorial((l - am) as i64) / factorial((l + am) as i64)).sqrt();
    let y = Complex::from_polar(norm * legendre(l, am, beta.cos()), am as f64 * alpha);
    if m >= 0 {
        y
    } else {
        let sign = if am % 2 == 0 { 1.0 } else { -1.0 };
        y.conj() * sign
    }
}

/// Closed-form Wigner small-d `d^l_{mn}(β)`.
pub fn small_d(l: i64, m: i64, n: i64, beta: f64) -> f64 {
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let pref = (factorial(l + m) * factorial(l - m) * factorial(l + n) * factorial(l - n)).sqrt();
    let mut total = 0.0;
    for k in 0.max(n - m)..=(l + n).min(l - m) {
        let den = factorial(l + n - k) * factorial(k) * factorial(m - n + k) * factorial(l - m - k);
        let sign = if (m - n + k) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * pref / den * c.powi((2 * l + n - m - 2 * k) as i32) * s.powi((m - n + 2 * k) as i32);
    }
    total
}

/// `D^l_{mn}` at a rotation matrix.
pub fn big_d(l: i64, m: i64, n: i64, r: &Matrix3) -> Complex<f64> {
    let (a, b, g) = matrix_to_euler(r);
    Complex::from_polar(small_d(l, m, n, b), -(m as f64) * a - (n as f64) * g)
}

/// Unit vector for polar angle `β` and azimuth `α`.
pub fn direction(beta: f64, alpha: f64) -> [f64; 3] {
    [beta.sin() * alpha.cos(), beta.sin() * alpha.sin(), beta.cos()]
}

pub fn to_polar(v: [f64; 3]) -> (f64, f64) {
    let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let beta = (v[2] / r).clamp(-1.0, 1.0).acos();
    let alpha = v[1].atan2(v[0]);
    (beta, alpha)
}

/// Random real-signal S² coefficients, `l < b`.
pub fn random_s2(rng: &mut ChaCha8Rng, b: usize) -> S2Coefficients<f64> {
    let raw: Vec<Complex<f64>> = (0..b * b)
        .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    S2Coefficients {
        bandwidth: b,
        data: symmetrize_s2(&raw, b),
    }
}

/// Random real-signal SO(3) coefficients, `l < b`.
pub fn random_so3(rng: &mut ChaCha8Rng, b: usize) -> So3Coefficients<f64> {
    let raw: Vec<Complex<f64>> = (0..so3_len(b))
        .map(|_| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    So3Coefficients {
        bandwidth: b,
        data: symmetrize_so3(&raw, b),
    }
}

/// Direct evaluation of `Σ f̂_lm Y_lm` at a direction.
pub fn eval_s2(c: &S2Coefficients<f64>, beta: f64, alpha: f64) -> f64 {
    let mut acc = Complex::new(0.0, 0.0);
    for l in 0..c.bandwidth {
        for m in -(l as i64)..=(l as i64) {
            acc += c.get(l, m) * ylm(l, m, beta, alpha);
        }
    }
    acc.re
}

/// Direct evaluation of `Σ ĝ^l_{mn} conj D^l_{mn}(R)`.
pub fn eval_so3(c: &So3Coefficients<f64>, r: &Matrix3) -> f64 {
    let (a, b, g) = matrix_to_euler(r);
    let mut acc = Complex::new(0.0, 0.0);
    for l in 0..c.bandwidth as i64 {
        for m in -l..=l {
            for n in -l..=l {
                let d = Complex::from_polar(small_d(l, m, n, b), -(m as f64) * a - (n as f64) * g);
                acc += c.get(l as usize, m, n) * d.conj();
            }
        }
    }
    acc.re
}

/// S² grid samples of a coefficient vector, computed pointwise.
pub fn sample_s2(c: &S2Coefficients<f64>, grid_b: usize) -> Vec<f64> {
    let n = 2 * grid_b;
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for k in 0..n {
            out[a * n + k] = eval_s2(c, quadrature::beta(grid_b, k), quadrature::alpha(grid_b, a));
        }
    }
    out
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(1e-300)).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
