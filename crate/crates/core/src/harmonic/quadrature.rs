//! Equiangular sampling of S² and SO(3) and the matching quadrature weights.
//!
//! A grid of bandwidth `B` has `2B` samples per Euler angle:
//! `α_j = γ_j = 2πj / 2B` and `β_k = π(2k + 1) / 4B`. With the weights below,
//! `Σ_k w_k h(β_k)` equals `∫₀^π h(β) sin β dβ` exactly whenever `h` is a product
//! of two Wigner-d functions of degree below `B`.

use std::f64::consts::PI;

pub fn alpha(b: usize, j: usize) -> f64 {
    2.0 * PI * j as f64 / (2 * b) as f64
}

pub fn beta(b: usize, k: usize) -> f64 {
    PI * (2 * k + 1) as f64 / (4 * b) as f64
}

pub fn betas(b: usize) -> Vec<f64> {
    (0..2 * b).map(|k| beta(b, k)).collect()
}

/// Polar quadrature weights for `∫ h(β) sin β dβ` on the `2B` polar nodes.
pub fn weights(b: usize) -> Vec<f64> {
    let bf = b as f64;
    (0..2 * b)
        .map(|k| {
            let bk = beta(b, k);
            let series: f64 = (0..b)
                .map(|j| {
                    let odd = (2 * j + 1) as f64;
                    (odd * bk).sin() / odd
                })
                .sum();
            2.0 / bf * bk.sin() * series
        })
        .collect()
}

/// Cell index of an azimuth in `[0, 2π)` on a `2B` grid (floor rule).
pub fn alpha_cell(b: usize, alpha: f64) -> usize {
    let n = 2 * b;
    let idx = (alpha / (2.0 * PI / n as f64)).floor() as isize;
    idx.clamp(0, n as isize - 1) as usize
}

/// Cell index of a polar angle in `[0, π]` on a `2B` grid (floor rule; `β = π`
/// falls into the last cell).
pub fn beta_cell(b: usize, beta: f64) -> usize {
    let n = 2 * b;
    let idx = (beta / (PI / n as f64)).floor() as isize;
    idx.clamp(0, n as isize - 1) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_integrate_sin() {
        for b in [1, 2, 3, 8, 16, 32] {
            let total: f64 = weights(b).iter().sum();
            assert!((total - 2.0).abs() < 1e-12, "b={b} total={total}");
        }
    }

    #[test]
    fn weights_integrate_even_cos_powers() {
        // ∫ cos^p β sin β dβ = 2/(p+1) for even p, 0 for odd p; exact for p < 2B.
        let b = 6;
        let w = weights(b);
        for p in 0..(2 * b) {
            let q: f64 = betas(b)
                .iter()
                .zip(&w)
                .map(|(bk, wk)| wk * bk.cos().powi(p as i32))
                .sum();
            let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
            assert!((q - exact).abs() < 1e-12, "p={p}: {q} vs {exact}");
        }
    }

    #[test]
    fn cells_use_floor() {
        assert_eq!(alpha_cell(2, 0.0), 0);
        assert_eq!(alpha_cell(2, PI / 2.0), 1);
        assert_eq!(alpha_cell(2, 2.0 * PI - 1e-12), 3);
        assert_eq!(beta_cell(2, PI), 3);
        assert_eq!(beta_cell(2, 0.0), 0);
    }
}
