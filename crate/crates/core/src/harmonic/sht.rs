//! Spherical harmonic transform on the equiangular `2B × 2B` grid.
//!
//! `Y_l^m(β, α) = √((2l+1)/4π) d^l_{m0}(β) e^{imα}` (Condon–Shortley phase).
//! Grids are indexed `[α][β]`.

use crate::error::{Error, Result};
use crate::real::{Complex, Real};

use super::plan::GridPlan;
use super::wigner::block_index;
use super::{S2Coefficients, S2Grid};

/// Flat index of `(l, m)` in a coefficient vector (`l² + l + m`).
#[inline]
pub fn s2_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

fn ylm_norm<T: Real>(l: usize) -> T {
    T::lit(((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt())
}

/// `out[lm] = Σ_k s_k c_l d^l_{m0}(β_k) Σ_a f[a][k] e^{−imα_a}`.
pub(crate) fn analysis<T: Real>(plan: &GridPlan<T>, grid: &[T], beta_scale: &[T]) -> Vec<Complex<T>> {
    let n = plan.n();
    let lmax = plan.lmax;
    let nf = plan.nf();
    let off = lmax as i64 - 1;
    let mut out = vec![Complex::new(T::zero(), T::zero()); lmax * lmax];
    let norms: Vec<T> = (0..lmax).map(ylm_norm).collect();
    let mut freq = vec![Complex::new(T::zero(), T::zero()); nf];
    for k in 0..n {
        // Real input: F(−m) = conj F(m).
        for mi in (off as usize)..nf {
            let tw = plan.twiddle_row(mi);
            let mut acc = Complex::new(T::zero(), T::zero());
            for a in 0..n {
                acc = acc + tw[a] * grid[a * n + k];
            }
            freq[mi] = acc;
            freq[2 * off as usize - mi] = acc.conj();
        }
        let d = plan.d_at(k);
        let s = beta_scale[k];
        for l in 0..lmax {
            let li = l as i64;
            let base = l * l + l;
            for m in -li..=li {
                let w = s * norms[l] * d[block_index(l, m, 0)];
                let idx = (base as i64 + m) as usize;
                out[idx] = out[idx] + freq[(m + off) as usize] * w;
            }
        }
    }
    out
}

/// `grid[a][k] = s_k Re Σ_{l,m} x_lm c_l d^l_{m0}(β_k) e^{imα_a}`.
pub(crate) fn synthesis<T: Real>(plan: &GridPlan<T>, coeffs: &[Complex<T>], beta_scale: Option<&[T]>) -> Vec<T> {
    let n = plan.n();
    let lmax = plan.lmax;
    let nf = plan.nf();
    let off = lmax as i64 - 1;
    let norms: Vec<T> = (0..lmax).map(ylm_norm).collect();
    let mut grid = vec![T::zero(); n * n];
    let mut freq = vec![Complex::new(T::zero(), T::zero()); nf];
    for k in 0..n {
        freq.iter_mut().for_each(|z| *z = Complex::new(T::zero(), T::zero()));
        let d = plan.d_at(k);
        for l in 0..lmax {
            let li = l as i64;
            let base = (l * l + l) as i64;
            for m in -li..=li {
                let w = norms[l] * d[block_index(l, m, 0)];
                freq[(m + off) as usize] += coeffs[(base + m) as usize] * w;
            }
        }
        let s = beta_scale.map_or(T::one(), |s| s[k]);
        for a in 0..n {
            let mut acc = T::zero();
            for (mi, z) in freq.iter().enumerate() {
                let tw = plan.twiddle_row(mi)[a];
                // Re(z · conj(tw))
                acc += z.re * tw.re + z.im * tw.im;
            }
            grid[a * n + k] = acc * s;
        }
    }
    grid
}

fn forward_scale<T: Real>(plan: &GridPlan<T>) -> Vec<T> {
    let da = T::lit(2.0 * std::f64::consts::PI / plan.n() as f64);
    plan.weights.iter().map(|&w| w * da).collect()
}

/// Spherical harmonic coefficients for degrees `l < B`.
pub fn sht_forward<T: Real>(grid: &S2Grid<T>) -> Result<S2Coefficients<T>> {
    sht_forward_lmax(grid, grid.bandwidth)
}

/// Coefficients for degrees `l < lmax ≤ B` only.
pub fn sht_forward_lmax<T: Real>(grid: &S2Grid<T>, lmax: usize) -> Result<S2Coefficients<T>> {
    grid.check()?;
    if lmax > grid.bandwidth {
        return Err(Error::BandwidthMismatch(lmax, grid.bandwidth));
    }
    let plan = GridPlan::<T>::get(grid.bandwidth, lmax);
    let data = analysis(&plan, &grid.data, &forward_scale(&plan));
    Ok(S2Coefficients {
        bandwidth: lmax,
        data,
    })
}

/// Synthesizes the grid signal of the same bandwidth.
pub fn sht_inverse<T: Real>(coeffs: &S2Coefficients<T>) -> S2Grid<T> {
    sht_inverse_on(coeffs, coeffs.bandwidth)
}

/// Synthesizes on a (possibly finer) grid of bandwidth `grid_b ≥ coeffs.bandwidth`.
pub fn sht_inverse_on<T: Real>(coeffs: &S2Coefficients<T>, grid_b: usize) -> S2Grid<T> {
    let plan = GridPlan::<T>::get(grid_b, coeffs.bandwidth);
    S2Grid {
        bandwidth: grid_b,
        data: synthesis(&plan, &coeffs.data, None),
    }
}

/// Adjoint of [`sht_forward_lmax`]: maps a coefficient gradient to a grid gradient.
pub fn sht_forward_adjoint<T: Real>(dcoeffs: &[Complex<T>], lmax: usize, grid_b: usize) -> Vec<T> {
    let plan = GridPlan::<T>::get(grid_b, lmax);
    synthesis(&plan, dcoeffs, Some(&forward_scale(&plan)))
}

/// Adjoint of [`sht_inverse_on`]: maps a grid gradient to a coefficient gradient.
pub fn sht_inverse_adjoint<T: Real>(dgrid: &[T], lmax: usize, grid_b: usize) -> Vec<Complex<T>> {
    let plan = GridPlan::<T>::get(grid_b, lmax);
    let ones = vec![T::one(); plan.n()];
    analysis(&plan, dgrid, &ones)
}
