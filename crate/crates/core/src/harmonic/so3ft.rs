//! SO(3) Fourier transform on the equiangular `(2B)³` Euler grid.
//!
//! A real signal is expanded as `g(R) = Σ_l Σ_{mn} ĝ^l_{mn} conj(D^l_{mn}(R))`
//! so `ĝ^l_{mn} = (2l+1)/8π² ∫ g(R) D^l_{mn}(R) dR`. Grids are indexed
//! `[α][β][γ]`.

use crate::error::{Error, Result};
use crate::real::{Complex, Real};

use super::plan::GridPlan;
use super::wigner::{block_offset, so3_len};
use super::So3Coefficients;

fn zero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

/// `out^l_{mn} = Σ_k s_k d^l_{mn}(β_k) Σ_{a,c} g[a][k][c] e^{−imα_a} e^{−inγ_c}`.
pub(crate) fn analysis<T: Real>(plan: &GridPlan<T>, grid: &[T], beta_scale: &[T]) -> Vec<Complex<T>> {
    let n = plan.n();
    let lmax = plan.lmax;
    let nf = plan.nf();
    let off = lmax.max(1) - 1;
    let mut out = vec![zero::<T>(); so3_len(lmax)];
    let mut t = vec![zero::<T>(); n * nf];
    let mut s = vec![zero::<T>(); nf * nf];
    for k in 0..n {
        // γ transform, non-negative n only (real input).
        for a in 0..n {
            let row = &grid[(a * n + k) * n..(a * n + k + 1) * n];
            for ni in off..nf {
                let tw = plan.twiddle_row(ni);
                let mut acc = zero::<T>();
                for (c, &v) in row.iter().enumerate() {
                    acc = acc + tw[c] * v;
                }
                t[a * nf + ni] = acc;
            }
        }
        // α transform.
        for mi in 0..nf {
            let tw = plan.twiddle_row(mi);
            for ni in off..nf {
                let mut acc = zero::<T>();
                for a in 0..n {
                    acc = acc + tw[a] * t[a * nf + ni];
                }
                s[mi * nf + ni] = acc;
                s[(2 * off - mi) * nf + (2 * off - ni)] = acc.conj();
            }
        }
        let d = plan.d_at(k);
        let sk = beta_scale[k];
        for l in 0..lmax {
            let w = 2 * l + 1;
            let base = block_offset(l);
            for mm in 0..w {
                let mi = mm + off - l;
                for nn in 0..w {
                    let ni = nn + off - l;
                    let idx = base + mm * w + nn;
                    out[idx] = out[idx] + s[mi * nf + ni] * (sk * d[idx]);
                }
            }
        }
    }
    out
}

/// `grid[a][k][c] = s_k Re Σ_{l,m,n} x^l_{mn} d^l_{mn}(β_k) e^{imα_a} e^{inγ_c}`.
pub(crate) fn synthesis<T: Real>(plan: &GridPlan<T>, coeffs: &[Complex<T>], beta_scale: Option<&[T]>) -> Vec<T> {
    let n = plan.n();
    let lmax = plan.lmax;
    let nf = plan.nf();
    let off = lmax.max(1) - 1;
    let mut grid = vec![T::zero(); n * n * n];
    let mut s = vec![zero::<T>(); nf * nf];
    let mut u = vec![zero::<T>(); n * nf];
    for k in 0..n {
        s.iter_mut().for_each(|z| *z = zero());
        let d = plan.d_at(k);
        for l in 0..lmax {
            let w = 2 * l + 1;
            let base = block_offset(l);
            for mm in 0..w {
                let mi = mm + off - l;
                for nn in 0..w {
                    let ni = nn + off - l;
                    let idx = base + mm * w + nn;
                    s[mi * nf + ni] += coeffs[idx] * d[idx];
                }
            }
        }
        // α synthesis: u[a][n] = Σ_m e^{imα_a} s[m][n]
        u.iter_mut().for_each(|z| *z = zero());
        for mi in 0..nf {
            let tw = plan.twiddle_row(mi);
            let srow = &s[mi * nf..(mi + 1) * nf];
            for a in 0..n {
                let e = tw[a].conj();
                let urow = &mut u[a * nf..(a + 1) * nf];
                for (uz, sz) in urow.iter_mut().zip(srow) {
                    *uz += e * sz;
                }
            }
        }
        let sk = beta_scale.map_or(T::one(), |s| s[k]);
        for a in 0..n {
            let urow = &u[a * nf..(a + 1) * nf];
            let out = &mut grid[(a * n + k) * n..(a * n + k + 1) * n];
            for (ni, uz) in urow.iter().enumerate() {
                let tw = plan.twiddle_row(ni);
                for (c, o) in out.iter_mut().enumerate() {
                    // Re(u · e^{inγ}) with tw = e^{−inγ}
                    *o += uz.re * tw[c].re + uz.im * tw[c].im;
                }
            }
            if sk != T::one() {
                out.iter_mut().for_each(|o| *o *= sk);
            }
        }
    }
    grid
}

fn degree_norm<T: Real>(l: usize) -> T {
    T::lit((2 * l + 1) as f64 / (8.0 * std::f64::consts::PI * std::f64::consts::PI))
}

fn forward_scale<T: Real>(plan: &GridPlan<T>) -> Vec<T> {
    let da = T::lit(2.0 * std::f64::consts::PI / plan.n() as f64);
    plan.weights.iter().map(|&w| w * da * da).collect()
}

fn scale_degrees<T: Real>(coeffs: &mut [Complex<T>], lmax: usize) {
    for l in 0..lmax {
        let c = degree_norm::<T>(l);
        let w = 2 * l + 1;
        for z in &mut coeffs[block_offset(l)..block_offset(l) + w * w] {
            *z = *z * c;
        }
    }
}

/// Forward transform of one channel, degrees `l < lmax ≤ b`.
pub fn so3_forward<T: Real>(grid: &[T], b: usize, lmax: usize) -> Result<So3Coefficients<T>> {
    let n = 2 * b;
    if grid.len() != n * n * n {
        return Err(Error::BadGridShape {
            expected: n * n * n,
            actual: grid.len(),
        });
    }
    if lmax > b {
        return Err(Error::BandwidthMismatch(lmax, b));
    }
    let plan = GridPlan::<T>::get(b, lmax);
    let mut data = analysis(&plan, grid, &forward_scale(&plan));
    scale_degrees(&mut data, lmax);
    Ok(So3Coefficients {
        bandwidth: lmax,
        data,
    })
}

/// Inverse transform of one channel onto a bandwidth-`grid_b` grid.
pub fn so3_inverse<T: Real>(coeffs: &So3Coefficients<T>, grid_b: usize) -> Vec<T> {
    let plan = GridPlan::<T>::get(grid_b, coeffs.bandwidth);
    synthesis(&plan, &coeffs.data, None)
}

/// Adjoint of [`so3_forward`].
pub fn so3_forward_adjoint<T: Real>(dcoeffs: &[Complex<T>], lmax: usize, grid_b: usize) -> Vec<T> {
    let plan = GridPlan::<T>::get(grid_b, lmax);
    let mut scaled = dcoeffs.to_vec();
    scale_degrees(&mut scaled, lmax);
    synthesis(&plan, &scaled, Some(&forward_scale(&plan)))
}

/// Adjoint of [`so3_inverse`].
pub fn so3_inverse_adjoint<T: Real>(dgrid: &[T], lmax: usize, grid_b: usize) -> Vec<Complex<T>> {
    let plan = GridPlan::<T>::get(grid_b, lmax);
    let ones = vec![T::one(); plan.n()];
    analysis(&plan, dgrid, &ones)
}
