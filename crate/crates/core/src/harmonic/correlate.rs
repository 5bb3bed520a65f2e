//! S² and SO(3) correlations evaluated in the harmonic domain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::real::{Complex, Real};

use super::sht::{s2_index, sht_forward_lmax};
use super::so3ft::{so3_forward, so3_inverse};
use super::wigner::{block_offset, so3_len};
use super::{S2Coefficients, S2Grid, So3Coefficients, So3FeatureMap};

/// Bank of `c_out × c_in` S² filters given by harmonic coefficients (`l < bandwidth`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S2FilterBank<T> {
    pub c_out: usize,
    pub c_in: usize,
    pub bandwidth: usize,
    /// `[(o · c_in + i) · B² + s2_index(l, m)]`
    pub coeffs: Vec<Complex<T>>,
}

/// Bank of `c_out × c_in` SO(3) filters given by Fourier blocks (`l < bandwidth`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct So3FilterBank<T> {
    pub c_out: usize,
    pub c_in: usize,
    pub bandwidth: usize,
    /// `[(o · c_in + i) · so3_len(B) + block_index(l, m, n)]`
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Real> S2FilterBank<T> {
    pub fn zeros(c_out: usize, c_in: usize, bandwidth: usize) -> Self {
        S2FilterBank {
            c_out,
            c_in,
            bandwidth,
            coeffs: vec![Complex::new(T::zero(), T::zero()); c_out * c_in * bandwidth * bandwidth],
        }
    }

    pub fn stride(&self) -> usize {
        self.bandwidth * self.bandwidth
    }

    pub fn filter(&self, o: usize, i: usize) -> &[Complex<T>] {
        let s = self.stride();
        let f = o * self.c_in + i;
        &self.coeffs[f * s..(f + 1) * s]
    }

    fn check(&self) -> Result<()> {
        let expected = self.c_out * self.c_in * self.stride();
        if self.coeffs.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "S2 filter bank holds {} coefficients, expected {expected}",
                self.coeffs.len()
            )));
        }
        Ok(())
    }
}

impl<T: Real> So3FilterBank<T> {
    pub fn zeros(c_out: usize, c_in: usize, bandwidth: usize) -> Self {
        So3FilterBank {
            c_out,
            c_in,
            bandwidth,
            coeffs: vec![Complex::new(T::zero(), T::zero()); c_out * c_in * so3_len(bandwidth)],
        }
    }

    pub fn stride(&self) -> usize {
        so3_len(self.bandwidth)
    }

    pub fn filter(&self, o: usize, i: usize) -> &[Complex<T>] {
        let s = self.stride();
        let f = o * self.c_in + i;
        &self.coeffs[f * s..(f + 1) * s]
    }

    /// Filter whose blocks are `(2l+1)/8π² · I`, so correlation returns its input.
    pub fn identity(channels: usize, bandwidth: usize) -> Self {
        let mut bank = Self::zeros(channels, channels, bandwidth);
        let s = bank.stride();
        for c in 0..channels {
            let f = c * channels + c;
            for l in 0..bandwidth {
                let w = 2 * l + 1;
                let v = T::lit(w as f64 / (8.0 * std::f64::consts::PI.powi(2)));
                for i in 0..w {
                    bank.coeffs[f * s + block_offset(l) + i * w + i] = Complex::new(v, T::zero());
                }
            }
        }
        bank
    }

    fn check(&self) -> Result<()> {
        let expected = self.c_out * self.c_in * self.stride();
        if self.coeffs.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "SO(3) filter bank holds {} coefficients, expected {expected}",
                self.coeffs.len()
            )));
        }
        Ok(())
    }
}

fn sign(p: i64) -> f64 {
    if p.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Projects S² filter coefficients onto real signals:
/// `ψ_{lm} ← (ψ_{lm} + (−1)^m conj ψ_{l,−m}) / 2`. Self-adjoint, so it also maps
/// gradients of the projected coefficients back to the raw ones.
pub fn symmetrize_s2<T: Real>(coeffs: &[Complex<T>], bandwidth: usize) -> Vec<Complex<T>> {
    let stride = bandwidth * bandwidth;
    let half = T::lit(0.5);
    let mut out = coeffs.to_vec();
    for (dst, src) in out.chunks_mut(stride).zip(coeffs.chunks(stride)) {
        for l in 0..bandwidth {
            let li = l as i64;
            for m in -li..=li {
                let mirror = src[s2_index(l, -m)].conj() * T::lit(sign(m));
                dst[s2_index(l, m)] = (src[s2_index(l, m)] + mirror) * half;
            }
        }
    }
    out
}

/// SO(3) analogue of [`symmetrize_s2`]:
/// `ψ_{mn} ← (ψ_{mn} + (−1)^{m−n} conj ψ_{−m,−n}) / 2`.
pub fn symmetrize_so3<T: Real>(coeffs: &[Complex<T>], bandwidth: usize) -> Vec<Complex<T>> {
    let stride = so3_len(bandwidth);
    let half = T::lit(0.5);
    let mut out = coeffs.to_vec();
    for (dst, src) in out.chunks_mut(stride).zip(coeffs.chunks(stride)) {
        for l in 0..bandwidth {
            let w = 2 * l + 1;
            let off = block_offset(l);
            for i in 0..w {
                for j in 0..w {
                    let (m, n) = (i as i64 - l as i64, j as i64 - l as i64);
                    let mirror = src[off + (w - 1 - i) * w + (w - 1 - j)].conj() * T::lit(sign(m - n));
                    dst[off + i * w + j] = (src[off + i * w + j] + mirror) * half;
                }
            }
        }
    }
    out
}

/// `ĝ[o]^l_{mn} = Σ_i f̂[i]^l_m conj(ψ̂[o,i]^l_n)` for `l < psi.bandwidth`.
pub fn s2_correlate_coeffs<T: Real>(
    f: &[S2Coefficients<T>],
    psi: &S2FilterBank<T>,
) -> Result<Vec<So3Coefficients<T>>> {
    psi.check()?;
    if f.len() != psi.c_in {
        return Err(Error::ChannelMismatch {
            expected: psi.c_in,
            actual: f.len(),
        });
    }
    let lmax = psi.bandwidth;
    if let Some(bad) = f.iter().find(|c| c.bandwidth < lmax) {
        return Err(Error::BandwidthMismatch(bad.bandwidth, lmax));
    }
    Ok(parallel::map_range(psi.c_out, |o| {
        let mut out = So3Coefficients::zeros(lmax);
        for (i, fi) in f.iter().enumerate() {
            let filt = psi.filter(o, i);
            for l in 0..lmax {
                let li = l as i64;
                let w = 2 * l + 1;
                let off = block_offset(l);
                for m in -li..=li {
                    let fm = fi.data[s2_index(l, m)];
                    let row = off + ((m + li) as usize) * w;
                    for n in -li..=li {
                        out.data[row + (n + li) as usize] += fm * filt[s2_index(l, n)].conj();
                    }
                }
            }
        }
        out
    }))
}

/// Gradients of [`s2_correlate_coeffs`] with respect to its inputs and filters.
pub fn s2_correlate_backward<T: Real>(
    f: &[S2Coefficients<T>],
    psi: &S2FilterBank<T>,
    dout: &[Vec<Complex<T>>],
) -> (Vec<Vec<Complex<T>>>, Vec<Complex<T>>) {
    let lmax = psi.bandwidth;
    let zero = Complex::new(T::zero(), T::zero());
    let df = parallel::map_range(psi.c_in, |i| {
        let mut g = vec![zero; f[i].data.len()];
        for (o, dz) in dout.iter().enumerate() {
            let filt = psi.filter(o, i);
            for l in 0..lmax {
                let li = l as i64;
                let w = 2 * l + 1;
                let off = block_offset(l);
                for m in -li..=li {
                    let row = off + ((m + li) as usize) * w;
                    let mut acc = zero;
                    for n in -li..=li {
                        acc += dz[row + (n + li) as usize] * filt[s2_index(l, n)];
                    }
                    g[s2_index(l, m)] += acc;
                }
            }
        }
        g
    });
    let stride = psi.stride();
    let dpsi_parts = parallel::map_range(psi.c_out * psi.c_in, |fo| {
        let (o, i) = (fo / psi.c_in, fo % psi.c_in);
        let mut g = vec![zero; stride];
        for l in 0..lmax {
            let li = l as i64;
            let w = 2 * l + 1;
            let off = block_offset(l);
            for n in -li..=li {
                let mut acc = zero;
                for m in -li..=li {
                    acc += dout[o][off + ((m + li) as usize) * w + (n + li) as usize].conj()
                        * f[i].data[s2_index(l, m)];
                }
                g[s2_index(l, n)] = acc;
            }
        }
        g
    });
    (df, dpsi_parts.concat())
}

/// `ĥ[o]^l = 8π²/(2l+1) Σ_i ĝ[i]^l (ψ̂[o,i]^l)^H` for `l < lmax`.
pub fn so3_correlate_coeffs<T: Real>(
    g: &[So3Coefficients<T>],
    psi: &So3FilterBank<T>,
    lmax: usize,
) -> Result<Vec<So3Coefficients<T>>> {
    psi.check()?;
    if g.len() != psi.c_in {
        return Err(Error::ChannelMismatch {
            expected: psi.c_in,
            actual: g.len(),
        });
    }
    if lmax > psi.bandwidth {
        return Err(Error::BandwidthMismatch(lmax, psi.bandwidth));
    }
    if let Some(bad) = g.iter().find(|c| c.bandwidth < lmax) {
        return Err(Error::BandwidthMismatch(bad.bandwidth, lmax));
    }
    Ok(parallel::map_range(psi.c_out, |o| {
        let mut out = So3Coefficients::zeros(lmax);
        for (i, gi) in g.iter().enumerate() {
            let filt = psi.filter(o, i);
            for l in 0..lmax {
                let w = 2 * l + 1;
                let off = block_offset(l);
                let scale = T::lit(8.0 * std::f64::consts::PI.powi(2) / w as f64);
                for k in 0..w {
                    for m in 0..w {
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for n in 0..w {
                            acc += gi.data[off + k * w + n] * filt[off + m * w + n].conj();
                        }
                        out.data[off + k * w + m] += acc * scale;
                    }
                }
            }
        }
        out
    }))
}

/// Gradients of [`so3_correlate_coeffs`]: `dĝ[i] = c_l Σ_o dĥ[o] ψ̂[o,i]`,
/// `dψ̂[o,i] = c_l dĥ[o]^H ĝ[i]`.
pub fn so3_correlate_backward<T: Real>(
    g: &[So3Coefficients<T>],
    psi: &So3FilterBank<T>,
    lmax: usize,
    dout: &[Vec<Complex<T>>],
) -> (Vec<Vec<Complex<T>>>, Vec<Complex<T>>) {
    let zero = Complex::new(T::zero(), T::zero());
    let dg = parallel::map_range(psi.c_in, |i| {
        let mut acc_blocks = vec![zero; g[i].data.len()];
        for (o, dz) in dout.iter().enumerate() {
            let filt = psi.filter(o, i);
            for l in 0..lmax {
                let w = 2 * l + 1;
                let off = block_offset(l);
                let scale = T::lit(8.0 * std::f64::consts::PI.powi(2) / w as f64);
                for k in 0..w {
                    for n in 0..w {
                        let mut acc = zero;
                        for m in 0..w {
                            acc += dz[off + k * w + m] * filt[off + m * w + n];
                        }
                        acc_blocks[off + k * w + n] += acc * scale;
                    }
                }
            }
        }
        acc_blocks
    });
    let stride = psi.stride();
    let dpsi = parallel::map_range(psi.c_out * psi.c_in, |fo| {
        let (o, i) = (fo / psi.c_in, fo % psi.c_in);
        let mut out = vec![zero; stride];
        for l in 0..lmax {
            let w = 2 * l + 1;
            let off = block_offset(l);
            let scale = T::lit(8.0 * std::f64::consts::PI.powi(2) / w as f64);
            for m in 0..w {
                for n in 0..w {
                    let mut acc = zero;
                    for k in 0..w {
                        acc += dout[o][off + k * w + m].conj() * g[i].data[off + k * w + n];
                    }
                    out[off + m * w + n] = acc * scale;
                }
            }
        }
        out
    });
    (dg, dpsi.concat())
}

/// S² correlation of a multichannel grid signal with a filter bank; the output
/// lives on the SO(3) grid of bandwidth `psi.bandwidth ≤ B`.
pub fn s2_correlate<T: Real>(f: &[S2Grid<T>], psi: &S2FilterBank<T>) -> Result<So3FeatureMap<T>> {
    let b = f.first().map(|g| g.bandwidth).ok_or(Error::ChannelMismatch {
        expected: psi.c_in,
        actual: 0,
    })?;
    if f.iter().any(|g| g.bandwidth != b) {
        return Err(Error::BandwidthMismatch(b, f.iter().map(|g| g.bandwidth).max().unwrap_or(b)));
    }
    if psi.bandwidth > b {
        return Err(Error::BandwidthMismatch(psi.bandwidth, b));
    }
    let fhat = f
        .iter()
        .map(|g| sht_forward_lmax(g, psi.bandwidth))
        .collect::<Result<Vec<_>>>()?;
    let out = s2_correlate_coeffs(&fhat, psi)?;
    Ok(synthesize_channels(&out, psi.bandwidth))
}

/// SO(3) correlation; `b_out` (default: input bandwidth) truncates degrees
/// `l ≥ b_out` and sets the output grid.
pub fn so3_correlate<T: Real>(
    g: &So3FeatureMap<T>,
    psi: &So3FilterBank<T>,
    b_out: Option<usize>,
) -> Result<So3FeatureMap<T>> {
    g.check()?;
    if g.channels != psi.c_in {
        return Err(Error::ChannelMismatch {
            expected: psi.c_in,
            actual: g.channels,
        });
    }
    let b_out = b_out.unwrap_or(g.bandwidth);
    if b_out > g.bandwidth || psi.bandwidth > g.bandwidth {
        return Err(Error::BandwidthMismatch(b_out.max(psi.bandwidth), g.bandwidth));
    }
    let lmax = psi.bandwidth.min(b_out);
    let ghat = parallel::map_range(g.channels, |c| so3_forward(g.channel(c), g.bandwidth, lmax))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let out = so3_correlate_coeffs(&ghat, psi, lmax)?;
    Ok(synthesize_channels(&out, b_out))
}

pub(crate) fn synthesize_channels<T: Real>(coeffs: &[So3Coefficients<T>], grid_b: usize) -> So3FeatureMap<T> {
    let grids = parallel::map(coeffs, |c| so3_inverse(c, grid_b));
    let mut out = So3FeatureMap::zeros(coeffs.len(), grid_b);
    for (c, grid) in grids.iter().enumerate() {
        out.channel_mut(c).copy_from_slice(grid);
    }
    out
}
