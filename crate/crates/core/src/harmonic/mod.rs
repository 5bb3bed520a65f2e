//! Harmonic analysis on S² and SO(3): transforms, correlations, rotations.
//!
//! Conventions used throughout:
//! * Euler angles are ZYZ, `R(α, β, γ) = Rz(α) Ry(β) Rz(γ)`.
//! * `D^l_{mn}(α, β, γ) = e^{-imα} d^l_{mn}(β) e^{-inγ}`; rotating a signal,
//!   `(L_R f)(x) = f(R⁻¹x)`, maps coefficients `f̂^l ↦ D^l(R) f̂^l`.
//! * S² correlation `[ψ ⋆ f](R) = ∫ f(x) ψ(R⁻¹x) dx` has SO(3) coefficients
//!   `f̂^l (ψ̂^l)^H`; SO(3) correlation `∫ ψ(R⁻¹Q) g(Q) dQ` has coefficients
//!   `8π²/(2l+1) · ĝ^l (ψ̂^l)^H`.

pub mod correlate;
pub mod dump;
pub mod plan;
pub mod quadrature;
pub mod rotation;
pub mod sht;
pub mod so3ft;
pub mod wigner;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{Complex, Real};

pub use correlate::{s2_correlate, so3_correlate, S2FilterBank, So3FilterBank};
pub use rotation::{rotate_s2, rotate_so3, wigner_big_d, RotationSpec};
pub use sht::{s2_index, sht_forward, sht_inverse};
pub use so3ft::{so3_forward, so3_inverse};
pub use wigner::{block_index, so3_len};

/// Single-channel real signal on the `2B × 2B` equiangular S² grid, `[α][β]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S2Grid<T> {
    pub bandwidth: usize,
    pub data: Vec<T>,
}

impl<T: Real> S2Grid<T> {
    pub fn zeros(bandwidth: usize) -> Self {
        S2Grid {
            bandwidth,
            data: vec![T::zero(); 4 * bandwidth * bandwidth],
        }
    }

    pub fn check(&self) -> Result<()> {
        let expected = 4 * self.bandwidth * self.bandwidth;
        if self.data.len() != expected {
            return Err(Error::BadGridShape {
                expected,
                actual: self.data.len(),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize) -> T {
        self.data[a * 2 * self.bandwidth + b]
    }
}

/// Spherical-harmonic coefficients `f̂^l_m`, `l < bandwidth`, indexed by [`s2_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct S2Coefficients<T> {
    pub bandwidth: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> S2Coefficients<T> {
    pub fn zeros(bandwidth: usize) -> Self {
        S2Coefficients {
            bandwidth,
            data: vec![Complex::new(T::zero(), T::zero()); bandwidth * bandwidth],
        }
    }

    pub fn get(&self, l: usize, m: i64) -> Complex<T> {
        self.data[s2_index(l, m)]
    }
}

/// SO(3) Fourier blocks `ĝ^l ∈ ℂ^{(2l+1)×(2l+1)}`, `l < bandwidth`, indexed by
/// [`block_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct So3Coefficients<T> {
    pub bandwidth: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Real> So3Coefficients<T> {
    pub fn zeros(bandwidth: usize) -> Self {
        So3Coefficients {
            bandwidth,
            data: vec![Complex::new(T::zero(), T::zero()); so3_len(bandwidth)],
        }
    }

    pub fn get(&self, l: usize, m: i64, n: i64) -> Complex<T> {
        self.data[block_index(l, m, n)]
    }

    /// Largest violation of the real-signal symmetry
    /// `ĝ^l_{−m,−n} = (−1)^{m−n} conj(ĝ^l_{mn})`.
    pub fn real_symmetry_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for l in 0..self.bandwidth {
            let li = l as i64;
            for m in -li..=li {
                for n in -li..=li {
                    let a = self.get(l, m, n);
                    let b = self.get(l, -m, -n);
                    let sign = if (m - n).rem_euclid(2) == 0 { T::one() } else { -T::one() };
                    let r = b - a.conj() * sign;
                    worst = worst.max(r.norm().as_f64());
                }
            }
        }
        worst
    }
}

/// Multichannel real signal on the `(2B)³` Euler grid, `[c][α][β][γ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct So3FeatureMap<T> {
    pub channels: usize,
    pub bandwidth: usize,
    pub data: Vec<T>,
}

impl<T: Real> So3FeatureMap<T> {
    pub fn zeros(channels: usize, bandwidth: usize) -> Self {
        let n = 2 * bandwidth;
        So3FeatureMap {
            channels,
            bandwidth,
            data: vec![T::zero(); channels * n * n * n],
        }
    }

    /// Number of grid points per channel, `L = (2B)³`.
    pub fn grid_len(&self) -> usize {
        let n = 2 * self.bandwidth;
        n * n * n
    }

    pub fn check(&self) -> Result<()> {
        let expected = self.channels * self.grid_len();
        if self.data.len() != expected {
            return Err(Error::BadGridShape {
                expected,
                actual: self.data.len(),
            });
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite entry in SO(3) feature map".into()));
        }
        Ok(())
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let s = self.grid_len();
        &self.data[c * s..(c + 1) * s]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let s = self.grid_len();
        &mut self.data[c * s..(c + 1) * s]
    }

    /// `(α, β, γ)` indices to a flat grid offset within a channel.
    #[inline]
    pub fn grid_index(&self, a: usize, b: usize, g: usize) -> usize {
        let n = 2 * self.bandwidth;
        (a * n + b) * n + g
    }
}
