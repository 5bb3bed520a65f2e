//! Precomputed, typed tables for transforms on one grid/degree combination.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::real::{Complex, Real};

use super::{quadrature, wigner};

/// Tables for a `2b`-sample grid and harmonic degrees `l < lmax` (`lmax ≤ b`).
#[derive(Debug)]
pub struct GridPlan<T: Real> {
    pub b: usize,
    pub lmax: usize,
    /// Polar quadrature weights `w_k`.
    pub weights: Vec<T>,
    /// `[k][block_index(l, m, n)]`
    d: Vec<T>,
    /// `[(m + lmax − 1) · 2b + j] = e^{−imα_j}`
    twiddle: Vec<Complex<T>>,
}

impl<T: Real> GridPlan<T> {
    fn build(b: usize, lmax: usize) -> Self {
        assert!(lmax <= b, "lmax {lmax} exceeds grid bandwidth {b}");
        let table = wigner::table(b, lmax);
        let n = 2 * b;
        let nf = 2 * lmax.max(1) - 1;
        let mut twiddle = Vec::with_capacity(nf * n);
        for mi in 0..nf {
            let m = mi as f64 - (lmax as f64 - 1.0);
            for j in 0..n {
                let phase = -m * quadrature::alpha(b, j);
                twiddle.push(Complex::new(T::lit(phase.cos()), T::lit(phase.sin())));
            }
        }
        GridPlan {
            b,
            lmax,
            weights: quadrature::weights(b).into_iter().map(T::lit).collect(),
            d: table.values.iter().map(|&x| T::lit(x)).collect(),
            twiddle,
        }
    }

    /// Shared plan for `(b, lmax)` in precision `T`.
    pub fn get(b: usize, lmax: usize) -> Arc<Self> {
        type Cache = Mutex<HashMap<(TypeId, usize, usize), Arc<dyn Any + Send + Sync>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let key = (TypeId::of::<T>(), b, lmax);
        if let Some(p) = cache.lock().expect("plan cache").get(&key) {
            return p.clone().downcast::<Self>().expect("plan type");
        }
        let built: Arc<dyn Any + Send + Sync> = Arc::new(Self::build(b, lmax));
        cache
            .lock()
            .expect("plan cache")
            .entry(key)
            .or_insert(built)
            .clone()
            .downcast::<Self>()
            .expect("plan type")
    }

    #[inline]
    pub fn n(&self) -> usize {
        2 * self.b
    }

    /// Number of signed frequencies `|m| < lmax`.
    #[inline]
    pub fn nf(&self) -> usize {
        2 * self.lmax.max(1) - 1
    }

    #[inline]
    pub fn d_at(&self, k: usize) -> &[T] {
        let s = wigner::so3_len(self.lmax);
        &self.d[k * s..(k + 1) * s]
    }

    /// Row of `e^{−imα_j}` over `j` for frequency index `mi = m + lmax − 1`.
    #[inline]
    pub fn twiddle_row(&self, mi: usize) -> &[Complex<T>] {
        let n = self.n();
        &self.twiddle[mi * n..(mi + 1) * n]
    }
}
