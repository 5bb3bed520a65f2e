//! Wigner small-d matrices `d^l_{mn}(β)` and their grid tables.
//!
//! Convention: `D^l_{mn}(α, β, γ) = e^{-imα} d^l_{mn}(β) e^{-inγ}` for the ZYZ
//! rotation `Rz(α) Ry(β) Rz(γ)`, with `d^1_{10}(β) = -sin β / √2`.
//! Matrices are computed by the three-term recurrence in `l`, seeded at
//! `l = max(|m|, |n|)` where the closed form has a single term.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::quadrature;

/// Number of entries in degree blocks `0..lmax`, i.e. `Σ (2l+1)²`.
pub const fn so3_len(lmax: usize) -> usize {
    // Σ_{l<L} (2l+1)² = L(4L² − 1)/3
    if lmax == 0 {
        return 0;
    }
    lmax * (4 * lmax * lmax - 1) / 3
}

/// Offset of degree `l` in a concatenation of `(2l+1)²` blocks.
#[inline]
pub const fn block_offset(l: usize) -> usize {
    so3_len(l)
}

/// Flat index of `(l, m, n)` in a block table.
#[inline]
pub fn block_index(l: usize, m: i64, n: i64) -> usize {
    let w = (2 * l + 1) as i64;
    let l = l as i64;
    block_offset(l as usize) + ((m + l) * w + (n + l)) as usize
}

fn ln_factorial(n: usize) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let t = TABLE.get_or_init(|| {
        let mut v = vec![0.0f64; 512];
        for i in 1..v.len() {
            v[i] = v[i - 1] + (i as f64).ln();
        }
        v
    });
    t[n]
}

/// Closed-form sum for a single element. Accurate for small `l`; used to seed
/// the recurrence where it reduces to one term.
pub fn wigner_d_explicit(l: usize, m: i64, n: i64, beta: f64) -> f64 {
    let j = l as i64;
    if m.abs() > j || n.abs() > j {
        return 0.0;
    }
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let pref = 0.5
        * (ln_factorial((j + m) as usize)
            + ln_factorial((j - m) as usize)
            + ln_factorial((j + n) as usize)
            + ln_factorial((j - n) as usize));
    let s_min = 0.max(n - m);
    let s_max = (j + n).min(j - m);
    let mut total = 0.0;
    for k in s_min..=s_max {
        let denom = ln_factorial((j + n - k) as usize)
            + ln_factorial(k as usize)
            + ln_factorial((m - n + k) as usize)
            + ln_factorial((j - m - k) as usize);
        let sign = if (m - n + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let pc = (2 * j + n - m - 2 * k) as i32;
        let ps = (m - n + 2 * k) as i32;
        total += sign * (pref - denom).exp() * c.powi(pc) * s.powi(ps);
    }
    total
}

/// All blocks `d^l(β)` for `l < lmax`, laid out as in [`block_index`].
pub fn wigner_d_blocks(lmax: usize, beta: f64) -> Vec<f64> {
    let mut out = vec![0.0; so3_len(lmax)];
    if lmax == 0 {
        return out;
    }
    let cb = beta.cos();
    let top = lmax as i64 - 1;
    for m in -top..=top {
        for n in -top..=top {
            let l0 = m.abs().max(n.abs());
            let seed = wigner_d_explicit(l0 as usize, m, n, beta);
            out[block_index(l0 as usize, m, n)] = seed;
            let (mut prev, mut cur) = (0.0, seed);
            let (mf, nf) = (m as f64, n as f64);
            for j in l0..top {
                let jf = j as f64;
                let j1 = jf + 1.0;
                let root = ((j1 * j1 - mf * mf) * (j1 * j1 - nf * nf)).sqrt();
                let next = if j == 0 {
                    cb * cur
                } else {
                    let a = j1 * (2.0 * jf + 1.0) / root;
                    let b = j1 * ((jf * jf - mf * mf) * (jf * jf - nf * nf)).sqrt() / (jf * root);
                    a * (cb - mf * nf / (jf * j1)) * cur - b * prev
                };
                out[block_index((j + 1) as usize, m, n)] = next;
                prev = cur;
                cur = next;
            }
        }
    }
    out
}

/// `d^l(β_k)` for every polar node of a bandwidth-`b` grid and `l < lmax`.
#[derive(Debug)]
pub struct WignerTable {
    pub b: usize,
    pub lmax: usize,
    /// `[k][block_index(l, m, n)]`
    pub values: Vec<f64>,
}

impl WignerTable {
    fn build(b: usize, lmax: usize) -> Self {
        let stride = so3_len(lmax);
        let mut values = Vec::with_capacity(2 * b * stride);
        for beta in quadrature::betas(b) {
            values.extend(wigner_d_blocks(lmax, beta));
        }
        WignerTable { b, lmax, values }
    }

    pub fn stride(&self) -> usize {
        so3_len(self.lmax)
    }

    pub fn at(&self, k: usize) -> &[f64] {
        let s = self.stride();
        &self.values[k * s..(k + 1) * s]
    }
}

/// Shared, immutable table for `(b, lmax)`; built once per process.
pub fn table(b: usize, lmax: usize) -> Arc<WignerTable> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<WignerTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("wigner cache").get(&(b, lmax)) {
        return t.clone();
    }
    let built = Arc::new(WignerTable::build(b, lmax));
    cache
        .lock()
        .expect("wigner cache")
        .entry((b, lmax))
        .or_insert(built)
        .clone()
}
