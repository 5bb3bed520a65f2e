//! Soft-assignment VLAD aggregation of `L` local features into a `K·C` descriptor.

use crate::real::Real;

/// Norms below this are treated as zero and normalise to the zero vector.
pub const NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct VladCache<T> {
    /// Row-major `L × K` soft assignments.
    pub assign: Vec<T>,
    /// Row-major `K × C` intra-normalised residual sums.
    pub u: Vec<T>,
    pub cluster_norms: Vec<T>,
    pub global_norm: T,
    pub out: Vec<T>,
}

pub struct VladGrads<T> {
    pub df: Vec<T>,
    pub dcentroids: Vec<T>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

/// Soft assignment `a_{ik} = softmax_k(w_k · x_i + b_k)` as row-major `L × K`.
pub fn soft_assign<T: Real>(f: &[T], c: usize, l: usize, w: &[T], b: &[T]) -> Vec<T> {
    let k = b.len();
    let mut a = vec![T::zero(); l * k];
    for (i, row) in a.chunks_mut(k).enumerate() {
        for (kk, dst) in row.iter_mut().enumerate() {
            let mut s = b[kk];
            for ch in 0..c {
                s += w[kk * c + ch] * f[ch * l + i];
            }
            *dst = s;
        }
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for s in row.iter_mut() {
            *s = (*s - max).exp();
            total += *s;
        }
        for s in row.iter_mut() {
            *s /= total;
        }
    }
    a
}

fn normalize<T: Real>(v: &mut [T]) -> T {
    let n = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    if n.as_f64() < NORM_GUARD {
        v.iter_mut().for_each(|x| *x = T::zero());
    } else {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

pub fn forward<T: Real>(f: &[T], c: usize, l: usize, centroids: &[T], w: &[T], b: &[T]) -> (Vec<T>, VladCache<T>) {
    let k = b.len();
    let assign = soft_assign(f, c, l, w, b);
    let mut u = vec![T::zero(); k * c];
    for kk in 0..k {
        let mass: T = (0..l).map(|i| assign[i * k + kk]).sum();
        for ch in 0..c {
            let s: T = (0..l).map(|i| assign[i * k + kk] * f[ch * l + i]).sum();
            u[kk * c + ch] = s - mass * centroids[kk * c + ch];
        }
    }
    let cluster_norms: Vec<T> = u.chunks_mut(c).map(normalize).collect();
    let mut out = u.clone();
    let global_norm = normalize(&mut out);
    (
        out.clone(),
        VladCache {
            assign,
            u,
            cluster_norms,
            global_norm,
            out,
        },
    )
}

fn normalize_backward<T: Real>(y: &[T], norm: T, dy: &[T]) -> Vec<T> {
    if norm.as_f64() < NORM_GUARD {
        return vec![T::zero(); y.len()];
    }
    let dot: T = y.iter().zip(dy).map(|(&a, &b)| a * b).sum();
    y.iter().zip(dy).map(|(&yv, &d)| (d - yv * dot) / norm).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn backward<T: Real>(
    f: &[T],
    c: usize,
    l: usize,
    centroids: &[T],
    w: &[T],
    b: &[T],
    cache: &VladCache<T>,
    dout: &[T],
) -> VladGrads<T> {
    let k = b.len();
    let du = normalize_backward(&cache.out, cache.global_norm, dout);
    let mut dv = vec![T::zero(); k * c];
    for kk in 0..k {
        let r = kk * c..(kk + 1) * c;
        let g = normalize_backward(&cache.u[r.clone()], cache.cluster_norms[kk], &du[r.clone()]);
        dv[r].copy_from_slice(&g);
    }
    let a = &cache.assign;
    let mut df = vec![T::zero(); c * l];
    let mut dcentroids = vec![T::zero(); k * c];
    let mut dw = vec![T::zero(); k * c];
    let mut db = vec![T::zero(); k];
    for kk in 0..k {
        let mass: T = (0..l).map(|i| a[i * k + kk]).sum();
        for ch in 0..c {
            dcentroids[kk * c + ch] = -mass * dv[kk * c + ch];
        }
    }
    let mut da = vec![T::zero(); k];
    for i in 0..l {
        for (kk, dak) in da.iter_mut().enumerate() {
            let mut s = T::zero();
            for ch in 0..c {
                let dvk = dv[kk * c + ch];
                s += dvk * (f[ch * l + i] - centroids[kk * c + ch]);
                df[ch * l + i] += a[i * k + kk] * dvk;
            }
            *dak = s;
        }
        let row = &a[i * k..(i + 1) * k];
        let dot: T = row.iter().zip(&da).map(|(&p, &d)| p * d).sum();
        for kk in 0..k {
            let dl = row[kk] * (da[kk] - dot);
            db[kk] += dl;
            for ch in 0..c {
                dw[kk * c + ch] += dl * f[ch * l + i];
                df[ch * l + i] += dl * w[kk * c + ch];
            }
        }
    }
    VladGrads {
        df,
        dcentroids,
        dw,
        db,
    }
}
