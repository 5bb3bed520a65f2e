//! Self-attention over the `L` local features of one frame.
//!
//! `Q = W_q F`, `K = W_k F`, `V = W_v F`, `M = softmax_keys(QᵀK)`,
//! `A = V Mᵀ`, `F' = F + ω A`. `F` is channel-major `C × L`.

use crate::real::Real;

#[derive(Debug, Clone)]
pub struct AttentionCache<T> {
    pub q: Vec<T>,
    pub k: Vec<T>,
    pub v: Vec<T>,
    /// Row-major `L × L`, rows sum to one.
    pub m: Vec<T>,
    pub a: Vec<T>,
}

pub struct AttentionGrads<T> {
    pub df: Vec<T>,
    pub dwq: Vec<T>,
    pub dwk: Vec<T>,
    pub dwv: Vec<T>,
    pub domega: T,
}

/// `out[r × L] = W[r × c] · F[c × L]`.
fn project<T: Real>(w: &[T], f: &[T], rows: usize, c: usize, l: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows * l];
    for r in 0..rows {
        let dst = &mut out[r * l..(r + 1) * l];
        for j in 0..c {
            let wv = w[r * c + j];
            if wv == T::zero() {
                continue;
            }
            for (d, &x) in dst.iter_mut().zip(&f[j * l..(j + 1) * l]) {
                *d += wv * x;
            }
        }
    }
    out
}

/// `dW[r × c] = dOut[r × L] · Fᵀ`, and adds `Wᵀ dOut` into `df`.
fn project_backward<T: Real>(w: &[T], f: &[T], dout: &[T], rows: usize, c: usize, l: usize, df: &mut [T]) -> Vec<T> {
    let mut dw = vec![T::zero(); rows * c];
    for r in 0..rows {
        let d = &dout[r * l..(r + 1) * l];
        for j in 0..c {
            let x = &f[j * l..(j + 1) * l];
            dw[r * c + j] = d.iter().zip(x).map(|(&a, &b)| a * b).sum();
            let wv = w[r * c + j];
            for (g, &dv) in df[j * l..(j + 1) * l].iter_mut().zip(d) {
                *g += wv * dv;
            }
        }
    }
    dw
}

pub fn forward<T: Real>(
    f: &[T],
    c: usize,
    l: usize,
    wq: &[T],
    wk: &[T],
    wv: &[T],
    omega: T,
) -> (Vec<T>, AttentionCache<T>) {
    let cp = wq.len() / c;
    let q = project(wq, f, cp, c, l);
    let k = project(wk, f, cp, c, l);
    let v = project(wv, f, c, c, l);
    let mut m = vec![T::zero(); l * l];
    for (i, row) in m.chunks_mut(l).enumerate() {
        for p in 0..cp {
            let qi = q[p * l + i];
            for (s, &kj) in row.iter_mut().zip(&k[p * l..(p + 1) * l]) {
                *s += qi * kj;
            }
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
    let mut a = vec![T::zero(); c * l];
    for ch in 0..c {
        let vrow = &v[ch * l..(ch + 1) * l];
        for (i, dst) in a[ch * l..(ch + 1) * l].iter_mut().enumerate() {
            *dst = m[i * l..(i + 1) * l].iter().zip(vrow).map(|(&w, &x)| w * x).sum();
        }
    }
    let out = f.iter().zip(&a).map(|(&x, &y)| x + omega * y).collect();
    (out, AttentionCache { q, k, v, m, a })
}

#[allow(clippy::too_many_arguments)]
pub fn backward<T: Real>(
    f: &[T],
    c: usize,
    l: usize,
    wq: &[T],
    wk: &[T],
    wv: &[T],
    omega: T,
    cache: &AttentionCache<T>,
    dout: &[T],
) -> AttentionGrads<T> {
    let cp = wq.len() / c;
    let domega = dout.iter().zip(&cache.a).map(|(&d, &a)| d * a).sum();
    let mut df = dout.to_vec();
    let da: Vec<T> = dout.iter().map(|&d| omega * d).collect();
    // dV[c, j] = Σ_i dA[c, i] M[i, j];  dM[i, j] = Σ_c dA[c, i] V[c, j]
    let mut dv = vec![T::zero(); c * l];
    let mut dm = vec![T::zero(); l * l];
    for ch in 0..c {
        let vrow = &cache.v[ch * l..(ch + 1) * l];
        let darow = &da[ch * l..(ch + 1) * l];
        let dvrow = &mut dv[ch * l..(ch + 1) * l];
        for i in 0..l {
            let d = darow[i];
            if d == T::zero() {
                continue;
            }
            let mrow = &cache.m[i * l..(i + 1) * l];
            for (g, &w) in dvrow.iter_mut().zip(mrow) {
                *g += d * w;
            }
            for (g, &x) in dm[i * l..(i + 1) * l].iter_mut().zip(vrow) {
                *g += d * x;
            }
        }
    }
    // softmax backward, row-wise; reuse dm as dS
    for i in 0..l {
        let mrow = &cache.m[i * l..(i + 1) * l];
        let drow = &mut dm[i * l..(i + 1) * l];
        let dot: T = mrow.iter().zip(drow.iter()).map(|(&a, &b)| a * b).sum();
        for (d, &p) in drow.iter_mut().zip(mrow) {
            *d = p * (*d - dot);
        }
    }
    let ds = dm;
    let mut dq = vec![T::zero(); cp * l];
    let mut dk = vec![T::zero(); cp * l];
    for p in 0..cp {
        let qrow = &cache.q[p * l..(p + 1) * l];
        let krow = &cache.k[p * l..(p + 1) * l];
        for i in 0..l {
            let srow = &ds[i * l..(i + 1) * l];
            dq[p * l + i] = srow.iter().zip(krow).map(|(&s, &k)| s * k).sum();
            let qi = qrow[i];
            for (g, &s) in dk[p * l..(p + 1) * l].iter_mut().zip(srow) {
                *g += s * qi;
            }
        }
    }
    let dwq = project_backward(wq, f, &dq, cp, c, l, &mut df);
    let dwk = project_backward(wk, f, &dk, cp, c, l, &mut df);
    let dwv = project_backward(wv, f, &dv, c, c, l, &mut df);
    AttentionGrads {
        df,
        dwq,
        dwk,
        dwv,
        domega,
    }
}
