//! Lazy quadruplet loss on L2-normalised descriptors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub m1: f64,
    pub m2: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Margins { m1: 0.5, m2: 0.2 }
    }
}

/// Gradients with respect to each tuple member's descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrupletGrads<T> {
    pub anchor: Vec<T>,
    pub positives: Vec<Vec<T>>,
    pub negatives: Vec<Vec<T>>,
    pub extra_negative: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrupletLoss<T> {
    pub value: T,
    /// Arg-max `(i, j)` of the first term, `None` when its hinge is inactive.
    pub first: Option<(usize, usize)>,
    /// Arg-max `(i, k)` of the second term, `None` when its hinge is inactive.
    pub second: Option<(usize, usize)>,
    pub grads: QuadrupletGrads<T>,
}

pub fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Adds `s · ∂d(a,b)/∂a` to `ga` and `s · ∂d(a,b)/∂b` to `gb`.
fn distance_grad<T: Real>(a: &[T], b: &[T], s: T, ga: &mut [T], gb: &mut [T]) {
    let d = distance(a, b);
    if d == T::zero() {
        return;
    }
    for i in 0..a.len() {
        let g = s * (a[i] - b[i]) / d;
        ga[i] += g;
        gb[i] -= g;
    }
}

/// First maximiser in row-major order of `f(i, j)`.
fn argmax2<T: Real>(ni: usize, nj: usize, f: impl Fn(usize, usize) -> T) -> (usize, usize, T) {
    let mut best = (0, 0, f(0, 0));
    for i in 0..ni {
        for j in 0..nj {
            let v = f(i, j);
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    best
}

/// `max_{i,j}[m1 + d(a,p_i) − d(a,n_j)]₊ + max_{i,k}[m2 + d(a,p_i) − d(n_k,n*)]₊`
/// with its subgradient. Ties pick the first maximising pair.
pub fn lazy_quadruplet_loss<T: Real>(
    anchor: &[T],
    positives: &[&[T]],
    negatives: &[&[T]],
    extra_negative: &[T],
    margins: Margins,
) -> Result<QuadrupletLoss<T>> {
    let dim = anchor.len();
    if positives.is_empty() {
        return Err(Error::EmptyInput("positives"));
    }
    if negatives.is_empty() {
        return Err(Error::EmptyInput("negatives"));
    }
    for v in positives.iter().chain(negatives).chain(std::iter::once(&extra_negative)) {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
    }
    let dp: Vec<T> = positives.iter().map(|p| distance(anchor, p)).collect();
    let dn: Vec<T> = negatives.iter().map(|n| distance(anchor, n)).collect();
    let dns: Vec<T> = negatives.iter().map(|n| distance(n, extra_negative)).collect();
    let (m1, m2) = (T::lit(margins.m1), T::lit(margins.m2));
    let (i1, j1, t1) = argmax2(dp.len(), dn.len(), |i, j| m1 + dp[i] - dn[j]);
    let (i2, k2, t2) = argmax2(dp.len(), dns.len(), |i, k| m2 + dp[i] - dns[k]);
    let zero = T::zero();
    let mut grads = QuadrupletGrads {
        anchor: vec![zero; dim],
        positives: vec![vec![zero; dim]; positives.len()],
        negatives: vec![vec![zero; dim]; negatives.len()],
        extra_negative: vec![zero; dim],
    };
    let mut value = zero;
    let first = (t1 > zero).then_some((i1, j1));
    let second = (t2 > zero).then_some((i2, k2));
    if let Some((i, j)) = first {
        value += t1;
        distance_grad(anchor, positives[i], T::one(), &mut grads.anchor, &mut grads.positives[i]);
        distance_grad(anchor, negatives[j], -T::one(), &mut grads.anchor, &mut grads.negatives[j]);
    }
    if let Some((i, k)) = second {
        value += t2;
        distance_grad(anchor, positives[i], T::one(), &mut grads.anchor, &mut grads.positives[i]);
        distance_grad(
            negatives[k],
            extra_negative,
            -T::one(),
            &mut grads.negatives[k],
            &mut grads.extra_negative,
        );
    }
    Ok(QuadrupletLoss {
        value,
        first,
        second,
        grads,
    })
}
