//! Structured-sparsity norms `Omega(b; A) = min_{a in A} 1/2 sum_j (b_j^2 / a_j + a_j)`
//! for the wedge cone and the cone generated by a box.
//!
//! Wedge, `A = {a_1 >= ... >= a_p >= 0}`: the inner minimization is a
//! Bregman isotonic problem, so the optimal `a` is the square root of the
//! non-increasing least-squares fit to `b^2`. Each pooled block `B`
//! contributes `sqrt(|B| * sum_B b^2)`.
//!
//! Box, `A = {s * a : s >= 0, lower <= a <= upper}`: for a fixed scale `s`
//! the optimal `a` clips the unconstrained minimizer into
//! `[s * lower, s * upper]`; the remaining one-dimensional problem in `s`
//! is convex and solved by golden-section search.
//!
//! Duals use `Omega*(w) = max_{a in A, sum a = 1} sqrt(sum_j a_j w_j^2)`.

use super::isotonic::{decreasing_blocks, decreasing_fit};
use crate::numeric::golden_min;

const GOLDEN_ITERS: usize = 200;

pub fn wedge_value(b: &[f64]) -> f64 {
    let sq: Vec<f64> = b.iter().map(|x| x * x).collect();
    decreasing_blocks(&sq)
        .iter()
        .map(|&(_, len, sum)| (len as f64 * sum).sqrt())
        .sum()
}

/// Optimal `a` in the wedge for the variational form.
pub fn wedge_weights(b: &[f64]) -> Vec<f64> {
    let sq: Vec<f64> = b.iter().map(|x| x * x).collect();
    decreasing_fit(&sq).into_iter().map(|m| m.max(0.0).sqrt()).collect()
}

/// Extreme points of the normalized wedge are `(1/k, ..., 1/k, 0, ...)`.
pub fn wedge_dual(z: &[f64]) -> f64 {
    let mut cum = 0.0;
    let mut best = 0.0f64;
    for (k, zj) in z.iter().enumerate() {
        cum += zj * zj;
        best = best.max(cum / (k + 1) as f64);
    }
    best.sqrt()
}

pub fn wedge_prox(v: &[f64], step: f64) -> Vec<f64> {
    let c = wedge_weights(v);
    v.iter()
        .zip(c)
        .map(|(&vj, cj)| {
            let a = (cj - step).max(0.0);
            if a == 0.0 {
                0.0
            } else {
                vj * a / (a + step)
            }
        })
        .collect()
}

pub fn wedge_subgradient(b: &[f64]) -> Vec<f64> {
    let a = wedge_weights(b);
    b.iter()
        .zip(a)
        .map(|(&bj, aj)| if aj > 0.0 { bj / aj } else { 0.0 })
        .collect()
}

fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

fn box_objective(b: &[f64], lower: &[f64], upper: &[f64], s: f64) -> f64 {
    b.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&bj, (&l, &u))| {
            let a = clip(bj.abs(), s * l, s * u);
            if a == 0.0 {
                if bj == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                0.5 * (bj * bj / a + a)
            }
        })
        .sum()
}

/// Optimal scale `s` for `b`, or `None` when `b == 0`.
fn box_scale(b: &[f64], lower: &[f64], upper: &[f64]) -> Option<f64> {
    let mut s_lo = f64::INFINITY;
    let mut s_hi = 0.0f64;
    for ((&bj, &l), &u) in b.iter().zip(lower).zip(upper) {
        let m = bj.abs();
        if m > 0.0 {
            s_lo = s_lo.min(m / u);
        }
        s_hi = s_hi.max(m / l);
    }
    if s_hi == 0.0 {
        return None;
    }
    let (s, _) = golden_min(|s| box_objective(b, lower, upper, s), s_lo, s_hi, GOLDEN_ITERS);
    Some(s)
}

pub fn box_value(lower: &[f64], upper: &[f64], b: &[f64]) -> f64 {
    match box_scale(b, lower, upper) {
        None => 0.0,
        Some(s) => box_objective(b, lower, upper, s),
    }
}

pub fn box_subgradient(lower: &[f64], upper: &[f64], b: &[f64]) -> Vec<f64> {
    let Some(s) = box_scale(b, lower, upper) else {
        return vec![0.0; b.len()];
    };
    b.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&bj, (&l, &u))| {
            if bj == 0.0 {
                0.0
            } else {
                bj / clip(bj.abs(), s * l, s * u)
            }
        })
        .collect()
}

pub fn box_dual(lower: &[f64], upper: &[f64], z: &[f64]) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    let w: Vec<f64> = z.iter().map(|x| x * x).collect();
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let sum_l: f64 = lower.iter().sum();
    let sum_u: f64 = upper.iter().sum();
    // Linear objective over the slice {s*l <= a <= s*u, sum a = 1}: start from
    // the lower corner and spend the remaining mass greedily.
    let slice_max = |s: f64| -> f64 {
        let mut val: f64 = lower.iter().zip(&w).map(|(l, wj)| s * l * wj).sum();
        let mut budget = 1.0 - s * sum_l;
        for &j in &order {
            if budget <= 0.0 {
                break;
            }
            let add = budget.min(s * (upper[j] - lower[j]));
            val += add * w[j];
            budget -= add;
        }
        val
    };
    let (_, neg) = golden_min(|s| -slice_max(s), 1.0 / sum_u, 1.0 / sum_l, GOLDEN_ITERS);
    (-neg).max(0.0).sqrt()
}

pub fn box_prox(lower: &[f64], upper: &[f64], v: &[f64], step: f64) -> Vec<f64> {
    let target: Vec<f64> = v.iter().map(|x| (x.abs() - step).max(0.0)).collect();
    let s_hi = target
        .iter()
        .zip(lower)
        .fold(0.0f64, |m, (t, l)| m.max(t / l));
    if s_hi == 0.0 {
        return vec![0.0; v.len()];
    }
    let coords = |s: f64| {
        target
            .iter()
            .zip(lower.iter().zip(upper))
            .map(move |(&t, (&l, &u))| clip(t, s * l, s * u))
    };
    let objective = |s: f64| -> f64 {
        coords(s)
            .zip(v)
            .map(|(a, &vj)| 0.5 * step * (vj * vj / (a + step) + a))
            .sum()
    };
    let (s, _) = golden_min(objective, 0.0, s_hi, GOLDEN_ITERS);
    coords(s)
        .zip(v)
        .map(|(a, &vj)| if a == 0.0 { 0.0 } else { vj * a / (a + step) })
        .collect()
}
