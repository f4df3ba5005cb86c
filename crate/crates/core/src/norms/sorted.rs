//! Sorted-l1 (SLOPE) norm `J(b) = sum_i w_i |b|_(i)` with `w` non-increasing.

use crate::numeric::order_by_magnitude;

pub fn value(weights: &[f64], b: &[f64]) -> f64 {
    order_by_magnitude(b)
        .iter()
        .zip(weights)
        .map(|(&j, w)| w * b[j].abs())
        .sum()
}

/// `max_k (sum_{j<=k} |z|_(j)) / (sum_{j<=k} w_j)`.
pub fn dual(weights: &[f64], z: &[f64]) -> f64 {
    let order = order_by_magnitude(z);
    let (mut num, mut den, mut best) = (0.0, 0.0, 0.0f64);
    for (&j, w) in order.iter().zip(weights) {
        num += z[j].abs();
        den += w;
        best = best.max(num / den);
    }
    best
}

/// `argmin_b 1/2 ||b - v||^2 + step * J(b)`.
///
/// Sort `|v|` decreasingly, subtract the scaled weights, take the
/// non-increasing projection with a stack of pooled blocks, clip at zero
/// and undo the sort and signs.
pub fn prox(weights: &[f64], v: &[f64], step: f64) -> Vec<f64> {
    let order = order_by_magnitude(v);
    // (start, len, sum) blocks on the stack
    let mut stack: Vec<(usize, usize, f64)> = Vec::with_capacity(v.len());
    for (i, (&j, w)) in order.iter().zip(weights).enumerate() {
        let mut block = (i, 1usize, v[j].abs() - step * w);
        while let Some(&(s, l, sum)) = stack.last() {
            if sum / l as f64 <= block.2 / block.1 as f64 {
                block = (s, l + block.1, sum + block.2);
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(block);
    }
    let mut out = vec![0.0; v.len()];
    for (start, len, sum) in stack {
        let m = (sum / len as f64).max(0.0);
        for &j in &order[start..start + len] {
            out[j] = m * v[j].signum();
        }
    }
    out
}

pub fn subgradient(weights: &[f64], b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; b.len()];
    for (&j, w) in order_by_magnitude(b).iter().zip(weights) {
        z[j] = if b[j] == 0.0 { 0.0 } else { w * b[j].signum() };
    }
    z
}

/// Non-increasing sequence from `start` down to `end` in `len` equal steps.
pub fn linear_sequence(start: f64, end: f64, len: usize) -> Vec<f64> {
    match len {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..len)
            .map(|i| start + (end - start) * i as f64 / (len - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn value_direct_formula() {
        assert_eq!(value(&[3.0, 2.0, 1.0], &[1.0, 0.0, 2.0]), 8.0);
    }

    #[test]
    fn dual_two_term_formula() {
        assert_relative_eq!(dual(&[2.0, 1.0], &[3.0, 1.0]), 1.5);
    }

    #[test]
    fn prox_with_constant_weights_is_soft_threshold() {
        let p = prox(&[1.0, 1.0, 1.0], &[3.0, -0.5, -2.0], 1.0);
        assert_eq!(p, vec![2.0, 0.0, -1.0]);
    }

    #[test]
    fn prox_pools_equal_magnitudes() {
        // |v| = (3,3), w = (2,1): raw (1,2) violates ordering, pooled to 1.5
        let p = prox(&[2.0, 1.0], &[3.0, 3.0], 1.0);
        assert_relative_eq!(p[0], 1.5);
        assert_relative_eq!(p[1], 1.5);
    }

    #[test]
    fn subgradient_attains_norm() {
        let w = [3.0, 2.0, 1.0];
        let b = [1.0, -4.0, 2.0];
        let z = subgradient(&w, &b);
        let zb: f64 = z.iter().zip(&b).map(|(a, c)| a * c).sum();
        assert_relative_eq!(zb, value(&w, &b));
        assert_relative_eq!(dual(&w, &z), 1.0);
    }

    #[test]
    fn linear_sequence_endpoints() {
        let s = linear_sequence(1.0, 0.1, 500);
        assert_eq!(s.len(), 500);
        assert_eq!(s[0], 1.0);
        assert_relative_eq!(s[499], 0.1, max_relative = 1e-14);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
    }
}
