//! Pool-adjacent-violators for non-increasing fits.

/// A pooled run of consecutive entries.
#[derive(Debug, Clone, Copy)]
struct Block {
    start: usize,
    len: usize,
    sum: f64,
}

impl Block {
    fn mean(&self) -> f64 {
        self.sum / self.len as f64
    }
}

/// Least-squares non-increasing fit to `y` with unit weights.
///
/// Uses a stack of blocks; each new entry is pooled with its predecessor
/// while the predecessor's mean does not exceed it.
pub fn decreasing_fit(y: &[f64]) -> Vec<f64> {
    let mut stack: Vec<Block> = Vec::with_capacity(y.len());
    for (i, &v) in y.iter().enumerate() {
        let mut block = Block {
            start: i,
            len: 1,
            sum: v,
        };
        while let Some(top) = stack.last() {
            if top.mean() <= block.mean() {
                block = Block {
                    start: top.start,
                    len: top.len + block.len,
                    sum: top.sum + block.sum,
                };
                stack.pop();
            } else {
                break;
            }
        }
        stack.push(block);
    }
    let mut out = vec![0.0; y.len()];
    for b in &stack {
        let m = b.mean();
        out[b.start..b.start + b.len].fill(m);
    }
    out
}

/// Block decomposition of the non-increasing fit as `(start, len, sum)`.
pub fn decreasing_blocks(y: &[f64]) -> Vec<(usize, usize, f64)> {
    let fit = decreasing_fit(y);
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < y.len() {
        let mut j = i + 1;
        while j < y.len() && fit[j] == fit[i] {
            j += 1;
        }
        blocks.push((i, j - i, y[i..j].iter().sum()));
        i = j;
    }
    blocks
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sq_err(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
    }

    #[test]
    fn already_decreasing_is_fixed() {
        let y = [5.0, 3.0, 3.0, 1.0];
        assert_eq!(decreasing_fit(&y), y.to_vec());
    }

    #[test]
    fn pools_violators() {
        assert_eq!(decreasing_fit(&[1.0, 3.0]), vec![2.0, 2.0]);
        assert_eq!(decreasing_fit(&[3.0, 1.0, 2.0, 4.0]), vec![3.0, 7.0 / 3.0, 7.0 / 3.0, 7.0 / 3.0]);
    }

    proptest! {
        #[test]
        fn fit_is_monotone_and_mean_preserving(y in prop::collection::vec(-10.0f64..10.0, 1..30)) {
            let f = decreasing_fit(&y);
            for w in f.windows(2) {
                prop_assert!(w[0] >= w[1] - 1e-12);
            }
            let (sy, sf): (f64, f64) = (y.iter().sum(), f.iter().sum());
            prop_assert!((sy - sf).abs() < 1e-9);
        }

        #[test]
        fn fit_beats_random_monotone_candidates(
            y in prop::collection::vec(-5.0f64..5.0, 1..8),
            steps in prop::collection::vec(0.0f64..2.0, 8),
            top in -6.0f64..6.0,
        ) {
            let f = decreasing_fit(&y);
            let mut cand = Vec::with_capacity(y.len());
            let mut cur = top;
            for s in steps.iter().take(y.len()) {
                cand.push(cur);
                cur -= s;
            }
            prop_assert!(sq_err(&f, &y) <= sq_err(&cand, &y) + 1e-9);
        }
    }
}
