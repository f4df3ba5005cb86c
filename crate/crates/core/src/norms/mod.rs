//! Penalty norms: value, dual norm, proximal operator, subgradient and the
//! complement norm used for weak decomposability.
//!
//! [`NormSpec`] is the serializable description; [`Norm`] is a spec bound to
//! a dimension and validated once, so the numeric routines never fail.
//! All index sets are 0-based.

pub mod complement;
pub mod isotonic;
pub mod sorted;
pub mod structured;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect_threshold, l1, l2, linf, soft_threshold};

pub use complement::ComplementNorm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cone", rename_all = "kebab-case")]
pub enum ConeSpec {
    /// Cone generated by the box `lower <= a <= upper`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// `a_1 >= a_2 >= ... >= a_p >= 0`.
    Wedge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NormSpec {
    L1,
    /// `sum_j sqrt(|G_j|) ||b_{G_j}||_2` over a partition of the coordinates.
    Group { groups: Vec<Vec<usize>> },
    /// `sum_i lambda_i |b|_(i)` for a non-increasing positive sequence.
    SortedL1 { lambda_seq: Vec<f64> },
    /// `l1_weight ||b||_1 + group_weight sum_j sqrt(|G_j|) ||b_{G_j}||_2`.
    SparseGroup {
        l1_weight: f64,
        group_weight: f64,
        groups: Vec<Vec<usize>>,
    },
    Structured { cone: ConeSpec },
}

impl NormSpec {
    /// Validates the spec for coefficient vectors of length `p`.
    pub fn build(&self, p: usize) -> Result<Norm> {
        Norm::new(self.clone(), p)
    }

    pub fn name(&self) -> &'static str {
        match self {
            NormSpec::L1 => "l1",
            NormSpec::Group { .. } => "group",
            NormSpec::SortedL1 { .. } => "sorted-l1",
            NormSpec::SparseGroup { .. } => "sparse-group",
            NormSpec::Structured {
                cone: ConeSpec::Wedge,
            } => "wedge",
            NormSpec::Structured {
                cone: ConeSpec::Box { .. },
            } => "box",
        }
    }

    /// Natural dimension carried by the spec, if any.
    pub fn implied_dim(&self) -> Option<usize> {
        match self {
            NormSpec::L1 | NormSpec::Structured { cone: ConeSpec::Wedge } => None,
            NormSpec::Group { groups } | NormSpec::SparseGroup { groups, .. } => {
                Some(groups.iter().map(Vec::len).sum())
            }
            NormSpec::SortedL1 { lambda_seq } => Some(lambda_seq.len()),
            NormSpec::Structured {
                cone: ConeSpec::Box { lower, .. },
            } => Some(lower.len()),
        }
    }
}

fn validate_partition(groups: &[Vec<usize>], p: usize) -> Result<()> {
    let mut seen = vec![false; p];
    for (gi, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::InvalidSpec(format!("group {gi} is empty")));
        }
        for &j in g {
            if j >= p {
                return Err(Error::InvalidSpec(format!(
                    "group {gi} contains index {j}, outside 0..{p}"
                )));
            }
            if seen[j] {
                return Err(Error::InvalidSpec(format!(
                    "index {j} appears in more than one group; groups must be disjoint"
                )));
            }
            seen[j] = true;
        }
    }
    if let Some(j) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidSpec(format!(
            "index {j} is not covered by any group; groups must partition 0..{p}"
        )));
    }
    Ok(())
}

fn validate_weights(lambda_seq: &[f64], p: usize) -> Result<()> {
    if lambda_seq.len() != p {
        return Err(Error::DimensionMismatch {
            what: "sorted-l1 weight sequence length (p)",
            expected: p,
            found: lambda_seq.len(),
        });
    }
    if lambda_seq.iter().any(|w| !w.is_finite() || *w <= 0.0) {
        return Err(Error::InvalidSpec(
            "sorted-l1 weights must be finite and strictly positive".into(),
        ));
    }
    if lambda_seq.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidSpec(
            "sorted-l1 weights must be non-increasing".into(),
        ));
    }
    Ok(())
}

/// A validated norm on `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Norm {
    spec: NormSpec,
    dim: usize,
}

impl Norm {
    pub fn new(spec: NormSpec, dim: usize) -> Result<Self> {
        match &spec {
            NormSpec::L1 => {}
            NormSpec::Group { groups } => validate_partition(groups, dim)?,
            NormSpec::SortedL1 { lambda_seq } => validate_weights(lambda_seq, dim)?,
            NormSpec::SparseGroup {
                l1_weight,
                group_weight,
                groups,
            } => {
                validate_partition(groups, dim)?;
                let ok = |w: &f64| w.is_finite() && *w >= 0.0;
                if !ok(l1_weight) || !ok(group_weight) {
                    return Err(Error::InvalidSpec(
                        "sparse-group weights must be finite and >= 0".into(),
                    ));
                }
                if *l1_weight == 0.0 && *group_weight == 0.0 {
                    return Err(Error::InvalidSpec(
                        "sparse-group weights cannot both be zero".into(),
                    ));
                }
            }
            NormSpec::Structured { cone } => match cone {
                ConeSpec::Wedge => {}
                ConeSpec::Box { lower, upper } => {
                    if lower.len() != dim || upper.len() != dim {
                        return Err(Error::DimensionMismatch {
                            what: "box cone bounds length (p)",
                            expected: dim,
                            found: if lower.len() != dim { lower.len() } else { upper.len() },
                        });
                    }
                    for (l, u) in lower.iter().zip(upper) {
                        if !(l.is_finite() && u.is_finite() && *l > 0.0 && u >= l) {
                            return Err(Error::InvalidSpec(format!(
                                "box cone needs finite bounds with 0 < lower <= upper, got [{l}, {u}]"
                            )));
                        }
                    }
                }
            },
        }
        Ok(Self { spec, dim })
    }

    pub fn spec(&self) -> &NormSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_len(&self, v: &[f64]) {
        assert_eq!(
            v.len(),
            self.dim,
            "vector length {} does not match norm dimension {}",
            v.len(),
            self.dim
        );
    }

    pub fn value(&self, b: &[f64]) -> f64 {
        self.check_len(b);
        match &self.spec {
            NormSpec::L1 => l1(b),
            NormSpec::Group { groups } => group_value(groups, b),
            NormSpec::SortedL1 { lambda_seq } => sorted::value(lambda_seq, b),
            NormSpec::SparseGroup {
                l1_weight,
                group_weight,
                groups,
            } => l1_weight * l1(b) + group_weight * group_value(groups, b),
            NormSpec::Structured { cone } => match cone {
                ConeSpec::Wedge => structured::wedge_value(b),
                ConeSpec::Box { lower, upper } => structured::box_value(lower, upper, b),
            },
        }
    }

    /// `max { z^T b : value(b) <= 1 }`.
    pub fn dual(&self, z: &[f64]) -> f64 {
        self.check_len(z);
        match &self.spec {
            NormSpec::L1 => linf(z),
            NormSpec::Group { groups } => group_dual(groups, z),
            NormSpec::SortedL1 { lambda_seq } => sorted::dual(lambda_seq, z),
            NormSpec::SparseGroup {
                l1_weight,
                group_weight,
                groups,
            } => groups
                .iter()
                .map(|g| {
                    let zg: Vec<f64> = g.iter().map(|&j| z[j]).collect();
                    sparse_group_block_dual(*l1_weight, *group_weight, &zg)
                })
                .fold(0.0, f64::max),
            NormSpec::Structured { cone } => match cone {
                ConeSpec::Wedge => structured::wedge_dual(z),
                ConeSpec::Box { lower, upper } => structured::box_dual(lower, upper, z),
            },
        }
    }

    /// `argmin_b 1/2 ||b - v||_2^2 + step * value(b)`.
    pub fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        self.check_len(v);
        assert!(step >= 0.0, "prox step must be non-negative");
        if step == 0.0 {
            return v.to_vec();
        }
        match &self.spec {
            NormSpec::L1 => v.iter().map(|x| soft_threshold(*x, step)).collect(),
            NormSpec::Group { groups } => group_prox(groups, v.to_vec(), step),
            NormSpec::SortedL1 { lambda_seq } => sorted::prox(lambda_seq, v, step),
            NormSpec::SparseGroup {
                l1_weight,
                group_weight,
                groups,
            } => {
                let shrunk = v.iter().map(|x| soft_threshold(*x, step * l1_weight)).collect();
                group_prox(groups, shrunk, step * group_weight)
            }
            NormSpec::Structured { cone } => match cone {
                ConeSpec::Wedge => structured::wedge_prox(v, step),
                ConeSpec::Box { lower, upper } => structured::box_prox(lower, upper, v, step),
            },
        }
    }

    /// A subgradient `z` with `z^T b = value(b)` and `dual(z) <= 1`.
    pub fn subgradient(&self, b: &[f64]) -> Vec<f64> {
        self.check_len(b);
        match &self.spec {
            NormSpec::L1 => b.iter().map(|x| sign(*x)).collect(),
            NormSpec::Group { groups } => group_subgradient(groups, b),
            NormSpec::SortedL1 { lambda_seq } => sorted::subgradient(lambda_seq, b),
            NormSpec::SparseGroup {
                l1_weight,
                group_weight,
                groups,
            } => group_subgradient(groups, b)
                .into_iter()
                .zip(b)
                .map(|(g, x)| l1_weight * sign(*x) + group_weight * g)
                .collect(),
            NormSpec::Structured { cone } => match cone {
                ConeSpec::Wedge => structured::wedge_subgradient(b),
                ConeSpec::Box { lower, upper } => structured::box_subgradient(lower, upper, b),
            },
        }
    }

    /// A constant `D` with `||b||_2 <= D * value(b)` for every `b`.
    ///
    /// Structured norms dominate l1 (the variational form is minimized at
    /// `a = |b|` without the cone constraint), hence `D = 1` there.
    pub fn ell2_comparison_constant(&self) -> f64 {
        match &self.spec {
            NormSpec::L1 | NormSpec::Group { .. } | NormSpec::Structured { .. } => 1.0,
            NormSpec::SortedL1 { lambda_seq } => 1.0 / lambda_seq.last().copied().unwrap_or(1.0),
            NormSpec::SparseGroup {
                l1_weight,
                group_weight,
                ..
            } => 1.0 / (l1_weight + group_weight),
        }
    }

    /// Complement norm for the allowed set `s`.
    pub fn complement(&self, s: &[usize]) -> Result<ComplementNorm> {
        ComplementNorm::new(self, s)
    }

    /// Number of groups, or `dim` when the norm has no group structure.
    pub fn group_count(&self) -> usize {
        match &self.spec {
            NormSpec::Group { groups } | NormSpec::SparseGroup { groups, .. } => groups.len(),
            _ => self.dim,
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn group_block(g: &[usize], b: &[f64]) -> f64 {
    g.iter().map(|&j| b[j] * b[j]).sum::<f64>().sqrt()
}

fn group_value(groups: &[Vec<usize>], b: &[f64]) -> f64 {
    groups
        .iter()
        .map(|g| (g.len() as f64).sqrt() * group_block(g, b))
        .sum()
}

fn group_dual(groups: &[Vec<usize>], z: &[f64]) -> f64 {
    groups
        .iter()
        .map(|g| group_block(g, z) / (g.len() as f64).sqrt())
        .fold(0.0, f64::max)
}

fn group_prox(groups: &[Vec<usize>], mut v: Vec<f64>, step: f64) -> Vec<f64> {
    for g in groups {
        let norm = group_block(g, &v);
        let thresh = step * (g.len() as f64).sqrt();
        let scale = if norm > thresh { 1.0 - thresh / norm } else { 0.0 };
        for &j in g {
            v[j] *= scale;
        }
    }
    v
}

fn group_subgradient(groups: &[Vec<usize>], b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; b.len()];
    for g in groups {
        let norm = group_block(g, b);
        if norm > 0.0 {
            let w = (g.len() as f64).sqrt();
            for &j in g {
                z[j] = w * b[j] / norm;
            }
        }
    }
    z
}

/// Dual of `l1_weight ||.||_1 + group_weight sqrt(m) ||.||_2` on one block of size `m`.
///
/// The dual ball is the Minkowski sum `l1_weight B_inf + group_weight sqrt(m) B_2`,
/// so the dual value is the smallest `t` with
/// `||soft(z, l1_weight t)||_2 <= group_weight sqrt(m) t`.
fn sparse_group_block_dual(l1_weight: f64, group_weight: f64, z: &[f64]) -> f64 {
    let m = (z.len() as f64).sqrt();
    let zmax = linf(z);
    if zmax == 0.0 {
        return 0.0;
    }
    if group_weight == 0.0 {
        return zmax / l1_weight;
    }
    if l1_weight == 0.0 {
        return l2(z) / (group_weight * m);
    }
    let fits = |t: f64| {
        let r: f64 = z
            .iter()
            .map(|x| soft_threshold(*x, l1_weight * t).powi(2))
            .sum::<f64>()
            .sqrt();
        r <= group_weight * m * t
    };
    bisect_threshold(fits, 0.0, zmax / l1_weight, 200)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn group_1_23() -> Norm {
        NormSpec::Group {
            groups: vec![vec![0], vec![1, 2]],
        }
        .build(3)
        .unwrap()
    }

    #[test]
    fn l1_examples() {
        let n = NormSpec::L1.build(3).unwrap();
        assert_eq!(n.value(&[1.0, -2.0, 3.0]), 6.0);
        assert_eq!(n.dual(&[1.0, -2.0, 3.0]), 3.0);
        assert_eq!(NormSpec::L1.build(2).unwrap().prox(&[3.0, -0.5], 1.0), vec![2.0, 0.0]);
        assert_eq!(n.ell2_comparison_constant(), 1.0);
    }

    #[test]
    fn group_value_example() {
        let v = group_1_23().value(&[1.0, 3.0, 4.0]);
        assert_relative_eq!(v, 1.0 + 2f64.sqrt() * 5.0, max_relative = 1e-15);
        assert!((v - 8.0711).abs() < 1e-4);
    }

    #[test]
    fn group_dual_formula() {
        let d = group_1_23().dual(&[0.5, 3.0, 4.0]);
        assert_relative_eq!(d, 5.0 / 2f64.sqrt());
    }

    #[test]
    fn sorted_constant_is_reciprocal_of_smallest_weight() {
        let n = NormSpec::SortedL1 {
            lambda_seq: vec![1.0, 0.5, 0.1],
        }
        .build(3)
        .unwrap();
        assert_relative_eq!(n.ell2_comparison_constant(), 10.0);
    }

    #[test]
    fn prox_of_zero_is_zero_for_every_norm() {
        for n in all_norms(4) {
            assert!(n.prox(&[0.0; 4], 0.7).iter().all(|x| *x == 0.0), "{:?}", n.spec());
        }
    }

    #[test]
    fn partition_validation() {
        let bad = [
            vec![vec![0], vec![0, 1]],
            vec![vec![0]],
            vec![vec![0, 1], vec![]],
            vec![vec![0, 5]],
        ];
        for groups in bad {
            assert!(NormSpec::Group { groups }.build(2).is_err());
        }
    }

    #[test]
    fn sorted_weights_validation() {
        let bad = [vec![1.0, 2.0], vec![1.0, 0.0], vec![1.0]];
        for lambda_seq in bad {
            assert!(NormSpec::SortedL1 { lambda_seq }.build(2).is_err());
        }
    }

    #[test]
    fn box_validation() {
        let cone = ConeSpec::Box {
            lower: vec![0.0, 1.0],
            upper: vec![1.0, 1.0],
        };
        assert!(NormSpec::Structured { cone }.build(2).is_err());
    }

    #[test]
    fn sparse_group_dual_reduces_to_components() {
        let groups = vec![vec![0, 1, 2]];
        let z = [0.3, -1.2, 0.8];
        let l1_only = NormSpec::SparseGroup {
            l1_weight: 2.0,
            group_weight: 0.0,
            groups: groups.clone(),
        };
        assert_relative_eq!(l1_only.build(3).unwrap().dual(&z), 0.6);
        let group_only = NormSpec::SparseGroup {
            l1_weight: 0.0,
            group_weight: 1.0,
            groups,
        };
        assert_relative_eq!(group_only.build(3).unwrap().dual(&z), l2(&z) / 3f64.sqrt());
    }

    #[test]
    fn subgradients_are_tight() {
        let b = [0.4, -1.3, 0.0, 2.2];
        for n in all_norms(4) {
            let z = n.subgradient(&b);
            let zb: f64 = z.iter().zip(&b).map(|(x, y)| x * y).sum();
            assert_relative_eq!(zb, n.value(&b), max_relative = 1e-6);
            assert!(n.dual(&z) <= 1.0 + 1e-6, "{:?}: {}", n.spec(), n.dual(&z));
        }
    }

    #[test]
    fn spec_json_shape() {
        let spec = NormSpec::SortedL1 {
            lambda_seq: vec![2.0, 1.0],
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(s, r#"{"kind":"sorted-l1","lambda_seq":[2.0,1.0]}"#);
        let w = NormSpec::Structured {
            cone: ConeSpec::Wedge,
        };
        assert_eq!(
            serde_json::to_string(&w).unwrap(),
            r#"{"kind":"structured","cone":{"cone":"wedge"}}"#
        );
        let back: NormSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }

    pub(crate) fn all_norms(p: usize) -> Vec<Norm> {
        let groups: Vec<Vec<usize>> = (0..p).collect::<Vec<_>>().chunks(2).map(|c| c.to_vec()).collect();
        vec![
            NormSpec::L1.build(p).unwrap(),
            NormSpec::Group { groups: groups.clone() }.build(p).unwrap(),
            NormSpec::SortedL1 {
                lambda_seq: sorted::linear_sequence(1.0, 0.1, p),
            }
            .build(p)
            .unwrap(),
            NormSpec::SparseGroup {
                l1_weight: 0.7,
                group_weight: 0.4,
                groups,
            }
            .build(p)
            .unwrap(),
            NormSpec::Structured {
                cone: ConeSpec::Wedge,
            }
            .build(p)
            .unwrap(),
            NormSpec::Structured {
                cone: ConeSpec::Box {
                    lower: vec![0.5; p],
                    upper: (0..p).map(|j| 1.0 + j as f64).collect(),
                },
            }
            .build(p)
            .unwrap(),
        ]
    }
}
