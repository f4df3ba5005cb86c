//! Complement norms `Omega^{S^c}` with `Omega(b) >= Omega(b_S) + Omega^{S^c}(b_{S^c})`.

use super::{ConeSpec, Norm, NormSpec};
use crate::error::{Error, Result};

/// The complement norm of a parent norm for an allowed set `S`.
///
/// The complement acts on the `|S^c|` coordinates outside `S`, listed in
/// increasing index order.
#[derive(Debug, Clone)]
pub struct ComplementNorm {
    parent: Norm,
    allowed_set: Vec<usize>,
    complement_set: Vec<usize>,
    reduced: Norm,
}

impl ComplementNorm {
    pub fn new(parent: &Norm, s: &[usize]) -> Result<Self> {
        let p = parent.dim();
        let mut in_s = vec![false; p];
        for &j in s {
            if j >= p {
                return Err(Error::DisallowedSet(format!("index {j} is outside 0..{p}")));
            }
            if in_s[j] {
                return Err(Error::DisallowedSet(format!("index {j} is repeated")));
            }
            in_s[j] = true;
        }
        let allowed_set: Vec<usize> = (0..p).filter(|&j| in_s[j]).collect();
        let complement_set: Vec<usize> = (0..p).filter(|&j| !in_s[j]).collect();
        let r = complement_set.len();
        // position of each original index inside S^c
        let mut pos = vec![usize::MAX; p];
        for (k, &j) in complement_set.iter().enumerate() {
            pos[j] = k;
        }

        let reduced_spec = match parent.spec() {
            NormSpec::L1 => NormSpec::L1,
            NormSpec::Group { groups } => {
                let mut rest = Vec::new();
                for (gi, g) in groups.iter().enumerate() {
                    let inside = g.iter().filter(|&&j| in_s[j]).count();
                    if inside == 0 {
                        rest.push(g.iter().map(|&j| pos[j]).collect());
                    } else if inside < g.len() {
                        return Err(Error::DisallowedSet(format!(
                            "set splits group {gi}; allowed sets for the group norm are unions of groups"
                        )));
                    }
                }
                NormSpec::Group { groups: rest }
            }
            NormSpec::SortedL1 { lambda_seq } => NormSpec::SortedL1 {
                lambda_seq: lambda_seq[p - r..].to_vec(),
            },
            NormSpec::SparseGroup { l1_weight, .. } => {
                if r > 0 && *l1_weight == 0.0 {
                    return Err(Error::DisallowedSet(
                        "sparse-group complement is l1_weight * l1, which is not a norm when l1_weight = 0".into(),
                    ));
                }
                NormSpec::SortedL1 {
                    lambda_seq: vec![*l1_weight; r],
                }
            }
            NormSpec::Structured { cone } => match cone {
                ConeSpec::Wedge => {
                    if allowed_set.iter().enumerate().any(|(k, &j)| k != j) {
                        return Err(Error::DisallowedSet(
                            "wedge allowed sets are prefixes {0, ..., k-1}".into(),
                        ));
                    }
                    NormSpec::Structured {
                        cone: ConeSpec::Wedge,
                    }
                }
                ConeSpec::Box { lower, upper } => {
                    // Zero-padding a point of the cone stays in the cone only
                    // when nothing or everything is zeroed, since lower > 0.
                    if r != 0 && r != p {
                        return Err(Error::DisallowedSet(
                            "box-cone allowed sets are the empty set and the full index set".into(),
                        ));
                    }
                    NormSpec::Structured {
                        cone: ConeSpec::Box {
                            lower: complement_set.iter().map(|&j| lower[j]).collect(),
                            upper: complement_set.iter().map(|&j| upper[j]).collect(),
                        },
                    }
                }
            },
        };
        let reduced = Norm::new(reduced_spec, r)?;
        Ok(Self {
            parent: parent.clone(),
            allowed_set,
            complement_set,
            reduced,
        })
    }

    pub fn parent(&self) -> &Norm {
        &self.parent
    }

    pub fn allowed_set(&self) -> &[usize] {
        &self.allowed_set
    }

    pub fn complement_set(&self) -> &[usize] {
        &self.complement_set
    }

    /// The complement norm as a norm on `R^{|S^c|}`.
    pub fn norm(&self) -> &Norm {
        &self.reduced
    }

    /// `Omega^{S^c}(b_sc)` for a vector of length `|S^c|`.
    pub fn value(&self, b_sc: &[f64]) -> f64 {
        self.reduced.value(b_sc)
    }

    /// Coordinates of a full-length vector on `S^c`.
    pub fn restrict_complement(&self, b: &[f64]) -> Vec<f64> {
        self.complement_set.iter().map(|&j| b[j]).collect()
    }

    /// `b_S` zero-padded to full length.
    pub fn pad_allowed(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; b.len()];
        for &j in &self.allowed_set {
            out[j] = b[j];
        }
        out
    }

    /// `b_{S^c}` zero-padded to full length.
    pub fn pad_complement(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; b.len()];
        for &j in &self.complement_set {
            out[j] = b[j];
        }
        out
    }

    /// Writes a vector of length `|S^c|` back into a zero full-length vector.
    pub fn embed_complement(&self, b_sc: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.parent.dim()];
        for (&j, v) in self.complement_set.iter().zip(b_sc) {
            out[j] = *v;
        }
        out
    }

    /// `Omega^{S^c}(b_{S^c})` for a full-length vector.
    pub fn value_of_full(&self, b: &[f64]) -> f64 {
        self.reduced.value(&self.restrict_complement(b))
    }

    /// `Omega(b) - Omega(b_S) - Omega^{S^c}(b_{S^c})`, non-negative by construction.
    pub fn decomposition_slack(&self, b: &[f64]) -> f64 {
        self.parent.value(b) - self.parent.value(&self.pad_allowed(b)) - self.value_of_full(b)
    }
}
