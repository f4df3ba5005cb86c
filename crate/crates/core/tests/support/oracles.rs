//! Reference computations written from the definitions, sharing no code with the library.

use nalgebra::{DMatrix, DVector};

pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Penalties with hand-written values and subgradients.
#[derive(Debug, Clone)]
pub enum Penalty {
    L1,
    /// Weight `sqrt(|G|)` per group.
    Group(Vec<Vec<usize>>),
    Sorted(Vec<f64>),
    SparseGroup { a: f64, b: f64, groups: Vec<Vec<usize>> },
}

fn group_value(groups: &[Vec<usize>], x: &[f64]) -> f64 {
    groups
        .iter()
        .map(|g| (g.len() as f64).sqrt() * g.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt())
        .sum()
}

fn group_subgrad(groups: &[Vec<usize>], x: &[f64], out: &mut [f64], scale: f64) {
    for g in groups {
        let nrm = g.iter().map(|&j| x[j] * x[j]).sum::<f64>().sqrt();
        if nrm > 0.0 {
            let w = (g.len() as f64).sqrt();
            for &j in g {
                out[j] += scale * w * x[j] / nrm;
            }
        }
    }
}

pub fn sorted_value(w: &[f64], x: &[f64]) -> f64 {
    let mut a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    a.sort_by(|p, q| q.total_cmp(p));
    a.iter().zip(w).map(|(u, v)| u * v).sum()
}

impl Penalty {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Penalty::L1 => x.iter().map(|v| v.abs()).sum(),
            Penalty::Group(g) => group_value(g, x),
            Penalty::Sorted(w) => sorted_value(w, x),
            Penalty::SparseGroup { a, b, groups } => a * Penalty::L1.value(x) + b * group_value(groups, x),
        }
    }

    pub fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        match self {
            Penalty::L1 => g.iter_mut().zip(x).for_each(|(o, v)| *o = sign(*v)),
            Penalty::Group(groups) => group_subgrad(groups, x, &mut g, 1.0),
            Penalty::Sorted(w) => {
                let mut idx: Vec<usize> = (0..x.len()).collect();
                idx.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()));
                for (rank, &j) in idx.iter().enumerate() {
                    g[j] = w[rank] * sign(x[j]);
                }
            }
            Penalty::SparseGroup { a, b, groups } => {
                g.iter_mut().zip(x).for_each(|(o, v)| *o = a * sign(*v));
                group_subgrad(groups, x, &mut g, *b);
            }
        }
        g
    }
}

/// Central-cut ellipsoid method for `min f` subject to `g <= 0`, started from the
/// ball of radius `radius` around `center`. Returns the best feasible point and value.
pub fn ellipsoid_min(
    center: &[f64],
    radius: f64,
    iters: usize,
    f: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    g: Option<&dyn Fn(&[f64]) -> (f64, Vec<f64>)>,
) -> (Vec<f64>, f64) {
    let p = center.len();
    assert!(p >= 2, "ellipsoid update needs dimension >= 2");
    let pf = p as f64;
    let mut x = DVector::from_column_slice(center);
    let mut shape = DMatrix::<f64>::identity(p, p) * radius * radius;
    let mut best = (x.as_slice().to_vec(), f64::INFINITY);
    for _ in 0..iters {
        let cut = match g.map(|g| g(x.as_slice())) {
            Some((gv, gs)) if gv > 0.0 => gs,
            _ => {
                let (fv, fs) = f(x.as_slice());
                if fv < best.1 {
                    best = (x.as_slice().to_vec(), fv);
                }
                fs
            }
        };
        let h = DVector::from_vec(cut);
        let ph = &shape * &h;
        let q = h.dot(&ph);
        if !(q > 0.0) {
            break;
        }
        let e = ph / q.sqrt();
        x -= &e / (pf + 1.0);
        shape = (shape - (&e * e.transpose()) * (2.0 / (pf + 1.0))) * (pf * pf / (pf * pf - 1.0));
        shape = (&shape + shape.transpose()) * 0.5;
    }
    best
}

/// Cyclic coordinate descent for `1/2 ||y - X b||_n^2 + pen ||b||_1`.
pub fn lasso_cd(x: &DMatrix<f64>, y: &DVector<f64>, pen: f64, sweeps: usize) -> DVector<f64> {
    let (n, p) = (x.nrows() as f64, x.ncols());
    let sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared() / n).collect();
    let mut b = DVector::zeros(p);
    let mut r = y.clone();
    for _ in 0..sweeps {
        let mut moved = 0.0f64;
        for j in 0..p {
            let z = x.column(j).dot(&r) / n + sq[j] * b[j];
            let new = sign(z) * (z.abs() - pen).max(0.0) / sq[j];
            let d = new - b[j];
            if d != 0.0 {
                r -= x.column(j) * d;
                b[j] = new;
                moved = moved.max(d.abs());
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    b
}

/// Visits every permutation of `0..p` (Heap's algorithm).
pub fn for_each_permutation(p: usize, mut visit: impl FnMut(&[usize])) {
    let mut a: Vec<usize> = (0..p).collect();
    let mut c = vec![0usize; p];
    visit(&a);
    let mut i = 0;
    while i < p {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            visit(&a);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}
