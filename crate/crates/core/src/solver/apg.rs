//! Accelerated proximal gradient for `1/2 ||Y - X b||_n^2 + tau * Omega(b)`.

use nalgebra::{DMatrix, DVector};

use crate::norms::Norm;

/// Largest eigenvalue of `X^T X / n` by power iteration.
pub fn lipschitz(x: &DMatrix<f64>, max_iter: usize, tol: f64) -> f64 {
    let (n, p) = x.shape();
    if n == 0 || p == 0 {
        return 0.0;
    }
    // deterministic, non-degenerate start
    let mut v = DVector::from_fn(p, |j, _| 1.0 + 0.01 * (j % 7) as f64);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..max_iter {
        let w = x.tr_mul(&(x * &v)) / n as f64;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
        let done = (norm - est).abs() <= tol * norm;
        est = norm;
        if done {
            break;
        }
    }
    est
}

pub struct InnerProblem<'a> {
    pub x: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    pub norm: &'a Norm,
    /// Penalty weight `tau`.
    pub tau: f64,
    /// Scale used to normalize the optimality measure (`sigma` in the outer loop).
    pub scale: f64,
}

pub struct InnerOutcome {
    pub beta: DVector<f64>,
    pub iters: usize,
    pub converged: bool,
    /// Updated step constant after backtracking.
    pub lipschitz: f64,
}

impl InnerProblem<'_> {
    fn n(&self) -> f64 {
        self.x.nrows() as f64
    }

    fn smooth(&self, fitted: &DVector<f64>) -> f64 {
        0.5 * (self.y - fitted).norm_squared() / self.n()
    }

    fn gradient(&self, fitted: &DVector<f64>) -> DVector<f64> {
        self.x.tr_mul(&(fitted - self.y)) / self.n()
    }

    fn objective(&self, b: &DVector<f64>, fitted: &DVector<f64>) -> f64 {
        self.smooth(fitted) + self.tau * self.norm.value(b.as_slice())
    }

    fn prox_step(&self, y: &DVector<f64>, grad: &DVector<f64>, l: f64) -> DVector<f64> {
        let v = y - grad / l;
        DVector::from_vec(self.norm.prox(v.as_slice(), self.tau / l))
    }

    /// Dual norm of `grad f(z) - grad f(y) + L (y - z)`, divided by `scale`.
    ///
    /// `z = prox(y - grad f(y) / L)` is the exact minimizer of the problem
    /// perturbed by that linear term, so this is the scaled optimality gap.
    fn stationarity(&self, y: &DVector<f64>, grad_y: &DVector<f64>, z: &DVector<f64>, fz: &DVector<f64>, l: f64) -> f64 {
        let e = self.gradient(fz) - grad_y + (y - z) * l;
        self.norm.dual(e.as_slice()) / self.scale
    }

    /// FISTA with function-value restart and backtracking on `L`.
    ///
    /// Accepted iterates never increase the objective, so a warm start is
    /// never made worse. Stops once [`Self::stationarity`] is below `tol`.
    pub fn solve(&self, start: DVector<f64>, mut l: f64, max_iter: usize, tol: f64) -> InnerOutcome {
        const CHECK_EVERY: usize = 5;
        l = l.max(f64::MIN_POSITIVE);
        let mut x_cur = start;
        let mut fx_cur = self.x * &x_cur;
        let mut obj_cur = self.objective(&x_cur, &fx_cur);
        let mut y = x_cur.clone();
        let mut fy = fx_cur.clone();
        let mut t = 1.0f64;
        let mut converged = false;
        let mut iters = 0;
        // rounding floor of the smooth part, for the sufficient-decrease test
        let slack = 1e-13 * (self.y.norm_squared() / self.n()).max(f64::MIN_POSITIVE);

        while iters < max_iter {
            iters += 1;
            let grad_y = self.gradient(&fy);
            let smooth_y = self.smooth(&fy);
            let mut backtracks = 0;
            let (z, fz) = loop {
                let z = self.prox_step(&y, &grad_y, l);
                let fz = self.x * &z;
                let d = &z - &y;
                let model = smooth_y + grad_y.dot(&d) + 0.5 * l * d.norm_squared();
                if self.smooth(&fz) <= model + slack || backtracks == 200 {
                    break (z, fz);
                }
                backtracks += 1;
                l *= 1.25;
            };
            let obj_z = self.objective(&z, &fz);
            if obj_z > obj_cur {
                if t > 1.0 {
                    // momentum overshoot: restart from the current iterate
                    t = 1.0;
                    y = x_cur.clone();
                    fy = fx_cur.clone();
                    continue;
                }
                // a plain backtracked step that fails to descend means the
                // objective sits at its rounding floor; the outer KKT check
                // decides whether that is good enough
                converged = true;
                break;
            }

            if (iters % CHECK_EVERY == 0 || t == 1.0) && self.stationarity(&y, &grad_y, &z, &fz, l) <= tol {
                x_cur = z;
                converged = true;
                break;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            y = &z + (&z - &x_cur) * momentum;
            fy = &fz + (&fz - &fx_cur) * momentum;
            x_cur = z;
            fx_cur = fz;
            obj_cur = obj_z;
            t = t_next;
        }
        InnerOutcome {
            beta: x_cur,
            iters,
            converged,
            lipschitz: l,
        }
    }
}
