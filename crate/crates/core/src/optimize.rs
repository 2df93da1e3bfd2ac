//! Unconstrained maximizers for smooth concave objectives.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::registry::{Named, Registry};

/// A smooth function to be maximized.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn value_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>);
    fn value_grad_hess(&self, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    pub max_iter: usize,
    /// Convergence threshold on the gradient max-norm.
    pub tol: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub trait Maximizer: Named + Send + Sync {
    fn maximize(&self, obj: &dyn Objective, start: DVector<f64>, stop: StopRule) -> Outcome;
}

/// Registry of the built-in maximizers; `bfgs` is the default.
pub fn maximizers() -> Registry<dyn Maximizer> {
    let mut r: Registry<dyn Maximizer> = Registry::new("maximizer");
    r.register(Arc::new(Bfgs)).register(Arc::new(Newton));
    r
}

pub const DEFAULT_MAXIMIZER: &str = "bfgs";

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Backtracking search along `dir` for an ascent step satisfying Armijo.
/// Returns the accepted point and its value.
fn backtrack(
    obj: &dyn Objective,
    x: &DVector<f64>,
    f: f64,
    slope: f64,
    dir: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    // Below this the objective cannot resolve an improvement.
    let noise = 1e-12 * (1.0 + f.abs());
    let mut alpha = 1.0;
    for _ in 0..MAX_HALVINGS {
        let cand = x + dir * alpha;
        let fc = obj.value(&cand);
        let armijo = fc >= f + ARMIJO_C * alpha * slope;
        let flat = alpha * slope <= noise && fc >= f - noise;
        if fc.is_finite() && (armijo || flat) {
            return Some((cand, fc));
        }
        alpha *= 0.5;
    }
    None
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Quasi-Newton ascent with an inverse-Hessian BFGS update.
pub struct Bfgs;

impl Named for Bfgs {
    fn name(&self) -> &'static str {
        "bfgs"
    }
}

impl Maximizer for Bfgs {
    fn maximize(&self, obj: &dyn Objective, start: DVector<f64>, stop: StopRule) -> Outcome {
        let n = obj.dim();
        let mut x = start;
        let (mut f, mut g) = obj.value_grad(&x);
        // Inverse of the negative Hessian approximation.
        let mut h = DMatrix::identity(n, n) / max_norm(&g).max(1.0);
        let mut iterations = 0;
        while iterations < stop.max_iter && max_norm(&g) >= stop.tol {
            iterations += 1;
            let mut dir = &h * &g;
            let mut slope = g.dot(&dir);
            if !(slope > 0.0) {
                h = DMatrix::identity(n, n) / max_norm(&g).max(1.0);
                dir = &h * &g;
                slope = g.dot(&dir);
            }
            let Some((xn, fn_)) = backtrack(obj, &x, f, slope, &dir) else {
                break;
            };
            let (_, gn) = obj.value_grad(&xn);
            let s = &xn - &x;
            // Curvature of the negative objective.
            let y = &g - &gn;
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() && sy > 0.0 {
                if iterations == 1 {
                    h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                }
                let rho = 1.0 / sy;
                let hy = &h * &y;
                let yhy = y.dot(&hy);
                h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                    - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            }
            let stalled = (fn_ - f).abs() <= 1e-15 * f.abs().max(1.0) && s.amax() <= 1e-15;
            x = xn;
            f = fn_;
            g = gn;
            if stalled {
                break;
            }
        }
        let converged = max_norm(&g) < stop.tol;
        Outcome {
            x,
            value: f,
            gradient: g,
            iterations,
            converged,
        }
    }
}

/// Full Newton ascent using the analytic Hessian, with a gradient step
/// whenever the Hessian is not negative definite.
pub struct Newton;

impl Named for Newton {
    fn name(&self) -> &'static str {
        "newton"
    }
}

impl Maximizer for Newton {
    fn maximize(&self, obj: &dyn Objective, start: DVector<f64>, stop: StopRule) -> Outcome {
        let mut x = start;
        let (mut f, mut g, mut hess) = obj.value_grad_hess(&x);
        let mut iterations = 0;
        while iterations < stop.max_iter && max_norm(&g) >= stop.tol {
            iterations += 1;
            let dir = match (-&hess).cholesky() {
                Some(ch) => ch.solve(&g),
                None => &g / max_norm(&g).max(1.0),
            };
            let slope = g.dot(&dir);
            let Some((xn, _)) = backtrack(obj, &x, f, slope, &dir) else {
                break;
            };
            x = xn;
            (f, g, hess) = obj.value_grad_hess(&x);
        }
        let converged = max_norm(&g) < stop.tol;
        Outcome {
            x,
            value: f,
            gradient: g,
            iterations,
            converged,
        }
    }
}
