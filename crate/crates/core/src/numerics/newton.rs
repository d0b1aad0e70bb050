use crate::error::{Error, Result};

/// Settings for the damped Newton solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub residual_tolerance: f64,
    /// Smallest step fraction tried by the backtracking line search.
    pub damping_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 200,
            residual_tolerance: 1e-10,
            damping_floor: 1e-6,
        }
    }
}

/// One evaluation of a smooth objective: value, gradient, and symmetric
/// Hessian in row-major order.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

/// Minimizes a smooth convex objective by damped Newton iteration.
///
/// Each step solves `H d = g` through a symmetric factorization (with one
/// diagonal-jitter retry of `1e-10 * trace / n` when the factorization
/// fails) and backtracks by halving until the objective decreases. Returns
/// the iterate once the gradient infinity-norm drops below
/// `residual_tolerance`.
pub fn newton_minimize<F>(mut objective: F, x0: &[f64], cfg: &SolverConfig) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> ObjectiveEval,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut eval = objective(&x);
    for _ in 0..cfg.max_iterations {
        let gnorm = eval.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm <= cfg.residual_tolerance {
            return Ok(x);
        }
        let d = solve_spd(&eval.hessian, &eval.gradient, n)?;
        let slope: f64 = eval.gradient.iter().zip(&d).map(|(g, di)| g * di).sum();
        let mut alpha = 1.0;
        let mut next = None;
        while alpha >= cfg.damping_floor {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi - alpha * di).collect();
            let e = objective(&trial);
            if e.value.is_finite() && e.value <= eval.value - 1e-4 * alpha * slope {
                next = Some((trial, e));
                break;
            }
            alpha *= 0.5;
        }
        match next {
            Some((trial, e)) => {
                x = trial;
                eval = e;
            }
            // line search exhausted: no descent direction usable
            None => return Err(Error::MaxIterationsExceeded(cfg.max_iterations)),
        }
    }
    let gnorm = eval.gradient.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if gnorm <= cfg.residual_tolerance {
        Ok(x)
    } else {
        Err(Error::MaxIterationsExceeded(cfg.max_iterations))
    }
}

/// Solves `A x = b` for symmetric positive-definite `A` (row-major) by
/// Cholesky, retrying once with diagonal jitter before giving up.
fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    if let Some(x) = try_cholesky_solve(a, b, n) {
        return Ok(x);
    }
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let jitter = 1e-10 * trace.abs().max(1e-300) / n as f64;
    let mut aj = a.to_vec();
    for i in 0..n {
        aj[i * n + i] += jitter;
    }
    try_cholesky_solve(&aj, b, n).ok_or(Error::SingularHessian)
}

fn try_cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    // lower-triangular factor L with A = L L^T
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}
