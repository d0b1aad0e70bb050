//! Univariate Shannon maximum-entropy marginal under a normalization and a
//! mean constraint on a declared support interval. The solution is the
//! exponential-form density `f(x) = exp(-lambda0 - lambda1 * x)` restricted
//! to the support.

use crate::error::{Error, Result};
use crate::numerics::SolverConfig;

/// Support interval; `hi` may be `f64::INFINITY` (in which case the fitted
/// slope coefficient is positive so the density decays).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "invalid support [{lo}, {hi}]"
            )));
        }
        Ok(Support { lo, hi })
    }

    pub fn is_bounded(&self) -> bool {
        self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Fitted exponential-form maxent density.
#[derive(Debug, Clone)]
pub struct MaxEntMarginal {
    pub support: Support,
    pub lambda0: f64,
    pub lambda1: f64,
    pub target_mean: f64,
}

// Mean of the density ~ exp(-lam * t) on [0, s] (t = x - lo), s may be inf.
fn tilted_mean(lam: f64, s: f64) -> f64 {
    if s.is_infinite() {
        return 1.0 / lam;
    }
    let z = lam * s;
    if z.abs() < 1e-9 {
        // series around the uniform density
        return s * (0.5 - z / 12.0 + z * z * z / 720.0);
    }
    1.0 / lam - s / z.exp_m1()
}

// Variance of the same density.
fn tilted_var(lam: f64, s: f64) -> f64 {
    if s.is_infinite() {
        return 1.0 / (lam * lam);
    }
    let z = lam * s;
    if z.abs() < 1e-4 {
        return s * s * (1.0 / 12.0 - z * z / 240.0);
    }
    // 1/lam^2 - s^2 e^z / (e^z - 1)^2, computed with the decaying exponential
    let q = (-z.abs()).exp();
    let denom = 1.0 - q;
    1.0 / (lam * lam) - s * s * q / (denom * denom)
}

/// Fits the maxent density with the given mean on the support.
///
/// The slope is found by a one-dimensional Newton solve of the mean
/// equation (safeguarded by a bracketing bisection step); the intercept
/// follows from normalization.
pub fn fit_marginal(mean: f64, support: Support, cfg: &SolverConfig) -> Result<MaxEntMarginal> {
    let lo = support.lo;
    let hi = support.hi;
    if !(mean > lo) || (hi.is_finite() && !(mean < hi)) {
        return Err(Error::InfeasibleMean { mean, lo, hi });
    }
    let lambda1 = if support.is_bounded() {
        solve_slope(mean - lo, hi - lo, cfg)?
    } else {
        1.0 / (mean - lo)
    };
    let lambda0 = intercept(lambda1, &support);
    Ok(MaxEntMarginal {
        support,
        lambda0,
        lambda1,
        target_mean: mean,
    })
}

// log of the normalizing constant C of C * exp(-lam * (x - lo)).
fn log_norm_const(lam: f64, s: f64) -> f64 {
    if s.is_infinite() {
        return lam.ln();
    }
    let z = lam * s;
    if z.abs() < 1e-9 {
        return -(s.ln()) - z / 2.0 + z * z / 24.0;
    }
    // C = lam / (1 - e^{-z}) = -lam / (e^{-z} - 1)
    if z > 0.0 {
        lam.ln() - (-(-z).exp_m1()).ln()
    } else {
        (-lam).ln() - (-z).exp_m1().ln()
    }
}

fn intercept(lam: f64, support: &Support) -> f64 {
    let s = support.hi - support.lo;
    -(log_norm_const(lam, s) + lam * support.lo)
}

fn solve_slope(target: f64, s: f64, cfg: &SolverConfig) -> Result<f64> {
    // g(lam) = tilted_mean(lam, s) - target is strictly decreasing.
    let mut step = 1.0 / s;
    let (mut lo, mut hi);
    loop {
        if tilted_mean(-step, s) > target {
            lo = -step;
            break;
        }
        step *= 2.0;
        if step.is_infinite() {
            return Err(Error::InfeasibleMean {
                mean: target,
                lo: 0.0,
                hi: s,
            });
        }
    }
    step = 1.0 / s;
    loop {
        if tilted_mean(step, s) < target {
            hi = step;
            break;
        }
        step *= 2.0;
        if step.is_infinite() {
            return Err(Error::InfeasibleMean {
                mean: target,
                lo: 0.0,
                hi: s,
            });
        }
    }
    // Newton with bisection safeguard on the bracket [lo, hi]
    let mut lam = 0.5 * (lo + hi);
    for _ in 0..cfg.max_iterations {
        let g = tilted_mean(lam, s) - target;
        if g.abs() <= 1e-13 * s.max(1.0) {
            return Ok(lam);
        }
        if g > 0.0 {
            lo = lam;
        } else {
            hi = lam;
        }
        let dg = -tilted_var(lam, s);
        let mut next = lam - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == lam {
            return Ok(lam);
        }
        lam = next;
    }
    Ok(lam)
}

impl MaxEntMarginal {
    /// Density value; zero outside the support.
    pub fn pdf(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        (-self.lambda0 - self.lambda1 * x).exp()
    }

    /// Distribution function, clamped to [0, 1].
    pub fn cdf(&self, x: f64) -> f64 {
        let lo = self.support.lo;
        if x <= lo {
            return 0.0;
        }
        if x >= self.support.hi {
            return 1.0;
        }
        let lam = self.lambda1;
        let t = x - lo;
        let v = if self.support.is_bounded() {
            let s = self.support.hi - lo;
            let z = lam * s;
            if z.abs() < 1e-9 {
                t / s
            } else {
                (-lam * t).exp_m1() / (-z).exp_m1()
            }
        } else {
            -(-lam * t).exp_m1()
        };
        v.clamp(0.0, 1.0)
    }

    /// Inverse CDF in closed form.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let lo = self.support.lo;
        let lam = self.lambda1;
        if self.support.is_bounded() {
            let s = self.support.hi - lo;
            let z = lam * s;
            if z.abs() < 1e-9 {
                return lo + u * s;
            }
            let t = -(u * (-z).exp_m1()).ln_1p() / lam;
            (lo + t).clamp(lo, self.support.hi)
        } else {
            lo - (-u).ln_1p() / lam
        }
    }

    /// Mean and variance of the fitted density, in closed form.
    pub fn moments(&self) -> (f64, f64) {
        let s = self.support.hi - self.support.lo;
        let mean = self.support.lo + tilted_mean(self.lambda1, s);
        let var = tilted_var(self.lambda1, s);
        (mean, var)
    }
}
