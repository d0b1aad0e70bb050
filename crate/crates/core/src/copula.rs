//! Maximum-copula-entropy density on the unit square: moment-constraint
//! targets built from rank-dependence measures, and the convex dual solve
//! for the exponential-family coefficients.
//!
//! The density has the form
//! `c(u,v) = exp(-1 - l0 - sum_i l_i (u^i + v^i) - l_uv uv - l_sym (u^2 v + u v^2) - l_22 u^2 v^2)`
//! and is symmetric in (u, v) by construction.

use crate::error::{Error, Result};
use crate::numerics::{newton_minimize, ObjectiveEval, QuadratureRule, SolverConfig};
use crate::ranks::DependenceMeasures;

/// Coefficient magnitudes beyond this are treated as divergence toward the
/// moment-body boundary (no density solution).
const LAMBDA_CAP: f64 = 1e5;

/// Smallest continuation step before the target combination is declared
/// infeasible.
const MIN_HOMOTOPY_STEP: f64 = 1e-3;

/// Moment targets for the copula fit.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintTargets {
    pub r: usize,
    /// Per-variable power targets `1/(i+1)` for i = 1..r.
    pub symmetric_moments: Vec<f64>,
    /// `(rho + 3) / 12`.
    pub uv_target: f64,
    /// Merged target for `u^2 v + u v^2`: `(4 rho - nu1 - nu2 + 4) / 12`.
    pub u2v_sym_target: f64,
    /// `(eta + 1/5) / 6`.
    pub u2v2_target: f64,
}

impl ConstraintTargets {
    pub fn independence(r: usize) -> Self {
        build_targets(&DependenceMeasures::new(0.0, 0.0, 0.0, 7.0 / 15.0), r)
    }

    /// Targets of the r+3 exponent constraint functions, in solver order
    /// (the symmetric power targets appear doubled since the function is
    /// `u^i + v^i`).
    fn dual_targets(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.symmetric_moments.iter().map(|t| 2.0 * t).collect();
        m.push(self.uv_target);
        m.push(self.u2v_sym_target);
        m.push(self.u2v2_target);
        m
    }
}

/// Builds the constraint targets from dependence measures.
///
/// The `u^2 v` and `u v^2` constraints are merged into their sum because
/// the density carries a single symmetric coefficient for them.
pub fn build_targets(d: &DependenceMeasures, r: usize) -> ConstraintTargets {
    assert!(r >= 1, "need at least one power constraint");
    ConstraintTargets {
        r,
        symmetric_moments: (1..=r).map(|i| 1.0 / (i + 1) as f64).collect(),
        uv_target: (d.rho + 3.0) / 12.0,
        u2v_sym_target: (4.0 * d.rho - d.nu1 - d.nu2 + 4.0) / 12.0,
        u2v2_target: (d.eta + 0.2) / 6.0,
    }
}

/// Fitted maximum-copula-entropy density.
#[derive(Debug, Clone)]
pub struct CopulaDensity {
    pub r: usize,
    /// `r + 4` coefficients ordered `[l0, l1..lr, l_uv, l_sym, l_22]`.
    pub lambda: Vec<f64>,
    pub achieved_moments: ConstraintTargets,
    pub residual_norm: f64,
    /// Order of the quadrature rule the density was fitted on.
    pub fit_order: usize,
}

impl CopulaDensity {
    /// Independence copula (all coefficients zero except `l0 = -1`).
    pub fn independence(r: usize) -> Self {
        CopulaDensity {
            r,
            lambda: {
                let mut l = vec![0.0; r + 4];
                l[0] = -1.0;
                l
            },
            achieved_moments: ConstraintTargets::independence(r),
            residual_norm: 0.0,
            fit_order: 0,
        }
    }

    pub fn log_pdf(&self, u: f64, v: f64) -> f64 {
        let r = self.r;
        let mut e = -1.0 - self.lambda[0];
        let mut up = 1.0;
        let mut vp = 1.0;
        for i in 1..=r {
            up *= u;
            vp *= v;
            e -= self.lambda[i] * (up + vp);
        }
        let uv = u * v;
        e -= self.lambda[r + 1] * uv;
        e -= self.lambda[r + 2] * (u * uv + v * uv);
        e -= self.lambda[r + 3] * uv * uv;
        e
    }

    /// Plain-text key=value serialization of the fitted coefficients.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("r={}\n", self.r));
        out.push_str(&format!("fit_order={}\n", self.fit_order));
        for (i, l) in self.lambda.iter().take(self.r + 1).enumerate() {
            out.push_str(&format!("lambda{}={}\n", i, crate::sig9(*l)));
        }
        out.push_str(&format!(
            "lambda_uv={}\n",
            crate::sig9(self.lambda[self.r + 1])
        ));
        out.push_str(&format!(
            "lambda_u2v_sym={}\n",
            crate::sig9(self.lambda[self.r + 2])
        ));
        out.push_str(&format!(
            "lambda_u2v2={}\n",
            crate::sig9(self.lambda[self.r + 3])
        ));
        out.push_str(&format!("residual_norm={:e}\n", self.residual_norm));
        out
    }
}

/// Evaluates the density at a point.
pub fn copula_pdf(c: &CopulaDensity, u: f64, v: f64) -> f64 {
    c.log_pdf(u, v).exp()
}

struct DualWorkspace {
    /// Constraint-function values, `k` rows of `n` nodes each.
    g: Vec<Vec<f64>>,
    weights: Vec<f64>,
    k: usize,
}

impl DualWorkspace {
    fn new(rule: &QuadratureRule, r: usize) -> Self {
        let order = rule.order();
        let n = order * order;
        let k = r + 3;
        let mut g = vec![vec![0.0; n]; k];
        let mut weights = vec![0.0; n];
        let mut idx = 0;
        for i in 0..order {
            let u = rule.nodes[i];
            for j in 0..order {
                let v = rule.nodes[j];
                weights[idx] = rule.weights[i] * rule.weights[j];
                let mut up = 1.0;
                let mut vp = 1.0;
                for row in g.iter_mut().take(r) {
                    up *= u;
                    vp *= v;
                    row[idx] = up + vp;
                }
                let uv = u * v;
                g[r][idx] = uv;
                g[r + 1][idx] = u * uv + v * uv;
                g[r + 2][idx] = uv * uv;
                idx += 1;
            }
        }
        DualWorkspace { g, weights, k }
    }

    /// Log of the unnormalized mass and the normalized node probabilities,
    /// max-exponent subtracted for overflow safety.
    fn log_z_and_probs(&self, lam: &[f64], probs: &mut [f64]) -> f64 {
        let n = self.weights.len();
        let mut smax = f64::NEG_INFINITY;
        for i in 0..n {
            let mut s = 0.0;
            for (lj, gj) in lam.iter().zip(&self.g) {
                s -= lj * gj[i];
            }
            probs[i] = s;
            if s > smax {
                smax = s;
            }
        }
        let mut z = 0.0;
        for (p, w) in probs.iter_mut().zip(&self.weights) {
            *p = w * (*p - smax).exp();
            z += *p;
        }
        for p in probs.iter_mut() {
            *p /= z;
        }
        smax + z.ln()
    }

    fn dual(&self, lam: &[f64], m: &[f64], probs: &mut [f64]) -> ObjectiveEval {
        let k = self.k;
        let log_z = self.log_z_and_probs(lam, probs);
        let mut eg = vec![0.0; k];
        for (j, gj) in self.g.iter().enumerate() {
            let mut s = 0.0;
            for (p, gv) in probs.iter().zip(gj) {
                s += p * gv;
            }
            eg[j] = s;
        }
        let mut hess = vec![0.0; k * k];
        for a in 0..k {
            for b in a..k {
                let mut s = 0.0;
                let (ga, gb) = (&self.g[a], &self.g[b]);
                for i in 0..probs.len() {
                    s += probs[i] * (ga[i] - eg[a]) * (gb[i] - eg[b]);
                }
                hess[a * k + b] = s;
                hess[b * k + a] = s;
            }
        }
        let value = log_z + lam.iter().zip(m).map(|(l, mi)| l * mi).sum::<f64>();
        let gradient = m.iter().zip(&eg).map(|(mi, e)| mi - e).collect();
        ObjectiveEval {
            value,
            gradient,
            hessian: hess,
        }
    }
}

/// Solves the convex dual for the maxent coefficients.
///
/// Minimizes `log iint exp(-lam . g) + lam . m` over the r+3
/// non-normalization coefficients, continuing along a path from the
/// independence targets for robustness near the moment-body boundary;
/// the normalization coefficient is recovered afterwards. Targets whose
/// solve diverges (coefficient blow-up or a stalled continuation) are
/// reported as infeasible: no copula-form density matches them.
pub fn fit_copula(
    t: &ConstraintTargets,
    rule: &QuadratureRule,
    cfg: &SolverConfig,
) -> Result<CopulaDensity> {
    let r = t.r;
    let ws = DualWorkspace::new(rule, r);
    let m_goal = t.dual_targets();
    let m_start = ConstraintTargets::independence(r).dual_targets();
    let mut probs = vec![0.0; ws.weights.len()];
    let mut lam = vec![0.0; ws.k];
    let mut tpos = 0.0f64;
    let mut step = 1.0f64;
    while tpos < 1.0 {
        let tnext = (tpos + step).min(1.0);
        let m: Vec<f64> = m_start
            .iter()
            .zip(&m_goal)
            .map(|(a, b)| (1.0 - tnext) * a + tnext * b)
            .collect();
        let attempt = newton_minimize(|l| ws.dual(l, &m, &mut probs), &lam, cfg);
        let accepted = match attempt {
            Ok(next) if next.iter().all(|l| l.abs() <= LAMBDA_CAP) => {
                lam = next;
                true
            }
            _ => false,
        };
        if accepted {
            tpos = tnext;
            step = (step * 2.0).min(1.0);
        } else {
            step *= 0.5;
            if step < MIN_HOMOTOPY_STEP {
                return Err(Error::Infeasible(format!(
                    "continuation stalled at {:.1}% of the way to the requested moments",
                    100.0 * tpos
                )));
            }
        }
    }
    // normalization coefficient from iint c = 1
    let log_z = ws.log_z_and_probs(&lam, &mut probs);
    let lambda0 = log_z - 1.0;
    let mut lambda = Vec::with_capacity(r + 4);
    lambda.push(lambda0);
    lambda.extend_from_slice(&lam);
    let density = CopulaDensity {
        r,
        lambda,
        achieved_moments: t.clone(),
        residual_norm: f64::NAN,
        fit_order: rule.order(),
    };
    let achieved = copula_moments(&density, rule);
    let residual = max_residual(t, &achieved);
    if !(residual <= cfg.residual_tolerance.max(1e-8)) {
        return Err(Error::MaxIterationsExceeded(cfg.max_iterations));
    }
    Ok(CopulaDensity {
        achieved_moments: achieved,
        residual_norm: residual,
        ..density
    })
}

fn max_residual(t: &ConstraintTargets, achieved: &ConstraintTargets) -> f64 {
    let mut worst = (t.uv_target - achieved.uv_target).abs();
    worst = worst.max((t.u2v_sym_target - achieved.u2v_sym_target).abs());
    worst = worst.max((t.u2v2_target - achieved.u2v2_target).abs());
    for (a, b) in t.symmetric_moments.iter().zip(&achieved.symmetric_moments) {
        worst = worst.max((a - b).abs());
    }
    worst
}

/// Quadrature evaluation of every constraint integral against the density.
pub fn copula_moments(c: &CopulaDensity, rule: &QuadratureRule) -> ConstraintTargets {
    let r = c.r;
    let order = rule.order();
    let mut sym = vec![0.0; r];
    let (mut uv, mut s2, mut m22) = (0.0, 0.0, 0.0);
    for i in 0..order {
        let u = rule.nodes[i];
        let wu = rule.weights[i];
        for j in 0..order {
            let v = rule.nodes[j];
            let w = wu * rule.weights[j];
            let dens = w * copula_pdf(c, u, v);
            let mut up = 1.0;
            let mut vp = 1.0;
            for smom in sym.iter_mut() {
                up *= u;
                vp *= v;
                // per-variable moment: average the structurally equal pair
                *smom += dens * 0.5 * (up + vp);
            }
            let p = u * v;
            uv += dens * p;
            s2 += dens * (u * p + v * p);
            m22 += dens * p * p;
        }
    }
    ConstraintTargets {
        r,
        symmetric_moments: sym,
        uv_target: uv,
        u2v_sym_target: s2,
        u2v2_target: m22,
    }
}
