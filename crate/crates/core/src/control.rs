//! T2-Hotelling statistic, coverage probability under the fitted joint
//! density, and control-limit root-finding.

use crate::error::{Error, Result};
use crate::joint::JointModel;
use crate::numerics::{gauss_legendre, QuadratureRule};
use crate::ranks::BivariateSample;

/// Mean vector and inverse covariance of the monitored pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotellingParams {
    pub mu: (f64, f64),
    /// Symmetric positive definite 2x2 inverse covariance.
    pub sigma_inv: [[f64; 2]; 2],
}

impl HotellingParams {
    /// Builds params from a covariance matrix, inverting it exactly.
    pub fn from_covariance(mu: (f64, f64), cov: [[f64; 2]; 2]) -> Result<Self> {
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        if !(det > 0.0) || !(cov[0][0] > 0.0) {
            return Err(Error::SingularCovariance);
        }
        Ok(HotellingParams {
            mu,
            sigma_inv: [
                [cov[1][1] / det, -cov[0][1] / det],
                [-cov[1][0] / det, cov[0][0] / det],
            ],
        })
    }
}

/// Where the Hotelling parameters come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamsSource {
    /// Quadrature moments of the fitted joint density.
    FittedDensity,
    /// Sample mean and the (n-1)-denominator sample covariance.
    SampleMoments,
    /// Sample mean and the successive-differences covariance
    /// `sum (x_{t+1}-x_t)(x_{t+1}-x_t)' / (2(n-1))`, the individuals-chart
    /// estimator that is robust to drifting means.
    SuccessiveDifferences,
}

/// Hotelling parameters from the fitted joint density, by quadrature.
pub fn estimate_params_density(m: &JointModel, rule: &QuadratureRule) -> Result<HotellingParams> {
    let order = rule.order();
    let (mut mass, mut ex, mut ey, mut exx, mut eyy, mut exy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..order {
        let u = rule.nodes[i];
        let x = m.margin_x.quantile(u);
        let wu = rule.weights[i];
        for j in 0..order {
            let v = rule.nodes[j];
            let y = m.margin_y.quantile(v);
            let w = wu * rule.weights[j] * crate::copula::copula_pdf(&m.copula, u, v);
            mass += w;
            ex += w * x;
            ey += w * y;
            exx += w * x * x;
            eyy += w * y * y;
            exy += w * x * y;
        }
    }
    let (ex, ey, exx, eyy, exy) = (ex / mass, ey / mass, exx / mass, eyy / mass, exy / mass);
    HotellingParams::from_covariance(
        (ex, ey),
        [
            [exx - ex * ex, exy - ex * ey],
            [exy - ex * ey, eyy - ey * ey],
        ],
    )
}

/// Hotelling parameters from sample statistics.
pub fn estimate_params_sample(
    sample: &BivariateSample,
    source: ParamsSource,
) -> Result<HotellingParams> {
    let n = sample.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 rows for sample moments, got {n}"
        )));
    }
    let mu = (sample.mean_x(), sample.mean_y());
    let cov = match source {
        ParamsSource::SampleMoments => {
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for &(x, y) in &sample.rows {
                let dx = x - mu.0;
                let dy = y - mu.1;
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
            let d = (n - 1) as f64;
            [[sxx / d, sxy / d], [sxy / d, syy / d]]
        }
        ParamsSource::SuccessiveDifferences => {
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for w in sample.rows.windows(2) {
                let dx = w[1].0 - w[0].0;
                let dy = w[1].1 - w[0].1;
                sxx += dx * dx;
                syy += dy * dy;
                sxy += dx * dy;
            }
            let d = 2.0 * (n - 1) as f64;
            [[sxx / d, sxy / d], [sxy / d, syy / d]]
        }
        ParamsSource::FittedDensity => {
            return Err(Error::InvalidArgument(
                "FittedDensity params come from estimate_params_density".into(),
            ))
        }
    };
    HotellingParams::from_covariance(mu, cov)
}

/// The T2 quadratic form.
pub fn t2(p: &HotellingParams, x: f64, y: f64) -> f64 {
    let dx = x - p.mu.0;
    let dy = y - p.mu.1;
    p.sigma_inv[0][0] * dx * dx + p.sigma_inv[1][1] * dy * dy + 2.0 * p.sigma_inv[0][1] * dx * dy
}

/// Control design: alpha, the solved upper control limit, and the coverage
/// actually attained there. The lower control limit is identically zero.
#[derive(Debug, Clone)]
pub struct ControlDesign {
    pub params: HotellingParams,
    pub alpha: f64,
    pub ucl: f64,
    pub lcl: f64,
    pub achieved_coverage: f64,
}

/// Node table for coverage integrals: per-node T2 value and probability
/// mass, sorted by T2 so that coverage is a prefix sum.
struct CoverageTable {
    t2_sorted: Vec<f64>,
    cum_mass: Vec<f64>,
}

impl CoverageTable {
    fn new(m: &JointModel, p: &HotellingParams, rule: &QuadratureRule) -> Self {
        let order = rule.order();
        let mut entries: Vec<(f64, f64)> = Vec::with_capacity(order * order);
        for i in 0..order {
            let u = rule.nodes[i];
            let x = m.margin_x.quantile(u);
            let wu = rule.weights[i];
            for j in 0..order {
                let v = rule.nodes[j];
                let y = m.margin_y.quantile(v);
                let w = wu * rule.weights[j] * crate::copula::copula_pdf(&m.copula, u, v);
                entries.push((t2(p, x, y), w));
            }
        }
        entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut cum = 0.0;
        let mut t2s = Vec::with_capacity(entries.len());
        let mut cums = Vec::with_capacity(entries.len());
        for (t, w) in entries {
            cum += w;
            t2s.push(t);
            cums.push(cum);
        }
        CoverageTable {
            t2_sorted: t2s,
            cum_mass: cums,
        }
    }

    fn coverage(&self, ucl: f64) -> f64 {
        // mass of nodes with t2 <= ucl
        let idx = self.t2_sorted.partition_point(|&t| t <= ucl);
        if idx == 0 {
            0.0
        } else {
            self.cum_mass[idx - 1]
        }
    }
}

/// `P(T2 <= ucl)` under the joint density: indicator-weighted quadrature
/// over the support rectangle (evaluated through the copula coordinates).
pub fn coverage_prob(m: &JointModel, p: &HotellingParams, ucl: f64, rule: &QuadratureRule) -> f64 {
    if ucl <= 0.0 {
        return 0.0;
    }
    CoverageTable::new(m, p, rule).coverage(ucl).min(1.0)
}

const UCL_BISECT_WIDTH: f64 = 1e-5;

/// Smallest bracketed `ucl` with coverage at least `1 - alpha`, by
/// geometric bracket expansion from `[0, guess]` followed by bisection.
pub fn find_ucl(
    m: &JointModel,
    p: &HotellingParams,
    alpha: f64,
    rule: &QuadratureRule,
) -> Result<ControlDesign> {
    assert!(alpha > 0.0 && alpha < 1.0, "alpha must be in (0,1)");
    let table = CoverageTable::new(m, p, rule);
    let want = 1.0 - alpha;
    let mut hi = 8.0;
    let mut expansions = 0;
    while table.coverage(hi) < want {
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::BracketFailure(hi));
        }
    }
    let mut lo = 0.0;
    while hi - lo > UCL_BISECT_WIDTH {
        let mid = 0.5 * (lo + hi);
        if table.coverage(mid) >= want {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ControlDesign {
        params: *p,
        alpha,
        ucl: hi,
        lcl: 0.0,
        achieved_coverage: table.coverage(hi),
    })
}

/// Solves for the UCL at `base_order`, doubling the quadrature order until
/// the limit moves by less than `tol` (or `max_order` is reached).
pub fn find_ucl_refined(
    m: &JointModel,
    p: &HotellingParams,
    alpha: f64,
    base_order: usize,
    max_order: usize,
    tol: f64,
) -> Result<ControlDesign> {
    let mut order = base_order;
    let mut design = find_ucl(m, p, alpha, &gauss_legendre(order))?;
    while order * 2 <= max_order {
        order *= 2;
        let next = find_ucl(m, p, alpha, &gauss_legendre(order))?;
        let shift = (next.ucl - design.ucl).abs();
        design = next;
        if shift < tol {
            break;
        }
    }
    Ok(design)
}
