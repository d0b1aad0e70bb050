//! Ranks and the four rank-based dependence pre-estimators computed from a
//! bivariate sample.

use crate::error::{Error, Result};

/// An ordered bivariate sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateSample {
    pub rows: Vec<(f64, f64)>,
    pub labels: Option<(String, String)>,
}

impl BivariateSample {
    pub fn new(rows: Vec<(f64, f64)>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "sample needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        for (i, (x, y)) in rows.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::ParseError {
                    line: i + 1,
                    msg: format!("non-finite value ({x}, {y})"),
                });
            }
        }
        Ok(BivariateSample { rows, labels: None })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.0)
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.1)
    }

    pub fn mean_x(&self) -> f64 {
        self.xs().sum::<f64>() / self.len() as f64
    }

    pub fn mean_y(&self) -> f64 {
        self.ys().sum::<f64>() / self.len() as f64
    }

    /// Sub-sample keeping `indices` (0-based), preserving order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let rows = indices.iter().map(|&i| self.rows[i]).collect();
        let mut s = BivariateSample::new(rows)?;
        s.labels = self.labels.clone();
        Ok(s)
    }
}

/// Integer ranks of both coordinates; ties receive their maximal rank, as
/// the indicator-count definition `R_t = #{i : X_i <= X_t}` dictates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankPair {
    pub r: Vec<u32>,
    pub s: Vec<u32>,
    pub n: usize,
}

/// The four rank-dependence targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependenceMeasures {
    pub rho: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub eta: f64,
    /// Set when the eta estimate falls outside its nominal [0, 1] range
    /// (possible for small n); the value is still returned as-is.
    pub eta_outside_range: bool,
}

impl DependenceMeasures {
    pub fn new(rho: f64, nu1: f64, nu2: f64, eta: f64) -> Self {
        DependenceMeasures {
            rho,
            nu1,
            nu2,
            eta,
            eta_outside_range: !(0.0..=1.0).contains(&eta),
        }
    }
}

fn max_ranks(values: &[f64]) -> Vec<u32> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0u32; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // the whole tie block gets the maximal rank j+1
        for &idx in &order[i..=j] {
            ranks[idx] = (j + 1) as u32;
        }
        i = j + 1;
    }
    ranks
}

/// Ranks by the indicator-count definition `R_t = #{i : X_i <= X_t}`.
pub fn compute_ranks(sample: &BivariateSample) -> RankPair {
    let xs: Vec<f64> = sample.xs().collect();
    let ys: Vec<f64> = sample.ys().collect();
    RankPair {
        r: max_ranks(&xs),
        s: max_ranks(&ys),
        n: sample.len(),
    }
}

/// The rank pre-estimators of Spearman's rho, the two asymmetric Blest
/// measures, and the quadratic Blest variant.
pub fn estimate_dependence(sample: &BivariateSample) -> Result<DependenceMeasures> {
    let ranks = compute_ranks(sample);
    let n = ranks.n;
    if sample.xs().all(|x| x == sample.rows[0].0) {
        return Err(Error::DegenerateSample { axis: "x" });
    }
    if sample.ys().all(|y| y == sample.rows[0].1) {
        return Err(Error::DegenerateSample { axis: "y" });
    }
    let nf = n as f64;
    let np1 = nf + 1.0;
    let mut sum_rs = 0.0;
    let mut sum_nu1 = 0.0;
    let mut sum_nu2 = 0.0;
    let mut sum_eta = 0.0;
    for t in 0..n {
        let r = ranks.r[t] as f64;
        let s = ranks.s[t] as f64;
        sum_rs += r * s;
        let du = 1.0 - r / np1;
        let dv = 1.0 - s / np1;
        sum_nu1 += du * du * s;
        sum_nu2 += r * dv * dv;
        sum_eta += r * r * s * s;
    }
    let rho = 12.0 / (nf * nf * nf - nf) * sum_rs - 3.0 * np1 / (nf - 1.0);
    let c = (2.0 * nf + 1.0) / (nf - 1.0);
    let nu1 = c - 12.0 / (nf * nf - nf) * sum_nu1;
    let nu2 = c - 12.0 / (nf * nf - nf) * sum_nu2;
    let eta = 6.0 / (nf * nf - nf) * (sum_eta / (np1 * np1 * np1)) - (nf / 5.0 + 1.0) / (nf - 1.0);
    Ok(DependenceMeasures::new(rho, nu1, nu2, eta))
}
