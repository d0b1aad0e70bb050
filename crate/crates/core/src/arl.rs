//! Monte Carlo average-run-length estimation under the fitted model and
//! the mean-shift model.

use rayon::prelude::*;

use crate::control::{t2, ControlDesign};
use crate::error::Result;
use crate::joint::{JointModel, RandomStream, RejectionSampler};
use crate::margin::fit_marginal;
use crate::numerics::SolverConfig;

/// Mean shift in multiples of the fitted marginal standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSpec {
    pub delta_x: f64,
    pub delta_y: f64,
}

/// Run-length summary over the replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArlReport {
    pub mean_rl: f64,
    pub var_rl: f64,
    pub replications: usize,
    /// Runs cut off at the cap (counted so truncation bias is visible).
    pub truncated_runs: usize,
}

/// Simulates run lengths: each replication draws from `generating` until
/// the monitored T2 (under `design.params`) exceeds the control limit.
///
/// Replications are independent, use per-replication stream ids, and are
/// aggregated in replication order, so the report is deterministic for a
/// given `RandomStream` regardless of scheduling.
pub fn simulate_arl(
    generating: &JointModel,
    design: &ControlDesign,
    reps: usize,
    cap: usize,
    rng: &RandomStream,
) -> Result<ArlReport> {
    assert!(reps >= 1 && cap >= 1);
    let sampler = RejectionSampler::new(generating);
    let runs: Vec<Result<(usize, bool)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut r = rng
                .with_stream(rng.stream_id.wrapping_add(rep as u64))
                .rng();
            for count in 1..=cap {
                let (x, y) = sampler.draw(&mut r)?;
                if t2(&design.params, x, y) > design.ucl {
                    return Ok((count, false));
                }
            }
            Ok((cap, true))
        })
        .collect();
    let mut lens = Vec::with_capacity(reps);
    let mut truncated = 0usize;
    for r in runs {
        let (len, cut) = r?;
        lens.push(len as f64);
        if cut {
            truncated += 1;
        }
    }
    let mean = lens.iter().sum::<f64>() / reps as f64;
    let var = if reps > 1 {
        lens.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (reps - 1) as f64
    } else {
        0.0
    };
    Ok(ArlReport {
        mean_rl: mean,
        var_rl: var,
        replications: reps,
        truncated_runs: truncated,
    })
}

/// Refits each marginal with target mean `mu + delta * sigma` (sigma from
/// the fitted marginal) on the same support; the copula is unchanged.
pub fn shifted_model(m: &JointModel, shift: ShiftSpec, cfg: &SolverConfig) -> Result<JointModel> {
    let (mx, sx) = m.margin_x.moments();
    let (my, sy) = m.margin_y.moments();
    let margin_x = fit_marginal(mx + shift.delta_x * sx.sqrt(), m.margin_x.support, cfg)?;
    let margin_y = fit_marginal(my + shift.delta_y * sy.sqrt(), m.margin_y.support, cfg)?;
    Ok(JointModel {
        margin_x,
        margin_y,
        copula: m.copula.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{fit_copula, ConstraintTargets};
    use crate::margin::{fit_marginal, Support};
    use crate::numerics::gauss_legendre;
    use approx::assert_abs_diff_eq;

    fn unit_exp_model() -> JointModel {
        let cop = fit_copula(
            &ConstraintTargets::independence(5),
            &gauss_legendre(32),
            &SolverConfig::default(),
        )
        .unwrap();
        let m = fit_marginal(
            1.0,
            Support::new(0.0, f64::INFINITY).unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        JointModel {
            margin_x: m.clone(),
            margin_y: m,
            copula: cop,
        }
    }

    #[test]
    fn ucl_below_minimum_t2_gives_unit_run_lengths() {
        let m = unit_exp_model();
        let design = ControlDesign {
            params: crate::control::HotellingParams {
                // mean far outside the support: every point signals
                mu: (-100.0, -100.0),
                sigma_inv: [[1.0, 0.0], [0.0, 1.0]],
            },
            alpha: 0.05,
            ucl: 1.0,
            lcl: 0.0,
            achieved_coverage: 0.0,
        };
        let rep = simulate_arl(&m, &design, 200, 1000, &RandomStream::new(11, 0)).unwrap();
        assert_eq!(rep.mean_rl, 1.0);
        assert_eq!(rep.var_rl, 0.0);
        assert_eq!(rep.truncated_runs, 0);
    }

    #[test]
    fn zero_shift_is_identity() {
        let m = unit_exp_model();
        let s = shifted_model(
            &m,
            ShiftSpec {
                delta_x: 0.0,
                delta_y: 0.0,
            },
            &SolverConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(s.margin_x.lambda1, m.margin_x.lambda1, epsilon = 1e-9);
        assert_abs_diff_eq!(s.margin_y.lambda1, m.margin_y.lambda1, epsilon = 1e-9);
    }

    #[test]
    fn unit_shift_of_unit_exponential_doubles_the_mean() {
        let m = unit_exp_model();
        let s = shifted_model(
            &m,
            ShiftSpec {
                delta_x: 1.0,
                delta_y: 0.0,
            },
            &SolverConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(s.margin_x.target_mean, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.margin_x.lambda1, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn determinism() {
        let m = unit_exp_model();
        let design = crate::control::find_ucl(
            &m,
            &crate::control::estimate_params_density(&m, &gauss_legendre(128)).unwrap(),
            0.05,
            &gauss_legendre(128),
        )
        .unwrap();
        let a = simulate_arl(&m, &design, 100, 10_000, &RandomStream::new(5, 100)).unwrap();
        let b = simulate_arl(&m, &design, 100, 10_000, &RandomStream::new(5, 100)).unwrap();
        assert_eq!(a, b);
    }
}
