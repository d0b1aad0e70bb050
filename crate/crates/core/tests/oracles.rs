//! Independent oracles for the derived expected values: brute-force rank
//! statistics, dense-grid integration of the marginals, Monte Carlo
//! quantiles and coverage, and closed-form copula-moment targets.

use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use copent_core::control::{coverage_prob, HotellingParams};
use copent_core::copula::{build_targets, copula_moments, fit_copula, ConstraintTargets};
use copent_core::joint::{sample_joint, JointModel, RandomStream};
use copent_core::margin::{fit_marginal, Support};
use copent_core::numerics::{bisect, gauss_legendre, SolverConfig};
use copent_core::ranks::{estimate_dependence, BivariateSample, DependenceMeasures};

fn solver() -> SolverConfig {
    SolverConfig::default()
}

/// Definitional O(n^2) Spearman: Pearson correlation of the indicator-count
/// rank vectors, independent of the library's rank algorithm.
fn spearman_brute_force(rows: &[(f64, f64)]) -> f64 {
    let n = rows.len();
    let rank = |pick: fn(&(f64, f64)) -> f64, t: usize| -> f64 {
        let vt = pick(&rows[t]);
        rows.iter().filter(|r| pick(r) <= vt).count() as f64
    };
    let r: Vec<f64> = (0..n).map(|t| rank(|p| p.0, t)).collect();
    let s: Vec<f64> = (0..n).map(|t| rank(|p| p.1, t)).collect();
    let mean = (n as f64 + 1.0) / 2.0;
    let mut num = 0.0;
    let mut dr = 0.0;
    let mut ds = 0.0;
    for t in 0..n {
        num += (r[t] - mean) * (s[t] - mean);
        dr += (r[t] - mean) * (r[t] - mean);
        ds += (s[t] - mean) * (s[t] - mean);
    }
    num / (dr * ds).sqrt()
}

#[test]
fn spearman_formula_matches_brute_force_on_tie_free_samples() {
    let mut rng = ChaCha12Rng::seed_from_u64(17);
    for _ in 0..100 {
        let n = rng.gen_range(5..60);
        let rows: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let sample = BivariateSample::new(rows.clone()).unwrap();
        let d = estimate_dependence(&sample).unwrap();
        assert_abs_diff_eq!(d.rho, spearman_brute_force(&rows), epsilon = 1e-12);
    }
}

#[test]
fn bisect_finds_the_logistic_quantile_of_a_monte_carlo_oracle() {
    // 10^7-draw Monte Carlo 95th percentile of the logistic law
    let mut rng = ChaCha12Rng::seed_from_u64(4242);
    let n = 10_000_000usize;
    let mut draws: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen();
            (u / (1.0 - u)).ln()
        })
        .collect();
    let idx = (0.95 * n as f64) as usize;
    draws.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).unwrap());
    let mc = draws[idx];

    let cdf = |x: f64| 1.0 / (1.0 + (-x).exp());
    let root = bisect(|x| cdf(x) - 0.95, -50.0, 50.0, 1e-10).unwrap();
    assert_abs_diff_eq!(root, 19.0f64.ln(), epsilon = 1e-9);
    // MC standard error of the quantile ~ sqrt(p(1-p)/n)/f(q) ~ 1.5e-3
    assert_abs_diff_eq!(root, mc, epsilon = 5e-3);
}

/// Dense-grid trapezoid integration of the fitted marginal: normalization,
/// mean, and variance on a 10^6-point grid.
fn grid_check(m: &copent_core::margin::MaxEntMarginal, hi_for_grid: f64) {
    let n = 1_000_000usize;
    let lo = m.support.lo;
    let h = (hi_for_grid - lo) / n as f64;
    let (mut mass, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let f = w * m.pdf(x);
        mass += f;
        mean += f * x;
        m2 += f * x * x;
    }
    mass *= h;
    mean *= h;
    m2 *= h;
    assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
    assert_abs_diff_eq!(
        mean,
        m.target_mean,
        epsilon = 1e-6 * m.target_mean.abs().max(1.0)
    );
    let (fit_mean, fit_var) = m.moments();
    assert_abs_diff_eq!(
        fit_mean,
        m.target_mean,
        epsilon = 1e-8 * m.target_mean.abs().max(1.0)
    );
    assert_abs_diff_eq!(fit_var, m2 - mean * mean, epsilon = 1e-6 * fit_var.max(1.0));
}

#[test]
fn marginal_fits_match_dense_grid_integration() {
    // production data margins
    let mx = fit_marginal(
        0.53845,
        Support::new(0.0, f64::INFINITY).unwrap(),
        &solver(),
    )
    .unwrap();
    grid_check(&mx, 40.0); // exp(-1.86*40) ~ 5e-33, truncation negligible
    let my = fit_marginal(59.9369, Support::new(0.0, 100.0).unwrap(), &solver()).unwrap();
    grid_check(&my, 100.0);
    // flood data margins
    let fx = fit_marginal(
        80.25714285714286,
        Support::new(0.0, 300.0).unwrap(),
        &solver(),
    )
    .unwrap();
    grid_check(&fx, 300.0);
    let fy = fit_marginal(
        9084.657142857143,
        Support::new(0.0, 20000.0).unwrap(),
        &solver(),
    )
    .unwrap();
    grid_check(&fy, 20000.0);
}

#[test]
fn marginal_coefficients_reproduce_reference_values() {
    // slopes recovered on the reconstructed supports match the published
    // coefficient tables for both datasets
    let mx = fit_marginal(
        0.53845,
        Support::new(0.0, f64::INFINITY).unwrap(),
        &solver(),
    )
    .unwrap();
    assert_abs_diff_eq!(mx.lambda1, 1.857182, epsilon = 1e-5);
    assert_abs_diff_eq!(mx.lambda0, -0.619060, epsilon = 1e-5);

    let my = fit_marginal(59.9369, Support::new(0.0, 100.0).unwrap(), &solver()).unwrap();
    assert_abs_diff_eq!(my.lambda1, -0.01221784, epsilon = 1e-7);

    let fx = fit_marginal(
        80.25714285714286,
        Support::new(0.0, 300.0).unwrap(),
        &solver(),
    )
    .unwrap();
    assert_abs_diff_eq!(fx.lambda1, 0.0108226, epsilon = 2e-6);

    let fy = fit_marginal(
        9084.657142857143,
        Support::new(0.0, 20000.0).unwrap(),
        &solver(),
    )
    .unwrap();
    assert_abs_diff_eq!(fy.lambda1, 2.759943e-5, epsilon = 2e-9);
}

/// Closed-form constraint targets of the FGM copula with parameter theta:
/// `c(u,v) = 1 + theta (1-2u)(1-2v)`.
pub fn fgm_targets(theta: f64, r: usize) -> ConstraintTargets {
    let e_uv = 0.25 + theta / 36.0;
    let e_sym = 1.0 / 3.0 + theta / 18.0;
    let e_22 = 1.0 / 9.0 + theta / 36.0;
    let rho = 12.0 * e_uv - 3.0;
    let nu = (4.0 * rho + 4.0 - 12.0 * e_sym) / 2.0;
    let eta = 6.0 * e_22 - 0.2;
    build_targets(&DependenceMeasures::new(rho, nu, nu, eta), r)
}

#[test]
fn fgm_moment_targets_are_matched_by_the_fit() {
    let rule = gauss_legendre(64);
    let t = fgm_targets(0.6, 5);
    assert_abs_diff_eq!(t.uv_target, 4.0 / 15.0, epsilon = 1e-15);
    assert_abs_diff_eq!(t.u2v_sym_target, 11.0 / 30.0, epsilon = 1e-15);
    assert_abs_diff_eq!(t.u2v2_target, 23.0 / 180.0, epsilon = 1e-15);
    let c = fit_copula(&t, &rule, &solver()).unwrap();
    let m = copula_moments(&c, &rule);
    assert_abs_diff_eq!(m.uv_target, t.uv_target, epsilon = 1e-6);
    assert_abs_diff_eq!(m.u2v_sym_target, t.u2v_sym_target, epsilon = 1e-6);
    assert_abs_diff_eq!(m.u2v2_target, t.u2v2_target, epsilon = 1e-6);
    for (a, b) in m.symmetric_moments.iter().zip(&t.symmetric_moments) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }
}

fn independence_exp_model() -> JointModel {
    let cop = fit_copula(
        &ConstraintTargets::independence(5),
        &gauss_legendre(32),
        &solver(),
    )
    .unwrap();
    let m = fit_marginal(1.0, Support::new(0.0, f64::INFINITY).unwrap(), &solver()).unwrap();
    JointModel {
        margin_x: m.clone(),
        margin_y: m,
        copula: cop,
    }
}

#[test]
fn coverage_quadrature_matches_monte_carlo() {
    let m = independence_exp_model();
    let p = HotellingParams {
        mu: (1.0, 1.0),
        sigma_inv: [[1.0, 0.0], [0.0, 1.0]],
    };
    let quad = coverage_prob(&m, &p, 2.0, &gauss_legendre(512));
    // 10^7 exponential pairs
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let n = 10_000_000usize;
    let mut hits = 0usize;
    for _ in 0..n {
        let x = -(1.0 - rng.gen::<f64>()).ln();
        let y = -(1.0 - rng.gen::<f64>()).ln();
        if (x - 1.0) * (x - 1.0) + (y - 1.0) * (y - 1.0) <= 2.0 {
            hits += 1;
        }
    }
    let mc = hits as f64 / n as f64;
    let se = (mc * (1.0 - mc) / n as f64).sqrt();
    assert_abs_diff_eq!(quad, mc, epsilon = 3.0 * se + 2e-4);
    // and both agree with the adaptive-quadrature reference value
    assert_abs_diff_eq!(quad, 0.801424029297, epsilon = 2e-4);
    assert_abs_diff_eq!(mc, 0.801424029297, epsilon = 3.0 * se);
}

#[test]
fn copula_sample_coordinates_are_uniform_per_axis() {
    // 10-bin chi-square on each axis of the (u,v) draws at the 0.001 level
    let cop = fit_copula(
        &ConstraintTargets::independence(5),
        &gauss_legendre(32),
        &solver(),
    )
    .unwrap();
    let uniform = fit_marginal(0.5, Support::new(0.0, 1.0).unwrap(), &solver()).unwrap();
    let m = JointModel {
        margin_x: uniform.clone(),
        margin_y: uniform,
        copula: cop,
    };
    let n = 100_000usize;
    let s = sample_joint(&m, n, &RandomStream::new(2024, 0)).unwrap();
    for pick in [0usize, 1] {
        let mut bins = [0usize; 10];
        for row in &s.rows {
            let v = if pick == 0 { row.0 } else { row.1 };
            bins[((v * 10.0) as usize).min(9)] += 1;
        }
        let expect = n as f64 / 10.0;
        let chi2: f64 = bins
            .iter()
            .map(|&b| (b as f64 - expect) * (b as f64 - expect) / expect)
            .sum();
        // chi-square(9) 0.999 quantile
        assert!(chi2 < 27.88, "axis {pick}: chi2 = {chi2}");
    }
}

#[test]
fn successive_difference_t2_reproduces_the_reference_column() {
    // production data rows 1-20: mean vector plus successive-differences
    // covariance reproduce the reference monitoring statistics exactly
    let path =
        std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/quesenberry.csv");
    let rows: Vec<(f64, f64)> = std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .take(20)
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    let sample = BivariateSample::new(rows).unwrap();
    let p = copent_core::control::estimate_params_sample(
        &sample,
        copent_core::control::ParamsSource::SuccessiveDifferences,
    )
    .unwrap();
    let t2 = |x, y| copent_core::control::t2(&p, x, y);
    assert_abs_diff_eq!(t2(0.538, 56.303), 12.10300519, epsilon = 1e-4);
    assert_abs_diff_eq!(t2(0.567, 60.558), 0.77889186, epsilon = 1e-4);
    assert_abs_diff_eq!(t2(0.664, 60.180), 9.51709933, epsilon = 1e-4);
    assert_abs_diff_eq!(t2(0.471, 59.574), 2.78971477, epsilon = 1e-4);
}

#[test]
fn shifted_run_lengths_are_shorter_than_in_control() {
    use copent_core::arl::{shifted_model, simulate_arl, ShiftSpec};
    use copent_core::control::{estimate_params_density, find_ucl};
    let rule = gauss_legendre(64);
    let c = fit_copula(&fgm_targets(0.6, 5), &rule, &solver()).unwrap();
    let m = JointModel {
        margin_x: fit_marginal(2.0, Support::new(0.0, f64::INFINITY).unwrap(), &solver()).unwrap(),
        margin_y: fit_marginal(1.0, Support::new(0.0, f64::INFINITY).unwrap(), &solver()).unwrap(),
        copula: c,
    };
    let p = estimate_params_density(&m, &gauss_legendre(256)).unwrap();
    let design = find_ucl(&m, &p, 0.05, &gauss_legendre(256)).unwrap();
    let rng = RandomStream::new(77, 0);
    let arl0 = simulate_arl(&m, &design, 400, 100_000, &rng).unwrap();
    let shifted = shifted_model(
        &m,
        ShiftSpec {
            delta_x: 1.0,
            delta_y: 1.0,
        },
        &solver(),
    )
    .unwrap();
    let arl1 = simulate_arl(&shifted, &design, 400, 100_000, &rng.with_stream(1000)).unwrap();
    assert!(
        arl1.mean_rl < arl0.mean_rl,
        "ARL1 {} should fall below ARL0 {}",
        arl1.mean_rl,
        arl0.mean_rl
    );
}

#[test]
fn dependence_round_trip_through_the_sampler() {
    // fit to FGM moments (rho = 0.2), draw 10^5 points with uniform
    // margins, re-estimate
    let rule = gauss_legendre(64);
    let c = fit_copula(&fgm_targets(0.6, 5), &rule, &solver()).unwrap();
    let uniform = fit_marginal(0.5, Support::new(0.0, 1.0).unwrap(), &solver()).unwrap();
    let m = JointModel {
        margin_x: uniform.clone(),
        margin_y: uniform,
        copula: c,
    };
    let n = 100_000usize;
    let s = sample_joint(&m, n, &RandomStream::new(7, 11)).unwrap();
    let d = estimate_dependence(&s).unwrap();
    let band = 3.0 / (n as f64).sqrt() * 1.5;
    assert_abs_diff_eq!(d.rho, 0.2, epsilon = band);
}
