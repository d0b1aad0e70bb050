use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use copent_core::arl::{shifted_model, simulate_arl, ShiftSpec};
use copent_core::control::{
    estimate_params_density, estimate_params_sample, find_ucl_refined, t2, ControlDesign,
    ParamsSource,
};
use copent_core::copula::{build_targets, fit_copula};
use copent_core::error::Error;
use copent_core::joint::{JointModel, RandomStream};
use copent_core::margin::{fit_marginal, MaxEntMarginal, Support};
use copent_core::numerics::gauss_legendre;
use copent_core::phase1::{classify_phase2, run_phase1, SupportPolicy};
use copent_core::ranks::{estimate_dependence, BivariateSample, DependenceMeasures};
use copent_core::{sig9, Result};

use crate::config::RunConfig;
use crate::ingest::load_csv;
use crate::svg;

fn write_out(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", dir.display())))?;
    fs::write(dir.join(name), body).map_err(|e| Error::InvalidArgument(format!("{name}: {e}")))
}


/// Copula for a run: the fitted maximum-entropy density, or the
/// independence copula when the copula-free comparison baseline is on.
fn fit_stage_copula(
    cfg: &RunConfig,
    dependence: &DependenceMeasures,
    solver: &copent_core::numerics::SolverConfig,
) -> Result<copent_core::copula::CopulaDensity> {
    if cfg.baseline {
        return Ok(copent_core::copula::CopulaDensity::independence(cfg.r));
    }
    fit_copula(
        &build_targets(dependence, cfg.r),
        &gauss_legendre(cfg.order),
        solver,
    )
}

struct Assembled {
    sample: Option<BivariateSample>,
    /// Phase-I prefix length (defaults to the whole sample).
    phase1_n: usize,
    dependence: DependenceMeasures,
    model: JointModel,
}

/// Builds sample (when data is given), dependence measures, marginals and
/// the copula according to the run configuration.
fn assemble(cfg: &RunConfig) -> Result<Assembled> {
    let sample = match &cfg.data {
        Some(path) => Some(load_csv(path, cfg.col_x.as_deref(), cfg.col_y.as_deref())?),
        None => None,
    };
    match sample {
        Some(sample) => {
            let phase1_n = cfg.phase1_rows.unwrap_or(sample.len()).min(sample.len());
            let phase1 = sample.select(&(0..phase1_n).collect::<Vec<_>>())?;
            let dependence = match cfg.dep_override {
                Some(d) => d,
                None => {
                    if cfg.dep_policy == "fixed-all" {
                        estimate_dependence(&sample)?
                    } else {
                        estimate_dependence(&phase1)?
                    }
                }
            };
            let sx = cfg.support_x.resolve(phase1.xs())?;
            let sy = cfg.support_y.resolve(phase1.ys())?;
            let solver = Default::default();
            let margin_x = fit_marginal(phase1.mean_x(), sx, &solver)?;
            let margin_y = fit_marginal(phase1.mean_y(), sy, &solver)?;
            let copula = fit_stage_copula(cfg, &dependence, &solver)?;
            Ok(Assembled {
                sample: Some(sample),
                phase1_n,
                dependence,
                model: JointModel {
                    margin_x,
                    margin_y,
                    copula,
                },
            })
        }
        None => {
            // simulation mode: means and dependence must come from config
            let (mu_x, mu_y) = match (cfg.mu_x, cfg.mu_y) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::InvalidArgument(
                        "without --data, provide --mu-x and --mu-y".into(),
                    ))
                }
            };
            let dependence = cfg.dep_override.ok_or(Error::InvalidArgument(
                "without --data, provide dependence measures (--group or --rho/--nu1/--eta)".into(),
            ))?;
            let default_support = |mu: f64| -> Result<Support> {
                if mu > 0.0 {
                    Support::new(0.0, f64::INFINITY)
                } else {
                    Err(Error::InvalidArgument(
                        "explicit supports required for non-positive means".into(),
                    ))
                }
            };
            let sx = match cfg.support_x {
                SupportPolicy::Explicit(s) => s,
                SupportPolicy::Auto => default_support(mu_x)?,
            };
            let sy = match cfg.support_y {
                SupportPolicy::Explicit(s) => s,
                SupportPolicy::Auto => default_support(mu_y)?,
            };
            let solver = Default::default();
            let margin_x = fit_marginal(mu_x, sx, &solver)?;
            let margin_y = fit_marginal(mu_y, sy, &solver)?;
            let copula = fit_stage_copula(cfg, &dependence, &solver)?;
            Ok(Assembled {
                sample: None,
                phase1_n: 0,
                dependence,
                model: JointModel {
                    margin_x,
                    margin_y,
                    copula,
                },
            })
        }
    }
}

fn margin_block(prefix: &str, m: &MaxEntMarginal) -> String {
    let (mean, var) = m.moments();
    let hi = if m.support.hi.is_infinite() {
        "inf".to_string()
    } else {
        sig9(m.support.hi)
    };
    format!(
        "{p}.support_lo={}\n{p}.support_hi={hi}\n{p}.lambda0={}\n{p}.lambda1={}\n{p}.target_mean={}\n{p}.mean={}\n{p}.variance={}\n",
        sig9(m.support.lo),
        sig9(m.lambda0),
        sig9(m.lambda1),
        sig9(m.target_mean),
        sig9(mean),
        sig9(var),
        p = prefix,
    )
}

fn marginals_text(a: &Assembled) -> String {
    format!(
        "{}{}",
        margin_block("margin_x", &a.model.margin_x),
        margin_block("margin_y", &a.model.margin_y)
    )
}

fn dependence_text(d: &DependenceMeasures) -> String {
    format!(
        "rho={}\nnu1={}\nnu2={}\neta={}\neta_outside_range={}\n",
        sig9(d.rho),
        sig9(d.nu1),
        sig9(d.nu2),
        sig9(d.eta),
        d.eta_outside_range
    )
}

fn model_text(a: &Assembled) -> String {
    let mut s = String::new();
    s.push_str(&marginals_text(a));
    s.push_str(&dependence_text(&a.dependence));
    for line in a.model.copula.to_key_value().lines() {
        let _ = writeln!(s, "copula.{line}");
    }
    s
}

fn design_text(d: &ControlDesign, note: Option<&str>) -> String {
    let mut s = format!(
        "alpha={}\nucl={}\nlcl=0\nachieved_coverage={}\nmu_x={}\nmu_y={}\nsigma_inv_11={}\nsigma_inv_12={}\nsigma_inv_22={}\n",
        d.alpha,
        sig9(d.ucl),
        sig9(d.achieved_coverage),
        sig9(d.params.mu.0),
        sig9(d.params.mu.1),
        sig9(d.params.sigma_inv[0][0]),
        sig9(d.params.sigma_inv[0][1]),
        sig9(d.params.sigma_inv[1][1]),
    );
    if let Some(n) = note {
        let _ = writeln!(s, "stopped_early={n}");
    }
    s
}

fn design_for(cfg: &RunConfig, a: &Assembled) -> Result<ControlDesign> {
    let params = match (cfg.ucl_params, &a.sample) {
        (ParamsSource::FittedDensity, _) | (_, None) => {
            estimate_params_density(&a.model, &gauss_legendre(cfg.param_order))?
        }
        (src, Some(sample)) => {
            let prefix = sample.select(&(0..a.phase1_n).collect::<Vec<_>>())?;
            estimate_params_sample(&prefix, src)?
        }
    };
    find_ucl_refined(
        &a.model,
        &params,
        cfg.alpha,
        cfg.ucl_order,
        cfg.ucl_max_order,
        1e-3,
    )
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    let a = assemble(cfg)?;
    write_out(&cfg.out, "marginals.txt", &marginals_text(&a))?;
    write_out(
        &cfg.out,
        "copula.txt",
        &format!(
            "{}{}",
            dependence_text(&a.dependence),
            a.model.copula.to_key_value()
        ),
    )?;
    write_out(&cfg.out, "model.txt", &model_text(&a))?;
    write_out(&cfg.out, "effective-config", &cfg.effective())
}

pub fn cmd_ucl(cfg: &RunConfig) -> Result<()> {
    let a = assemble(cfg)?;
    let design = design_for(cfg, &a)?;
    write_out(&cfg.out, "marginals.txt", &marginals_text(&a))?;
    write_out(
        &cfg.out,
        "copula.txt",
        &format!(
            "{}{}",
            dependence_text(&a.dependence),
            a.model.copula.to_key_value()
        ),
    )?;
    write_out(&cfg.out, "model.txt", &model_text(&a))?;
    write_out(&cfg.out, "design.txt", &design_text(&design, None))?;
    write_out(&cfg.out, "effective-config", &cfg.effective())
}

pub fn cmd_arl(cfg: &RunConfig) -> Result<()> {
    let a = assemble(cfg)?;
    let design = design_for(cfg, &a)?;
    let mut table =
        String::from("delta_x,delta_y,mean_rl,var_rl,beta,replications,truncated_runs\n");
    let solver = Default::default();
    for (cell, (dx, dy)) in cfg
        .delta_grid
        .iter()
        .flat_map(|dx| cfg.delta_grid.iter().map(move |dy| (*dx, *dy)))
        .enumerate()
    {
        let generating = shifted_model(
            &a.model,
            ShiftSpec {
                delta_x: dx,
                delta_y: dy,
            },
            &solver,
        )?;
        let stream = RandomStream::new(cfg.seed, (cell * cfg.reps) as u64);
        let report = simulate_arl(&generating, &design, cfg.reps, cfg.cap, &stream)?;
        let _ = writeln!(
            table,
            "{},{},{},{},{},{},{}",
            dx,
            dy,
            sig9(report.mean_rl),
            sig9(report.var_rl),
            // the implied second-type error for reporting: 1 - 1/ARL
            sig9(1.0 - 1.0 / report.mean_rl),
            report.replications,
            report.truncated_runs
        );
    }
    write_out(&cfg.out, "design.txt", &design_text(&design, None))?;
    write_out(&cfg.out, "arl_table.csv", &table)?;
    write_out(&cfg.out, "effective-config", &cfg.effective())
}

pub fn cmd_phase1(cfg: &RunConfig) -> Result<()> {
    let sample = match &cfg.data {
        Some(path) => load_csv(path, cfg.col_x.as_deref(), cfg.col_y.as_deref())?,
        None => return Err(Error::InvalidArgument("phase1 requires --data".into())),
    };
    let phase1_n = cfg.phase1_rows.unwrap_or(sample.len()).min(sample.len());
    let phase1_sample = sample.select(&(0..phase1_n).collect::<Vec<_>>())?;
    let mut pipe = cfg.pipeline();
    if cfg.dep_policy == "fixed-all" && pipe.dep_override.is_none() {
        pipe.dep_override = Some(estimate_dependence(&sample)?);
    }
    let mut result = run_phase1(&phase1_sample, &pipe)?;
    if phase1_n < sample.len() {
        let rest = sample.select(&(phase1_n..sample.len()).collect::<Vec<_>>())?;
        result.phase2_flags = classify_phase2(&result, &rest, &pipe);
    }

    let mut stages = String::from("stage,retained_n,ucl,achieved_coverage,flagged_rows\n");
    for st in &result.stages {
        let flagged = st
            .flagged_indices
            .iter()
            .map(|i| (i + 1).to_string())
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            stages,
            "{},{},{},{},{}",
            st.stage_index,
            st.retained_indices.len(),
            sig9(st.design.ucl),
            sig9(st.design.achieved_coverage),
            flagged
        );
    }
    if !result.phase2_flags.is_empty() {
        stages.push_str("phase2_row,t2,out_of_control\n");
        for row in &result.phase2_flags {
            let _ = writeln!(
                stages,
                "{},{},{}",
                phase1_n + row.index + 1,
                sig9(row.t2),
                row.out_of_control
            );
        }
    }
    write_out(&cfg.out, "stages.csv", &stages)?;
    write_out(
        &cfg.out,
        "design.txt",
        &design_text(&result.final_design, result.stopped_early.as_deref()),
    )?;
    write_out(&cfg.out, "effective-config", &cfg.effective())
}

pub fn cmd_chart(cfg: &RunConfig) -> Result<()> {
    let sample = match &cfg.data {
        Some(path) => load_csv(path, cfg.col_x.as_deref(), cfg.col_y.as_deref())?,
        None => return Err(Error::InvalidArgument("chart requires --data".into())),
    };
    let phase1_n = cfg.phase1_rows.unwrap_or(sample.len()).min(sample.len());
    let phase1_sample = sample.select(&(0..phase1_n).collect::<Vec<_>>())?;
    let mut pipe = cfg.pipeline();
    if cfg.dep_policy == "fixed-all" && pipe.dep_override.is_none() {
        pipe.dep_override = Some(estimate_dependence(&sample)?);
    }
    let result = run_phase1(&phase1_sample, &pipe)?;
    let last = result.final_stage();
    let ucl = result.final_design.ucl;

    let mut series: Vec<(usize, f64, bool)> = Vec::with_capacity(sample.len());
    let mut chart = String::from("index,t2,out_of_control,ucl,lcl\n");
    for (i, &(x, y)) in sample.rows.iter().enumerate() {
        let scale = if i < phase1_n { 1.0 } else { cfg.phase2_scale };
        let v = scale * t2(&last.flag_params, x, y);
        let out = v > ucl;
        series.push((i + 1, v, out));
        let _ = writeln!(chart, "{},{},{},{},0", i + 1, sig9(v), out, sig9(ucl));
    }
    write_out(&cfg.out, "chart.csv", &chart)?;
    write_out(
        &cfg.out,
        "chart.svg",
        &svg::control_chart(&series, ucl, phase1_n),
    )?;
    write_out(&cfg.out, "effective-config", &cfg.effective())
}
