//! Iterative phase-I filtering: fit the joint model, solve the control
//! limit, remove out-of-control points, and refit until every retained
//! point is in control; then classify phase-II points against the final
//! design.

use crate::arl::ShiftSpec;
use crate::control::{
    estimate_params_density, estimate_params_sample, find_ucl_refined, t2, ControlDesign,
    HotellingParams, ParamsSource,
};
use crate::copula::{build_targets, fit_copula, CopulaDensity};
use crate::error::{Error, Result};
use crate::joint::JointModel;
use crate::margin::{fit_marginal, Support};
use crate::numerics::{gauss_legendre, SolverConfig};
use crate::ranks::{estimate_dependence, BivariateSample, DependenceMeasures};

/// How marginal supports are chosen when not given explicitly:
/// `[0, 2 max]` for nonnegative data, otherwise `[min - range, max + range]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportPolicy {
    Auto,
    Explicit(Support),
}

impl SupportPolicy {
    pub fn resolve<I: Iterator<Item = f64>>(&self, values: I) -> Result<Support> {
        match self {
            SupportPolicy::Explicit(s) => Ok(*s),
            SupportPolicy::Auto => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for v in values {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if lo >= 0.0 {
                    Support::new(0.0, 2.0 * hi)
                } else {
                    let range = hi - lo;
                    Support::new(lo - range, hi + range)
                }
            }
        }
    }
}

/// When the dependence measures are re-estimated during filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepPolicy {
    /// Re-estimate on the retained rows of every stage.
    PerStage,
    /// Estimate once on the full phase-I sample and hold fixed.
    FixedPhase1,
}

/// Phase-I pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub alpha: f64,
    pub r: usize,
    /// Quadrature order for the copula fit.
    pub fit_order: usize,
    /// Quadrature order for fitted-density parameter moments.
    pub param_order: usize,
    /// Base and maximum order for the refined control-limit solve.
    pub ucl_order: usize,
    pub ucl_max_order: usize,
    pub ucl_refine_tol: f64,
    pub support_x: SupportPolicy,
    pub support_y: SupportPolicy,
    pub dep_policy: DepPolicy,
    /// Dependence measures imposed from outside (for example estimated on
    /// a longer record than the phase-I window); overrides `dep_policy`.
    pub dep_override: Option<DependenceMeasures>,
    /// Parameter source for the flagging statistic.
    pub flag_params: ParamsSource,
    /// Parameter source for the coverage integral behind the control limit.
    pub ucl_params: ParamsSource,
    /// Scale applied to the T2 of new (phase-II) observations.
    pub phase2_scale: f64,
    /// Smallest retained-set size the filter may reach.
    pub min_retained: usize,
    pub solver: SolverConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: 0.05,
            r: 5,
            fit_order: 64,
            param_order: 256,
            ucl_order: 128,
            ucl_max_order: 512,
            ucl_refine_tol: 1e-3,
            support_x: SupportPolicy::Auto,
            support_y: SupportPolicy::Auto,
            dep_policy: DepPolicy::PerStage,
            dep_override: None,
            flag_params: ParamsSource::SuccessiveDifferences,
            ucl_params: ParamsSource::FittedDensity,
            phase2_scale: 2.0,
            min_retained: 10,
            solver: SolverConfig::default(),
        }
    }
}

/// One filtering stage.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub stage_index: usize,
    /// 0-based input-row indices retained at the start of this stage.
    pub retained_indices: Vec<usize>,
    pub dependence: DependenceMeasures,
    pub model: JointModel,
    pub design: ControlDesign,
    pub flag_params: HotellingParams,
    /// Flagging statistic for every input row under this stage's params.
    pub t2_values: Vec<f64>,
    /// Rows flagged out of control at this stage (0-based).
    pub flagged_indices: Vec<usize>,
}

/// Phase-II classification of one new row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase2Row {
    pub index: usize,
    pub t2: f64,
    pub out_of_control: bool,
}

/// Outcome of the iterative filter.
#[derive(Debug, Clone)]
pub struct Phase1Result {
    pub stages: Vec<StageRecord>,
    pub final_design: ControlDesign,
    pub phase2_flags: Vec<Phase2Row>,
    /// Set when a refit became infeasible and the filter stopped at the
    /// last feasible stage instead of finishing with zero flags.
    pub stopped_early: Option<String>,
}

impl Phase1Result {
    pub fn final_stage(&self) -> &StageRecord {
        self.stages.last().expect("at least one stage")
    }
}

fn stage_params(
    source: ParamsSource,
    sub: &BivariateSample,
    model: &JointModel,
    cfg: &PipelineConfig,
) -> Result<HotellingParams> {
    match source {
        ParamsSource::FittedDensity => {
            estimate_params_density(model, &gauss_legendre(cfg.param_order))
        }
        s => estimate_params_sample(sub, s),
    }
}

fn fit_stage_model(
    sub: &BivariateSample,
    dep: &DependenceMeasures,
    supports: (Support, Support),
    cfg: &PipelineConfig,
    copula_cache: Option<&CopulaDensity>,
) -> Result<JointModel> {
    let margin_x = fit_marginal(sub.mean_x(), supports.0, &cfg.solver)?;
    let margin_y = fit_marginal(sub.mean_y(), supports.1, &cfg.solver)?;
    let copula = match copula_cache {
        Some(c) => c.clone(),
        None => fit_copula(
            &build_targets(dep, cfg.r),
            &gauss_legendre(cfg.fit_order),
            &cfg.solver,
        )?,
    };
    Ok(JointModel {
        margin_x,
        margin_y,
        copula,
    })
}

/// Runs the iterative phase-I procedure.
pub fn run_phase1(sample: &BivariateSample, cfg: &PipelineConfig) -> Result<Phase1Result> {
    let n = sample.len();
    if n < cfg.min_retained {
        return Err(Error::TooFewSamples {
            n,
            floor: cfg.min_retained,
        });
    }
    let support_x = cfg.support_x.resolve(sample.xs())?;
    let support_y = cfg.support_y.resolve(sample.ys())?;
    let mut retained: Vec<usize> = (0..n).collect();
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut fixed_dep: Option<DependenceMeasures> = cfg.dep_override;
    let mut copula_cache: Option<CopulaDensity> = None;
    let mut stopped_early = None;

    loop {
        let stage_index = stages.len() + 1;
        if retained.len() < cfg.min_retained {
            return Err(Error::TooFewSamples {
                n: retained.len(),
                floor: cfg.min_retained,
            }
            .at_stage(stage_index));
        }
        let sub = sample.select(&retained)?;
        let dep = match fixed_dep {
            Some(d) => d,
            None => {
                let d = estimate_dependence(&sub).map_err(|e| e.at_stage(stage_index))?;
                if cfg.dep_policy == DepPolicy::FixedPhase1 {
                    fixed_dep = Some(d);
                }
                d
            }
        };
        let stage = (|| -> Result<StageRecord> {
            let model = fit_stage_model(
                &sub,
                &dep,
                (support_x, support_y),
                cfg,
                copula_cache.as_ref(),
            )?;
            let ucl_p = stage_params(cfg.ucl_params, &sub, &model, cfg)?;
            let design = find_ucl_refined(
                &model,
                &ucl_p,
                cfg.alpha,
                cfg.ucl_order,
                cfg.ucl_max_order,
                cfg.ucl_refine_tol,
            )?;
            let flag_p = stage_params(cfg.flag_params, &sub, &model, cfg)?;
            let t2_values: Vec<f64> = sample
                .rows
                .iter()
                .map(|&(x, y)| t2(&flag_p, x, y))
                .collect();
            let flagged_indices: Vec<usize> = retained
                .iter()
                .copied()
                .filter(|&i| t2_values[i] > design.ucl)
                .collect();
            Ok(StageRecord {
                stage_index,
                retained_indices: retained.clone(),
                dependence: dep,
                model,
                design,
                flag_params: flag_p,
                t2_values,
                flagged_indices,
            })
        })();
        let stage = match stage {
            Ok(s) => s,
            Err(e) => {
                if stages.is_empty() {
                    return Err(e.at_stage(stage_index));
                }
                // keep the last feasible stage and report why we stopped
                stopped_early = Some(format!("stage {stage_index}: {e}"));
                break;
            }
        };
        if cfg.dep_policy == DepPolicy::FixedPhase1 || cfg.dep_override.is_some() {
            copula_cache = Some(stage.model.copula.clone());
        }
        let flags = stage.flagged_indices.clone();
        stages.push(stage);
        if flags.is_empty() {
            break;
        }
        retained.retain(|i| !flags.contains(i));
    }

    let final_design = stages.last().expect("at least one stage").design.clone();
    Ok(Phase1Result {
        stages,
        final_design,
        phase2_flags: Vec::new(),
        stopped_early,
    })
}

/// Classifies new rows against the final design. The monitored statistic
/// for new observations is `phase2_scale * t2`.
pub fn classify_phase2(
    result: &Phase1Result,
    new_rows: &BivariateSample,
    cfg: &PipelineConfig,
) -> Vec<Phase2Row> {
    let last = result.final_stage();
    new_rows
        .rows
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| {
            let v = cfg.phase2_scale * t2(&last.flag_params, x, y);
            Phase2Row {
                index: i,
                t2: v,
                out_of_control: v > result.final_design.ucl,
            }
        })
        .collect()
}

/// Convenience: a mean-shifted copy of a stage model (used by the ARL
/// commands on top of phase-I output).
pub fn shifted_stage_model(
    model: &JointModel,
    shift: ShiftSpec,
    solver: &SolverConfig,
) -> Result<JointModel> {
    crate::arl::shifted_model(model, shift, solver)
}
