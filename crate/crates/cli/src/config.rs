use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use copent_core::control::ParamsSource;
use copent_core::margin::Support;
use copent_core::phase1::{DepPolicy, PipelineConfig, SupportPolicy};
use copent_core::ranks::DependenceMeasures;
use copent_core::sig9;

use crate::CommonOpts;

pub const ENV_PREFIX: &str = "COPENT_";

/// Preset dependence groups selectable with `--group` (nu2 := nu1).
pub const DEP_GROUPS: [(f64, f64, f64); 5] = [
    (-0.4, -0.5, 0.2),
    (-0.1, -0.18, 0.45),
    (0.0, 0.0, 0.5),
    (0.1, 0.18, 0.55),
    (0.4, 0.5, 0.8),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: PathBuf,
    pub alpha: f64,
    pub r: usize,
    /// Replace the fitted copula with the independence copula: the
    /// copula-free bivariate maxent density under the mean constraints
    /// (the product of the two marginals), kept as a comparison baseline.
    pub baseline: bool,
    pub order: usize,
    pub param_order: usize,
    pub ucl_order: usize,
    pub ucl_max_order: usize,
    pub seed: u64,
    pub support_x: SupportPolicy,
    pub support_y: SupportPolicy,
    pub dep_policy: String,
    pub flag_params: ParamsSource,
    pub ucl_params: ParamsSource,
    pub phase2_scale: f64,
    pub min_retained: usize,
    pub reps: usize,
    pub cap: usize,
    pub col_x: Option<String>,
    pub col_y: Option<String>,
    pub phase1_rows: Option<usize>,
    pub dep_override: Option<DependenceMeasures>,
    pub mu_x: Option<f64>,
    pub mu_y: Option<f64>,
    pub delta_grid: Vec<f64>,
}

fn parse_support(s: &str) -> Result<SupportPolicy, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(SupportPolicy::Auto);
    }
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("support must be `auto` or `lo,hi`, got {s:?}"));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|e| format!("{e}"))?;
    let hi = match parts[1].trim() {
        "inf" | "Inf" | "INF" => f64::INFINITY,
        t => t.parse().map_err(|e| format!("{e}"))?,
    };
    Support::new(lo, hi)
        .map(SupportPolicy::Explicit)
        .map_err(|e| e.to_string())
}

fn support_to_string(p: &SupportPolicy) -> String {
    match p {
        SupportPolicy::Auto => "auto".into(),
        SupportPolicy::Explicit(s) => {
            if s.hi.is_infinite() {
                format!("{},inf", s.lo)
            } else {
                format!("{},{}", s.lo, s.hi)
            }
        }
    }
}

fn parse_params_source(s: &str) -> Result<ParamsSource, String> {
    match s {
        "fitted-density" => Ok(ParamsSource::FittedDensity),
        "sample-moments" => Ok(ParamsSource::SampleMoments),
        "successive-differences" => Ok(ParamsSource::SuccessiveDifferences),
        _ => Err(format!(
            "params source must be fitted-density | sample-moments | successive-differences, got {s:?}"
        )),
    }
}

fn params_source_to_string(p: ParamsSource) -> &'static str {
    match p {
        ParamsSource::FittedDensity => "fitted-density",
        ParamsSource::SampleMoments => "sample-moments",
        ParamsSource::SuccessiveDifferences => "successive-differences",
    }
}

const KNOWN_KEYS: &[&str] = &[
    "data",
    "out",
    "alpha",
    "r",
    "baseline",
    "order",
    "param_order",
    "ucl_order",
    "ucl_max_order",
    "seed",
    "support_x",
    "support_y",
    "dep_policy",
    "flag_params",
    "ucl_params",
    "phase2_scale",
    "min_retained",
    "reps",
    "cap",
    "col_x",
    "col_y",
    "phase1_rows",
    "rho",
    "nu1",
    "nu2",
    "eta",
    "group",
    "mu_x",
    "mu_y",
    "delta_grid",
];

impl RunConfig {
    /// Defaults, then the config file, then environment overrides
    /// (`COPENT_<KEY>`), then command-line flags.
    pub fn assemble(opts: &CommonOpts) -> Result<RunConfig, String> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        if let Some(path) = &opts.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or(format!("line {}: expected key=value", lineno + 1))?;
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        for key in KNOWN_KEYS {
            if let Ok(v) = std::env::var(format!("{ENV_PREFIX}{}", key.to_uppercase())) {
                kv.insert(key.to_string(), v);
            }
        }
        for k in kv.keys() {
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(format!("unknown config key {k:?}"));
            }
        }

        macro_rules! get {
            ($key:literal, $flag:expr, $default:expr) => {
                match ($flag, kv.get($key)) {
                    (Some(v), _) => v.clone(),
                    (None, Some(v)) => {
                        v.parse().map_err(|e| format!("config key {}: {e}", $key))?
                    }
                    (None, None) => $default,
                }
            };
        }

        let data: Option<PathBuf> = opts
            .data
            .clone()
            .or_else(|| kv.get("data").map(PathBuf::from));
        let out: PathBuf = opts
            .out
            .clone()
            .or_else(|| kv.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("copent-out"));
        let support_x = match (&opts.support_x, kv.get("support_x")) {
            (Some(s), _) => parse_support(s)?,
            (None, Some(s)) => parse_support(s)?,
            _ => SupportPolicy::Auto,
        };
        let support_y = match (&opts.support_y, kv.get("support_y")) {
            (Some(s), _) => parse_support(s)?,
            (None, Some(s)) => parse_support(s)?,
            _ => SupportPolicy::Auto,
        };
        let dep_policy: String = get!("dep_policy", opts.dep_policy.clone(), "per-stage".into());
        if !["per-stage", "fixed-phase1", "fixed-all"].contains(&dep_policy.as_str()) {
            return Err(format!(
                "dep_policy must be per-stage | fixed-phase1 | fixed-all, got {dep_policy:?}"
            ));
        }
        let flag_params = parse_params_source(&get!(
            "flag_params",
            None::<String>,
            "successive-differences".into()
        ))?;
        let ucl_params =
            parse_params_source(&get!("ucl_params", None::<String>, "fitted-density".into()))?;

        let group: Option<usize> = match (opts.group, kv.get("group")) {
            (Some(g), _) => Some(g),
            (None, Some(v)) => Some(v.parse().map_err(|e| format!("group: {e}"))?),
            _ => None,
        };
        let mut rho = opts.rho;
        let mut nu1 = opts.nu1;
        let mut nu2 = opts.nu2;
        let mut eta = opts.eta;
        for (key, slot) in [
            ("rho", &mut rho),
            ("nu1", &mut nu1),
            ("nu2", &mut nu2),
            ("eta", &mut eta),
        ] {
            if slot.is_none() {
                if let Some(v) = kv.get(key) {
                    *slot = Some(v.parse().map_err(|e| format!("{key}: {e}"))?);
                }
            }
        }
        if let Some(g) = group {
            if !(1..=DEP_GROUPS.len()).contains(&g) {
                return Err(format!("group must be 1..={}", DEP_GROUPS.len()));
            }
            let (r0, n0, e0) = DEP_GROUPS[g - 1];
            rho = rho.or(Some(r0));
            nu1 = nu1.or(Some(n0));
            nu2 = nu2.or(Some(n0));
            eta = eta.or(Some(e0));
        }
        let dep_override = match (rho, nu1, nu2, eta) {
            (None, None, None, None) => None,
            (Some(r0), Some(n1), n2, Some(e0)) => {
                Some(DependenceMeasures::new(r0, n1, n2.unwrap_or(n1), e0))
            }
            _ => {
                return Err(
                    "dependence override needs at least rho, nu1 and eta (nu2 defaults to nu1)"
                        .into(),
                )
            }
        };

        let delta_raw: String = get!("delta_grid", opts.delta_grid.clone(), "0,0.1,0.5,1".into());
        let delta_grid: Vec<f64> = delta_raw
            .split(',')
            .map(|t| t.trim().parse().map_err(|e| format!("delta_grid: {e}")))
            .collect::<Result<_, String>>()?;

        let alpha: f64 = get!("alpha", opts.alpha, 0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(format!("alpha must be in (0, 1), got {alpha}"));
        }
        let r: usize = get!("r", opts.r, 5);
        if !(1..=8).contains(&r) {
            return Err(format!("r must be in 1..=8, got {r}"));
        }
        let baseline: bool = get!("baseline", opts.baseline.then_some(true), false);

        Ok(RunConfig {
            data,
            out,
            alpha,
            r,
            baseline,
            order: get!("order", opts.order, 64),
            param_order: get!("param_order", None::<usize>, 256),
            ucl_order: get!("ucl_order", None::<usize>, 128),
            ucl_max_order: get!("ucl_max_order", None::<usize>, 512),
            seed: get!("seed", opts.seed, 202608),
            support_x,
            support_y,
            dep_policy,
            flag_params,
            ucl_params,
            phase2_scale: get!("phase2_scale", None::<f64>, 2.0),
            min_retained: get!("min_retained", None::<usize>, 10),
            reps: get!("reps", opts.reps, 1000),
            cap: get!("cap", opts.cap, 100_000),
            col_x: opts.col_x.clone().or_else(|| kv.get("col_x").cloned()),
            col_y: opts.col_y.clone().or_else(|| kv.get("col_y").cloned()),
            phase1_rows: match (opts.phase1_rows, kv.get("phase1_rows")) {
                (Some(n), _) => Some(n),
                (None, Some(v)) => Some(v.parse().map_err(|e| format!("phase1_rows: {e}"))?),
                _ => None,
            },
            dep_override,
            mu_x: match (opts.mu_x, kv.get("mu_x")) {
                (Some(v), _) => Some(v),
                (None, Some(v)) => Some(v.parse().map_err(|e| format!("mu_x: {e}"))?),
                _ => None,
            },
            mu_y: match (opts.mu_y, kv.get("mu_y")) {
                (Some(v), _) => Some(v),
                (None, Some(v)) => Some(v.parse().map_err(|e| format!("mu_y: {e}"))?),
                _ => None,
            },
            delta_grid,
        })
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            alpha: self.alpha,
            r: self.r,
            fit_order: self.order,
            param_order: self.param_order,
            ucl_order: self.ucl_order,
            ucl_max_order: self.ucl_max_order,
            ucl_refine_tol: 1e-3,
            support_x: self.support_x,
            support_y: self.support_y,
            dep_policy: if self.dep_policy == "per-stage" {
                DepPolicy::PerStage
            } else {
                DepPolicy::FixedPhase1
            },
            dep_override: self.dep_override,
            flag_params: self.flag_params,
            ucl_params: self.ucl_params,
            phase2_scale: self.phase2_scale,
            min_retained: self.min_retained,
            solver: Default::default(),
        }
    }

    /// The `effective-config` file body; re-feeding it reproduces the run.
    pub fn effective(&self) -> String {
        let mut s = String::new();
        if let Some(d) = &self.data {
            let _ = writeln!(s, "data={}", d.display());
        }
        let _ = writeln!(s, "out={}", self.out.display());
        let _ = writeln!(s, "alpha={}", self.alpha);
        let _ = writeln!(s, "baseline={}", self.baseline);
        let _ = writeln!(s, "r={}", self.r);
        let _ = writeln!(s, "order={}", self.order);
        let _ = writeln!(s, "param_order={}", self.param_order);
        let _ = writeln!(s, "ucl_order={}", self.ucl_order);
        let _ = writeln!(s, "ucl_max_order={}", self.ucl_max_order);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "support_x={}", support_to_string(&self.support_x));
        let _ = writeln!(s, "support_y={}", support_to_string(&self.support_y));
        let _ = writeln!(s, "dep_policy={}", self.dep_policy);
        let _ = writeln!(
            s,
            "flag_params={}",
            params_source_to_string(self.flag_params)
        );
        let _ = writeln!(s, "ucl_params={}", params_source_to_string(self.ucl_params));
        let _ = writeln!(s, "phase2_scale={}", self.phase2_scale);
        let _ = writeln!(s, "min_retained={}", self.min_retained);
        let _ = writeln!(s, "reps={}", self.reps);
        let _ = writeln!(s, "cap={}", self.cap);
        if let Some(c) = &self.col_x {
            let _ = writeln!(s, "col_x={c}");
        }
        if let Some(c) = &self.col_y {
            let _ = writeln!(s, "col_y={c}");
        }
        if let Some(n) = self.phase1_rows {
            let _ = writeln!(s, "phase1_rows={n}");
        }
        if let Some(d) = &self.dep_override {
            let _ = writeln!(s, "rho={}", sig9(d.rho));
            let _ = writeln!(s, "nu1={}", sig9(d.nu1));
            let _ = writeln!(s, "nu2={}", sig9(d.nu2));
            let _ = writeln!(s, "eta={}", sig9(d.eta));
        }
        if let Some(v) = self.mu_x {
            let _ = writeln!(s, "mu_x={v}");
        }
        if let Some(v) = self.mu_y {
            let _ = writeln!(s, "mu_y={v}");
        }
        let _ = writeln!(
            s,
            "delta_grid={}",
            self.delta_grid
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        s
    }
}
