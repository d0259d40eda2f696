//! Scenario files, the experiment runner and report emission.

pub mod verify;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coeffield::{
    make_field, CoefSpec, CoefficientField, Domain1D, FieldKind, FieldSpec, Mode, Profile, Shape, SigmaSignal, Term,
};
use crate::discretize::{build_mesh, Mesh};
use crate::eigensolve::{dirichlet_eigen, periodic_eigen, periodic_eigen_richardson};
use crate::error::{GpeError, Result};
use crate::floquet::{compute_bundle, compute_trace_set, separation_rate, BundleRequest, IntervalTag, TraceSet};
use crate::growthrate::{
    eigen_report, global_growth_rates, richardson_report, synthetic_trace_set, translate_scan, GrowthOptions,
    GrowthRateReport, InvariantCheck, TailMode, TailSpec,
};
use crate::kpp::{
    ancient_uniqueness_gap, entire_solution_pullback, linearized_mu_bp_plus, mp_decay_test, persistence_verdict,
    NonlinearitySpec, PullbackOptions, VerdictOptions,
};
use crate::stepper::StepScheme;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default output directory of `run`.
pub const OUT_DIR_ENV: &str = "GPE_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    #[serde(default = "default_n")]
    pub n_interior: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Combine `2·dt` and `dt` by Richardson extrapolation.
    #[serde(default)]
    pub richardson: bool,
}

fn default_n() -> usize {
    199
}
fn default_dt() -> f64 {
    1e-3
}
fn default_theta() -> f64 {
    1.0
}

impl Default for Discretization {
    fn default() -> Self {
        Self {
            n_interior: default_n(),
            dt: default_dt(),
            theta: default_theta(),
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizons {
    /// `None` picks `8/γ` from a coarse separation pre-run.
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default = "default_t_max")]
    pub t_max_plus: f64,
    #[serde(default = "default_t_max")]
    pub t_max_minus: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_t_max() -> f64 {
    50.0
}
fn default_stride() -> usize {
    10
}

impl Default for Horizons {
    fn default() -> Self {
        Self {
            burn_in: None,
            t_max_plus: default_t_max(),
            t_max_minus: default_t_max(),
            record_stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthConfig {
    #[serde(rename = "T_list", default)]
    pub t_list: Option<Vec<f64>>,
    #[serde(default = "default_one")]
    pub s_stride: usize,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    /// `None`: geometric tails for log-oscillatory fields, linear otherwise.
    #[serde(default)]
    pub tail_mode: Option<TailMode>,
    #[serde(default = "default_check_tol")]
    pub check_tol: f64,
}

fn default_one() -> usize {
    1
}
fn default_tail_fraction() -> f64 {
    0.5
}
fn default_check_tol() -> f64 {
    1e-3
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            t_list: None,
            s_stride: 1,
            tail_fraction: default_tail_fraction(),
            tail_mode: None,
            check_tol: default_check_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    EigenReport,
    SyntheticGrowth,
    KppPersistence,
    KppEntire,
    KppUniqueness,
    MpDecay,
    TranslateScan,
    OracleCrosscheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default = "empty_object")]
    pub parameters: Value,
}

fn empty_object() -> Value {
    json!({})
}

fn default_experiments() -> Vec<Experiment> {
    vec![Experiment {
        name: "eigen".into(),
        kind: ExperimentKind::EigenReport,
        parameters: empty_object(),
    }]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub domain: Domain1D,
    pub coefficients: FieldSpec,
    #[serde(default)]
    pub discretization: Discretization,
    #[serde(default)]
    pub horizons: Horizons,
    #[serde(default)]
    pub growthrate: GrowthConfig,
    #[serde(default = "default_experiments")]
    pub experiments: Vec<Experiment>,
    #[serde(default)]
    pub seed: u64,
}

fn schema_error(path: impl Into<String>, message: impl Into<String>) -> GpeError {
    GpeError::Scenario {
        path: path.into(),
        message: message.into(),
    }
}

fn from_value_at<T: DeserializeOwned>(value: &Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        schema_error(path, e.inner().to_string())
    })
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| schema_error(e.path().to_string(), e.inner().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    parse_scenario(&fs::read_to_string(path)?)
}

impl ScenarioConfig {
    /// The coefficient field; random signals without their own seed take the scenario seed.
    pub fn field(&self) -> Result<CoefficientField> {
        let mut spec = self.coefficients.clone();
        spec.seed = spec.seed.or(Some(self.seed));
        make_field(&spec, self.domain).map_err(|e| schema_error("coefficients", e.to_string()))
    }

    pub fn mesh(&self) -> Result<Mesh> {
        build_mesh(self.domain, self.discretization.n_interior)
    }

    pub fn scheme(&self) -> StepScheme {
        StepScheme {
            theta: self.discretization.theta,
            dt: self.discretization.dt,
            positivity_guard: true,
        }
    }

    /// Time steps of the pipeline, coarsest first.
    pub fn dts(&self) -> Vec<f64> {
        let dt = self.discretization.dt;
        if self.discretization.richardson {
            vec![2.0 * dt, dt]
        } else {
            vec![dt]
        }
    }

    pub fn tail(&self, field: &CoefficientField) -> TailSpec {
        TailSpec {
            fraction: self.growthrate.tail_fraction,
            mode: self.growthrate.tail_mode.unwrap_or(default_tail_mode(field.kind())),
        }
    }

    pub fn growth_options(&self, field: &CoefficientField) -> GrowthOptions {
        GrowthOptions {
            t_list: self.growthrate.t_list.clone(),
            s_stride: self.growthrate.s_stride,
            tail: self.tail(field),
            check_tol: self.growthrate.check_tol,
            c_sup: Some(field.bounds().c_max),
            ..GrowthOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.discretization;
        let h = &self.horizons;
        if self.name.trim().is_empty() {
            return Err(schema_error("name", "must not be empty"));
        }
        if self.domain.x_hi <= self.domain.x_lo || !self.domain.x_lo.is_finite() || !self.domain.x_hi.is_finite() {
            return Err(schema_error("domain", "need finite x_lo < x_hi"));
        }
        if d.n_interior < 3 {
            return Err(schema_error("discretization.n_interior", "need at least 3 interior nodes"));
        }
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            return Err(schema_error("discretization.dt", "must be positive"));
        }
        if d.theta != 1.0 && d.theta != 0.5 {
            return Err(schema_error("discretization.theta", "must be 1 or 0.5"));
        }
        for (p, v) in [("horizons.t_max_plus", h.t_max_plus), ("horizons.t_max_minus", h.t_max_minus)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(schema_error(p, "horizons must be positive"));
            }
        }
        if let Some(b) = h.burn_in {
            if !(b > 0.0 && b.is_finite()) {
                return Err(schema_error("horizons.burn_in", "horizons must be positive"));
            }
        }
        if h.record_stride == 0 {
            return Err(schema_error("horizons.record_stride", "must be >= 1"));
        }
        if let Some(l) = &self.growthrate.t_list {
            let t_max = h.t_max_plus.min(h.t_max_minus);
            if l.is_empty() {
                return Err(schema_error("growthrate.T_list", "must not be empty"));
            }
            if let Some((i, t)) = l.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
                return Err(schema_error(format!("growthrate.T_list[{i}]"), format!("window {t} must be positive")));
            }
            let m = l.iter().cloned().fold(0.0, f64::max);
            if m > t_max / 2.0 {
                return Err(schema_error(
                    "growthrate.T_list",
                    format!("largest window {m} exceeds half the shortest horizon ({t_max}/2)"),
                ));
            }
        }
        let g = &self.growthrate;
        if !(g.tail_fraction > 0.0 && g.tail_fraction < 1.0) {
            return Err(schema_error("growthrate.tail_fraction", "must lie in (0, 1)"));
        }
        if g.s_stride == 0 {
            return Err(schema_error("growthrate.s_stride", "must be >= 1"));
        }
        let field = self.field()?;
        let dt_max = self.dts().into_iter().fold(0.0, f64::max);
        let value = dt_max * d.theta * field.bounds().c_max.max(0.0);
        if value >= 1.0 {
            return Err(schema_error(
                "discretization.dt",
                format!("monotonicity condition dt·sup c⁺ < 1 violated: dt·θ·sup c⁺ = {value}"),
            ));
        }
        let mut seen = HashSet::new();
        for (i, e) in self.experiments.iter().enumerate() {
            if !seen.insert(e.name.as_str()) {
                return Err(schema_error(format!("experiments[{i}].name"), format!("duplicate experiment name `{}`", e.name)));
            }
            if e.name.is_empty() || e.name.contains(['/', '\\']) || e.name.starts_with('.') {
                return Err(schema_error(format!("experiments[{i}].name"), "must be a plain non-empty file name"));
            }
            let prefix = format!("experiments[{i}].parameters");
            match e.kind {
                ExperimentKind::EigenReport => from_value_at::<EigenReportParams>(&e.parameters, &prefix).map(|_| ()),
                ExperimentKind::SyntheticGrowth => from_value_at::<SyntheticParams>(&e.parameters, &prefix).map(|_| ()),
                ExperimentKind::KppPersistence => from_value_at::<PersistenceParams>(&e.parameters, &prefix).map(|_| ()),
                ExperimentKind::KppEntire => from_value_at::<PullbackParams>(&e.parameters, &prefix).map(|_| ()),
                ExperimentKind::KppUniqueness => from_value_at::<UniquenessParams>(&e.parameters, &prefix).map(|_| ()),
                ExperimentKind::MpDecay => from_value_at::<MpParams>(&e.parameters, &prefix).map(|_| ()),
                ExperimentKind::TranslateScan => from_value_at::<TranslateParams>(&e.parameters, &prefix).map(|_| ()),
                ExperimentKind::OracleCrosscheck => from_value_at::<CrosscheckParams>(&e.parameters, &prefix).map(|_| ()),
            }?;
        }
        Ok(())
    }
}

pub fn default_tail_mode(kind: FieldKind) -> TailMode {
    match kind {
        FieldKind::LogOscillatory => TailMode::Geometric,
        _ => TailMode::Linear,
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EigenReportParams {
    #[serde(default = "default_true")]
    write_traces: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SyntheticParams {
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default)]
    t_plus: Option<f64>,
    #[serde(default)]
    t_minus: Option<f64>,
    #[serde(default = "default_dt_record")]
    dt_record: f64,
    #[serde(default)]
    write_traces: bool,
}

fn default_dt_record() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum MuSource {
    Pde,
    Synthetic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PersistenceParams {
    #[serde(default = "default_nonlinearity")]
    nonlinearity: NonlinearitySpec,
    #[serde(default)]
    horizon: Option<f64>,
    #[serde(default)]
    kpp_dt: Option<f64>,
    #[serde(default = "default_one_f")]
    datum_scale: f64,
    #[serde(default = "default_mu_source")]
    mu_source: MuSource,
    #[serde(default)]
    verdict: Option<VerdictOptions>,
}

fn default_nonlinearity() -> NonlinearitySpec {
    NonlinearitySpec::quadratic(1.0)
}
fn default_one_f() -> f64 {
    1.0
}
fn default_mu_source() -> MuSource {
    MuSource::Pde
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PullbackParams {
    #[serde(default = "default_nonlinearity")]
    nonlinearity: NonlinearitySpec,
    #[serde(default = "default_n_list")]
    n_list: Vec<f64>,
    #[serde(default = "default_window")]
    window: (f64, f64),
    #[serde(default = "default_record_every")]
    record_every: usize,
    #[serde(default)]
    kpp_dt: Option<f64>,
}

fn default_n_list() -> Vec<f64> {
    (1..=8).map(|k| 5.0 * k as f64).collect()
}
fn default_window() -> (f64, f64) {
    (0.0, 1.0)
}
fn default_record_every() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct UniquenessParams {
    #[serde(default = "default_nonlinearity")]
    nonlinearity: NonlinearitySpec,
    #[serde(default = "default_n_list")]
    n_list: Vec<f64>,
    #[serde(default = "default_window")]
    window: (f64, f64),
    #[serde(default = "default_record_every")]
    record_every: usize,
    #[serde(default = "default_second_scale")]
    second_scale: f64,
    #[serde(default)]
    kpp_dt: Option<f64>,
}

fn default_second_scale() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MpParams {
    #[serde(rename = "T_list", default = "default_mp_t_list")]
    t_list: Vec<f64>,
    #[serde(default = "default_neutral_band")]
    neutral_band: f64,
}

fn default_mp_t_list() -> Vec<f64> {
    vec![5.0, 10.0, 15.0, 20.0]
}
fn default_neutral_band() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TranslateParams {
    #[serde(default = "default_shifts")]
    shifts: Vec<f64>,
    #[serde(default)]
    horizon: Option<f64>,
}

fn default_shifts() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrosscheckParams {
    #[serde(default)]
    frozen_at: Option<f64>,
    #[serde(default)]
    period: Option<f64>,
    #[serde(default = "default_check_tol")]
    tolerance: f64,
}

/// One serialized file produced by an experiment.
struct Artifact {
    file: String,
    bytes: Vec<u8>,
}

struct ExperimentOutput {
    result: Value,
    checks: Vec<InvariantCheck>,
    artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentStatus {
    Ok,
    Failed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub kind: ExperimentKind,
    pub status: ExperimentStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub result: Value,
    pub checks: Vec<InvariantCheck>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantRow {
    pub experiment: String,
    pub name: String,
    pub passed: bool,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunProvenance {
    pub field_fingerprint: String,
    pub n_interior: usize,
    pub dt: Vec<f64>,
    pub theta: f64,
    pub burn_in: f64,
    pub burn_in_auto: bool,
    pub gamma_estimate: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub provenance: RunProvenance,
    pub experiments: Vec<ExperimentResult>,
    pub invariants: Vec<InvariantRow>,
    /// Wall-clock seconds per experiment; the only non-deterministic field.
    pub timing: BTreeMap<String, f64>,
    pub versions: BTreeMap<String, String>,
}

impl RunReport {
    /// True when an invariant failed or an experiment errored.
    pub fn hard_failure(&self) -> bool {
        self.invariants.iter().any(|r| !r.passed) || self.experiments.iter().any(|e| e.status != ExperimentStatus::Ok)
    }

    /// The report as JSON without the `timing` object.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("timing");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Everything an experiment needs, built once per scenario and shared.
struct Context {
    cfg: ScenarioConfig,
    field: CoefficientField,
    mesh: Mesh,
    burn_in: f64,
}

impl Context {
    fn stride_for(&self, dt: f64) -> usize {
        // keep the recording interval of the base step when Richardson halves or doubles dt
        let base = self.cfg.horizons.record_stride as f64 * self.cfg.discretization.dt;
        ((base / dt).round() as usize).max(1)
    }

    fn trace_sets(&self) -> Result<Vec<(f64, TraceSet)>> {
        let h = &self.cfg.horizons;
        self.cfg
            .dts()
            .par_iter()
            .map(|&dt| {
                let set = compute_trace_set(
                    &self.field,
                    &self.mesh,
                    self.cfg.scheme().with_dt(dt),
                    h.t_max_plus,
                    h.t_max_minus,
                    self.burn_in,
                    self.stride_for(dt),
                )?;
                Ok((dt, set))
            })
            .collect()
    }

    fn pipeline_report(&self) -> Result<(GrowthRateReport, Vec<(f64, TraceSet)>)> {
        let sets = self.trace_sets()?;
        let opts = self.cfg.growth_options(&self.field);
        let levels = sets
            .iter()
            .map(|(dt, s)| Ok((*dt, eigen_report(s, &opts)?)))
            .collect::<Result<Vec<_>>>()?;
        let rep = if levels.len() == 1 {
            levels.into_iter().next().unwrap().1
        } else {
            richardson_report(&levels)?
        };
        Ok((rep, sets))
    }

    fn kpp_scheme(&self, kpp_dt: Option<f64>) -> StepScheme {
        StepScheme::backward_euler(kpp_dt.unwrap_or(self.cfg.discretization.dt))
    }
}

fn trace_artifacts(set: &TraceSet) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    for (name, tr) in [("trace_R.csv", &set.r), ("trace_R+.csv", &set.plus), ("trace_R-.csv", &set.minus)] {
        let mut bytes = Vec::new();
        tr.write_csv(&mut bytes)?;
        out.push(Artifact {
            file: name.into(),
            bytes,
        });
    }
    Ok(out)
}

fn check(name: &str, passed: bool, tolerance: f64, detail: String) -> InvariantCheck {
    InvariantCheck {
        name: name.into(),
        passed,
        tolerance,
        detail,
    }
}

fn run_eigen_report(ctx: &Context, p: EigenReportParams) -> Result<ExperimentOutput> {
    let (rep, sets) = ctx.pipeline_report()?;
    let artifacts = if p.write_traces {
        trace_artifacts(&sets.last().unwrap().1)?
    } else {
        Vec::new()
    };
    Ok(ExperimentOutput {
        checks: rep.checks.clone(),
        result: serde_json::to_value(&rep)?,
        artifacts,
    })
}

/// `λ_D^h` of the time-free part, the drift of the synthetic trace.
fn time_free_lambda(ctx: &Context) -> Result<f64> {
    Ok(dirichlet_eigen(&ctx.field.time_free_part()?, 0.0, &ctx.mesh)?.value)
}

fn run_synthetic(ctx: &Context, p: SyntheticParams) -> Result<ExperimentOutput> {
    let lambda = match p.lambda {
        Some(l) => l,
        None => time_free_lambda(ctx)?,
    };
    let t_plus = p.t_plus.unwrap_or(ctx.cfg.horizons.t_max_plus);
    let t_minus = p.t_minus.unwrap_or(ctx.cfg.horizons.t_max_minus);
    let set = synthetic_trace_set(&ctx.field, lambda, t_plus, t_minus, p.dt_record)?;
    let rep = eigen_report(&set, &ctx.cfg.growth_options(&ctx.field))?;
    let artifacts = if p.write_traces { trace_artifacts(&set)? } else { Vec::new() };
    Ok(ExperimentOutput {
        checks: rep.checks.clone(),
        result: json!({ "lambda_time_free": lambda, "report": rep }),
        artifacts,
    })
}

fn synthetic_mu_bp_plus(ctx: &Context, horizon: f64) -> Result<f64> {
    let lambda = time_free_lambda(ctx)?;
    let set = synthetic_trace_set(&ctx.field, lambda, horizon, horizon, 0.1)?;
    let opts = ctx.cfg.growth_options(&ctx.field);
    let t_list = opts
        .t_list
        .clone()
        .unwrap_or_else(|| crate::growthrate::default_t_list(set.plus.span(), set.plus.dt_record));
    Ok(-global_growth_rates(&set.plus, &t_list, &opts)?.0.value)
}

fn run_persistence(ctx: &Context, p: PersistenceParams) -> Result<ExperimentOutput> {
    let horizon = p.horizon.unwrap_or(ctx.cfg.horizons.t_max_plus);
    let mu = match p.mu_source {
        MuSource::Pde => {
            linearized_mu_bp_plus(
                &ctx.field,
                &ctx.mesh,
                ctx.cfg.scheme(),
                ctx.cfg.horizons.t_max_plus,
                ctx.burn_in,
                ctx.cfg.horizons.record_stride,
            )?
            .value
        }
        MuSource::Synthetic => synthetic_mu_bp_plus(ctx, ctx.cfg.horizons.t_max_plus)?,
    };
    let u0: Vec<f64> = ctx.mesh.sine_profile().iter().map(|v| v * p.datum_scale).collect();
    let opts = p.verdict.unwrap_or_default();
    let v = persistence_verdict(
        &ctx.field,
        &p.nonlinearity,
        &ctx.mesh,
        ctx.kpp_scheme(p.kpp_dt),
        &u0,
        horizon,
        mu,
        opts,
    )?;
    let checks = vec![check(
        "verdict consistent with mu_bp(R+)",
        v.consistency,
        opts.margin,
        format!("verdict {:?}, mu_bp(R+) = {:.6}", v.verdict, mu),
    )];
    Ok(ExperimentOutput {
        result: serde_json::to_value(&v)?,
        checks,
        artifacts: Vec::new(),
    })
}

fn run_pullback(ctx: &Context, p: PullbackParams) -> Result<ExperimentOutput> {
    let res = entire_solution_pullback(
        &ctx.field,
        &p.nonlinearity,
        &ctx.mesh,
        ctx.kpp_scheme(p.kpp_dt),
        &p.n_list,
        PullbackOptions {
            window: p.window,
            record_every: p.record_every,
        },
    )?;
    let tol = 1e-12 * res.bound.max(1.0);
    let checks = vec![check(
        "pullback monotonicity",
        res.monotone_violation <= tol,
        tol,
        format!("max(u_next - u_prev) = {:e}", res.monotone_violation),
    )];
    let last = res.windows.last().map(|w| w.profiles.last().cloned());
    Ok(ExperimentOutput {
        result: json!({
            "n_list": res.n_list,
            "gaps": res.gaps,
            "monotone_violation": res.monotone_violation,
            "floor": res.floor,
            "final_sup": res.final_sup,
            "bound": res.bound,
            "limit_profile": last,
        }),
        checks,
        artifacts: Vec::new(),
    })
}

fn run_uniqueness(ctx: &Context, p: UniquenessParams) -> Result<ExperimentOutput> {
    let sat = p.nonlinearity.saturation(ctx.field.bounds().c_max);
    let level = if sat.is_finite() { sat } else { 1.0 };
    let second = vec![level * p.second_scale; ctx.mesh.n_interior];
    let gaps = ancient_uniqueness_gap(
        &ctx.field,
        &p.nonlinearity,
        &ctx.mesh,
        ctx.kpp_scheme(p.kpp_dt),
        &p.n_list,
        &second,
        PullbackOptions {
            window: p.window,
            record_every: p.record_every,
        },
    )?;
    Ok(ExperimentOutput {
        result: json!({ "gaps": gaps, "second_level": level * p.second_scale }),
        checks: Vec::new(),
        artifacts: Vec::new(),
    })
}

fn run_mp(ctx: &Context, p: MpParams) -> Result<ExperimentOutput> {
    let res = mp_decay_test(
        &ctx.field,
        &ctx.mesh,
        ctx.cfg.scheme(),
        &ctx.mesh.sine_profile(),
        &p.t_list,
        p.neutral_band,
    )?;
    Ok(ExperimentOutput {
        result: serde_json::to_value(&res)?,
        checks: Vec::new(),
        artifacts: Vec::new(),
    })
}

fn run_translate(ctx: &Context, p: TranslateParams) -> Result<ExperimentOutput> {
    let horizon = p.horizon.unwrap_or(ctx.cfg.horizons.t_max_plus);
    let scheme = ctx.cfg.scheme();
    let stride = ctx.cfg.horizons.record_stride;
    let tail = ctx.cfg.tail(&ctx.field);
    let scan = translate_scan(&ctx.field, &ctx.mesh, scheme, &p.shifts, horizon, ctx.burn_in, stride, tail)?;
    let plus = compute_bundle(
        &ctx.field,
        &ctx.mesh,
        scheme,
        BundleRequest {
            tag: IntervalTag::RPlus,
            t_lo: 0.0,
            t_hi: horizon,
            burn_in: ctx.burn_in,
            record_stride: stride,
            snapshot_every: None,
        },
    )?;
    let opts = ctx.cfg.growth_options(&ctx.field);
    let t_list = opts
        .t_list
        .clone()
        .unwrap_or_else(|| crate::growthrate::default_t_list(plus.span(), plus.dt_record));
    let (lgr, ggr) = global_growth_rates(&plus, &t_list, &opts)?;
    let (mu_bp, lambda_bp) = (lgr.negated(), ggr.negated());
    let trust = scan
        .rows
        .iter()
        .map(|r| r.mu_p.trust_radius.max(r.lambda_b.trust_radius))
        .fold(0.0, f64::max);
    let tol = trust + mu_bp.trust_radius.max(lambda_bp.trust_radius) + opts.check_tol;
    let ok = scan.consistent_with(mu_bp.value, lambda_bp.value, tol);
    Ok(ExperimentOutput {
        checks: vec![check(
            "translates inside window rates",
            ok,
            tol,
            format!(
                "max mu_p = {:.6} vs mu_bp = {:.6}; min lambda_b = {:.6} vs lambda_bp = {:.6}",
                scan.max_mu_p, mu_bp.value, scan.min_lambda_b, lambda_bp.value
            ),
        )],
        result: json!({ "scan": scan, "mu_bp": mu_bp, "lambda_bp": lambda_bp }),
        artifacts: Vec::new(),
    })
}

fn run_crosscheck(ctx: &Context, p: CrosscheckParams) -> Result<ExperimentOutput> {
    let (rep, _) = ctx.pipeline_report()?;
    let mut oracles = BTreeMap::new();
    if let Some(t) = p.frozen_at {
        oracles.insert("dirichlet_eigen", dirichlet_eigen(&ctx.field, t, &ctx.mesh)?.value);
    }
    if let Some(period) = p.period {
        // same dt levels as the report, so both carry the same time-discretization order
        let dts = ctx.cfg.dts();
        let v = if dts.len() > 1 {
            periodic_eigen_richardson(&ctx.field, &ctx.mesh, ctx.cfg.scheme(), period, &dts)?.0
        } else {
            periodic_eigen(&ctx.field, &ctx.mesh, ctx.cfg.scheme(), period)?.value
        };
        oracles.insert("periodic_eigen", v);
    }
    if oracles.is_empty() {
        return Err(GpeError::InvalidState("oracle_crosscheck needs `frozen_at` or `period`".into()));
    }
    let mut deltas = BTreeMap::new();
    let mut checks = Vec::new();
    for (oname, ov) in &oracles {
        for (entry, e) in rep.defined_entries() {
            let d = e.value - ov;
            let tol = e.trust_radius + p.tolerance;
            checks.push(check(
                &format!("{entry} = {oname}"),
                d.abs() <= tol,
                tol,
                format!("{:.8} vs {:.8}", e.value, ov),
            ));
            deltas.insert(format!("{entry} - {oname}"), d);
        }
    }
    Ok(ExperimentOutput {
        result: json!({ "oracles": oracles, "deltas": deltas, "report": rep }),
        checks,
        artifacts: Vec::new(),
    })
}

fn run_experiment(ctx: &Context, e: &Experiment, index: usize) -> Result<ExperimentOutput> {
    let prefix = format!("experiments[{index}].parameters");
    let p = &e.parameters;
    match e.kind {
        ExperimentKind::EigenReport => run_eigen_report(ctx, from_value_at(p, &prefix)?),
        ExperimentKind::SyntheticGrowth => run_synthetic(ctx, from_value_at(p, &prefix)?),
        ExperimentKind::KppPersistence => run_persistence(ctx, from_value_at(p, &prefix)?),
        ExperimentKind::KppEntire => run_pullback(ctx, from_value_at(p, &prefix)?),
        ExperimentKind::KppUniqueness => run_uniqueness(ctx, from_value_at(p, &prefix)?),
        ExperimentKind::MpDecay => run_mp(ctx, from_value_at(p, &prefix)?),
        ExperimentKind::TranslateScan => run_translate(ctx, from_value_at(p, &prefix)?),
        ExperimentKind::OracleCrosscheck => run_crosscheck(ctx, from_value_at(p, &prefix)?),
    }
}

/// Burn-in `8/γ` from a separation run on a coarse mesh, clamped to `[0.5, 200]`.
pub fn auto_burn_in(field: &CoefficientField, domain: Domain1D, dt: f64) -> Result<(f64, f64)> {
    let mesh = build_mesh(domain, 39)?;
    let s = mesh.sine_profile();
    let tilted: Vec<f64> = s.iter().zip(&mesh.nodes).map(|(v, x)| v * (1.0 + 0.5 * (x - domain.x_lo) / domain.length())).collect();
    let est = separation_rate(field, &mesh, StepScheme::backward_euler(dt.max(1e-3)), &tilted, &s, 2.0)?;
    let gamma = est.gamma.max(1e-9);
    Ok((gamma, (8.0 / gamma).clamp(0.5, 200.0)))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".into()
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs every experiment; with `out_dir` also writes `report.json`,
/// `invariants.csv` and per-experiment artifacts.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let field = cfg.field()?;
    let mesh = cfg.mesh()?;
    let (burn_in, gamma) = match cfg.horizons.burn_in {
        Some(b) => (b, None),
        None => {
            let (g, b) = auto_burn_in(&field, cfg.domain, cfg.discretization.dt)?;
            (b, Some(g))
        }
    };
    let ctx = Context {
        cfg: cfg.clone(),
        field,
        mesh,
        burn_in,
    };
    if let Some(d) = out_dir {
        fs::create_dir_all(d)?;
    }
    let outcomes: Vec<(ExperimentResult, f64)> = cfg
        .experiments
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let start = Instant::now();
            let out = catch_unwind(AssertUnwindSafe(|| run_experiment(&ctx, e, i)))
                .unwrap_or_else(|p| Err(GpeError::InvalidState(format!("experiment panicked: {}", panic_message(p)))));
            let mut res = ExperimentResult {
                name: e.name.clone(),
                kind: e.kind,
                status: ExperimentStatus::Ok,
                error: None,
                result: Value::Null,
                checks: Vec::new(),
                artifacts: Vec::new(),
            };
            match out {
                Ok(o) => {
                    res.status = if o.checks.iter().all(|c| c.passed) {
                        ExperimentStatus::Ok
                    } else {
                        ExperimentStatus::Failed
                    };
                    res.result = o.result;
                    res.checks = o.checks;
                    if let Some(d) = out_dir {
                        let dir = d.join(&e.name);
                        let written = fs::create_dir_all(&dir).map_err(GpeError::from).and_then(|_| {
                            let mut names = Vec::new();
                            for a in &o.artifacts {
                                write_atomic(&dir.join(&a.file), &a.bytes)?;
                                names.push(format!("{}/{}", e.name, a.file));
                            }
                            let body = serde_json::to_vec_pretty(&json!({ "result": res.result, "checks": res.checks }))?;
                            write_atomic(&dir.join("result.json"), &body)?;
                            names.push(format!("{}/result.json", e.name));
                            Ok(names)
                        });
                        match written {
                            Ok(n) => res.artifacts = n,
                            Err(err) => {
                                res.status = ExperimentStatus::Error;
                                res.error = Some(format!("writing artifacts: {err}"));
                            }
                        }
                    }
                }
                Err(err) => {
                    res.status = ExperimentStatus::Error;
                    res.error = Some(err.to_string());
                }
            }
            (res, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut timing = BTreeMap::new();
    let mut experiments = Vec::new();
    let mut invariants = Vec::new();
    for (res, secs) in outcomes {
        timing.insert(res.name.clone(), secs);
        for c in &res.checks {
            invariants.push(InvariantRow {
                experiment: res.name.clone(),
                name: c.name.clone(),
                passed: c.passed,
                tolerance: c.tolerance,
                detail: c.detail.clone(),
            });
        }
        experiments.push(res);
    }
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.clone(),
        provenance: RunProvenance {
            field_fingerprint: ctx.field.fingerprint(),
            n_interior: ctx.mesh.n_interior,
            dt: cfg.dts(),
            theta: cfg.discretization.theta,
            burn_in,
            burn_in_auto: gamma.is_some(),
            gamma_estimate: gamma,
            seed: cfg.seed,
        },
        experiments,
        invariants,
        timing,
        versions: BTreeMap::from([
            ("gpe_core".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("schema".to_string(), SCHEMA_VERSION.to_string()),
        ]),
    };
    if let Some(d) = out_dir {
        write_atomic(&d.join("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
        write_atomic(&d.join("invariants.csv"), invariant_csv(&report.invariants).as_bytes())?;
    }
    Ok(report)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn invariant_csv(rows: &[InvariantRow]) -> String {
    let mut out = String::from("experiment,name,passed,tolerance,detail\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.16e},{}\n",
            csv_field(&r.experiment),
            csv_field(&r.name),
            r.passed,
            r.tolerance,
            csv_field(&r.detail)
        ));
    }
    out
}

/// Output directory: explicit flag, then [`OUT_DIR_ENV`], then `gpe-out/<name>`.
pub fn resolve_out_dir(flag: Option<PathBuf>, scenario_name: &str) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(scenario_name)))
        .unwrap_or_else(|| PathBuf::from("gpe-out").join(scenario_name))
}

/// A named field for the randomized suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteScenario {
    pub name: String,
    pub spec: FieldSpec,
}

pub const SUITE_FAMILIES: [&str; 8] = [
    "constant",
    "time_independent",
    "periodic",
    "separable_cosine",
    "quasi_periodic",
    "log_oscillatory",
    "converging",
    "random_stationary",
];

fn cpro(p: Profile) -> Option<CoefSpec> {
    Some(CoefSpec::Profile(p))
}

/// `count` fields on `(0, 1)` cycling through [`SUITE_FAMILIES`] with
/// parameters drawn from `seed`.
pub fn random_suite(seed: u64, count: usize) -> Vec<SuiteScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let family = SUITE_FAMILIES[i % SUITE_FAMILIES.len()];
            let a = rng.gen_range(0.6..1.5);
            let spec = match family {
                "constant" => FieldSpec::constant(a, rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0)),
                "time_independent" => FieldSpec {
                    kind: FieldKind::TimeIndependent,
                    a: cpro(Profile::Shape(Shape::SineBump {
                        base: a,
                        amp: rng.gen_range(0.0..0.5),
                    })),
                    b: cpro(Profile::Shape(Shape::Cosine {
                        base: rng.gen_range(-0.5..0.5),
                        amp: 0.3,
                        k: 2.0,
                    })),
                    c: cpro(Profile::Shape(Shape::Linear {
                        left: rng.gen_range(-2.0..2.0),
                        right: rng.gen_range(-2.0..2.0),
                    })),
                    ..FieldSpec::constant(1.0, 0.0, 0.0)
                },
                "periodic" => {
                    let tau = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
                    FieldSpec {
                        kind: FieldKind::Periodic,
                        a: cpro(Profile::Const(a)),
                        b: Some(CoefSpec::Full {
                            base: Profile::Const(0.0),
                            terms: vec![Term {
                                signal: SigmaSignal::Cosine {
                                    m: 0.0,
                                    amplitude: rng.gen_range(0.0..1.0),
                                    tau,
                                    phase: 0.0,
                                },
                                profile: Profile::Const(1.0),
                            }],
                        }),
                        c: Some(CoefSpec::Full {
                            base: Profile::Shape(Shape::SineBump {
                                base: 0.0,
                                amp: rng.gen_range(0.0..3.0),
                            }),
                            terms: vec![Term {
                                signal: SigmaSignal::Cosine {
                                    m: 0.0,
                                    amplitude: rng.gen_range(0.5..2.0),
                                    tau,
                                    phase: rng.gen_range(0.0..6.0),
                                },
                                profile: Profile::Shape(Shape::Linear { left: 0.0, right: 1.0 }),
                            }],
                        }),
                        period: Some(tau),
                        ..FieldSpec::constant(1.0, 0.0, 0.0)
                    }
                }
                "separable_cosine" => FieldSpec::separable(
                    a,
                    rng.gen_range(-1.0..1.0),
                    SigmaSignal::Cosine {
                        m: rng.gen_range(-1.0..1.0),
                        amplitude: rng.gen_range(0.0..2.0),
                        tau: rng.gen_range(0.5..3.0),
                        phase: 0.0,
                    },
                ),
                "quasi_periodic" => FieldSpec::separable(
                    a,
                    0.0,
                    SigmaSignal::QuasiPeriodic {
                        modes: vec![
                            Mode {
                                amplitude: rng.gen_range(0.3..1.0),
                                omega: 1.0,
                            },
                            Mode {
                                amplitude: rng.gen_range(0.3..1.0),
                                omega: 2f64.sqrt(),
                            },
                        ],
                        declared_irrational: true,
                    },
                ),
                "log_oscillatory" => FieldSpec::separable(
                    a,
                    0.0,
                    SigmaSignal::LogOscillatory {
                        amplitude: rng.gen_range(0.5..1.5),
                    },
                ),
                "converging" => FieldSpec {
                    kind: FieldKind::Converging,
                    ..FieldSpec::separable(
                        a,
                        rng.gen_range(-1.0..1.0),
                        SigmaSignal::Decaying {
                            amplitude: rng.gen_range(-2.0..2.0),
                            scale: rng.gen_range(1.0..5.0),
                        },
                    )
                },
                _ => FieldSpec::separable(
                    a,
                    0.0,
                    SigmaSignal::PiecewiseLinearIid {
                        lo: 0.0,
                        hi: 1.0,
                        seed: Some(rng.gen()),
                    },
                ),
            };
            SuiteScenario {
                name: format!("{family}-{i}"),
                spec,
            }
        })
        .collect()
}
