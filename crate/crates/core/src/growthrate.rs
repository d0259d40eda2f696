//! Averaging functionals of a `β` trace and the six-eigenvalue report.
//!
//! `μ_bp = −lgr`, `λ_bp = −ggr` (window-extremal growth rates), and the four
//! one-sided notions come from `liminf`/`limsup` of `β(t)/t` at `±∞`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffield::{CoefficientField, FieldKind};
use crate::discretize::Mesh;
use crate::error::{GpeError, Result};
use crate::floquet::{compute_bundle, BetaTrace, BundleRequest, IntervalTag, TraceMeta, TraceSet};
use crate::stats::{fit_line, richardson};
use crate::stepper::StepScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremum {
    Inf,
    Sup,
}

/// One eigenvalue estimate with its finite-horizon diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// `(T or t, value)` pairs the estimate was built from.
    pub finite_t_values: Vec<(f64, f64)>,
    pub extrapolation_residual: f64,
    pub trust_radius: f64,
    pub converged: bool,
    /// Richardson-in-dt correction already included in `value`.
    #[serde(default)]
    pub dt_correction: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            finite_t_values: Vec::new(),
            extrapolation_residual: 0.0,
            trust_radius: 0.0,
            converged: true,
            dt_correction: 0.0,
        }
    }

    /// `−self` (an eigenvalue from a growth rate).
    pub fn negated(&self) -> Self {
        Self {
            value: -self.value,
            finite_t_values: self.finite_t_values.iter().map(|(t, v)| (*t, -v)).collect(),
            ..self.clone()
        }
    }
}

fn lag_for(trace: &BetaTrace, t_window: f64) -> Result<usize> {
    if !(t_window >= trace.dt_record * (1.0 - 1e-9)) {
        return Err(GpeError::InvalidState(format!(
            "window {t_window} shorter than the record step {}",
            trace.dt_record
        )));
    }
    let k = (t_window / trace.dt_record).round() as usize;
    if 2 * k > trace.len() - 1 {
        return Err(GpeError::TrustCollapse {
            window: t_window,
            span: trace.span(),
        });
    }
    Ok(k)
}

fn better(which: Extremum, a: f64, b: f64) -> bool {
    match which {
        Extremum::Inf => a < b,
        Extremum::Sup => a > b,
    }
}

/// Extremal quotient and its start index over starts `i ∈ [lo, hi)` stepping by `stride`.
fn scan(beta: &[f64], k: usize, which: Extremum, lo: usize, hi: usize, stride: usize) -> (f64, usize) {
    let init = match which {
        Extremum::Inf => (f64::INFINITY, lo),
        Extremum::Sup => (f64::NEG_INFINITY, lo),
    };
    let pick = |a: (f64, usize), b: (f64, usize)| if better(which, b.0, a.0) || (b.0 == a.0 && b.1 < a.1) { b } else { a };
    (lo..hi)
        .into_par_iter()
        .step_by(stride.max(1))
        .with_min_len(4096)
        .map(|i| (beta[i + k] - beta[i], i))
        .reduce(|| init, pick)
}

/// `inf_s` or `sup_s` of `(β(s+T) − β(s))/T` over sampled starts.
pub fn window_extremal_rate(trace: &BetaTrace, t_window: f64, which: Extremum) -> Result<f64> {
    window_extremal_rate_strided(trace, t_window, which, 1)
}

/// Same as [`window_extremal_rate`] scanning every `stride`-th start only.
pub fn window_extremal_rate_strided(trace: &BetaTrace, t_window: f64, which: Extremum, stride: usize) -> Result<f64> {
    let k = lag_for(trace, t_window)?;
    let (d, _) = scan(&trace.beta, k, which, 0, trace.len() - k, stride);
    Ok(d / (k as f64 * trace.dt_record))
}

/// Coarse scan at `coarse` stride, then a full scan around the coarse optimum.
/// Never worse than the coarse value.
pub fn window_extremal_rate_refined(trace: &BetaTrace, t_window: f64, which: Extremum, coarse: usize) -> Result<f64> {
    let k = lag_for(trace, t_window)?;
    let n = trace.len() - k;
    let coarse = coarse.max(1);
    let (_, i) = scan(&trace.beta, k, which, 0, n, coarse);
    let lo = i.saturating_sub(coarse);
    let hi = (i + coarse + 1).min(n);
    let (d, _) = scan(&trace.beta, k, which, lo, hi, 1);
    Ok(d / (k as f64 * trace.dt_record))
}

/// Window lengths `{1, 2, 5}·10^k` between `10·dt_record` and `span/2` (at most 12, largest kept).
pub fn default_t_list(span: f64, dt_record: f64) -> Vec<f64> {
    let lo = 10.0 * dt_record;
    let hi = span / 2.0;
    let mut out = Vec::new();
    let mut p = 10f64.powf(lo.log10().floor());
    while p <= hi {
        for m in [1.0, 2.0, 5.0] {
            let t = m * p;
            if t >= lo * (1.0 - 1e-12) && t <= hi {
                out.push(t);
            }
        }
        p *= 10.0;
    }
    if out.len() > 12 {
        out.drain(..out.len() - 12);
    }
    out
}

/// Fits `v(T) = v∞ + κ/T` on the contiguous run of `T_list` entries that the
/// model explains best (longest among the near-minimal residuals). The trust
/// radius also covers every measured `v(T)` from the end of that run on and
/// the fit through the largest windows.
pub fn extrapolate_inverse_t(points: &[(f64, f64)], fit_tol: f64) -> Estimate {
    let n = points.len();
    let finite_t_values = points.to_vec();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            finite_t_values,
            extrapolation_residual: f64::INFINITY,
            trust_radius: f64::INFINITY,
            converged: false,
            dt_correction: 0.0,
        };
    }
    if n == 1 {
        return Estimate {
            value: points[0].1,
            finite_t_values,
            extrapolation_residual: 0.0,
            trust_radius: 0.0,
            converged: false,
            dt_correction: 0.0,
        };
    }
    let fit = |lo: usize, hi: usize| {
        let xs: Vec<f64> = points[lo..hi].iter().map(|p| 1.0 / p.0).collect();
        let ys: Vec<f64> = points[lo..hi].iter().map(|p| p.1).collect();
        fit_line(&xs, &ys)
    };
    let min_len = if n >= 3 { 3 } else { 2 };
    let mut runs = Vec::new();
    for lo in 0..n {
        for hi in lo + min_len..=n {
            if let Some(f) = fit(lo, hi) {
                runs.push((lo, hi, f));
            }
        }
    }
    let best = runs.iter().map(|r| r.2.max_residual).fold(f64::INFINITY, f64::min);
    let scale = points.iter().map(|p| p.1.abs()).fold(1.0, f64::max);
    let band = 1.5 * best + 1e-12 * scale;
    let (_, hi, f) = runs
        .into_iter()
        .filter(|r| r.2.max_residual <= band)
        .max_by(|a, b| (a.1 - a.0).cmp(&(b.1 - b.0)).then(a.1.cmp(&b.1)))
        .expect("at least one run");
    let reach = points[hi - 1..].iter().map(|p| (f.intercept - p.1).abs()).fold(0.0, f64::max);
    // disagreement with the fit through the largest windows
    let tail_fit = fit(n - min_len, n).map_or(0.0, |t| (t.intercept - f.intercept).abs());
    let trust = f.max_residual + reach.max(tail_fit);
    // flat tail: bounded deviation without a clean 1/T law
    let last = points[n - 1].1;
    let spread = points[n - min_len..].iter().map(|p| (p.1 - last).abs()).fold(0.0, f64::max);
    let wiggles = points[n - min_len..].windows(3).any(|w| (w[1].1 - w[0].1) * (w[2].1 - w[1].1) < 0.0);
    if wiggles && spread < trust {
        return Estimate {
            value: last,
            finite_t_values,
            extrapolation_residual: spread,
            trust_radius: spread,
            converged: spread <= fit_tol,
            dt_correction: 0.0,
        };
    }
    Estimate {
        value: f.intercept,
        finite_t_values,
        extrapolation_residual: f.max_residual,
        trust_radius: trust,
        converged: f.max_residual <= fit_tol,
        dt_correction: 0.0,
    }
}

/// `(lgr, ggr)`: `T`-extrapolated window-extremal rates.
pub fn global_growth_rates(trace: &BetaTrace, t_list: &[f64], opts: &GrowthOptions) -> Result<(Estimate, Estimate)> {
    if t_list.is_empty() {
        return Err(GpeError::InsufficientData("empty T list".into()));
    }
    if t_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GpeError::InvalidState("T list must be increasing".into()));
    }
    let rate = |t: f64, which: Extremum| {
        if opts.s_stride > 1 {
            window_extremal_rate_refined(trace, t, which, opts.s_stride)
        } else {
            window_extremal_rate(trace, t, which)
        }
    };
    let vals: Vec<(f64, f64, f64)> = t_list
        .par_iter()
        .map(|&t| Ok((t, rate(t, Extremum::Inf)?, rate(t, Extremum::Sup)?)))
        .collect::<Result<_>>()?;
    let lo: Vec<(f64, f64)> = vals.iter().map(|v| (v.0, v.1)).collect();
    let hi: Vec<(f64, f64)> = vals.iter().map(|v| (v.0, v.2)).collect();
    Ok((extrapolate_inverse_t(&lo, opts.fit_tol), extrapolate_inverse_t(&hi, opts.fit_tol)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Tail `[(1 − f)·t_end, t_end]`.
    Linear,
    /// Tail `[t_end^(1 − f), t_end]`, for signals oscillating in `ln t`.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub fraction: f64,
    pub mode: TailMode,
}

impl Default for TailSpec {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            mode: TailMode::Linear,
        }
    }
}

impl TailSpec {
    fn start(&self, t_far: f64) -> f64 {
        match self.mode {
            TailMode::Geometric if t_far > 1.0 => t_far.powf(1.0 - self.fraction),
            _ => (1.0 - self.fraction) * t_far,
        }
    }
}

/// `(|t|, β(t)/t)` over the tail in the given direction, ordered by `|t|`.
fn tail_ratios(trace: &BetaTrace, dir: Direction, t_tail: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = trace
        .beta
        .iter()
        .enumerate()
        .filter_map(|(k, b)| {
            let t = trace.time(k);
            let at = match dir {
                Direction::Plus => t,
                Direction::Minus => -t,
            };
            (at >= t_tail && at > 0.0).then_some((at, b / t))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn local_extrema(r: &[(f64, f64)], which: Extremum) -> Vec<(f64, f64)> {
    (1..r.len().saturating_sub(1))
        .filter(|&i| {
            let (a, b, c) = (r[i - 1].1, r[i].1, r[i + 1].1);
            match which {
                Extremum::Inf => b < a && b <= c,
                Extremum::Sup => b > a && b >= c,
            }
        })
        .map(|i| r[i])
        .collect()
}

/// `amplify` converts the half-tail sensitivity into the bias of the full
/// tail under a `1/t` decay model.
fn tail_estimate(r: &[(f64, f64)], half: &[(f64, f64)], which: Extremum, amplify: f64) -> Estimate {
    let ext = |s: &[(f64, f64)]| match which {
        Extremum::Inf => s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        Extremum::Sup => s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    };
    let value = ext(r);
    let sensitivity = if half.is_empty() { 0.0 } else { (ext(half) - value).abs() };
    let extrema = local_extrema(r, which);
    let last3: Vec<(f64, f64)> = extrema.iter().rev().take(3).rev().cloned().collect();
    let spread = if last3.len() >= 2 {
        let lo = last3.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = last3.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    } else {
        0.0
    };
    Estimate {
        value,
        finite_t_values: last3,
        extrapolation_residual: spread,
        trust_radius: spread.max(amplify * sensitivity),
        converged: true,
        dt_correction: 0.0,
    }
}

/// `(liminf, limsup)` of `β(t)/t` as `t → ±∞`, as running extrema over the tail.
pub fn cesaro_rates(trace: &BetaTrace, dir: Direction, tail: TailSpec) -> Result<(Estimate, Estimate)> {
    if trace.index_of(0.0).is_none() {
        return Err(GpeError::InsufficientData("Cesàro rates need t = 0 in the trace".into()));
    }
    if !(tail.fraction > 0.0 && tail.fraction <= 1.0) {
        return Err(GpeError::InvalidState(format!("tail fraction {} not in (0, 1]", tail.fraction)));
    }
    let t_far = match dir {
        Direction::Plus => trace.t_end(),
        Direction::Minus => -trace.t_start,
    };
    let t_tail = tail.start(t_far);
    let r = tail_ratios(trace, dir, t_tail);
    if r.len() < 10 {
        return Err(GpeError::TrustCollapse {
            window: t_far - t_tail,
            span: trace.span(),
        });
    }
    let half_spec = TailSpec {
        fraction: tail.fraction / 2.0,
        ..tail
    };
    let t_half = half_spec.start(t_far);
    let half: Vec<(f64, f64)> = r.iter().cloned().filter(|p| p.0 >= t_half).collect();
    let amplify = t_half / (t_half - t_tail);
    Ok((
        tail_estimate(&r, &half, Extremum::Inf, amplify),
        tail_estimate(&r, &half, Extremum::Sup, amplify),
    ))
}

/// Least mean of a uniformly sampled signal: lgr of its trapezoidal primitive.
pub fn least_mean(samples: &[f64], dt: f64) -> Result<f64> {
    least_mean_estimate(samples, dt, None).map(|e| e.value)
}

pub fn least_mean_estimate(samples: &[f64], dt: f64, t_list: Option<&[f64]>) -> Result<Estimate> {
    if samples.len() < 2 {
        return Err(GpeError::InsufficientData("least mean needs at least two samples".into()));
    }
    let mut g = Vec::with_capacity(samples.len());
    g.push(0.0);
    for w in samples.windows(2) {
        let last = *g.last().unwrap();
        g.push(last + 0.5 * dt * (w[0] + w[1]));
    }
    let trace = BetaTrace::from_samples(IntervalTag::RPlus, 0.0, dt, g, TraceMeta::synthetic("least_mean"))?;
    let list = match t_list {
        Some(l) => l.to_vec(),
        None => default_t_list(trace.span(), dt),
    };
    Ok(global_growth_rates(&trace, &list, &GrowthOptions::default())?.0)
}

/// Piecewise-linear interpolant of `β` at knots spaced by `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessA {
    pub knot_times: Vec<f64>,
    pub knot_values: Vec<f64>,
    pub slope_essinf: f64,
    pub slope_esssup: f64,
    pub sup_dev: f64,
    /// Fitted sublinearity constant `C` with `|β(t₁)−β(t₂)| ≤ C(1+|t₁−t₂|)` on sampled lags.
    pub c_trace: f64,
    pub bound_holds: bool,
}

fn max_increment(beta: &[f64], lag: usize) -> f64 {
    beta.iter().zip(&beta[lag..]).map(|(a, b)| (b - a).abs()).fold(0.0, f64::max)
}

/// Sublinearity constant over a geometric set of lags up to `max_lag` samples.
pub fn sublinearity_constant(trace: &BetaTrace, max_lag: usize) -> f64 {
    let mut lags = Vec::new();
    let mut l = 1.0f64;
    while (l as usize) <= max_lag.min(trace.len() - 1) {
        let v = l as usize;
        if lags.last() != Some(&v) {
            lags.push(v);
        }
        l *= 1.25;
    }
    lags.par_iter()
        .map(|&k| {
            let tau = k as f64 * trace.dt_record;
            max_increment(&trace.beta, k) / (1.0 + tau)
        })
        .reduce(|| 0.0, f64::max)
}

pub fn interpolation_witness(trace: &BetaTrace, t_window: f64) -> Result<WitnessA> {
    let k = (t_window / trace.dt_record).round() as usize;
    if k == 0 || trace.len() <= k {
        return Err(GpeError::InsufficientData("trace shorter than two knots".into()));
    }
    let idx: Vec<usize> = (0..trace.len()).step_by(k).collect();
    let knot_times: Vec<f64> = idx.iter().map(|&i| trace.time(i)).collect();
    let knot_values: Vec<f64> = idx.iter().map(|&i| trace.beta[i]).collect();
    let tw = k as f64 * trace.dt_record;
    let slopes: Vec<f64> = knot_values.windows(2).map(|w| (w[1] - w[0]) / tw).collect();
    let slope_essinf = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let slope_esssup = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let last = *idx.last().unwrap();
    let sup_dev = (0..last + 1)
        .into_par_iter()
        .with_min_len(4096)
        .map(|i| {
            let j = i / k;
            if j + 1 >= idx.len() {
                return (trace.beta[i] - knot_values[j]).abs();
            }
            let r = (i - idx[j]) as f64 / k as f64;
            let a = knot_values[j] + r * (knot_values[j + 1] - knot_values[j]);
            (a - trace.beta[i]).abs()
        })
        .reduce(|| 0.0, f64::max);
    let c_trace = sublinearity_constant(trace, k);
    Ok(WitnessA {
        knot_times,
        knot_values,
        slope_essinf,
        slope_esssup,
        sup_dev,
        c_trace,
        bound_holds: sup_dev <= 2.0 * c_trace * (tw + 1.0) * (1.0 + 1e-12) + 1e-12,
    })
}

/// Options shared by the estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthOptions {
    /// Window lengths; `None` picks [`default_t_list`] per trace.
    pub t_list: Option<Vec<f64>>,
    pub s_stride: usize,
    pub tail: TailSpec,
    /// Residual above which a `1/T` fit is flagged unconverged.
    pub fit_tol: f64,
    /// Absolute slack added to trust radii in the invariant checks.
    pub check_tol: f64,
    /// `sup c` for the bottom of the ordering chain, when known.
    pub c_sup: Option<f64>,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        Self {
            t_list: None,
            s_stride: 1,
            tail: TailSpec::default(),
            fit_tol: 1e-3,
            check_tol: 1e-3,
            c_sup: None,
        }
    }
}

impl GrowthOptions {
    fn t_list_for(&self, trace: &BetaTrace) -> Vec<f64> {
        match &self.t_list {
            Some(l) => l.iter().cloned().filter(|t| 2.0 * t <= trace.span() * (1.0 + 1e-12)).collect(),
            None => default_t_list(trace.span(), trace.dt_record),
        }
    }
}

/// Estimates on one interval; the one-sided notions are `None` where the
/// interval makes them `±∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub mu_bp: Estimate,
    pub lambda_bp: Estimate,
    pub mu_p: Option<Estimate>,
    pub lambda_b: Option<Estimate>,
    pub mu_b: Option<Estimate>,
    pub lambda_p: Option<Estimate>,
}

impl IntervalReport {
    /// Defined entries by name.
    pub fn entries(&self) -> Vec<(&'static str, &Estimate)> {
        let mut v = vec![("mu_bp", &self.mu_bp), ("lambda_bp", &self.lambda_bp)];
        for (n, e) in [
            ("mu_p", &self.mu_p),
            ("lambda_b", &self.lambda_b),
            ("mu_b", &self.mu_b),
            ("lambda_p", &self.lambda_p),
        ] {
            if let Some(e) = e {
                v.push((n, e));
            }
        }
        v
    }

    fn entries_mut(&mut self) -> Vec<(&'static str, &mut Estimate)> {
        let mut v = vec![("mu_bp", &mut self.mu_bp), ("lambda_bp", &mut self.lambda_bp)];
        for (n, e) in [
            ("mu_p", &mut self.mu_p),
            ("lambda_b", &mut self.lambda_b),
            ("mu_b", &mut self.mu_b),
            ("lambda_p", &mut self.lambda_p),
        ] {
            if let Some(e) = e.as_mut() {
                v.push((n, e));
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub field_id: String,
    pub dt: Vec<f64>,
    pub n_interior: usize,
    pub synthetic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRateReport {
    pub r: IntervalReport,
    pub plus: IntervalReport,
    pub minus: IntervalReport,
    pub c_sup: Option<f64>,
    pub checks: Vec<InvariantCheck>,
    pub provenance: Provenance,
    pub check_tol: f64,
}

impl GrowthRateReport {
    pub fn intervals(&self) -> [(&'static str, &IntervalReport); 3] {
        [("R", &self.r), ("R+", &self.plus), ("R-", &self.minus)]
    }

    /// All eight defined entries.
    pub fn defined_entries(&self) -> Vec<(String, &Estimate)> {
        self.intervals()
            .iter()
            .flat_map(|(i, rep)| rep.entries().into_iter().map(move |(n, e)| (format!("{n}({i})"), e)))
            .collect()
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check_provenance(traces: &[&BetaTrace]) -> Result<()> {
    let m0 = &traces[0].meta;
    for t in &traces[1..] {
        let m = &t.meta;
        if m.field_id != m0.field_id || m.dt != m0.dt || m.n_interior != m0.n_interior || m.synthetic != m0.synthetic {
            return Err(GpeError::Provenance(format!(
                "traces disagree: ({}, dt={}, n={}) vs ({}, dt={}, n={})",
                m0.field_id, m0.dt, m0.n_interior, m.field_id, m.dt, m.n_interior
            )));
        }
    }
    Ok(())
}

fn interval_report(trace: &BetaTrace, plus: bool, minus: bool, opts: &GrowthOptions, t_list: &[f64]) -> Result<IntervalReport> {
    let (lgr, ggr) = global_growth_rates(trace, t_list, opts)?;
    let mut rep = IntervalReport {
        mu_bp: lgr.negated(),
        lambda_bp: ggr.negated(),
        mu_p: None,
        lambda_b: None,
        mu_b: None,
        lambda_p: None,
    };
    if plus {
        let (lo, hi) = cesaro_rates(trace, Direction::Plus, opts.tail)?;
        rep.mu_p = Some(lo.negated());
        rep.lambda_b = Some(hi.negated());
    }
    if minus {
        let (lo, hi) = cesaro_rates(trace, Direction::Minus, opts.tail)?;
        rep.mu_b = Some(lo.negated());
        rep.lambda_p = Some(hi.negated());
    }
    Ok(rep)
}

/// Assembles the six notions on `ℝ`, `ℝ⁺`, `ℝ⁻` and runs the consistency checks.
pub fn eigen_report(set: &TraceSet, opts: &GrowthOptions) -> Result<GrowthRateReport> {
    if set.r.interval_tag != IntervalTag::R
        || set.plus.interval_tag != IntervalTag::RPlus
        || set.minus.interval_tag != IntervalTag::RMinus
    {
        return Err(GpeError::Provenance("trace interval tags out of order".into()));
    }
    check_provenance(&[&set.r, &set.plus, &set.minus])?;
    // one window list for all three traces so the split checks compare like with like
    let shortest = [&set.r, &set.plus, &set.minus]
        .into_iter()
        .min_by(|a, b| a.span().total_cmp(&b.span()))
        .unwrap();
    let t_list = opts.t_list_for(shortest);
    let (r, (plus, minus)) = rayon::join(
        || interval_report(&set.r, true, true, opts, &t_list),
        || {
            rayon::join(
                || interval_report(&set.plus, true, false, opts, &t_list),
                || interval_report(&set.minus, false, true, opts, &t_list),
            )
        },
    );
    let m = &set.r.meta;
    let mut report = GrowthRateReport {
        r: r?,
        plus: plus?,
        minus: minus?,
        c_sup: opts.c_sup,
        checks: Vec::new(),
        provenance: Provenance {
            field_id: m.field_id.clone(),
            dt: vec![m.dt],
            n_interior: m.n_interior,
            synthetic: m.synthetic,
        },
        check_tol: opts.check_tol,
    };
    report.checks = run_checks(&report);
    Ok(report)
}

/// `a ≤ b` up to both trust radii and the absolute slack.
fn leq(name: String, a: (f64, f64), b: (f64, f64), tol: f64) -> InvariantCheck {
    let slack = a.1 + b.1 + tol;
    InvariantCheck {
        passed: a.0 <= b.0 + slack,
        tolerance: slack,
        detail: format!("{} <= {}", a.0, b.0),
        name,
    }
}

fn eq(name: String, a: (f64, f64), b: (f64, f64), tol: f64) -> InvariantCheck {
    let slack = a.1 + b.1 + tol;
    InvariantCheck {
        passed: (a.0 - b.0).abs() <= slack,
        tolerance: slack,
        detail: format!("{} == {}", a.0, b.0),
        name,
    }
}

fn vt(e: &Estimate) -> (f64, f64) {
    (e.value, e.trust_radius)
}

/// Ordering chain, split identities and half-line agreement.
pub fn run_checks(rep: &GrowthRateReport) -> Vec<InvariantCheck> {
    let tol = rep.check_tol;
    let mut out = Vec::new();
    for (name, iv) in rep.intervals() {
        let lam_min = [&iv.lambda_b, &iv.lambda_p]
            .into_iter()
            .flatten()
            .map(vt)
            .min_by(|a, b| a.0.total_cmp(&b.0));
        let mu_max = [&iv.mu_b, &iv.mu_p]
            .into_iter()
            .flatten()
            .map(vt)
            .max_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(c) = rep.c_sup {
            out.push(leq(format!("order {name}: -sup c <= lambda_bp"), (-c, 0.0), vt(&iv.lambda_bp), tol));
        }
        out.push(leq(format!("order {name}: lambda_bp <= mu_bp"), vt(&iv.lambda_bp), vt(&iv.mu_bp), tol));
        if let Some(l) = lam_min {
            out.push(leq(format!("order {name}: lambda_bp <= min(lambda_b, lambda_p)"), vt(&iv.lambda_bp), l, tol));
        }
        if let (Some(l), Some(m)) = (lam_min, mu_max) {
            out.push(leq(format!("order {name}: min lambda <= max mu"), l, m, tol));
        }
        if let Some(m) = mu_max {
            out.push(leq(format!("order {name}: max(mu_b, mu_p) <= mu_bp"), m, vt(&iv.mu_bp), tol));
        }
        if let (Some(l), Some(m)) = (&iv.lambda_b, &iv.mu_p) {
            out.push(leq(format!("order {name}: lambda_b <= mu_p"), vt(l), vt(m), tol));
        }
        if let (Some(l), Some(m)) = (&iv.lambda_p, &iv.mu_b) {
            out.push(leq(format!("order {name}: lambda_p <= mu_b"), vt(l), vt(m), tol));
        }
    }
    let (p, m, r) = (&rep.plus, &rep.minus, &rep.r);
    let max_mu = if p.mu_bp.value >= m.mu_bp.value { vt(&p.mu_bp) } else { vt(&m.mu_bp) };
    let min_lam = if p.lambda_bp.value <= m.lambda_bp.value { vt(&p.lambda_bp) } else { vt(&m.lambda_bp) };
    out.push(eq("split: mu_bp(R) = max half-lines".into(), vt(&r.mu_bp), max_mu, tol));
    out.push(eq("split: lambda_bp(R) = min half-lines".into(), vt(&r.lambda_bp), min_lam, tol));
    let pairs = [
        ("mu_p(R) = mu_p(R+)", &r.mu_p, &p.mu_p),
        ("lambda_b(R) = lambda_b(R+)", &r.lambda_b, &p.lambda_b),
        ("mu_b(R) = mu_b(R-)", &r.mu_b, &m.mu_b),
        ("lambda_p(R) = lambda_p(R-)", &r.lambda_p, &m.lambda_p),
    ];
    for (name, a, b) in pairs {
        if let (Some(a), Some(b)) = (a, b) {
            out.push(eq(format!("half-line: {name}"), vt(a), vt(b), tol));
        }
    }
    out
}

/// Richardson-in-dt combination of reports computed at several `dt`.
pub fn richardson_report(levels: &[(f64, GrowthRateReport)]) -> Result<GrowthRateReport> {
    if levels.is_empty() {
        return Err(GpeError::InsufficientData("no reports to combine".into()));
    }
    let ids: Vec<&str> = levels.iter().map(|l| l.1.provenance.field_id.as_str()).collect();
    if ids.iter().any(|i| *i != ids[0]) || levels.iter().any(|l| l.1.provenance.n_interior != levels[0].1.provenance.n_interior) {
        return Err(GpeError::Provenance("Richardson levels come from different fields or meshes".into()));
    }
    let mut sorted: Vec<&(f64, GrowthRateReport)> = levels.iter().collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let hs: Vec<f64> = sorted.iter().map(|l| l.0).collect();
    let mut out = sorted.last().unwrap().1.clone();
    let collect = |iv: usize, name: &str| -> Vec<f64> {
        sorted
            .iter()
            .map(|l| {
                let rep = [&l.1.r, &l.1.plus, &l.1.minus][iv];
                rep.entries().into_iter().find(|e| e.0 == name).map(|e| e.1.value).unwrap_or(f64::NAN)
            })
            .collect()
    };
    let trust = |iv: usize, name: &str| -> f64 {
        sorted
            .iter()
            .filter_map(|l| {
                let rep = [&l.1.r, &l.1.plus, &l.1.minus][iv];
                rep.entries().into_iter().find(|e| e.0 == name).map(|e| e.1.trust_radius)
            })
            .fold(0.0, f64::max)
    };
    for (iv, rep) in [&mut out.r, &mut out.plus, &mut out.minus].into_iter().enumerate() {
        for (name, e) in rep.entries_mut() {
            let vs = collect(iv, name);
            let v = richardson(&hs, &vs);
            e.dt_correction = v - e.value;
            e.value = v;
            e.trust_radius = trust(iv, name);
        }
    }
    out.provenance.dt = hs;
    out.checks = run_checks(&out);
    Ok(out)
}

/// Synthetic `β(t) = −λ t + ∫_0^t σ` from the field's time signal.
pub fn synthetic_trace(
    field: &CoefficientField,
    lambda: f64,
    t_lo: f64,
    t_hi: f64,
    dt_record: f64,
    tag: IntervalTag,
) -> Result<BetaTrace> {
    if !(t_hi > t_lo) || !(dt_record > 0.0) {
        return Err(GpeError::InvalidState(format!("bad synthetic range [{t_lo}, {t_hi}]")));
    }
    let n = ((t_hi - t_lo) / dt_record).round() as usize;
    let time = |k: usize| t_lo + k as f64 * dt_record;
    let signed_integral = |t: f64| -> Result<f64> {
        if t >= 0.0 {
            field.integral_sigma(0.0, t)
        } else {
            field.integral_sigma(t, 0.0).map(|v| -v)
        }
    };
    let mut beta = vec![0.0; n + 1];
    if field.kind() == FieldKind::RandomStationary {
        // cumulative from the sample nearest t = 0 outward: per-sample cost O(1)
        let k0 = ((-t_lo / dt_record).round().max(0.0) as usize).min(n);
        beta[k0] = signed_integral(time(k0))?;
        for k in k0 + 1..=n {
            beta[k] = beta[k - 1] + field.integral_sigma(time(k - 1), time(k))?;
        }
        for k in (0..k0).rev() {
            beta[k] = beta[k + 1] - field.integral_sigma(time(k), time(k + 1))?;
        }
    } else {
        let vals: Vec<f64> = (0..=n).into_par_iter().map(|k| signed_integral(time(k))).collect::<Result<_>>()?;
        beta = vals;
    }
    for (k, b) in beta.iter_mut().enumerate() {
        *b -= lambda * time(k);
    }
    let meta = TraceMeta::synthetic(crate::floquet::field_id(field));
    BetaTrace::from_samples(tag, t_lo, dt_record, beta, meta)
}

/// Synthetic `ℝ`, `ℝ⁺`, `ℝ⁻` traces (the half-line traces are restrictions).
pub fn synthetic_trace_set(
    field: &CoefficientField,
    lambda: f64,
    t_plus: f64,
    t_minus: f64,
    dt_record: f64,
) -> Result<TraceSet> {
    let r = synthetic_trace(field, lambda, -t_minus, t_plus, dt_record, IntervalTag::R)?;
    let plus = r.slice(0.0, t_plus, IntervalTag::RPlus)?;
    let minus = r.slice(-t_minus, 0.0, IntervalTag::RMinus)?;
    Ok(TraceSet { r, plus, minus })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateRow {
    pub shift: f64,
    pub mu_p: Estimate,
    pub lambda_b: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslateScan {
    pub rows: Vec<TranslateRow>,
    pub max_mu_p: f64,
    pub min_lambda_b: f64,
}

impl TranslateScan {
    /// One-sided comparison with the untranslated window rates.
    pub fn consistent_with(&self, mu_bp: f64, lambda_bp: f64, tol: f64) -> bool {
        self.max_mu_p <= mu_bp + tol && self.min_lambda_b >= lambda_bp - tol
    }
}

/// `ℝ⁺` Cesàro rates of `t ↦ field(t + s)` for each shift `s`.
pub fn translate_scan(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    shifts: &[f64],
    horizon: f64,
    burn_in: f64,
    record_stride: usize,
    tail: TailSpec,
) -> Result<TranslateScan> {
    let rows: Vec<TranslateRow> = shifts
        .par_iter()
        .map(|&s| {
            let f = field.shifted(s);
            let tr = compute_bundle(
                &f,
                mesh,
                scheme,
                BundleRequest {
                    tag: IntervalTag::RPlus,
                    t_lo: 0.0,
                    t_hi: horizon,
                    burn_in,
                    record_stride,
                    snapshot_every: None,
                },
            )?;
            let (lo, hi) = cesaro_rates(&tr, Direction::Plus, tail)?;
            Ok(TranslateRow {
                shift: s,
                mu_p: lo.negated(),
                lambda_b: hi.negated(),
            })
        })
        .collect::<Result<_>>()?;
    let max_mu_p = rows.iter().map(|r| r.mu_p.value).fold(f64::NEG_INFINITY, f64::max);
    let min_lambda_b = rows.iter().map(|r| r.lambda_b.value).fold(f64::INFINITY, f64::min);
    Ok(TranslateScan {
        rows,
        max_mu_p,
        min_lambda_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffield::{make_field, Domain1D, FieldSpec, SigmaSignal};
    use proptest::prelude::*;

    const LAM: f64 = 9.86879;

    fn linear(g: f64, t0: f64, t1: f64, dt: f64) -> BetaTrace {
        let n = ((t1 - t0) / dt).round() as usize;
        let beta = (0..=n).map(|k| g * (t0 + k as f64 * dt)).collect();
        BetaTrace::from_samples(IntervalTag::R, t0, dt, beta, TraceMeta::synthetic("lin")).unwrap()
    }

    fn sep(sig: SigmaSignal) -> CoefficientField {
        make_field(&FieldSpec::separable(1.0, 0.0, sig), Domain1D::new(0.0, 1.0).unwrap()).unwrap()
    }

    fn log_osc() -> CoefficientField {
        sep(SigmaSignal::LogOscillatory { amplitude: 1.0 })
    }

    #[test]
    fn linear_trace_rates() {
        let tr = linear(-2.5, 0.0, 100.0, 0.01);
        for w in [0.01, 1.0, 10.0, 50.0] {
            // cancellation in β(s+T) − β(s) with |β| ≤ 250
            let tol = 1e-15 * 250.0 / w * 8.0;
            assert!((window_extremal_rate(&tr, w, Extremum::Inf).unwrap() + 2.5).abs() < tol);
            assert!((window_extremal_rate(&tr, w, Extremum::Sup).unwrap() + 2.5).abs() < tol);
        }
        assert!(matches!(window_extremal_rate(&tr, 60.0, Extremum::Inf), Err(GpeError::TrustCollapse { .. })));
        let (lo, hi) = cesaro_rates(&tr, Direction::Plus, TailSpec::default()).unwrap();
        assert!((lo.value + 2.5).abs() < 1e-12 && (hi.value + 2.5).abs() < 1e-12);
    }

    #[test]
    fn log_oscillatory_window_extremes() {
        let tr = synthetic_trace(&log_osc(), LAM, 0.0, 1e6, 1.0, IntervalTag::RPlus).unwrap();
        let lo = window_extremal_rate(&tr, 1e3, Extremum::Inf).unwrap();
        let hi = window_extremal_rate(&tr, 1e3, Extremum::Sup).unwrap();
        assert!((lo - (-LAM - 0.9995)).abs() < 2e-3, "{lo}");
        assert!((hi - (-LAM + 0.9995)).abs() < 2e-3, "{hi}");
        let refined = window_extremal_rate_refined(&tr, 1e3, Extremum::Inf, 1000).unwrap();
        let coarse = window_extremal_rate_strided(&tr, 1e3, Extremum::Inf, 1000).unwrap();
        assert!(refined <= coarse);
        assert!((refined - lo).abs() < 1e-9);
    }

    #[test]
    fn log_oscillatory_growth_rates_and_cesaro() {
        let tr = synthetic_trace(&log_osc(), LAM, 0.0, 1e6, 1.0, IntervalTag::RPlus).unwrap();
        let t_list = [10.0, 30.0, 100.0, 300.0, 1e3, 3e3, 1e4];
        let (lgr, ggr) = global_growth_rates(&tr, &t_list, &GrowthOptions::default()).unwrap();
        assert!((lgr.value - (-LAM - 1.0)).abs() < 5e-3, "{lgr:?}");
        assert!((ggr.value - (-LAM + 1.0)).abs() < 5e-3, "{ggr:?}");
        let tail = TailSpec {
            fraction: 0.5,
            mode: TailMode::Geometric,
        };
        let (lo, hi) = cesaro_rates(&tr, Direction::Plus, tail).unwrap();
        let r2 = 0.5f64.sqrt();
        assert!((lo.value - (-LAM - r2)).abs() < 1e-2, "{lo:?}");
        assert!((hi.value - (-LAM + r2)).abs() < 1e-2, "{hi:?}");
    }

    #[test]
    fn periodic_and_quasi_periodic_collapse() {
        let (a, tau) = (0.7, 1.3);
        let f = sep(SigmaSignal::Cosine {
            m: 0.4,
            amplitude: a,
            tau,
            phase: 0.0,
        });
        let tr = synthetic_trace(&f, LAM, 0.0, 2e4, 0.01, IntervalTag::RPlus).unwrap();
        let t_list = default_t_list(tr.span(), tr.dt_record);
        let t_max = *t_list.last().unwrap();
        let (lgr, ggr) = global_growth_rates(&tr, &t_list, &GrowthOptions::default()).unwrap();
        let tol = a * tau / (std::f64::consts::PI * t_max);
        assert!((lgr.value - (-LAM + 0.4)).abs() <= tol.max(1e-9), "{}", lgr.value);
        assert!((ggr.value - (-LAM + 0.4)).abs() <= tol.max(1e-9), "{}", ggr.value);

        let q = sep(SigmaSignal::QuasiPeriodic {
            modes: vec![
                crate::coeffield::Mode {
                    amplitude: 1.0,
                    omega: 1.0,
                },
                crate::coeffield::Mode {
                    amplitude: 1.0,
                    omega: 2f64.sqrt(),
                },
            ],
            declared_irrational: true,
        });
        let tr = synthetic_trace(&q, LAM, 0.0, 2e4, 0.05, IntervalTag::RPlus).unwrap();
        let t_list = default_t_list(tr.span(), tr.dt_record);
        let t_max = *t_list.last().unwrap();
        let (lgr, ggr) = global_growth_rates(&tr, &t_list, &GrowthOptions::default()).unwrap();
        assert!((lgr.value + LAM).abs() <= 3.0 / t_max, "{}", lgr.value);
        assert!((ggr.value + LAM).abs() <= 3.0 / t_max, "{}", ggr.value);
    }

    #[test]
    fn least_mean_examples() {
        assert!((least_mean(&vec![3.0; 1001], 0.01).unwrap() - 3.0).abs() < 1e-12);
        let dt = 1e-3;
        let g: Vec<f64> = (0..=1_000_000).map(|k| (2.0 * std::f64::consts::PI * k as f64 * dt).cos()).collect();
        assert!(least_mean(&g, dt).unwrap().abs() < 1e-3);
        let g: Vec<f64> = (0..=1_000_000).map(|k| (k as f64).ln_1p().cos()).collect();
        assert!((least_mean(&g, 1.0).unwrap() + 1.0).abs() < 5e-3);
        assert!(least_mean(&[], 1.0).is_err());
    }

    #[test]
    fn witness_examples() {
        let tr = linear(1.5, 0.0, 200.0, 0.1);
        let w = interpolation_witness(&tr, 10.0).unwrap();
        assert!(w.sup_dev < 1e-12);
        assert!((w.slope_essinf - 1.5).abs() < 1e-12);
        assert!(w.bound_holds);

        let tr = synthetic_trace(&log_osc(), LAM, 0.0, 1e6, 1.0, IntervalTag::RPlus).unwrap();
        let w = interpolation_witness(&tr, 1e3).unwrap();
        let inf = window_extremal_rate(&tr, 1e3, Extremum::Inf).unwrap();
        assert!(w.slope_essinf >= inf - 1e-12);
        assert!(w.bound_holds, "{} vs C={}", w.sup_dev, w.c_trace);
    }

    #[test]
    fn reflected_minus_matches_plus() {
        let set = synthetic_trace_set(&log_osc(), LAM, 2e4, 2e4, 0.5).unwrap();
        let (a, b) = cesaro_rates(&set.plus, Direction::Plus, TailSpec::default()).unwrap();
        let (c, d) = cesaro_rates(&set.minus, Direction::Minus, TailSpec::default()).unwrap();
        // even signal: β(−t) = −β_+(t) up to the sign of λt, so β(t)/t agrees
        assert!((a.value - c.value).abs() < 1e-9 && (b.value - d.value).abs() < 1e-9);
    }

    #[test]
    fn report_on_log_oscillatory_separates_four_values() {
        let set = synthetic_trace_set(&log_osc(), LAM, 1e6, 1e6, 1.0).unwrap();
        let opts = GrowthOptions {
            t_list: Some(vec![10.0, 30.0, 100.0, 300.0, 1e3, 3e3, 1e4]),
            tail: TailSpec {
                fraction: 0.5,
                mode: TailMode::Geometric,
            },
            c_sup: Some(1.0),
            ..GrowthOptions::default()
        };
        let rep = eigen_report(&set, &opts).unwrap();
        let r2 = 0.5f64.sqrt();
        let p = &rep.plus;
        assert!((p.mu_bp.value - (LAM + 1.0)).abs() < 1e-2);
        assert!((p.mu_p.as_ref().unwrap().value - (LAM + r2)).abs() < 1e-2);
        assert!((p.lambda_b.as_ref().unwrap().value - (LAM - r2)).abs() < 1e-2);
        assert!((p.lambda_bp.value - (LAM - 1.0)).abs() < 1e-2);
        assert!(p.mu_b.is_none() && p.lambda_p.is_none());
        assert!(rep.all_checks_pass(), "{:#?}", rep.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    }

    #[test]
    fn provenance_mismatch_rejected() {
        let a = synthetic_trace_set(&log_osc(), LAM, 100.0, 100.0, 0.1).unwrap();
        let b = synthetic_trace_set(&sep(SigmaSignal::Constant { value: 1.0 }), LAM, 100.0, 100.0, 0.1).unwrap();
        let mixed = TraceSet {
            r: a.r,
            plus: b.plus,
            minus: a.minus,
        };
        assert!(matches!(eigen_report(&mixed, &GrowthOptions::default()), Err(GpeError::Provenance(_))));
    }

    #[test]
    fn extrapolation_recovers_inverse_t_model() {
        let pts: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 10.0, 20.0].iter().map(|&t| (t, -3.0 + 0.7 / t)).collect();
        let e = extrapolate_inverse_t(&pts, 1e-3);
        assert!((e.value + 3.0).abs() < 1e-12 && e.converged);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn duality_and_constant_shift(seed in 0u64..1000, kappa in -3.0f64..3.0) {
            let f = sep(SigmaSignal::PiecewiseLinearIid { lo: 0.0, hi: 1.0, seed: Some(seed) });
            let tr = synthetic_trace(&f, 1.0, 0.0, 400.0, 0.25, IntervalTag::RPlus).unwrap();
            let t_list = [1.0, 5.0, 20.0, 100.0];
            let opts = GrowthOptions::default();
            let (lgr, ggr) = global_growth_rates(&tr, &t_list, &opts).unwrap();
            let (nl, ng) = global_growth_rates(&tr.negated(), &t_list, &opts).unwrap();
            prop_assert_eq!(ggr.value, -nl.value);
            prop_assert_eq!(lgr.value, -ng.value);
            let sh = tr.plus_linear(kappa);
            let (sl, sg) = global_growth_rates(&sh, &t_list, &opts).unwrap();
            prop_assert!((sl.value - lgr.value - kappa).abs() < 1e-9);
            prop_assert!((sg.value - ggr.value - kappa).abs() < 1e-9);
            let (cl, cu) = cesaro_rates(&tr, Direction::Plus, TailSpec::default()).unwrap();
            let (scl, scu) = cesaro_rates(&sh, Direction::Plus, TailSpec::default()).unwrap();
            prop_assert!((scl.value - cl.value - kappa).abs() < 1e-9);
            prop_assert!((scu.value - cu.value - kappa).abs() < 1e-9);
        }

        #[test]
        fn stride_refinement_is_monotone(seed in 0u64..1000, stride in 2usize..50) {
            let f = sep(SigmaSignal::PiecewiseLinearIid { lo: 0.0, hi: 1.0, seed: Some(seed) });
            let tr = synthetic_trace(&f, 0.0, 0.0, 300.0, 0.1, IntervalTag::RPlus).unwrap();
            let full = window_extremal_rate(&tr, 7.0, Extremum::Inf).unwrap();
            let coarse = window_extremal_rate_strided(&tr, 7.0, Extremum::Inf, stride).unwrap();
            let refined = window_extremal_rate_refined(&tr, 7.0, Extremum::Inf, stride).unwrap();
            prop_assert!(full <= refined && refined <= coarse);
            let full_s = window_extremal_rate(&tr, 7.0, Extremum::Sup).unwrap();
            let coarse_s = window_extremal_rate_strided(&tr, 7.0, Extremum::Sup, stride).unwrap();
            prop_assert!(full_s >= coarse_s);
        }

        #[test]
        fn split_of_window_rates(seed in 0u64..1000) {
            let f = sep(SigmaSignal::PiecewiseLinearIid { lo: 0.0, hi: 1.0, seed: Some(seed) });
            let set = synthetic_trace_set(&f, 2.0, 200.0, 200.0, 0.25).unwrap();
            let w = 5.0;
            let whole = window_extremal_rate(&set.r, w, Extremum::Inf).unwrap();
            let p = window_extremal_rate(&set.plus, w, Extremum::Inf).unwrap();
            let m = window_extremal_rate(&set.minus, w, Extremum::Inf).unwrap();
            // the whole line also sees windows straddling 0
            prop_assert!(whole <= p.min(m) + 1e-12);
        }
    }
}
