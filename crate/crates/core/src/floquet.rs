//! Discrete principal Floquet bundle and its diagnostics.
//!
//! The bundle is approximated by pullback: start from a positive datum well
//! before the recording window and let exponential separation align the
//! profile. Only the log-norm `β` and sparse profile snapshots are kept.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coeffield::{CoefficientField, HalfLine};
use crate::discretize::Mesh;
use crate::error::{GpeError, Result};
use crate::stats::fit_line;
use crate::stepper::{evolve_normalized_with, step_count, EvolveOptions, NormalizedState, Propagator, StepScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntervalTag {
    #[serde(rename = "R")]
    R,
    #[serde(rename = "R+")]
    RPlus,
    #[serde(rename = "R-")]
    RMinus,
}

/// Where a trace came from; compared before traces are combined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub field_id: String,
    pub dt: f64,
    pub theta: f64,
    pub n_interior: usize,
    pub synthetic: bool,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl TraceMeta {
    pub fn synthetic(field_id: impl Into<String>) -> Self {
        Self {
            field_id: field_id.into(),
            dt: 0.0,
            theta: 0.0,
            n_interior: 0,
            synthetic: true,
            warnings: Vec::new(),
        }
    }
}

/// Uniformly sampled `β(t) = ln‖u_P(t)‖∞`, anchored so that `β(0) = 0` when
/// `t = 0` is sampled (otherwise at the first sample).
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTrace {
    pub interval_tag: IntervalTag,
    pub t_start: f64,
    pub dt_record: f64,
    pub beta: Vec<f64>,
    pub profiles: Vec<(f64, Vec<f64>)>,
    pub burn_in_used: f64,
    pub meta: TraceMeta,
}

impl BetaTrace {
    /// Builds and anchors a trace from raw samples.
    pub fn from_samples(
        interval_tag: IntervalTag,
        t_start: f64,
        dt_record: f64,
        beta: Vec<f64>,
        meta: TraceMeta,
    ) -> Result<Self> {
        if beta.is_empty() || !(dt_record > 0.0) {
            return Err(GpeError::InsufficientData("empty trace".into()));
        }
        if let Some(k) = beta.iter().position(|b| !b.is_finite()) {
            return Err(GpeError::InvalidState(format!("non-finite beta at sample {k}")));
        }
        let mut tr = Self {
            interval_tag,
            t_start,
            dt_record,
            beta,
            profiles: Vec::new(),
            burn_in_used: 0.0,
            meta,
        };
        tr.reanchor();
        Ok(tr)
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt_record
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn span(&self) -> f64 {
        self.t_end() - self.t_start
    }

    /// Index of the sample nearest to `t`, if within half a record step.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let k = ((t - self.t_start) / self.dt_record).round();
        if k < 0.0 || k as usize >= self.len() {
            return None;
        }
        let k = k as usize;
        ((self.time(k) - t).abs() <= 0.5 * self.dt_record * (1.0 + 1e-9)).then_some(k)
    }

    /// Index of the anchor sample (`t = 0` when present).
    pub fn anchor_index(&self) -> usize {
        self.index_of(0.0).unwrap_or(0)
    }

    fn reanchor(&mut self) {
        let b0 = self.beta[self.anchor_index()];
        for b in self.beta.iter_mut() {
            *b -= b0;
        }
    }

    /// Sub-trace on `[t_lo, t_hi]` (sample-aligned), re-anchored.
    pub fn slice(&self, t_lo: f64, t_hi: f64, tag: IntervalTag) -> Result<Self> {
        let i0 = ((t_lo - self.t_start) / self.dt_record).round().max(0.0) as usize;
        let i1 = (((t_hi - self.t_start) / self.dt_record).round() as usize).min(self.len() - 1);
        if i1 <= i0 {
            return Err(GpeError::InsufficientData(format!(
                "slice [{t_lo}, {t_hi}] is empty"
            )));
        }
        let (t0, t1) = (self.time(i0), self.time(i1));
        let mut out = Self {
            interval_tag: tag,
            t_start: t0,
            dt_record: self.dt_record,
            beta: self.beta[i0..=i1].to_vec(),
            profiles: self
                .profiles
                .iter()
                .filter(|(t, _)| *t >= t0 && *t <= t1)
                .cloned()
                .collect(),
            burn_in_used: self.burn_in_used,
            meta: self.meta.clone(),
        };
        out.reanchor();
        Ok(out)
    }

    /// Trace of `−β` (used for the duality `ggr(β) = −lgr(−β)`).
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for b in out.beta.iter_mut() {
            *b = -*b;
        }
        out
    }

    /// Trace of `β(t) + κ t`.
    pub fn plus_linear(&self, kappa: f64) -> Self {
        let mut out = self.clone();
        for (k, b) in out.beta.iter_mut().enumerate() {
            *b += kappa * self.time(k);
        }
        out.reanchor();
        out
    }

    /// `t,beta` CSV with 17 significant digits.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,beta")?;
        for (k, b) in self.beta.iter().enumerate() {
            writeln!(w, "{:.16e},{:.16e}", self.time(k), b)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// `t,x,u` CSV of the stored profile snapshots.
    pub fn write_profiles_csv(&self, mesh: &Mesh, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,x,u")?;
        for (t, p) in &self.profiles {
            for (x, u) in mesh.nodes.iter().zip(p) {
                writeln!(w, "{:.16e},{:.16e},{:.16e}", t, x, u)?;
            }
        }
        Ok(())
    }

    /// Parses a `t,beta` CSV written by [`BetaTrace::write_csv`].
    pub fn read_csv(text: &str, tag: IntervalTag, meta: TraceMeta) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "t,beta" => {}
            _ => return Err(GpeError::InvalidState("missing `t,beta` header".into())),
        }
        let mut ts = Vec::new();
        let mut bs = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| GpeError::InvalidState(format!("bad CSV row {}", i + 2)))
            };
            ts.push(parse(it.next())?);
            bs.push(parse(it.next())?);
        }
        if ts.len() < 2 {
            return Err(GpeError::InsufficientData("CSV trace needs two rows".into()));
        }
        let dt = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
        Self::from_samples(tag, ts[0], dt, bs, meta)
    }
}

/// Recording request for [`compute_bundle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BundleRequest {
    pub tag: IntervalTag,
    pub t_lo: f64,
    pub t_hi: f64,
    pub burn_in: f64,
    pub record_stride: usize,
    /// Keep a profile every this many records.
    pub snapshot_every: Option<usize>,
}

/// Field actually propagated for an interval: `ℝ⁺` and `ℝ⁻` use the even
/// extension of the corresponding half-line.
pub fn field_for_interval(field: &CoefficientField, tag: IntervalTag) -> CoefficientField {
    match tag {
        IntervalTag::R => field.clone(),
        IntervalTag::RPlus => field.reflected(HalfLine::Plus),
        IntervalTag::RMinus => field.reflected(HalfLine::Minus),
    }
}

/// Field identifier shared by the three interval traces of one field.
pub fn field_id(field: &CoefficientField) -> String {
    let base = CoefficientField::clone(field);
    format!(
        "{}|shift={}|domain=[{},{}]",
        serde_json::to_string(base.spec()).unwrap_or_default(),
        base.time_shift(),
        base.domain().x_lo,
        base.domain().x_hi
    )
}

/// Approximates the bundle on `[t_lo, t_hi]` by spinning up from the sine
/// datum at `t_lo − burn_in`.
pub fn compute_bundle(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    req: BundleRequest,
) -> Result<BetaTrace> {
    compute_bundle_from(field, mesh, scheme, req, &mesh.sine_profile())
}

/// Same as [`compute_bundle`] with an explicit spin-up datum.
pub fn compute_bundle_from(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    req: BundleRequest,
    u0: &[f64],
) -> Result<BetaTrace> {
    if !(req.burn_in > 0.0) {
        return Err(GpeError::InvalidState(format!("burn_in must be > 0, got {}", req.burn_in)));
    }
    let mut warnings = Vec::new();
    if let Some((lo, hi)) = field.table_time_range() {
        if req.t_lo - req.burn_in < lo || req.t_hi > hi {
            warnings.push(format!(
                "tabulated field clamped: table covers [{lo}, {hi}], run needs [{}, {}]",
                req.t_lo - req.burn_in,
                req.t_hi
            ));
        }
    }
    let work = field_for_interval(field, req.tag);
    let stride = req.record_stride.max(1);
    let dt = scheme.dt;
    let n_burn = step_count(req.t_lo - req.burn_in, req.t_lo, dt)?;
    // spin-up without recording
    let mut state = NormalizedState::from_datum(u0, req.t_lo - req.burn_in)?;
    {
        let mut prop = Propagator::new(&work, mesh, scheme)?;
        for k in 1..=n_burn {
            prop.step(&mut state)?;
            state.t = req.t_lo - req.burn_in + k as f64 * dt;
        }
    }
    state.t = req.t_lo;
    let seg = evolve_normalized_with(
        &work,
        mesh,
        scheme,
        &state.profile,
        req.t_lo,
        req.t_hi,
        EvolveOptions {
            record_stride: stride,
            snapshot_every: req.snapshot_every,
        },
    )?;
    let meta = TraceMeta {
        field_id: field_id(field),
        dt,
        theta: scheme.theta,
        n_interior: mesh.n_interior,
        synthetic: false,
        warnings,
    };
    let mut trace = BetaTrace::from_samples(req.tag, req.t_lo, seg.dt_record, seg.beta, meta)?;
    trace.profiles = seg.snapshots;
    trace.burn_in_used = req.burn_in;
    Ok(trace)
}

/// The three interval traces of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub r: BetaTrace,
    pub plus: BetaTrace,
    pub minus: BetaTrace,
}

/// Computes `ℝ` on `[−t_minus, t_plus]`, `ℝ⁺` on `[0, t_plus]` (reflected
/// spin-up) and `ℝ⁻` as the `t ≤ 0` part of the `ℝ` run (forward evolution
/// only; the even extension is never reached before `t = 0`).
pub fn compute_trace_set(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    t_plus: f64,
    t_minus: f64,
    burn_in: f64,
    record_stride: usize,
) -> Result<TraceSet> {
    let req_r = BundleRequest {
        tag: IntervalTag::R,
        t_lo: -t_minus,
        t_hi: t_plus,
        burn_in,
        record_stride,
        snapshot_every: None,
    };
    let req_p = BundleRequest {
        tag: IntervalTag::RPlus,
        t_lo: 0.0,
        ..req_r
    };
    let (r, plus) = rayon::join(
        || compute_bundle(field, mesh, scheme, req_r),
        || compute_bundle(field, mesh, scheme, req_p),
    );
    let r = r?;
    let plus = plus?;
    let minus = r.slice(-t_minus, 0.0, IntervalTag::RMinus)?;
    Ok(TraceSet { r, plus, minus })
}

/// Evolves two data in lockstep, calling `visit(t, pa, pb)` every `every`
/// steps (and at `t0`).
fn evolve_pair(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    ua: &[f64],
    ub: &[f64],
    t0: f64,
    t1: f64,
    every: usize,
    mut visit: impl FnMut(f64, &[f64], &[f64]),
) -> Result<()> {
    let n = step_count(t0, t1, scheme.dt)?;
    let mut sa = NormalizedState::from_datum(ua, t0)?;
    let mut sb = NormalizedState::from_datum(ub, t0)?;
    let mut pa = Propagator::new(field, mesh, scheme)?;
    let mut pb = Propagator::new(field, mesh, scheme)?;
    visit(t0, &sa.profile, &sb.profile);
    for k in 1..=n {
        pa.step(&mut sa)?;
        pb.step(&mut sb)?;
        if k % every.max(1) == 0 {
            visit(t0 + k as f64 * scheme.dt, &sa.profile, &sb.profile);
        }
    }
    Ok(())
}

/// `sup(u/v) / inf(u/v)` over the nodes.
pub fn ratio_spread(u: &[f64], v: &[f64]) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (a, b) in u.iter().zip(v) {
        let r = a / b;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    hi / lo
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationEstimate {
    pub gamma: f64,
    /// The spread hit roundoff before the fit window; `gamma` is a lower bound.
    pub lower_bound_only: bool,
    pub fit_points: usize,
}

/// Fitted exponential decay rate of `spread(t) = sup(u_a/u_b)/inf(u_a/u_b) − 1`.
pub fn separation_rate(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    u0_a: &[f64],
    u0_b: &[f64],
    horizon: f64,
) -> Result<SeparationEstimate> {
    let n_steps = step_count(0.0, horizon, scheme.dt)?;
    let every = (n_steps / 400).max(1);
    let mut samples: Vec<(f64, f64)> = Vec::new();
    evolve_pair(field, mesh, scheme, u0_a, u0_b, 0.0, horizon, every, |t, a, b| {
        samples.push((t, ratio_spread(a, b) - 1.0));
    })?;
    if samples.first().map(|s| s.1).unwrap_or(0.0) <= 1e-13 {
        return Err(GpeError::InvalidState("initial data are proportional".into()));
    }
    let half = horizon / 2.0;
    let usable: Vec<(f64, f64)> = samples.iter().cloned().filter(|s| s.1 > 1e-13 && s.0 > 0.0).collect();
    let window: Vec<(f64, f64)> = usable.iter().cloned().filter(|s| s.0 >= half).collect();
    let (pts, lower) = if window.len() >= 3 {
        (window, false)
    } else {
        // roundoff reached before the fit window: use the last decade of usable data
        let tail: Vec<(f64, f64)> = usable.iter().rev().take(usable.len().max(3) / 2 + 1).rev().cloned().collect();
        (tail, true)
    };
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let fit = fit_line(&xs, &ys)
        .ok_or_else(|| GpeError::InsufficientData("spread decayed before any fit was possible".into()))?;
    Ok(SeparationEstimate {
        gamma: -fit.slope,
        lower_bound_only: lower,
        fit_points: pts.len(),
    })
}

/// Random strictly positive data `sine·(0.5 + U[0,1])`.
pub fn random_positive_data(mesh: &Mesh, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = mesh.sine_profile();
    (0..count)
        .map(|_| s.iter().map(|v| v * (0.5 + rng.gen::<f64>())).collect())
        .collect()
}

/// Empirical same-time Harnack constant: max over data pairs and recorded
/// `s ≥ s0` of `sup(u₂/u₁)/inf(u₂/u₁)`.
pub fn harnack_constant(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    data: &[Vec<f64>],
    s0: f64,
    horizon: f64,
) -> Result<f64> {
    if data.len() < 2 {
        return Err(GpeError::InsufficientData("need at least two data".into()));
    }
    if !(s0 > 0.0 && s0 < horizon) {
        return Err(GpeError::InvalidState(format!("need 0 < s0 < horizon, got s0 = {s0}")));
    }
    let n = step_count(0.0, horizon, scheme.dt)?;
    let every = (n / 400).max(1);
    let mut states = data
        .iter()
        .map(|d| NormalizedState::from_datum(d, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let mut props = (0..data.len())
        .map(|_| Propagator::new(field, mesh, scheme))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 1.0f64;
    for k in 1..=n {
        for (p, s) in props.iter_mut().zip(states.iter_mut()) {
            p.step(s)?;
        }
        let t = k as f64 * scheme.dt;
        if k % every == 0 && t >= s0 {
            for i in 0..states.len() {
                for j in i + 1..states.len() {
                    worst = worst.max(ratio_spread(&states[j].profile, &states[i].profile));
                }
            }
        }
    }
    Ok(worst)
}

/// `D(τ) = max_s |β(s+τ) − β(s)|` for a lag of `lag` samples.
fn max_increment(trace: &BetaTrace, lag: usize) -> f64 {
    trace
        .beta
        .iter()
        .zip(&trace.beta[lag..])
        .map(|(a, b)| (b - a).abs())
        .fold(0.0, f64::max)
}

/// Unit-window bound: `ln C′ = max_{s, τ∈(0,1]} |β(s+τ) − β(s)|`.
pub fn unit_window_log_bound(trace: &BetaTrace) -> Result<f64> {
    let k = (1.0 / trace.dt_record).round() as usize;
    if k < 1 || trace.len() <= k {
        return Err(GpeError::InsufficientData("trace shorter than one unit window".into()));
    }
    let b = &trace.beta;
    let mut best = 0.0f64;
    for i in 0..b.len() - 1 {
        let end = (i + k).min(b.len() - 1);
        for j in i + 1..=end {
            best = best.max((b[j] - b[i]).abs());
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub alpha: f64,
    pub h: f64,
    /// Whether `D(τ) ≤ 1.05·H τ^α` held on every sampled lag with the
    /// least-squares constant (otherwise `h` was raised to the envelope).
    pub within_slack: bool,
    pub ln_c_prime: f64,
}

/// Fits `max_s |β(s+τ) − β(s)| ≤ H τ^α` over `τ ∈ (0, 1]`.
pub fn holder_fit(trace: &BetaTrace) -> Result<HolderFit> {
    if trace.span() < 100.0 {
        return Err(GpeError::InsufficientData(format!(
            "Hölder fit needs >= 100 unit windows, trace spans {}",
            trace.span()
        )));
    }
    let kmax = (1.0 / trace.dt_record).round() as usize;
    if kmax < 2 {
        return Err(GpeError::InsufficientData("need at least two samples per unit time".into()));
    }
    let mut lags: Vec<usize> = Vec::new();
    let mut l = 1.0f64;
    while (l.round() as usize) <= kmax {
        let v = l.round() as usize;
        if lags.last() != Some(&v) {
            lags.push(v);
        }
        l *= 1.3;
    }
    if lags.last() != Some(&kmax) {
        lags.push(kmax);
    }
    let pts: Vec<(f64, f64)> = lags
        .iter()
        .map(|&k| (k as f64 * trace.dt_record, max_increment(trace, k)))
        .collect();
    let ln_c_prime = unit_window_log_bound(trace)?;
    let positive: Vec<&(f64, f64)> = pts.iter().filter(|p| p.1 > 0.0).collect();
    if positive.len() < 2 {
        return Ok(HolderFit {
            alpha: 1.0,
            h: 0.0,
            within_slack: true,
            ln_c_prime,
        });
    }
    let xs: Vec<f64> = positive.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = positive.iter().map(|p| p.1.ln()).collect();
    let fit = fit_line(&xs, &ys).ok_or_else(|| GpeError::InsufficientData("degenerate lags".into()))?;
    let alpha = fit.slope;
    let mut h = fit.intercept.exp();
    let within_slack = pts.iter().all(|(t, d)| *d <= 1.05 * h * t.powf(alpha));
    if !within_slack {
        h = pts.iter().map(|(t, d)| d / t.powf(alpha)).fold(0.0, f64::max);
    }
    Ok(HolderFit {
        alpha,
        h,
        within_slack,
        ln_c_prime,
    })
}

/// Exact discrete upper bound on `β(s+1) − β(s)` from the maximum principle:
/// each backward-Euler step grows the sup-norm by at most `1/(1 − dt·c⁺)`.
pub fn unit_growth_ceiling(field: &CoefficientField, dt: f64) -> f64 {
    let cp = field.bounds().c_max.max(0.0);
    -(1.0 - dt * cp).ln() / dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffield::{make_field, Domain1D, FieldSpec, SigmaSignal};
    use crate::discretize::build_mesh;

    fn unit() -> Domain1D {
        Domain1D::new(0.0, 1.0).unwrap()
    }

    fn heat() -> CoefficientField {
        make_field(&FieldSpec::constant(1.0, 0.0, 0.0), unit()).unwrap()
    }

    fn req(tag: IntervalTag, t_lo: f64, t_hi: f64, burn_in: f64, stride: usize) -> BundleRequest {
        BundleRequest {
            tag,
            t_lo,
            t_hi,
            burn_in,
            record_stride: stride,
            snapshot_every: Some(10),
        }
    }

    fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn heat_bundle_is_the_sine_eigenvector() {
        let mesh = build_mesh(unit(), 49).unwrap();
        // start from a non-eigen datum so the burn-in does real work
        let u0: Vec<f64> = mesh.nodes.iter().map(|x| x * (1.0 - x) * (1.0 + 2.0 * x)).collect();
        let tr = compute_bundle_from(&heat(), &mesh, StepScheme::backward_euler(1e-3), req(IntervalTag::R, 0.0, 1.0, 3.0, 10), &u0)
            .unwrap();
        let s = mesh.sine_profile();
        for (_, p) in &tr.profiles {
            assert!(sup_diff(p, &s) < 1e-8);
        }
        assert_eq!(tr.beta[tr.anchor_index()], 0.0);
        assert!(tr.meta.warnings.is_empty());
    }

    #[test]
    fn separable_bundle_profile_is_time_independent() {
        let mesh = build_mesh(unit(), 39).unwrap();
        let sig = SigmaSignal::Cosine {
            m: 1.0,
            amplitude: 1.0,
            tau: 1.0,
            phase: 0.0,
        };
        let f = make_field(&FieldSpec::separable(1.0, 0.0, sig), unit()).unwrap();
        let tr = compute_bundle(&f, &mesh, StepScheme::backward_euler(1e-3), req(IntervalTag::R, 0.0, 2.0, 3.0, 10)).unwrap();
        let s = mesh.sine_profile();
        for (_, p) in &tr.profiles {
            assert!(sup_diff(p, &s) < 1e-8);
        }
    }

    #[test]
    fn different_data_give_same_increments() {
        let mesh = build_mesh(unit(), 29).unwrap();
        let f = make_field(&FieldSpec::constant(1.2, 0.8, 1.0), unit()).unwrap();
        let s = StepScheme::backward_euler(2e-3);
        let data = random_positive_data(&mesh, 2, 9);
        let r = req(IntervalTag::R, 0.0, 3.0, 3.0, 5);
        let a = compute_bundle_from(&f, &mesh, s, r, &data[0]).unwrap();
        let b = compute_bundle_from(&f, &mesh, s, r, &data[1]).unwrap();
        assert!(sup_diff(&a.beta, &b.beta) < 1e-6);
    }

    #[test]
    fn bundle_idempotence() {
        let mesh = build_mesh(unit(), 29).unwrap();
        let f = make_field(&FieldSpec::constant(1.0, 0.5, 0.3), unit()).unwrap();
        let s = StepScheme::backward_euler(2e-3);
        let a = compute_bundle(&f, &mesh, s, req(IntervalTag::R, 0.0, 2.0, 4.0, 5)).unwrap();
        let seed = a.profiles[0].1.clone();
        let b = compute_bundle_from(&f, &mesh, s, req(IntervalTag::R, 0.0, 2.0, 4.0, 5), &seed).unwrap();
        assert!(sup_diff(&a.beta, &b.beta) < 1e-9);
    }

    #[test]
    fn reflected_traces_mirror() {
        let mesh = build_mesh(unit(), 19).unwrap();
        let f = make_field(&FieldSpec::separable(1.0, 0.0, SigmaSignal::LogOscillatory { amplitude: 1.0 }), unit()).unwrap();
        let s = StepScheme::backward_euler(2e-3);
        let set = compute_trace_set(&f, &mesh, s, 20.0, 20.0, 3.0, 5).unwrap();
        // the log-oscillatory signal is even: β(−t) ≈ −β(t) after burn-in
        for &t in &[5.0, 10.0, 19.0] {
            let bp = set.plus.beta[set.plus.index_of(t).unwrap()];
            let bm = set.minus.beta[set.minus.index_of(-t).unwrap()];
            assert!((bp + bm).abs() < 0.05 * t, "t={t}: {bp} vs {bm}");
        }
        assert_eq!(set.minus.interval_tag, IntervalTag::RMinus);
        assert_eq!(set.minus.beta[set.minus.anchor_index()], 0.0);
        assert!((set.minus.t_end()).abs() < 1e-12);
    }

    #[test]
    fn separation_rate_of_heat_matches_gap() {
        let mesh = build_mesh(unit(), 49).unwrap();
        let s = mesh.sine_profile();
        let pi = std::f64::consts::PI;
        let b: Vec<f64> = mesh
            .nodes
            .iter()
            .zip(&s)
            .map(|(x, v)| v + 0.25 * (2.0 * pi * x).sin())
            .collect();
        let dt = 1e-3;
        let est = separation_rate(&heat(), &mesh, StepScheme::backward_euler(dt), &s, &b, 0.6).unwrap();
        let lam = |k: f64| 2.0 / mesh.dx.powi(2) * (1.0 - (k * pi * mesh.dx).cos());
        let gap = ((1.0 + dt * lam(2.0)) / (1.0 + dt * lam(1.0))).ln() / dt;
        assert!((est.gamma - gap).abs() < 0.01 * gap, "{} vs {gap}", est.gamma);
        assert!(!est.lower_bound_only);
        assert!(separation_rate(&heat(), &mesh, StepScheme::backward_euler(dt), &s, &s, 0.6).is_err());
    }

    #[test]
    fn harnack_examples() {
        let mesh = build_mesh(unit(), 29).unwrap();
        let s = StepScheme::backward_euler(1e-3);
        let same = vec![mesh.sine_profile(); 3];
        assert_eq!(harnack_constant(&heat(), &mesh, s, &same, 1.0, 2.0).unwrap(), 1.0);
        let data = random_positive_data(&mesh, 4, 3);
        let c = harnack_constant(&heat(), &mesh, s, &data, 1.0, 2.0).unwrap();
        assert!((1.0..=1.0 + 1e-6).contains(&c));
    }

    #[test]
    fn holder_fit_on_linear_trace() {
        let beta: Vec<f64> = (0..20001).map(|k| -2.5 * k as f64 * 0.01).collect();
        let tr = BetaTrace::from_samples(IntervalTag::RPlus, 0.0, 0.01, beta, TraceMeta::synthetic("lin")).unwrap();
        let h = holder_fit(&tr).unwrap();
        assert!((h.alpha - 1.0).abs() < 1e-9);
        assert!((h.h - 2.5).abs() < 1e-8);
        assert!((h.ln_c_prime - 2.5).abs() < 1e-9);
        let short = tr.slice(0.0, 50.0, IntervalTag::RPlus).unwrap();
        assert!(holder_fit(&short).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let beta: Vec<f64> = (0..11).map(|k| (k as f64 * 0.3).sin()).collect();
        let tr = BetaTrace::from_samples(IntervalTag::R, -0.5, 0.1, beta, TraceMeta::synthetic("csv")).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,beta\n"));
        let back = BetaTrace::read_csv(&text, IntervalTag::R, TraceMeta::synthetic("csv")).unwrap();
        for (a, b) in tr.beta.iter().zip(&back.beta) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
