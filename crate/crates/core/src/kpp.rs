//! Semilinear KPP problems `∂t u − a ∂xx u − b ∂x u = f(t, x, u)` with
//! `f = c s − n s^p`, and the linear maximum-principle test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffield::CoefficientField;
use crate::discretize::{Assembler, Mesh, TridiagonalOperator};
use crate::error::{GpeError, Result};
use crate::floquet::{compute_bundle, BundleRequest, IntervalTag};
use crate::growthrate::{global_growth_rates, Estimate, GrowthOptions};
use crate::stats::fit_line;
use crate::stepper::{evolve_normalized, step_count, StepScheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearForm {
    /// `c s − n s²`
    LogisticQuadratic,
    /// `c s − n s³`
    LogisticCubic,
    /// `c s` (no saturation; the non-concave control)
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    pub form: NonlinearForm,
    /// Constant absorption coefficient `n`.
    #[serde(default = "one")]
    pub n: f64,
}

fn one() -> f64 {
    1.0
}

impl NonlinearitySpec {
    pub fn quadratic(n: f64) -> Self {
        Self {
            form: NonlinearForm::LogisticQuadratic,
            n,
        }
    }

    pub fn cubic(n: f64) -> Self {
        Self {
            form: NonlinearForm::LogisticCubic,
            n,
        }
    }

    pub fn linear() -> Self {
        Self {
            form: NonlinearForm::Linear,
            n: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.form {
            NonlinearForm::Linear => Ok(()),
            _ if self.n > 0.0 && self.n.is_finite() => Ok(()),
            _ => Err(GpeError::InvalidState(format!("absorption n must be > 0, got {}", self.n))),
        }
    }

    fn power(&self) -> i32 {
        match self.form {
            NonlinearForm::LogisticCubic => 3,
            _ => 2,
        }
    }

    fn absorbs(&self) -> bool {
        self.form != NonlinearForm::Linear
    }

    /// `f(t, x, s)` for the given `c(t, x)`.
    pub fn eval(&self, c: f64, s: f64) -> f64 {
        if self.absorbs() {
            c * s - self.n * s.powi(self.power())
        } else {
            c * s
        }
    }

    /// `f(s)/s − f(s′)/s′`; positive for `s < s′` exactly when the form is concave in this sense.
    pub fn concavity_gap(&self, s: f64, s2: f64) -> f64 {
        if !self.absorbs() {
            return 0.0;
        }
        let p = self.power() - 1;
        self.n * (s2.powi(p) - s.powi(p))
    }

    /// Saturation level `M` with `f ≤ 0` for `s ≥ M`: `c⁺/n` or its square root.
    pub fn saturation(&self, c_max: f64) -> f64 {
        if !self.absorbs() {
            return f64::INFINITY;
        }
        let r = c_max.max(0.0) / self.n;
        match self.form {
            NonlinearForm::LogisticCubic => r.sqrt(),
            _ => r,
        }
    }
}

/// Sampled semilinear trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KppTrajectory {
    pub times: Vec<f64>,
    pub sup: Vec<f64>,
    /// Minimum over the probe nodes.
    pub probe_inf: Vec<f64>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_profile: Vec<f64>,
    /// `max(M, ‖u0‖∞)`.
    pub bound: f64,
    pub min_seen: f64,
    pub max_seen: f64,
}

/// Nodes in the middle 60% of the interval.
pub fn probe_nodes(mesh: &Mesh) -> Vec<usize> {
    let (lo, hi) = (mesh.domain.x_lo, mesh.domain.x_hi);
    let l = hi - lo;
    (0..mesh.n_interior)
        .filter(|&i| mesh.nodes[i] >= lo + 0.2 * l - 1e-12 && mesh.nodes[i] <= hi - 0.2 * l + 1e-12)
        .collect()
}

/// One-step semilinear solver. The update
/// `(I + dt(L_diff + K)) u⁺ = u + dt(f(u) + K u)` uses a stabilizer `K` that
/// makes `s ↦ s + dt(f(s) + K s)` nondecreasing on `[0, B]`, so positivity,
/// the bound `B` and comparison hold exactly; fixed points are exact discrete
/// steady states.
pub struct KppStepper<'a> {
    fspec: NonlinearitySpec,
    dt: f64,
    k: f64,
    asm: Assembler<'a>,
    op: TridiagonalOperator,
    rhs: Vec<f64>,
    extra: Vec<f64>,
    out: Vec<f64>,
    work: Vec<f64>,
}

impl<'a> KppStepper<'a> {
    pub fn new(field: &'a CoefficientField, mesh: &'a Mesh, fspec: NonlinearitySpec, dt: f64, bound: f64) -> Result<Self> {
        fspec.validate()?;
        let b = field.bounds();
        let value = dt * b.c_max.max(0.0);
        if !(dt > 0.0) || value >= 1.0 {
            return Err(GpeError::Monotonicity { value });
        }
        let k = if fspec.absorbs() {
            let p = fspec.power() as f64;
            (fspec.n * p * bound.powi(fspec.power() - 1) - b.c_min).max(0.0)
        } else {
            (-b.c_min).max(0.0)
        };
        let n = mesh.n_interior;
        Ok(Self {
            fspec,
            dt,
            k,
            asm: Assembler::new(field, mesh),
            op: TridiagonalOperator::zeros(n),
            rhs: vec![0.0; n],
            extra: vec![0.0; n],
            out: vec![0.0; n],
            work: Vec::with_capacity(n),
        })
    }

    pub fn stabilizer(&self) -> f64 {
        self.k
    }

    /// Advances `u` from `t` to `t + dt` in place.
    pub fn step(&mut self, t: f64, u: &mut [f64]) -> Result<()> {
        let dt = self.dt;
        self.asm.assemble_into(t + dt, &mut self.op)?;
        let c = self.asm.last_c();
        for i in 0..u.len() {
            // L includes −c on the diagonal; dt·c cancels it to leave L_diff
            self.extra[i] = dt * (c[i] + self.k);
            self.rhs[i] = u[i] + dt * (self.fspec.eval(c[i], u[i]) + self.k * u[i]);
        }
        self.op.solve_shifted(dt, &self.extra, &self.rhs, &mut self.out, &mut self.work)?;
        u.copy_from_slice(&self.out);
        Ok(())
    }
}

fn sup(u: &[f64]) -> f64 {
    u.iter().cloned().fold(0.0, f64::max)
}

fn bound_for(field: &CoefficientField, fspec: &NonlinearitySpec, u0: &[f64]) -> f64 {
    fspec.saturation(field.bounds().c_max).max(sup(u0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KppRecord {
    pub record_every: usize,
    pub snapshot_every: Option<usize>,
}

impl Default for KppRecord {
    fn default() -> Self {
        Self {
            record_every: 100,
            snapshot_every: None,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn evolve_kpp(
    field: &CoefficientField,
    fspec: &NonlinearitySpec,
    u0: &[f64],
    t0: f64,
    t1: f64,
    mesh: &Mesh,
    scheme: StepScheme,
    rec: KppRecord,
) -> Result<KppTrajectory> {
    if u0.len() != mesh.n_interior {
        return Err(GpeError::LengthMismatch {
            expected: mesh.n_interior,
            got: u0.len(),
        });
    }
    if u0.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(GpeError::InvalidState("initial datum must be finite and nonnegative".into()));
    }
    let n_steps = step_count(t0, t1, scheme.dt)?;
    let bound = bound_for(field, fspec, u0);
    let mut stepper = KppStepper::new(field, mesh, *fspec, scheme.dt, if bound.is_finite() { bound } else { sup(u0) })?;
    let probe = probe_nodes(mesh);
    let every = rec.record_every.max(1);
    let mut u = u0.to_vec();
    let mut tr = KppTrajectory {
        times: Vec::new(),
        sup: Vec::new(),
        probe_inf: Vec::new(),
        snapshots: Vec::new(),
        final_profile: Vec::new(),
        bound,
        min_seen: u.iter().cloned().fold(f64::INFINITY, f64::min),
        max_seen: sup(&u),
    };
    let record = |tr: &mut KppTrajectory, t: f64, u: &[f64], k: usize| {
        tr.times.push(t);
        tr.sup.push(sup(u));
        tr.probe_inf.push(probe.iter().map(|&i| u[i]).fold(f64::INFINITY, f64::min));
        if let Some(s) = rec.snapshot_every {
            if (k / every).is_multiple_of(s.max(1)) {
                tr.snapshots.push((t, u.to_vec()));
            }
        }
    };
    record(&mut tr, t0, &u, 0);
    for k in 1..=n_steps {
        let t = t0 + (k - 1) as f64 * scheme.dt;
        stepper.step(t, &mut u)?;
        for &v in &u {
            tr.min_seen = tr.min_seen.min(v);
            tr.max_seen = tr.max_seen.max(v);
        }
        if k % every == 0 || k == n_steps {
            record(&mut tr, t0 + k as f64 * scheme.dt, &u, k);
        }
    }
    tr.final_profile = u;
    Ok(tr)
}

/// `‖L_h(t) u + c u − f(u)‖∞` (`L_h` carries `−c`): zero at a discrete steady state.
pub fn steady_state_residual(field: &CoefficientField, fspec: &NonlinearitySpec, mesh: &Mesh, t: f64, u: &[f64]) -> Result<f64> {
    let mut asm = Assembler::new(field, mesh);
    let mut op = TridiagonalOperator::zeros(mesh.n_interior);
    asm.assemble_into(t, &mut op)?;
    let lu = op.apply(u)?;
    let c = asm.last_c();
    Ok((0..u.len())
        .map(|i| (lu[i] + c[i] * u[i] - fspec.eval(c[i], u[i])).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Persistent,
    Extinct,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceVerdict {
    pub verdict: Verdict,
    pub floor: f64,
    pub final_sup: f64,
    /// Fitted exponential rate of `sup u` over the last 20% of the horizon.
    pub decay_rate: f64,
    pub mu_bp_plus: f64,
    pub margin: f64,
    pub consistency: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictOptions {
    pub floor_tol: f64,
    pub ext_tol: f64,
    pub margin: f64,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        Self {
            floor_tol: 1e-3,
            ext_tol: 1e-6,
            margin: 0.05,
        }
    }
}

/// `μ_bp(ℝ⁺)` of the linearized problem (`c = f_s′(·, ·, 0)`, i.e. the field itself).
pub fn linearized_mu_bp_plus(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    horizon: f64,
    burn_in: f64,
    record_stride: usize,
) -> Result<Estimate> {
    let tr = compute_bundle(
        field,
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
    let opts = GrowthOptions::default();
    let t_list = crate::growthrate::default_t_list(tr.span(), tr.dt_record);
    Ok(global_growth_rates(&tr, &t_list, &opts)?.0.negated())
}

#[allow(clippy::too_many_arguments)]
pub fn persistence_verdict(
    field: &CoefficientField,
    fspec: &NonlinearitySpec,
    mesh: &Mesh,
    scheme: StepScheme,
    u0: &[f64],
    horizon: f64,
    mu_bp_plus: f64,
    opts: VerdictOptions,
) -> Result<PersistenceVerdict> {
    if sup(u0) <= 0.0 {
        return Err(GpeError::InvalidState("initial datum must not vanish".into()));
    }
    let n_steps = step_count(0.0, horizon, scheme.dt)?;
    let tr = evolve_kpp(
        field,
        fspec,
        u0,
        0.0,
        horizon,
        mesh,
        scheme,
        KppRecord {
            record_every: (n_steps / 1000).max(1),
            snapshot_every: None,
        },
    )?;
    let t_tail = 0.8 * horizon;
    let idx: Vec<usize> = (0..tr.times.len()).filter(|&k| tr.times[k] >= t_tail).collect();
    let floor = idx.iter().map(|&k| tr.probe_inf[k]).fold(f64::INFINITY, f64::min);
    let pts: Vec<(f64, f64)> = idx.iter().filter(|&&k| tr.sup[k] > 0.0).map(|&k| (tr.times[k], tr.sup[k].ln())).collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let decay_rate = fit_line(&xs, &ys)
        .ok_or_else(|| GpeError::InsufficientData("horizon too short for a rate fit".into()))?
        .slope;
    let final_sup = *tr.sup.last().unwrap();
    let mut verdict = if floor > opts.floor_tol {
        Verdict::Persistent
    } else if final_sup < opts.ext_tol && decay_rate < 0.0 {
        Verdict::Extinct
    } else {
        Verdict::Inconclusive
    };
    if mu_bp_plus.abs() <= opts.margin {
        verdict = Verdict::Inconclusive;
    }
    let consistency = ((verdict == Verdict::Persistent) == (mu_bp_plus < -opts.margin))
        || (verdict == Verdict::Inconclusive && mu_bp_plus.abs() <= opts.margin);
    Ok(PersistenceVerdict {
        verdict,
        floor,
        final_sup,
        decay_rate,
        mu_bp_plus,
        margin: opts.margin,
        consistency,
    })
}

/// Window profiles of one pullback solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowProfiles {
    pub start: f64,
    pub profiles: Vec<(f64, Vec<f64>)>,
}

fn evolve_to_window(
    field: &CoefficientField,
    fspec: &NonlinearitySpec,
    mesh: &Mesh,
    scheme: StepScheme,
    datum: &[f64],
    start: f64,
    window: (f64, f64),
    bound: f64,
    record_every: usize,
) -> Result<WindowProfiles> {
    let mut stepper = KppStepper::new(field, mesh, *fspec, scheme.dt, bound)?;
    let n_pre = step_count(start, window.0, scheme.dt)?;
    let n_win = step_count(window.0, window.1, scheme.dt)?;
    let mut u = datum.to_vec();
    for k in 0..n_pre {
        stepper.step(start + k as f64 * scheme.dt, &mut u)?;
    }
    let mut profiles = vec![(window.0, u.clone())];
    for k in 1..=n_win {
        stepper.step(window.0 + (k - 1) as f64 * scheme.dt, &mut u)?;
        if k % record_every.max(1) == 0 || k == n_win {
            profiles.push((window.0 + k as f64 * scheme.dt, u.clone()));
        }
    }
    Ok(WindowProfiles {
        start,
        profiles,
    })
}

fn window_gap(a: &WindowProfiles, b: &WindowProfiles) -> f64 {
    a.profiles
        .iter()
        .zip(&b.profiles)
        .flat_map(|(p, q)| p.1.iter().zip(&q.1).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackResult {
    pub n_list: Vec<f64>,
    pub windows: Vec<WindowProfiles>,
    /// `(n, sup_window |u_{n'} − u_n|)` for consecutive entries.
    pub gaps: Vec<(f64, f64)>,
    /// Largest `u_{n'} − u_n` (should be ≤ 0).
    pub monotone_violation: f64,
    pub floor: f64,
    pub final_sup: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackOptions {
    pub window: (f64, f64),
    pub record_every: usize,
}

/// Pullback solutions from the flat datum `M` at `t = −n`.
pub fn entire_solution_pullback(
    field: &CoefficientField,
    fspec: &NonlinearitySpec,
    mesh: &Mesh,
    scheme: StepScheme,
    n_list: &[f64],
    opts: PullbackOptions,
) -> Result<PullbackResult> {
    if n_list.len() < 2 {
        return Err(GpeError::InsufficientData("n list too short for gap decay".into()));
    }
    if !fspec.absorbs() {
        return Err(GpeError::InvalidState("pullback from M needs a saturating nonlinearity".into()));
    }
    let bound = fspec.saturation(field.bounds().c_max);
    let datum = vec![bound; mesh.n_interior];
    let windows = n_list
        .par_iter()
        .map(|&n| evolve_to_window(field, fspec, mesh, scheme, &datum, -n, opts.window, bound, opts.record_every))
        .collect::<Result<Vec<_>>>()?;
    let mut gaps = Vec::new();
    let mut violation = f64::NEG_INFINITY;
    for w in windows.windows(2) {
        gaps.push((-w[1].start, window_gap(&w[0], &w[1])));
        for (p, q) in w[0].profiles.iter().zip(&w[1].profiles) {
            for (a, b) in p.1.iter().zip(&q.1) {
                violation = violation.max(b - a);
            }
        }
    }
    let probe = probe_nodes(mesh);
    let last = windows.last().unwrap();
    let floor = last
        .profiles
        .iter()
        .flat_map(|(_, p)| probe.iter().map(move |&i| p[i]))
        .fold(f64::INFINITY, f64::min);
    let final_sup = last.profiles.iter().map(|(_, p)| sup(p)).fold(0.0, f64::max);
    Ok(PullbackResult {
        n_list: n_list.to_vec(),
        windows,
        gaps,
        monotone_violation: violation,
        floor,
        final_sup,
        bound,
    })
}

/// `(n, sup_window |u_n^M − u_n^{second}|)` for pullbacks from `M` and from
/// `second_datum`.
#[allow(clippy::too_many_arguments)]
pub fn ancient_uniqueness_gap(
    field: &CoefficientField,
    fspec: &NonlinearitySpec,
    mesh: &Mesh,
    scheme: StepScheme,
    n_list: &[f64],
    second_datum: &[f64],
    opts: PullbackOptions,
) -> Result<Vec<(f64, f64)>> {
    let sat = fspec.saturation(field.bounds().c_max);
    let bound = if sat.is_finite() { sat } else { sup(second_datum) };
    if second_datum.len() != mesh.n_interior {
        return Err(GpeError::LengthMismatch {
            expected: mesh.n_interior,
            got: second_datum.len(),
        });
    }
    if second_datum.iter().any(|&v| !(v > 0.0) || v > bound * (1.0 + 1e-12)) {
        return Err(GpeError::InvalidState(format!("second datum must lie in (0, {bound}]")));
    }
    let first = vec![bound; mesh.n_interior];
    n_list
        .par_iter()
        .map(|&n| {
            let a = evolve_to_window(field, fspec, mesh, scheme, &first, -n, opts.window, bound, opts.record_every)?;
            let b = evolve_to_window(field, fspec, mesh, scheme, second_datum, -n, opts.window, bound, opts.record_every)?;
            Ok((n, window_gap(&a, &b)))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpOutcome {
    Decay,
    Growth,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpDecay {
    /// `(T, ln sup_x u(0, x))`.
    pub rows: Vec<(f64, f64)>,
    pub fitted_rate: f64,
    pub outcome: MpOutcome,
}

/// Linear problem from `t = −T` with datum `u0`, observed at `t = 0`.
pub fn mp_decay_test(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    u0: &[f64],
    t_list: &[f64],
    neutral_band: f64,
) -> Result<MpDecay> {
    if t_list.len() < 2 {
        return Err(GpeError::InsufficientData("need two horizons for a rate".into()));
    }
    let rows = t_list
        .par_iter()
        .map(|&t| {
            let n = step_count(-t, 0.0, scheme.dt)?;
            let seg = evolve_normalized(field, mesh, scheme, u0, -t, 0.0, n)?;
            Ok((t, *seg.beta.last().unwrap()))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fitted_rate = fit_line(&xs, &ys).ok_or_else(|| GpeError::InsufficientData("degenerate horizons".into()))?.slope;
    let outcome = if fitted_rate < -neutral_band {
        MpOutcome::Decay
    } else if fitted_rate > neutral_band {
        MpOutcome::Growth
    } else {
        MpOutcome::Inconclusive
    };
    Ok(MpDecay {
        rows,
        fitted_rate,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffield::{make_field, Domain1D, FieldSpec};
    use crate::discretize::build_mesh;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit() -> Domain1D {
        Domain1D::new(0.0, 1.0).unwrap()
    }

    fn constant_c(c: f64) -> CoefficientField {
        make_field(&FieldSpec::constant(1.0, 0.0, c), unit()).unwrap()
    }

    #[test]
    fn concavity_and_saturation() {
        for f in [NonlinearitySpec::quadratic(2.0), NonlinearitySpec::cubic(0.5)] {
            let m = f.saturation(3.0);
            assert!(f.eval(3.0, m) <= 1e-12);
            assert!(f.eval(3.0, 1.5 * m) < 0.0);
            assert_eq!(f.eval(3.0, 0.0), 0.0);
            assert!(f.concavity_gap(0.3, 0.7) > 0.0);
            // f(s)/s − f(s′)/s′ computed directly
            let direct = f.eval(3.0, 0.3) / 0.3 - f.eval(3.0, 0.7) / 0.7;
            assert!((direct - f.concavity_gap(0.3, 0.7)).abs() < 1e-12);
        }
        assert!(NonlinearitySpec::quadratic(0.0).validate().is_err());
    }

    #[test]
    fn zero_stays_zero() {
        let mesh = build_mesh(unit(), 29).unwrap();
        let tr = evolve_kpp(
            &constant_c(10.0),
            &NonlinearitySpec::quadratic(1.0),
            &vec![0.0; 29],
            0.0,
            1.0,
            &mesh,
            StepScheme::backward_euler(1e-3),
            KppRecord::default(),
        )
        .unwrap();
        assert!(tr.final_profile.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn converges_to_steady_state() {
        let mesh = build_mesh(unit(), 49).unwrap();
        let c = PI * PI + 0.5;
        let field = constant_c(c);
        let f = NonlinearitySpec::quadratic(1.0);
        let tr = evolve_kpp(&field, &f, &mesh.sine_profile(), 0.0, 80.0, &mesh, StepScheme::backward_euler(1e-2), KppRecord::default())
            .unwrap();
        let s = sup(&tr.final_profile);
        assert!(s > 0.0 && s < c);
        let r = steady_state_residual(&field, &f, &mesh, 80.0, &tr.final_profile).unwrap();
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn large_datum_decreases_to_bound() {
        let mesh = build_mesh(unit(), 29).unwrap();
        let c = 12.0;
        let f = NonlinearitySpec::quadratic(1.0);
        let m = f.saturation(c);
        let tr = evolve_kpp(&constant_c(c), &f, &vec![2.0 * m; 29], 0.0, 2.0, &mesh, StepScheme::backward_euler(1e-3), KppRecord {
            record_every: 10,
            snapshot_every: None,
        })
        .unwrap();
        assert!(tr.sup.windows(2).all(|w| w[1] <= w[0] + 1e-12 || w[0] <= m));
        assert!(*tr.sup.last().unwrap() <= m);
        assert!(tr.max_seen <= 2.0 * m && tr.min_seen >= 0.0);
    }

    #[test]
    fn mp_rates_on_frozen_fields() {
        let mesh = build_mesh(unit(), 49).unwrap();
        let s = StepScheme::backward_euler(2e-3);
        let u0 = mesh.sine_profile();
        let d = mp_decay_test(&constant_c(PI * PI - 0.5), &mesh, s, &u0, &[5.0, 10.0, 20.0], 0.05).unwrap();
        assert_eq!(d.outcome, MpOutcome::Decay);
        assert!((d.fitted_rate + 0.5).abs() < 0.05);
        let g = mp_decay_test(&constant_c(PI * PI + 0.5), &mesh, s, &u0, &[5.0, 10.0, 20.0], 0.05).unwrap();
        assert_eq!(g.outcome, MpOutcome::Growth);
        let z = mp_decay_test(&constant_c(PI * PI), &mesh, s, &u0, &[5.0, 10.0, 20.0], 0.05).unwrap();
        assert_eq!(z.outcome, MpOutcome::Inconclusive);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn comparison_positivity_and_bound(seed in 0u64..10_000, cubic in any::<bool>(), c in 0.0f64..30.0) {
            let mesh = build_mesh(unit(), 19).unwrap();
            let f = if cubic { NonlinearitySpec::cubic(1.0) } else { NonlinearitySpec::quadratic(1.0) };
            let field = constant_c(c);
            let data = crate::floquet::random_positive_data(&mesh, 2, seed);
            let lo: Vec<f64> = data[0].iter().zip(&data[1]).map(|(a, b)| a.min(*b)).collect();
            let hi: Vec<f64> = data[0].iter().zip(&data[1]).map(|(a, b)| 3.0 * a.max(*b)).collect();
            let s = StepScheme::backward_euler(1e-2);
            let rec = KppRecord { record_every: 1, snapshot_every: Some(1) };
            let a = evolve_kpp(&field, &f, &lo, 0.0, 1.0, &mesh, s, rec).unwrap();
            let b = evolve_kpp(&field, &f, &hi, 0.0, 1.0, &mesh, s, rec).unwrap();
            for ((_, p), (_, q)) in a.snapshots.iter().zip(&b.snapshots) {
                for (x, y) in p.iter().zip(q) {
                    prop_assert!(*x <= *y + 1e-13);
                }
            }
            prop_assert!(a.min_seen >= 0.0 && b.min_seen >= 0.0);
            prop_assert!(b.max_seen <= b.bound * (1.0 + 1e-12));
        }
    }
}
