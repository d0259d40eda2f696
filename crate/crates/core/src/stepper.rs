//! Implicit θ-scheme for `Pu = 0` with per-step sup-norm renormalization.
//!
//! The state keeps a profile with `max = 1` and the accumulated log of the
//! stripped norms, so `β(t) = ln‖u(t)‖∞` is available over arbitrarily long
//! horizons without ever re-exponentiating.

use serde::{Deserialize, Serialize};

use crate::coeffield::CoefficientField;
use crate::discretize::{Assembler, Mesh, TridiagonalOperator};
use crate::error::{GpeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepScheme {
    /// 1 (backward Euler) or 0.5 (Crank–Nicolson).
    pub theta: f64,
    pub dt: f64,
    pub positivity_guard: bool,
}

impl StepScheme {
    pub fn backward_euler(dt: f64) -> Self {
        Self {
            theta: 1.0,
            dt,
            positivity_guard: true,
        }
    }

    pub fn crank_nicolson(dt: f64) -> Self {
        Self {
            theta: 0.5,
            dt,
            positivity_guard: true,
        }
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(GpeError::InvalidState(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.theta != 1.0 && self.theta != 0.5 {
            return Err(GpeError::InvalidState(format!(
                "theta must be 1 or 0.5, got {}",
                self.theta
            )));
        }
        if self.theta == 0.5 && !self.positivity_guard {
            return Err(GpeError::InvalidState(
                "Crank-Nicolson requires the positivity guard".into(),
            ));
        }
        Ok(())
    }

    /// Monotonicity condition `dt·max(c⁺) < 1` for the implicit matrix.
    pub fn check_monotone(&self, field: &CoefficientField) -> Result<()> {
        let value = self.dt * self.theta * field.bounds().c_max.max(0.0);
        if value >= 1.0 {
            return Err(GpeError::Monotonicity { value });
        }
        Ok(())
    }
}

/// Max-normalized profile plus accumulated log-mass.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedState {
    pub profile: Vec<f64>,
    pub log_mass: f64,
    pub t: f64,
}

impl NormalizedState {
    /// Normalizes a nonnegative, nonzero datum; `log_mass = ln‖u0‖∞`.
    pub fn from_datum(u0: &[f64], t: f64) -> Result<Self> {
        if u0.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GpeError::InvalidState("datum must be finite and nonnegative".into()));
        }
        let m = u0.iter().cloned().fold(0.0, f64::max);
        if m <= 0.0 {
            return Err(GpeError::InvalidState("datum is identically zero".into()));
        }
        Ok(Self {
            profile: u0.iter().map(|v| v / m).collect(),
            log_mass: m.ln(),
            t,
        })
    }

    fn check(&self) -> Result<()> {
        let m = self.profile.iter().cloned().fold(0.0, f64::max);
        if !(m > 0.0) || self.profile.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GpeError::InvalidState(
                "profile must be nonnegative, finite and nonzero".into(),
            ));
        }
        Ok(())
    }
}

/// Reusable propagator for one field/mesh/scheme triple.
pub struct Propagator<'a> {
    scheme: StepScheme,
    asm: Assembler<'a>,
    op: TridiagonalOperator,
    rhs: Vec<f64>,
    out: Vec<f64>,
    work: Vec<f64>,
}

impl<'a> Propagator<'a> {
    pub fn new(field: &'a CoefficientField, mesh: &'a Mesh, scheme: StepScheme) -> Result<Self> {
        scheme.validate()?;
        if scheme.theta == 1.0 {
            scheme.check_monotone(field)?;
        }
        let n = mesh.n_interior;
        Ok(Self {
            scheme,
            asm: Assembler::new(field, mesh),
            op: TridiagonalOperator::zeros(n),
            rhs: vec![0.0; n],
            out: vec![0.0; n],
            work: Vec::with_capacity(n),
        })
    }

    pub fn scheme(&self) -> StepScheme {
        self.scheme
    }

    /// Advances the raw (unnormalized) vector `u` from `t` to `t + dt`,
    /// optionally adding a nonnegative implicit absorption `dt·extra` to the
    /// diagonal.
    pub fn advance_raw(&mut self, t: f64, u: &mut [f64], extra: &[f64]) -> Result<()> {
        let dt = self.scheme.dt;
        if self.scheme.theta == 1.0 {
            self.asm.assemble_into(t + dt, &mut self.op)?;
            self.op.solve_shifted(dt, extra, u, &mut self.out, &mut self.work)?;
        } else {
            self.asm.assemble_into(t + 0.5 * dt, &mut self.op)?;
            self.op.apply_into(u, &mut self.rhs)?;
            for (r, &v) in self.rhs.iter_mut().zip(u.iter()) {
                *r = v - 0.5 * dt * *r;
            }
            self.op.solve_shifted(0.5 * dt, extra, &self.rhs, &mut self.out, &mut self.work)?;
            if self.scheme.positivity_guard {
                let min = self.out.iter().cloned().fold(f64::INFINITY, f64::min);
                if min < 0.0 {
                    return Err(GpeError::PositivityLost { t: t + dt, min });
                }
            }
        }
        u.copy_from_slice(&self.out);
        Ok(())
    }

    /// One renormalized step.
    pub fn step(&mut self, state: &mut NormalizedState) -> Result<()> {
        let t = state.t;
        self.advance_raw(t, &mut state.profile, &[])?;
        let m = state.profile.iter().cloned().fold(0.0, f64::max);
        if !(m > 0.0 && m.is_finite()) {
            return Err(GpeError::InvalidState(format!("degenerate profile at t = {t}")));
        }
        for v in state.profile.iter_mut() {
            *v /= m;
        }
        state.log_mass += m.ln();
        state.t = t + self.scheme.dt;
        Ok(())
    }

    /// Zero-order coefficient at the nodes from the last step.
    pub fn last_c(&self) -> &[f64] {
        self.asm.last_c()
    }
}

/// Single renormalized step (convenience wrapper around [`Propagator`]).
pub fn step(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    state: &NormalizedState,
) -> Result<NormalizedState> {
    state.check()?;
    if state.profile.len() != mesh.n_interior {
        return Err(GpeError::LengthMismatch {
            expected: mesh.n_interior,
            got: state.profile.len(),
        });
    }
    let mut p = Propagator::new(field, mesh, scheme)?;
    let mut next = state.clone();
    p.step(&mut next)?;
    Ok(next)
}

/// Sampled log-norms `β(t0 + k·stride·dt)` of one evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSegment {
    pub t0: f64,
    pub dt_record: f64,
    /// Absolute `ln‖u‖∞`, starting from `ln‖u0‖∞`.
    pub beta: Vec<f64>,
    /// `(t, normalized profile)` snapshots.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_state: NormalizedState,
}

impl BetaSegment {
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt_record
    }
}

/// Number of steps of size `dt` covering `[t0, t1]`; the span must be an
/// integer multiple of `dt`.
pub fn step_count(t0: f64, t1: f64, dt: f64) -> Result<usize> {
    if !(t1 > t0) {
        return Err(GpeError::InvalidState(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    let n = (t1 - t0) / dt;
    let r = n.round();
    if (n - r).abs() > 1e-6 * n.max(1.0) || r < 1.0 {
        return Err(GpeError::InvalidState(format!(
            "span {} is not a multiple of dt = {dt}",
            t1 - t0
        )));
    }
    Ok(r as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    pub record_stride: usize,
    /// Keep a profile snapshot every this many records.
    pub snapshot_every: Option<usize>,
}

impl EvolveOptions {
    pub fn stride(record_stride: usize) -> Self {
        Self {
            record_stride,
            snapshot_every: None,
        }
    }
}

pub fn evolve_normalized(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    u0: &[f64],
    t0: f64,
    t1: f64,
    record_stride: usize,
) -> Result<BetaSegment> {
    evolve_normalized_with(field, mesh, scheme, u0, t0, t1, EvolveOptions::stride(record_stride))
}

pub fn evolve_normalized_with(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    u0: &[f64],
    t0: f64,
    t1: f64,
    opts: EvolveOptions,
) -> Result<BetaSegment> {
    if u0.len() != mesh.n_interior {
        return Err(GpeError::LengthMismatch {
            expected: mesh.n_interior,
            got: u0.len(),
        });
    }
    let stride = opts.record_stride.max(1);
    let n_steps = step_count(t0, t1, scheme.dt)?;
    let mut state = NormalizedState::from_datum(u0, t0)?;
    let mut prop = Propagator::new(field, mesh, scheme)?;
    let mut beta = Vec::with_capacity(n_steps / stride + 1);
    let mut snapshots = Vec::new();
    beta.push(state.log_mass);
    if opts.snapshot_every.is_some() {
        snapshots.push((t0, state.profile.clone()));
    }
    for k in 1..=n_steps {
        prop.step(&mut state)?;
        // t from the step index, not by accumulation
        state.t = t0 + k as f64 * scheme.dt;
        if k % stride == 0 {
            beta.push(state.log_mass);
            if let Some(every) = opts.snapshot_every {
                if (beta.len() - 1) % every.max(1) == 0 {
                    snapshots.push((state.t, state.profile.clone()));
                }
            }
        }
    }
    Ok(BetaSegment {
        t0,
        dt_record: stride as f64 * scheme.dt,
        beta,
        snapshots,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffield::{make_field, Domain1D, FieldSpec, SigmaSignal};
    use crate::discretize::build_mesh;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit() -> Domain1D {
        Domain1D::new(0.0, 1.0).unwrap()
    }

    fn heat() -> CoefficientField {
        make_field(&FieldSpec::constant(1.0, 0.0, 0.0), unit()).unwrap()
    }

    fn lambda_h(dx: f64) -> f64 {
        2.0 / (dx * dx) * (1.0 - (std::f64::consts::PI * dx).cos())
    }

    #[test]
    fn one_step_eigen_multiplier() {
        let mesh = build_mesh(unit(), 99).unwrap();
        let s0 = NormalizedState::from_datum(&mesh.sine_profile(), 0.0).unwrap();
        let dt = 1e-3;
        let s1 = step(&heat(), &mesh, StepScheme::backward_euler(dt), &s0).unwrap();
        let lam = lambda_h(0.01);
        let expected = -(1.0 + dt * lam).ln();
        assert!((s1.log_mass - s0.log_mass - expected).abs() < 1e-12);
        assert!((expected + 9.8688e-3 - 4.87e-5).abs() < 1e-6);
        assert!((s1.t - dt).abs() < 1e-15);
    }

    #[test]
    fn constant_shift_rational_multiplier() {
        let mesh = build_mesh(unit(), 99).unwrap();
        let s0 = NormalizedState::from_datum(&mesh.sine_profile(), 0.0).unwrap();
        let dt = 1e-3;
        let kappa = 3.0;
        let f = make_field(&FieldSpec::constant(1.0, 0.0, kappa), unit()).unwrap();
        let s1 = step(&f, &mesh, StepScheme::backward_euler(dt), &s0).unwrap();
        let s1h = step(&heat(), &mesh, StepScheme::backward_euler(dt), &s0).unwrap();
        let lam = lambda_h(0.01);
        let expected = ((1.0 + dt * lam) / (1.0 + dt * (lam - kappa))).ln();
        assert!((s1.log_mass - s1h.log_mass - expected).abs() < 1e-12);
        assert!((expected - kappa * dt).abs() < kappa * (lam + kappa) * dt * dt);
    }

    #[test]
    fn zero_profile_rejected() {
        assert!(NormalizedState::from_datum(&[0.0; 5], 0.0).is_err());
        let mesh = build_mesh(unit(), 5).unwrap();
        let bad = NormalizedState {
            profile: vec![0.0; 5],
            log_mass: 0.0,
            t: 0.0,
        };
        assert!(step(&heat(), &mesh, StepScheme::backward_euler(1e-3), &bad).is_err());
    }

    #[test]
    fn monotonicity_condition_enforced() {
        let mesh = build_mesh(unit(), 9).unwrap();
        let f = make_field(&FieldSpec::constant(1.0, 0.0, 20.0), unit()).unwrap();
        let r = evolve_normalized(&f, &mesh, StepScheme::backward_euler(0.1), &mesh.sine_profile(), 0.0, 1.0, 1);
        assert!(matches!(r, Err(GpeError::Monotonicity { .. })));
    }

    #[test]
    fn heat_decay_slope() {
        let mesh = build_mesh(unit(), 99).unwrap();
        let dt = 1e-3;
        let seg = evolve_normalized(&heat(), &mesh, StepScheme::backward_euler(dt), &mesh.sine_profile(), 0.0, 10.0, 10)
            .unwrap();
        let n = seg.beta.len();
        let slope = seg.beta[n - 1] - seg.beta[n - 101];
        let lam = lambda_h(0.01);
        // exact per-step multiplier; λ²dt/2 is the backward-Euler bias
        assert!((slope + (1.0 + dt * lam).ln() / dt).abs() < 1e-9);
        assert!((slope + lam).abs() < 1e-4 * (1.0 + lam * lam * dt / 2.0) + lam * lam * dt / 2.0 * 1.01);
        assert!((seg.dt_record - 0.01).abs() < 1e-15);
        assert_eq!(n, 1001);
    }

    #[test]
    fn separable_sigma_integrating_factor() {
        let mesh = build_mesh(unit(), 49).unwrap();
        let dt = 1e-3;
        let sig = SigmaSignal::Cosine {
            m: 0.3,
            amplitude: 1.0,
            tau: 1.3,
            phase: 0.0,
        };
        let f = make_field(&FieldSpec::separable(1.0, 0.0, sig), unit()).unwrap();
        let u0 = mesh.sine_profile();
        let a = evolve_normalized(&f, &mesh, StepScheme::backward_euler(dt), &u0, 0.0, 5.0, 100).unwrap();
        let b = evolve_normalized(&heat(), &mesh, StepScheme::backward_euler(dt), &u0, 0.0, 5.0, 100).unwrap();
        for k in 0..a.beta.len() {
            let t = a.time(k);
            let diff = (a.beta[k] - a.beta[0]) - (b.beta[k] - b.beta[0]);
            let integral = f.integral_sigma(0.0, t).unwrap();
            // per step: ln((1+dtλ)/(1+dt(λ−σ))) − σdt = O(dt²(λ|σ| + σ²)), plus endpoint quadrature
            let (lam, s, ds) = (lambda_h(mesh.dx), 1.3, 2.0 * PI / 1.3);
            let bound = dt * (lam * s + s * s + ds) * t + 2.0 * dt * s;
            assert!((diff - integral).abs() < bound, "t={t} {diff} {integral}");
        }
    }

    #[test]
    fn scaling_invariance() {
        let mesh = build_mesh(unit(), 29).unwrap();
        let f = make_field(&FieldSpec::constant(1.0, 0.5, 1.0), unit()).unwrap();
        let u0: Vec<f64> = mesh.nodes.iter().map(|x| x * (1.0 - x) * (1.0 + x)).collect();
        let u7: Vec<f64> = u0.iter().map(|v| 7.0 * v).collect();
        let s = StepScheme::backward_euler(1e-2);
        let a = evolve_normalized(&f, &mesh, s, &u0, 0.0, 2.0, 5).unwrap();
        let b = evolve_normalized(&f, &mesh, s, &u7, 0.0, 2.0, 5).unwrap();
        assert!((b.beta[0] - a.beta[0] - 7f64.ln()).abs() < 1e-14);
        for k in 0..a.beta.len() {
            assert!(((b.beta[k] - b.beta[0]) - (a.beta[k] - a.beta[0])).abs() < 1e-12);
        }
    }

    #[test]
    fn crank_nicolson_runs_and_guard_required() {
        let mesh = build_mesh(unit(), 29).unwrap();
        let mut s = StepScheme::crank_nicolson(1e-3);
        let seg = evolve_normalized(&heat(), &mesh, s, &mesh.sine_profile(), 0.0, 1.0, 100).unwrap();
        let lam = 2.0 / (1.0 / 900.0) * (1.0 - (std::f64::consts::PI / 30.0).cos());
        let slope = seg.beta[10] - seg.beta[9];
        assert!((slope / 0.1 + lam).abs() < 1e-3);
        s.positivity_guard = false;
        assert!(s.validate().is_err());
    }

    #[test]
    fn crank_nicolson_detects_positivity_loss() {
        // large dt with a point datum excites oscillating CN modes
        let mesh = build_mesh(unit(), 49).unwrap();
        let mut u0 = vec![0.0; 49];
        u0[24] = 1.0;
        let r = evolve_normalized(&heat(), &mesh, StepScheme::crank_nicolson(0.05), &u0, 0.0, 0.5, 1);
        assert!(matches!(r, Err(GpeError::PositivityLost { .. })));
    }

    #[test]
    fn strict_positivity_after_one_step() {
        let mesh = build_mesh(unit(), 19).unwrap();
        let mut u0 = vec![0.0; 19];
        u0[3] = 1.0;
        let s0 = NormalizedState::from_datum(&u0, 0.0).unwrap();
        let s1 = step(&heat(), &mesh, StepScheme::backward_euler(1e-2), &s0).unwrap();
        assert!(s1.profile.iter().all(|v| *v > 0.0));
        assert_eq!(s1.profile.iter().cloned().fold(0.0, f64::max), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn discrete_comparison(
            u in proptest::collection::vec(0.0f64..1.0, 15),
            d in proptest::collection::vec(0.0f64..1.0, 15),
            b in -3.0f64..3.0,
        ) {
            let mesh = build_mesh(unit(), 15).unwrap();
            let f = make_field(&FieldSpec::constant(1.0, b, 2.0), unit()).unwrap();
            let v: Vec<f64> = u.iter().zip(&d).map(|(a, e)| a + e).collect();
            prop_assume!(u.iter().any(|x| *x > 0.0));
            let s = StepScheme::backward_euler(1e-2);
            let a = evolve_normalized_with(&f, &mesh, s, &u, 0.0, 0.5, EvolveOptions { record_stride: 10, snapshot_every: Some(1) }).unwrap();
            let c = evolve_normalized_with(&f, &mesh, s, &v, 0.0, 0.5, EvolveOptions { record_stride: 10, snapshot_every: Some(1) }).unwrap();
            for (k, ((_, pa), (_, pc))) in a.snapshots.iter().zip(&c.snapshots).enumerate() {
                let ma = a.beta[k].exp();
                let mc = c.beta[k].exp();
                for (x, y) in pa.iter().zip(pc) {
                    prop_assert!(x * ma <= y * mc * (1.0 + 1e-12) + 1e-300);
                }
            }
        }

        #[test]
        fn constant_shift_bound(kappa in -3.0f64..3.0) {
            let mesh = build_mesh(unit(), 19).unwrap();
            let dt = 1e-2;
            let f0 = heat();
            let fk = f0.with_c_shift(kappa);
            let u0 = mesh.sine_profile();
            let s = StepScheme::backward_euler(dt);
            let a = evolve_normalized(&f0, &mesh, s, &u0, 0.0, 2.0, 10).unwrap();
            let b = evolve_normalized(&fk, &mesh, s, &u0, 0.0, 2.0, 10).unwrap();
            let n = a.beta.len() - 1;
            let inc = (b.beta[n] - b.beta[0]) - (a.beta[n] - a.beta[0]);
            let lam = lambda_h(mesh.dx);
            let exact = 200.0 * ((1.0 + dt * lam) / (1.0 + dt * (lam - kappa))).ln();
            prop_assert!((inc - exact).abs() < 1e-10);
            // the multiplier expansion carries a κλ·dt term besides κ²dt/2
            prop_assert!((inc - kappa * 2.0).abs() <= kappa.abs() * (lam + kappa.abs()) * dt * 2.0 + 1e-9);
        }
    }
}
