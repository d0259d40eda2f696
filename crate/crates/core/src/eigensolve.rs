//! Spectral oracles independent of the growth-rate pipeline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffield::{CoefficientField, FieldKind};
use crate::discretize::{assemble, Mesh};
use crate::error::{GpeError, Result};
use crate::growthrate::least_mean;
use crate::stats::richardson;
use crate::stepper::{evolve_normalized, step_count, StepScheme};

pub const MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueEstimate {
    pub value: f64,
    pub eigenvector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Principal Dirichlet eigenpair of `L_h(t*)` by shifted inverse iteration.
pub fn dirichlet_eigen(field: &CoefficientField, t_star: f64, mesh: &Mesh) -> Result<EigenvalueEstimate> {
    dirichlet_eigen_with(field, t_star, mesh, 1e-10)
}

/// Same with an explicit residual tolerance. The tolerance is raised to the
/// roundoff floor `64 ε ‖L_h‖∞` on very fine meshes.
pub fn dirichlet_eigen_with(field: &CoefficientField, t_star: f64, mesh: &Mesh, tol: f64) -> Result<EigenvalueEstimate> {
    let op = assemble(field, mesh, t_star)?;
    let n = op.len();
    let norm = (0..n)
        .map(|i| op.lower[i].abs() + op.diag[i].abs() + op.upper[i].abs())
        .fold(0.0, f64::max);
    let tol = tol.max(64.0 * f64::EPSILON * norm);
    // M = L + s I with s = ‖c‖∞ + 1 is a nonsingular M-matrix
    let s = field.bounds().c_sup_abs + 1.0;
    let extra = vec![s - 1.0; n];
    let mut v = mesh.sine_profile();
    let mut x = vec![0.0; n];
    let mut lv = vec![0.0; n];
    let mut work = Vec::new();
    for it in 1..=MAX_ITER {
        op.solve_shifted(1.0, &extra, &v, &mut x, &mut work)?;
        let m = sup(&x);
        for (vi, xi) in v.iter_mut().zip(&x) {
            *vi = xi / m;
        }
        op.apply_into(&v, &mut lv)?;
        let num: f64 = v.iter().zip(&lv).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().map(|a| a * a).sum();
        let value = num / den;
        let residual = lv.iter().zip(&v).map(|(l, u)| (l - value * u).abs()).fold(0.0, f64::max);
        if residual <= tol {
            if v.iter().any(|&u| u <= 0.0) {
                return Err(GpeError::InvalidState("principal eigenvector not strictly positive".into()));
            }
            return Ok(EigenvalueEstimate {
                value,
                eigenvector: v,
                iterations: it,
                residual,
            });
        }
    }
    Err(GpeError::NoConvergence(MAX_ITER))
}

/// Principal eigenvalue of a time-periodic problem from the one-period map.
pub fn periodic_eigen(field: &CoefficientField, mesh: &Mesh, scheme: StepScheme, period: f64) -> Result<EigenvalueEstimate> {
    let own = field.period().or_else(|| field.separable_sigma().and_then(|s| s.period()));
    match own {
        Some(p) if p > 0.0 => {
            let k = period / p;
            if (k - k.round()).abs() > 1e-9 || k.round() < 1.0 {
                return Err(GpeError::InvalidField(format!("period {period} is not a multiple of the field period {p}")));
            }
        }
        _ if matches!(field.kind(), FieldKind::Constant | FieldKind::TimeIndependent) => {}
        Some(_) => {}
        _ => return Err(GpeError::InvalidField(format!("{:?} field is not periodic", field.kind()))),
    }
    let n_steps = step_count(0.0, period, scheme.dt)?;
    let mut profile = mesh.sine_profile();
    let mut last_ell = f64::NAN;
    for it in 1..=1000 {
        let seg = evolve_normalized(field, mesh, scheme, &profile, 0.0, period, n_steps)?;
        let ell = seg.beta[seg.beta.len() - 1] - seg.beta[0];
        let next = seg.final_state.profile;
        let change = next.iter().zip(&profile).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        profile = next;
        if (ell - last_ell).abs() < 1e-12 && change < 1e-10 {
            return Ok(EigenvalueEstimate {
                value: -ell / period,
                eigenvector: profile,
                iterations: it,
                residual: change,
            });
        }
        last_ell = ell;
    }
    Err(GpeError::NoConvergence(1000))
}

/// Richardson-in-dt extrapolation of [`periodic_eigen`] over `dts`.
pub fn periodic_eigen_richardson(
    field: &CoefficientField,
    mesh: &Mesh,
    scheme: StepScheme,
    period: f64,
    dts: &[f64],
) -> Result<(f64, Vec<EigenvalueEstimate>)> {
    let ests = dts
        .par_iter()
        .map(|&dt| periodic_eigen(field, mesh, scheme.with_dt(dt), period))
        .collect::<Result<Vec<_>>>()?;
    let vs: Vec<f64> = ests.iter().map(|e| e.value).collect();
    Ok((richardson(dts, &vs), ests))
}

/// Least mean of the frozen eigenvalues `λ_D(−𝓛_t)` on a uniform grid; a
/// lower bound for `λ_bp(ℝ)` when `a ≡ 1`, `b ≡ 0`.
pub fn averaged_lower_bound(field: &CoefficientField, mesh: &Mesh, t_grid: &[f64]) -> Result<f64> {
    if t_grid.len() < 2 {
        return Err(GpeError::InsufficientData("time grid needs two points".into()));
    }
    let dt = t_grid[1] - t_grid[0];
    if t_grid.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs().max(1.0)) || !(dt > 0.0) {
        return Err(GpeError::InvalidState("time grid must be uniform and increasing".into()));
    }
    let stride = (t_grid.len() / 64).max(1);
    for &t in t_grid.iter().step_by(stride) {
        for &x in &mesh.nodes {
            let (a, b, _) = field.eval(t, x)?;
            if a != 1.0 || b != 0.0 {
                return Err(GpeError::InvalidField(format!(
                    "averaged bound needs a = 1, b = 0; got a = {a}, b = {b} at (t, x) = ({t}, {x})"
                )));
            }
        }
    }
    let lam = t_grid
        .par_iter()
        .map(|&t| dirichlet_eigen(field, t, mesh).map(|e| e.value))
        .collect::<Result<Vec<_>>>()?;
    least_mean(&lam, dt)
}
