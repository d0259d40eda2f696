//! Uniform interior mesh and the monotone tridiagonal discretization of
//! `L(t) = −a ∂xx − b ∂x − c` with homogeneous Dirichlet conditions.
//!
//! Diffusion uses the 3-point stencil, advection is upwinded so that both
//! off-diagonals stay nonpositive for any cell Péclet number. Boundary values
//! are eliminated; only interior unknowns are stored.

use crate::coeffield::{CoefficientField, Domain1D, NodalField};
use crate::error::{GpeError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub domain: Domain1D,
    pub n_interior: usize,
    pub dx: f64,
    pub nodes: Vec<f64>,
}

pub fn build_mesh(domain: Domain1D, n_interior: usize) -> Result<Mesh> {
    let domain = Domain1D::new(domain.x_lo, domain.x_hi)?;
    if n_interior < 3 {
        return Err(GpeError::InvalidMesh(format!(
            "n_interior must be >= 3, got {n_interior}"
        )));
    }
    let dx = domain.length() / (n_interior + 1) as f64;
    let nodes = (1..=n_interior)
        .map(|i| domain.x_lo + i as f64 * dx)
        .collect();
    Ok(Mesh {
        domain,
        n_interior,
        dx,
        nodes,
    })
}

impl Mesh {
    /// Discrete sine profile `sin(π (x − x_lo)/|Ω|)` at the nodes (max-norm ≈ 1).
    pub fn sine_profile(&self) -> Vec<f64> {
        let l = self.domain.length();
        let v: Vec<f64> = self
            .nodes
            .iter()
            .map(|x| (std::f64::consts::PI * (x - self.domain.x_lo) / l).sin())
            .collect();
        let m = v.iter().cloned().fold(0.0, f64::max);
        v.into_iter().map(|s| s / m).collect()
    }
}

/// One time slice of the discrete operator; `lower[0]` and `upper[n-1]` unused.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub timestamp: f64,
}

impl TridiagonalOperator {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            timestamp: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = L u` with zero boundary values.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.len();
        if u.len() != n {
            return Err(GpeError::LengthMismatch {
                expected: n,
                got: u.len(),
            });
        }
        for i in 0..n {
            let mut v = self.diag[i] * u[i];
            if i > 0 {
                v += self.lower[i] * u[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * u[i + 1];
            }
            out[i] = v;
        }
        Ok(())
    }

    /// Solves `(I + scale·L + diag(extra)) x = rhs` by the Thomas algorithm.
    /// `extra` may be empty.
    pub fn solve_shifted(&self, scale: f64, extra: &[f64], rhs: &[f64], out: &mut [f64], work: &mut Vec<f64>) -> Result<()> {
        let n = self.len();
        if rhs.len() != n || out.len() != n {
            return Err(GpeError::LengthMismatch {
                expected: n,
                got: rhs.len().min(out.len()),
            });
        }
        work.resize(n, 0.0);
        let d = |i: usize| 1.0 + scale * self.diag[i] + extra.get(i).copied().unwrap_or(0.0);
        let mut denom = d(0);
        if denom == 0.0 || !denom.is_finite() {
            return Err(GpeError::Singular { row: 0 });
        }
        work[0] = scale * self.upper[0] / denom;
        out[0] = rhs[0] / denom;
        for i in 1..n {
            let lo = scale * self.lower[i];
            denom = d(i) - lo * work[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(GpeError::Singular { row: i });
            }
            work[i] = if i + 1 < n { scale * self.upper[i] / denom } else { 0.0 };
            out[i] = (rhs[i] - lo * out[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            out[i] -= work[i] * out[i + 1];
        }
        Ok(())
    }

    /// Solves `(M) x = rhs` for a general tridiagonal `M` given by this
    /// operator's bands (no identity added).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let shifted = TridiagonalOperator {
            lower: self.lower.clone(),
            diag: self.diag.iter().map(|d| d - 1.0).collect(),
            upper: self.upper.clone(),
            timestamp: self.timestamp,
        };
        let mut out = vec![0.0; n];
        let mut work = Vec::new();
        shifted.solve_shifted(1.0, &[], rhs, &mut out, &mut work)?;
        Ok(out)
    }
}

/// Fills `op` from per-node coefficient values.
fn fill_rows(a: &[f64], b: &[f64], c: &[f64], dx: f64, op: &mut TridiagonalOperator) {
    let inv_dx2 = 1.0 / (dx * dx);
    let inv_dx = 1.0 / dx;
    for i in 0..a.len() {
        let diff = a[i] * inv_dx2;
        let adv = b[i].abs() * inv_dx;
        let (lo, up) = if b[i] >= 0.0 { (-diff, -diff - adv) } else { (-diff - adv, -diff) };
        op.lower[i] = lo;
        op.upper[i] = up;
        op.diag[i] = 2.0 * diff + adv - c[i];
    }
}

/// Assembles `L_h(t)` for `field` on `mesh`.
pub fn assemble(field: &CoefficientField, mesh: &Mesh, t: f64) -> Result<TridiagonalOperator> {
    let mut asm = Assembler::new(field, mesh);
    let mut op = TridiagonalOperator::zeros(mesh.n_interior);
    asm.assemble_into(t, &mut op)?;
    Ok(op)
}

/// Reusable assembly buffers for repeated time slices of one field/mesh pair.
#[derive(Debug, Clone)]
pub struct Assembler<'a> {
    nodal: NodalField<'a>,
    alpha: f64,
    dx: f64,
    nodes: &'a [f64],
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl<'a> Assembler<'a> {
    pub fn new(field: &'a CoefficientField, mesh: &'a Mesh) -> Self {
        let n = mesh.n_interior;
        Self {
            nodal: field.on_nodes(&mesh.nodes),
            alpha: field.alpha(),
            dx: mesh.dx,
            nodes: &mesh.nodes,
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
        }
    }

    pub fn assemble_into(&mut self, t: f64, op: &mut TridiagonalOperator) -> Result<()> {
        self.nodal.sample(t, &mut self.a, &mut self.b, &mut self.c);
        // ellipticity is only controlled at the nodes
        if let Some(i) = self.a.iter().position(|&a| !(a >= self.alpha)) {
            return Err(GpeError::Ellipticity {
                a: self.a[i],
                alpha: self.alpha,
                t,
                x: self.nodes[i],
            });
        }
        fill_rows(&self.a, &self.b, &self.c, self.dx, op);
        op.timestamp = t;
        Ok(())
    }

    /// Zero-order coefficient at the nodes from the last assembly.
    pub fn last_c(&self) -> &[f64] {
        &self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffield::{make_field, FieldSpec};
    use proptest::prelude::*;

    fn field(a: f64, b: f64, c: f64, dom: Domain1D) -> CoefficientField {
        make_field(&FieldSpec::constant(a, b, c), dom).unwrap()
    }

    fn unit() -> Domain1D {
        Domain1D::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn mesh_examples() {
        let m = build_mesh(unit(), 99).unwrap();
        assert!((m.dx - 0.01).abs() < 1e-15);
        assert!((m.nodes[0] - 0.01).abs() < 1e-15);
        assert!((m.nodes[98] - 0.99).abs() < 1e-15);
        assert_eq!(build_mesh(unit(), 3).unwrap().dx, 0.25);
        let m = build_mesh(Domain1D::new(-1.0, 1.0).unwrap(), 199).unwrap();
        assert!((m.dx - 0.01).abs() < 1e-15);
        assert!((m.dx * 200.0 - 2.0).abs() < 1e-12 * 2.0);
        assert!(build_mesh(unit(), 2).is_err());
        assert!(build_mesh(Domain1D { x_lo: 1.0, x_hi: 0.0 }, 10).is_err());
    }

    #[test]
    fn laplacian_row() {
        let m = build_mesh(unit(), 99).unwrap();
        let op = assemble(&field(1.0, 0.0, 0.0, unit()), &m, 0.0).unwrap();
        assert!((op.lower[50] + 10000.0).abs() < 1e-8);
        assert!((op.diag[50] - 20000.0).abs() < 1e-8);
        assert!((op.upper[50] + 10000.0).abs() < 1e-8);
    }

    #[test]
    fn upwind_row_hand_assembly() {
        let m = build_mesh(unit(), 9).unwrap();
        let op = assemble(&field(1.0, 2.0, 0.0, unit()), &m, 0.0).unwrap();
        assert!((op.lower[4] + 100.0).abs() < 1e-9);
        assert!((op.upper[4] + 120.0).abs() < 1e-9);
        assert!((op.diag[4] - 220.0).abs() < 1e-9);
        let op = assemble(&field(1.0, -2.0, 0.0, unit()), &m, 0.0).unwrap();
        assert!((op.lower[4] + 120.0).abs() < 1e-9);
        assert!((op.upper[4] + 100.0).abs() < 1e-9);
    }

    #[test]
    fn zero_order_shift() {
        let m = build_mesh(unit(), 19).unwrap();
        let op0 = assemble(&field(1.0, 0.3, 0.0, unit()), &m, 0.0).unwrap();
        let op5 = assemble(&field(1.0, 0.3, 5.0, unit()), &m, 0.0).unwrap();
        for i in 0..19 {
            assert!((op0.diag[i] - op5.diag[i] - 5.0).abs() < 1e-9);
            assert_eq!(op0.lower[i], op5.lower[i]);
        }
    }

    #[test]
    fn apply_examples() {
        let m = build_mesh(unit(), 99).unwrap();
        let op = assemble(&field(1.0, 0.0, 0.0, unit()), &m, 0.0).unwrap();
        let y = op.apply(&vec![1.0; 99]).unwrap();
        assert!((y[0] - 10000.0).abs() < 1e-8 && (y[98] - 10000.0).abs() < 1e-8);
        assert!(y[1..98].iter().all(|v| v.abs() < 1e-8));
        let z = TridiagonalOperator::zeros(5).apply(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
        let mut e = vec![0.0; 99];
        e[10] = 1.0;
        let col = op.apply(&e).unwrap();
        assert_eq!(col[9], op.upper[9]);
        assert_eq!(col[10], op.diag[10]);
        assert_eq!(col[11], op.lower[11]);
        assert!(matches!(op.apply(&[1.0]), Err(GpeError::LengthMismatch { .. })));
    }

    #[test]
    fn thomas_solves_against_apply() {
        let m = build_mesh(unit(), 30).unwrap();
        let op = assemble(&field(0.7, 1.5, 2.0, unit()), &m, 0.0).unwrap();
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin() + 1.5).collect();
        let dt = 1e-2;
        let lx = op.apply(&x).unwrap();
        let rhs: Vec<f64> = x.iter().zip(&lx).map(|(a, b)| a + dt * b).collect();
        let mut out = vec![0.0; 30];
        op.solve_shifted(dt, &[], &rhs, &mut out, &mut Vec::new()).unwrap();
        for (a, b) in out.iter().zip(&x) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = op.solve(&lx).unwrap();
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn consistency_orders() {
        // truncation error of the stencil on sin(πx): O(dx) with drift, O(dx²) without
        let err = |b: f64, n: usize| {
            let m = build_mesh(unit(), n).unwrap();
            let op = assemble(&field(1.3, b, 0.4, unit()), &m, 0.0).unwrap();
            let pi = std::f64::consts::PI;
            let u: Vec<f64> = m.nodes.iter().map(|x| (pi * x).sin()).collect();
            let lu = op.apply(&u).unwrap();
            m.nodes
                .iter()
                .zip(&lu)
                .map(|(x, v)| {
                    let exact = 1.3 * pi * pi * (pi * x).sin() - b * pi * (pi * x).cos() - 0.4 * (pi * x).sin();
                    (v - exact).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2, e3) = (err(0.0, 19), err(0.0, 39), err(0.0, 79));
        assert!(crate::stats::observed_order(e1, e2, 2.0) > 1.9);
        assert!(crate::stats::observed_order(e2, e3, 2.0) > 1.9);
        let (e1, e2, e3) = (err(2.0, 19), err(2.0, 39), err(2.0, 79));
        let p = crate::stats::observed_order(e2, e3, 2.0);
        assert!(p > 0.9 && p < 1.2, "upwind order {p} ({e1} {e2} {e3})");
    }

    #[test]
    fn ellipticity_checked_at_nodes() {
        let m = build_mesh(unit(), 9).unwrap();
        let f = field(1.0, 0.0, 0.0, unit());
        let mut asm = Assembler::new(&f, &m);
        asm.alpha = 2.0;
        let mut op = TridiagonalOperator::zeros(9);
        assert!(matches!(asm.assemble_into(0.0, &mut op), Err(GpeError::Ellipticity { .. })));
    }

    proptest! {
        #[test]
        fn implicit_matrix_is_monotone(
            a in 0.1f64..3.0,
            b in -20.0f64..20.0,
            c in -5.0f64..5.0,
            f in proptest::collection::vec(0.0f64..1.0, 25),
        ) {
            let m = build_mesh(unit(), 25).unwrap();
            let op = assemble(&field(a, b, c, unit()), &m, 0.0).unwrap();
            for i in 0..25 {
                prop_assert!(op.lower[i] <= 0.0 && op.upper[i] <= 0.0);
                prop_assert!(op.diag[i] >= -c + op.lower[i].abs() + op.upper[i].abs() - 1e-9);
            }
            let dt = 0.9 / c.max(1e-3);
            let dt = dt.min(0.1);
            let mut u = vec![0.0; 25];
            op.solve_shifted(dt, &[], &f, &mut u, &mut Vec::new()).unwrap();
            prop_assert!(u.iter().all(|v| *v >= 0.0));
        }
    }
}
