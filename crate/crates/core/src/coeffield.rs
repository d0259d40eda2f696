//! Coefficient families (a, b, c) of the parabolic operator
//! `∂t − a ∂xx − b ∂x − c` on a bounded interval.
//!
//! Each coefficient is written as `base(x) + Σ_k s_k(t) p_k(x)` where the
//! `s_k` are scalar time signals and `base`, `p_k` spatial profiles. This one
//! representation covers constant, time-independent, periodic,
//! quasi-periodic, log-oscillatory, converging, separable and random
//! stationary families. Tabulated fields are handled separately by bilinear
//! interpolation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GpeError, Result};

/// Default composite-quadrature step for signals without a closed-form
/// antiderivative.
pub const DEFAULT_DT_QUAD: f64 = 1e-3;

/// Bounded spatial interval `(x_lo, x_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain1D {
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Domain1D {
    pub fn new(x_lo: f64, x_hi: f64) -> Result<Self> {
        if !(x_lo.is_finite() && x_hi.is_finite()) || x_hi - x_lo <= 0.0 {
            return Err(GpeError::DegenerateDomain { x_lo, x_hi });
        }
        Ok(Self { x_lo, x_hi })
    }

    pub fn length(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi
    }

    /// Reference coordinate in `[0, 1]`.
    fn unit(&self, x: f64) -> f64 {
        (x - self.x_lo) / self.length()
    }
}

/// Spatial profile, evaluated in the reference coordinate `ξ ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Const(f64),
    Shape(Shape),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `base + amp·sin(π ξ)`
    SineBump { base: f64, amp: f64 },
    /// `base + amp·cos(k π ξ)`
    Cosine { base: f64, amp: f64, k: f64 },
    /// `left + (right − left) ξ`
    Linear { left: f64, right: f64 },
}

impl Profile {
    pub fn eval_unit(&self, xi: f64) -> f64 {
        match self {
            Profile::Const(v) => *v,
            Profile::Shape(Shape::SineBump { base, amp }) => base + amp * (PI * xi).sin(),
            Profile::Shape(Shape::Cosine { base, amp, k }) => base + amp * (k * PI * xi).cos(),
            Profile::Shape(Shape::Linear { left, right }) => left + (right - left) * xi,
        }
    }

    /// Lower and upper bounds over `ξ ∈ [0, 1]`.
    fn range(&self) -> (f64, f64) {
        match self {
            Profile::Const(v) => (*v, *v),
            Profile::Shape(Shape::SineBump { base, amp }) => {
                let (p, q) = (*base, base + amp);
                (p.min(q), p.max(q))
            }
            Profile::Shape(Shape::Cosine { base, amp, .. }) => (base - amp.abs(), base + amp.abs()),
            Profile::Shape(Shape::Linear { left, right }) => (left.min(*right), left.max(*right)),
        }
    }

    fn sup_abs(&self) -> f64 {
        let (lo, hi) = self.range();
        lo.abs().max(hi.abs())
    }

    fn is_unit_constant(&self) -> bool {
        matches!(self, Profile::Const(v) if *v == 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub amplitude: f64,
    pub omega: f64,
}

fn default_true() -> bool {
    true
}

/// Scalar time signal `σ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaSignal {
    Constant {
        value: f64,
    },
    /// `m + A cos(2π t / τ − phase)`
    Cosine {
        m: f64,
        amplitude: f64,
        tau: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `Σ A_i cos(ω_i t)`
    QuasiPeriodic {
        modes: Vec<Mode>,
        #[serde(default = "default_true")]
        declared_irrational: bool,
    },
    /// `A cos(ln(1 + |t|))`
    LogOscillatory { amplitude: f64 },
    /// `(1 − r) c̃_l + r c̃_{l+1}` for `t = l + r`, with `c̃_l ~ Uniform[lo, hi]` i.i.d.
    PiecewiseLinearIid {
        lo: f64,
        hi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// `A exp(−|t| / scale)`
    Decaying { amplitude: f64, scale: f64 },
    /// Piecewise-linear samples `values[k]` at `t0 + k dt`, clamped outside.
    Tabulated { t0: f64, dt: f64, values: Vec<f64> },
}

/// Counter-based i.i.d. draw for cell `cell`: independent of evaluation order.
fn iid_draw(seed: u64, cell: i64, lo: f64, hi: f64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(cell as u64);
    let u: f64 = rng.gen();
    lo + (hi - lo) * u
}

/// True when `ratio` is within `tol` of a rational with denominator ≤ `max_den`.
fn is_nearly_rational(ratio: f64, max_den: u64, tol: f64) -> bool {
    (1..=max_den).any(|q| {
        let p = (ratio * q as f64).round();
        (ratio * q as f64 - p).abs() <= tol * q as f64
    })
}

impl SigmaSignal {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            SigmaSignal::Constant { value } => *value,
            SigmaSignal::Cosine {
                m,
                amplitude,
                tau,
                phase,
            } => m + amplitude * (2.0 * PI * t / tau - phase).cos(),
            SigmaSignal::QuasiPeriodic { modes, .. } => modes
                .iter()
                .map(|md| md.amplitude * (md.omega * t).cos())
                .sum(),
            SigmaSignal::LogOscillatory { amplitude } => amplitude * (t.abs().ln_1p()).cos(),
            SigmaSignal::PiecewiseLinearIid { lo, hi, seed } => {
                let seed = seed.unwrap_or(0);
                let l = t.floor();
                let r = t - l;
                let cell = l as i64;
                let c_l = iid_draw(seed, cell, *lo, *hi);
                let c_r = iid_draw(seed, cell + 1, *lo, *hi);
                (1.0 - r) * c_l + r * c_r
            }
            SigmaSignal::Decaying { amplitude, scale } => amplitude * (-t.abs() / scale).exp(),
            SigmaSignal::Tabulated { t0, dt, values } => {
                let s = ((t - t0) / dt).clamp(0.0, (values.len() - 1) as f64);
                let k = (s.floor() as usize).min(values.len().saturating_sub(2));
                let r = s - k as f64;
                if values.len() == 1 {
                    values[0]
                } else {
                    (1.0 - r) * values[k] + r * values[k + 1]
                }
            }
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            SigmaSignal::Constant { value } => value.abs(),
            SigmaSignal::Cosine { m, amplitude, .. } => m.abs() + amplitude.abs(),
            SigmaSignal::QuasiPeriodic { modes, .. } => modes.iter().map(|m| m.amplitude.abs()).sum(),
            SigmaSignal::LogOscillatory { amplitude } => amplitude.abs(),
            SigmaSignal::PiecewiseLinearIid { lo, hi, .. } => lo.abs().max(hi.abs()),
            SigmaSignal::Decaying { amplitude, .. } => amplitude.abs(),
            SigmaSignal::Tabulated { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Whether a closed-form antiderivative is available.
    pub fn has_exact_integral(&self) -> bool {
        !matches!(self, SigmaSignal::Tabulated { .. })
    }

    /// Smallest period, `Some(0.0)` for constants, `None` when aperiodic.
    pub fn period(&self) -> Option<f64> {
        match self {
            SigmaSignal::Constant { .. } => Some(0.0),
            SigmaSignal::Cosine { amplitude, tau, .. } => {
                if *amplitude == 0.0 {
                    Some(0.0)
                } else {
                    Some(tau.abs())
                }
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(GpeError::InvalidField(m.to_string()));
        match self {
            SigmaSignal::Cosine { tau, .. } if !(*tau > 0.0) => bad("cosine period tau must be > 0"),
            SigmaSignal::QuasiPeriodic {
                modes,
                declared_irrational,
            } => {
                if modes.is_empty() {
                    return bad("quasi_periodic signal needs at least one mode");
                }
                if modes.iter().any(|m| !(m.omega.is_finite() && m.omega != 0.0)) {
                    return bad("quasi_periodic frequencies must be finite and nonzero");
                }
                if *declared_irrational {
                    for (i, mi) in modes.iter().enumerate() {
                        for mj in &modes[i + 1..] {
                            if is_nearly_rational(mi.omega / mj.omega, 1000, 1e-9) {
                                return Err(GpeError::InvalidField(format!(
                                    "frequencies {} and {} are rationally dependent",
                                    mi.omega, mj.omega
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
            SigmaSignal::PiecewiseLinearIid { lo, hi, .. } if !(lo <= hi) => {
                bad("piecewise_linear_iid requires lo <= hi")
            }
            SigmaSignal::Decaying { scale, .. } if !(*scale > 0.0) => bad("decaying scale must be > 0"),
            SigmaSignal::Tabulated { dt, values, .. } if !(*dt > 0.0) || values.is_empty() => {
                bad("tabulated signal needs dt > 0 and at least one value")
            }
            _ => Ok(()),
        }
    }

    /// Exact `∫_{u0}^{u1} σ`, when a closed form exists.
    pub fn exact_integral(&self, u0: f64, u1: f64) -> Option<f64> {
        let v = match self {
            SigmaSignal::Constant { value } => value * (u1 - u0),
            SigmaSignal::Cosine {
                m,
                amplitude,
                tau,
                phase,
            } => {
                let w = 2.0 * PI / tau;
                m * (u1 - u0) + amplitude / w * ((w * u1 - phase).sin() - (w * u0 - phase).sin())
            }
            SigmaSignal::QuasiPeriodic { modes, .. } => modes
                .iter()
                .map(|md| md.amplitude / md.omega * ((md.omega * u1).sin() - (md.omega * u0).sin()))
                .sum(),
            SigmaSignal::LogOscillatory { amplitude } => {
                amplitude * (log_osc_primitive(u1) - log_osc_primitive(u0))
            }
            SigmaSignal::Decaying { amplitude, scale } => {
                let g = |u: f64| u.signum() * scale * (1.0 - (-u.abs() / scale).exp());
                amplitude * (g(u1) - g(u0))
            }
            SigmaSignal::PiecewiseLinearIid { lo, hi, seed } => {
                piecewise_iid_integral(seed.unwrap_or(0), *lo, *hi, u0, u1)
            }
            SigmaSignal::Tabulated { .. } => return None,
        };
        Some(v)
    }
}

/// Odd primitive of `cos(ln(1 + |u|))`, vanishing at 0.
fn log_osc_primitive(u: f64) -> f64 {
    let a = u.abs();
    let l = a.ln_1p();
    let v = 0.5 * (1.0 + a) * (l.cos() + l.sin()) - 0.5;
    if u < 0.0 {
        -v
    } else {
        v
    }
}

fn piecewise_iid_integral(seed: u64, lo: f64, hi: f64, u0: f64, u1: f64) -> f64 {
    if u1 < u0 {
        return -piecewise_iid_integral(seed, lo, hi, u1, u0);
    }
    // ∫_l^{l+r} = c_l r + (c_{l+1} − c_l) r²/2
    let partial = |r: f64, c_l: f64, c_r: f64| c_l * r + (c_r - c_l) * r * r / 2.0;
    let l0 = u0.floor() as i64;
    let l1 = u1.floor() as i64;
    let draw = |k: i64| iid_draw(seed, k, lo, hi);
    let mut prev = draw(l0);
    let mut next = draw(l0 + 1);
    let r0 = u0 - l0 as f64;
    if l0 == l1 {
        let r1 = u1 - l1 as f64;
        return partial(r1, prev, next) - partial(r0, prev, next);
    }
    let mut total = 0.5 * (prev + next) - partial(r0, prev, next);
    for k in l0 + 1..l1 {
        prev = next;
        next = draw(k + 1);
        total += 0.5 * (prev + next);
    }
    prev = next;
    next = draw(l1 + 1);
    total + partial(u1 - l1 as f64, prev, next)
}

/// Composite Simpson rule with step at most `h_max`.
pub fn simpson(f: impl Fn(f64) -> f64, t0: f64, t1: f64, h_max: f64) -> f64 {
    if t1 == t0 {
        return 0.0;
    }
    let mut n = ((t1 - t0).abs() / h_max).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let h = (t1 - t0) / n as f64;
    let mut s = f(t0) + f(t1);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(t0 + k as f64 * h);
    }
    s * h / 3.0
}

/// One signal-modulated term `s(t) p(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub signal: SigmaSignal,
    pub profile: Profile,
}

/// Coefficient `base(x) + Σ s_k(t) p_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefSpec {
    Profile(Profile),
    Full {
        base: Profile,
        #[serde(default)]
        terms: Vec<Term>,
    },
}

impl CoefSpec {
    fn into_parts(self) -> (Profile, Vec<Term>) {
        match self {
            CoefSpec::Profile(p) => (p, Vec::new()),
            CoefSpec::Full { base, terms } => (base, terms),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Constant,
    TimeIndependent,
    Periodic,
    QuasiPeriodic,
    LogOscillatory,
    Converging,
    SeparableSigma,
    RandomStationary,
    Tabulated,
}

/// Gridded coefficient values `a[i][j]` at `(t[i], x[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

/// Declarative description of a coefficient field, as found in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<CoefSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<CoefSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<CoefSpec>,
    /// Time-independent part of `c` for separable families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<Profile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaSignal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<TableSpec>,
}

impl FieldSpec {
    pub fn constant(a: f64, b: f64, c: f64) -> Self {
        Self {
            kind: FieldKind::Constant,
            a: Some(CoefSpec::Profile(Profile::Const(a))),
            b: Some(CoefSpec::Profile(Profile::Const(b))),
            c: Some(CoefSpec::Profile(Profile::Const(c))),
            c0: None,
            sigma: None,
            period: None,
            seed: None,
            table: None,
        }
    }

    /// `a ∂xx − c0 − σ(t)` with constant `a`, `b = 0`.
    pub fn separable(a: f64, c0: f64, sigma: SigmaSignal) -> Self {
        let kind = match &sigma {
            SigmaSignal::PiecewiseLinearIid { .. } => FieldKind::RandomStationary,
            SigmaSignal::LogOscillatory { .. } => FieldKind::LogOscillatory,
            SigmaSignal::QuasiPeriodic { .. } => FieldKind::QuasiPeriodic,
            _ => FieldKind::SeparableSigma,
        };
        Self {
            kind,
            a: Some(CoefSpec::Profile(Profile::Const(a))),
            b: None,
            c: None,
            c0: Some(Profile::Const(c0)),
            sigma: Some(sigma),
            period: None,
            seed: None,
            table: None,
        }
    }
}

/// Which half-line is mirrored onto the other by `t ↦ |t|` reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfLine {
    /// Keep `t ≥ 0`, mirror onto `t < 0`.
    Plus,
    /// Keep `t ≤ 0`, mirror onto `t > 0`.
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
struct Coefficient {
    base: Profile,
    terms: Vec<Term>,
}

impl Coefficient {
    fn range(&self) -> (f64, f64) {
        let (mut lo, mut hi) = self.base.range();
        for term in &self.terms {
            let r = term.signal.sup_abs() * term.profile.sup_abs();
            lo -= r;
            hi += r;
        }
        (lo, hi)
    }

    fn eval(&self, t: f64, xi: f64) -> f64 {
        self.base.eval_unit(xi)
            + self
                .terms
                .iter()
                .map(|term| term.signal.value(t) * term.profile.eval_unit(xi))
                .sum::<f64>()
    }

    fn signals(&self) -> impl Iterator<Item = &SigmaSignal> {
        self.terms.iter().map(|t| &t.signal)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    spec: TableSpec,
}

fn locate(grid: &[f64], v: f64) -> (usize, f64) {
    if grid.len() == 1 {
        return (0, 0.0);
    }
    if v <= grid[0] {
        return (0, 0.0);
    }
    if v >= grid[grid.len() - 1] {
        return (grid.len() - 2, 1.0);
    }
    let k = grid.partition_point(|g| *g <= v).saturating_sub(1).min(grid.len() - 2);
    let r = (v - grid[k]) / (grid[k + 1] - grid[k]);
    (k, r)
}

impl Table {
    fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let s = &self.spec;
        let (it, rt) = locate(&s.t, t);
        let (ix, rx) = locate(&s.x, x);
        let bil = |m: &Vec<Vec<f64>>| {
            let at = |i: usize, j: usize| {
                m[i.min(s.t.len() - 1)][j.min(s.x.len() - 1)]
            };
            let v0 = (1.0 - rx) * at(it, ix) + rx * at(it, ix + 1);
            let v1 = (1.0 - rx) * at(it + 1, ix) + rx * at(it + 1, ix + 1);
            (1.0 - rt) * v0 + rt * v1
        };
        (bil(&s.a), bil(&s.b), bil(&s.c))
    }

    fn range(m: &[Vec<f64>]) -> (f64, f64) {
        m.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        })
    }
}

/// Sup-norms and one-sided bounds of the coefficients over all times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub a_sup: f64,
    pub b_sup: f64,
    pub c_sup_abs: f64,
    /// Upper bound of `c` (not of `|c|`).
    pub c_max: f64,
    pub c_min: f64,
}

/// Immutable, evaluable coefficient field on a fixed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    kind: FieldKind,
    spec: FieldSpec,
    domain: Domain1D,
    a: Coefficient,
    b: Coefficient,
    c: Coefficient,
    table: Option<Table>,
    alpha: f64,
    bounds: Bounds,
    period: Option<f64>,
    seed: Option<u64>,
    reflection: Option<HalfLine>,
    time_shift: f64,
}

fn signal_divides(sig: &SigmaSignal, period: f64) -> bool {
    match sig.period() {
        Some(0.0) => true,
        Some(p) => {
            let k = period / p;
            (k - k.round()).abs() < 1e-9 && k.round() >= 1.0
        }
        None => false,
    }
}

/// Builds a validated field from its declarative description.
pub fn make_field(spec: &FieldSpec, domain: Domain1D) -> Result<CoefficientField> {
    let domain = Domain1D::new(domain.x_lo, domain.x_hi)?;
    let invalid = |m: String| GpeError::InvalidField(m);
    let kind = spec.kind;

    let (a_base, a_terms) = spec
        .a
        .clone()
        .unwrap_or(CoefSpec::Profile(Profile::Const(1.0)))
        .into_parts();
    let (b_base, b_terms) = spec
        .b
        .clone()
        .unwrap_or(CoefSpec::Profile(Profile::Const(0.0)))
        .into_parts();
    let (mut c_base, mut c_terms) = spec
        .c
        .clone()
        .unwrap_or(CoefSpec::Profile(Profile::Const(0.0)))
        .into_parts();

    if let Some(c0) = &spec.c0 {
        if spec.c.is_some() {
            return Err(invalid("give either `c` or `c0`, not both".into()));
        }
        c_base = c0.clone();
    }
    let mut sigma = spec.sigma.clone();
    if let Some(SigmaSignal::PiecewiseLinearIid { seed, .. }) = &mut sigma {
        if seed.is_none() {
            *seed = Some(spec.seed.ok_or_else(|| {
                invalid("piecewise_linear_iid signal needs a seed (signal or field level)".into())
            })?);
        }
    }
    if let Some(s) = sigma.clone() {
        c_terms.push(Term {
            signal: s,
            profile: Profile::Const(1.0),
        });
    }

    let mut a = Coefficient {
        base: a_base,
        terms: a_terms,
    };
    let mut b = Coefficient {
        base: b_base,
        terms: b_terms,
    };
    let mut c = Coefficient {
        base: c_base,
        terms: c_terms,
    };
    for coef in [&mut a, &mut b, &mut c] {
        for term in coef.terms.iter_mut() {
            if let SigmaSignal::PiecewiseLinearIid { seed, .. } = &mut term.signal {
                if seed.is_none() {
                    *seed = spec.seed;
                }
            }
        }
    }

    let all_signals: Vec<&SigmaSignal> = a.signals().chain(b.signals()).chain(c.signals()).collect();
    for s in &all_signals {
        s.validate()?;
    }
    let time_free = |coef: &Coefficient| coef.terms.is_empty();

    let mut table = None;
    match kind {
        FieldKind::Constant => {
            let all_const = [&a, &b, &c]
                .iter()
                .all(|k| time_free(k) && matches!(k.base, Profile::Const(_)));
            if !all_const {
                return Err(invalid("constant field must have scalar a, b, c".into()));
            }
        }
        FieldKind::TimeIndependent => {
            if !(time_free(&a) && time_free(&b) && time_free(&c)) {
                return Err(invalid("time_independent field cannot carry time signals".into()));
            }
        }
        FieldKind::Periodic => {
            let p = spec
                .period
                .ok_or_else(|| invalid("periodic field requires `period`".into()))?;
            if !(p > 0.0) {
                return Err(invalid(format!("period must be > 0, got {p}")));
            }
            if let Some(bad) = all_signals.iter().find(|s| !signal_divides(s, p)) {
                return Err(invalid(format!("signal {bad:?} is not {p}-periodic")));
            }
        }
        FieldKind::QuasiPeriodic => {
            let ok = all_signals.iter().all(|s| {
                matches!(
                    s,
                    SigmaSignal::Constant { .. } | SigmaSignal::Cosine { .. } | SigmaSignal::QuasiPeriodic { .. }
                )
            });
            if !ok || all_signals.is_empty() {
                return Err(invalid("quasi_periodic field needs trigonometric signals only".into()));
            }
        }
        FieldKind::LogOscillatory => {
            if !all_signals
                .iter()
                .any(|s| matches!(s, SigmaSignal::LogOscillatory { .. }))
            {
                return Err(invalid("log_oscillatory field needs a log_oscillatory signal".into()));
            }
        }
        FieldKind::Converging => {
            let ok = all_signals
                .iter()
                .all(|s| matches!(s, SigmaSignal::Constant { .. } | SigmaSignal::Decaying { .. }));
            if !ok {
                return Err(invalid("converging field accepts only decaying signals".into()));
            }
        }
        FieldKind::SeparableSigma => {
            if sigma.is_none() {
                return Err(invalid("separable_sigma field requires `sigma`".into()));
            }
            if !(time_free(&a) && time_free(&b) && c.terms.len() == 1) {
                return Err(invalid(
                    "separable_sigma field must be c0(x) + sigma(t) with time-free a, b".into(),
                ));
            }
        }
        FieldKind::RandomStationary => {
            if !all_signals
                .iter()
                .any(|s| matches!(s, SigmaSignal::PiecewiseLinearIid { .. }))
            {
                return Err(invalid("random_stationary field needs a piecewise_linear_iid signal".into()));
            }
        }
        FieldKind::Tabulated => {
            let t = spec
                .table
                .clone()
                .ok_or_else(|| invalid("tabulated field requires `table`".into()))?;
            validate_table(&t, &domain)?;
            table = Some(Table { spec: t });
        }
    }
    if kind != FieldKind::Tabulated && spec.table.is_some() {
        return Err(invalid("`table` is only allowed for tabulated fields".into()));
    }

    let (a_rng, b_rng, c_rng) = match &table {
        Some(t) => (
            Table::range(&t.spec.a),
            Table::range(&t.spec.b),
            Table::range(&t.spec.c),
        ),
        None => (a.range(), b.range(), c.range()),
    };
    let alpha = a_rng.0;
    if !(alpha > 0.0) {
        return Err(invalid(format!(
            "nonpositive ellipticity: inf a >= {alpha} is not > 0"
        )));
    }
    let bounds = Bounds {
        a_sup: a_rng.0.abs().max(a_rng.1.abs()),
        b_sup: b_rng.0.abs().max(b_rng.1.abs()),
        c_sup_abs: c_rng.0.abs().max(c_rng.1.abs()),
        c_max: c_rng.1,
        c_min: c_rng.0,
    };

    let period = match kind {
        FieldKind::Periodic => spec.period,
        _ => None,
    };
    let seed = all_signals.iter().find_map(|s| match s {
        SigmaSignal::PiecewiseLinearIid { seed, .. } => *seed,
        _ => None,
    });

    Ok(CoefficientField {
        kind,
        spec: spec.clone(),
        domain,
        a,
        b,
        c,
        table,
        alpha,
        bounds,
        period,
        seed,
        reflection: None,
        time_shift: 0.0,
    })
}

fn validate_table(t: &TableSpec, domain: &Domain1D) -> Result<()> {
    let invalid = |m: &str| Err(GpeError::InvalidField(m.to_string()));
    if t.t.is_empty() || t.x.len() < 2 {
        return invalid("table needs at least one time and two positions");
    }
    if t.t.windows(2).any(|w| w[1] <= w[0]) || t.x.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("table grids must be strictly increasing");
    }
    if t.x[0] > domain.x_lo || t.x[t.x.len() - 1] < domain.x_hi {
        return invalid("table x-grid must cover the domain");
    }
    for m in [&t.a, &t.b, &t.c] {
        if m.len() != t.t.len() || m.iter().any(|row| row.len() != t.x.len()) {
            return invalid("table value arrays must have shape [len(t)][len(x)]");
        }
    }
    Ok(())
}

/// Per-node cache of the spatial profiles, so that a time slice costs one
/// signal evaluation per term plus a few multiply-adds per node.
#[derive(Debug, Clone)]
pub struct NodalField<'a> {
    field: &'a CoefficientField,
    xs: Vec<f64>,
    base: [Vec<f64>; 3],
    terms: [Vec<Vec<f64>>; 3],
}

impl NodalField<'_> {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// Fills `out_a`, `out_b`, `out_c` with the coefficients at time `t`.
    pub fn sample(&self, t: f64, out_a: &mut [f64], out_b: &mut [f64], out_c: &mut [f64]) {
        let te = self.field.effective_time(t);
        if let Some(table) = &self.field.table {
            for (i, &x) in self.xs.iter().enumerate() {
                let (a, b, c) = table.eval(te, x);
                out_a[i] = a;
                out_b[i] = b;
                out_c[i] = c;
            }
            return;
        }
        let coefs = [&self.field.a, &self.field.b, &self.field.c];
        for (k, out) in [out_a, out_b, out_c].into_iter().enumerate() {
            out.copy_from_slice(&self.base[k]);
            for (term, prof) in coefs[k].terms.iter().zip(&self.terms[k]) {
                let s = term.signal.value(te);
                for (o, p) in out.iter_mut().zip(prof) {
                    *o += s * p;
                }
            }
        }
    }
}

impl CoefficientField {
    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    pub fn domain(&self) -> Domain1D {
        self.domain
    }

    /// Ellipticity lower bound for `a`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn reflection(&self) -> Option<HalfLine> {
        self.reflection
    }

    pub fn even_reflected(&self) -> bool {
        self.reflection.is_some()
    }

    pub fn time_shift(&self) -> f64 {
        self.time_shift
    }

    /// Time range covered by the table, if tabulated; outside it values clamp.
    pub fn table_time_range(&self) -> Option<(f64, f64)> {
        self.table
            .as_ref()
            .map(|t| (t.spec.t[0], t.spec.t[t.spec.t.len() - 1]))
    }

    /// Copy extended by even reflection of the chosen half-line.
    pub fn reflected(&self, keep: HalfLine) -> Self {
        Self {
            reflection: Some(keep),
            ..self.clone()
        }
    }

    /// Copy with coefficients `t ↦ coef(t + shift)`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            time_shift: self.time_shift + shift,
            ..self.clone()
        }
    }

    /// Copy with the same shape but coefficients replaced by their values
    /// frozen at time `t_star`.
    pub fn frozen_at(&self, t_star: f64) -> Self {
        let te = self.effective_time(t_star);
        let freeze = |coef: &Coefficient| Coefficient {
            base: coef.base.clone(),
            terms: coef
                .terms
                .iter()
                .map(|term| Term {
                    signal: SigmaSignal::Constant {
                        value: term.signal.value(te),
                    },
                    profile: term.profile.clone(),
                })
                .collect(),
        };
        let mut out = Self {
            a: freeze(&self.a),
            b: freeze(&self.b),
            c: freeze(&self.c),
            reflection: None,
            time_shift: 0.0,
            ..self.clone()
        };
        if let Some(table) = &self.table {
            let mut spec = table.spec.clone();
            let vals: Vec<(f64, f64, f64)> = spec.x.iter().map(|&x| table.eval(te, x)).collect();
            spec.t = vec![0.0];
            spec.a = vec![vals.iter().map(|v| v.0).collect()];
            spec.b = vec![vals.iter().map(|v| v.1).collect()];
            spec.c = vec![vals.iter().map(|v| v.2).collect()];
            out.table = Some(Table { spec });
        }
        out
    }

    /// Copy with `c` replaced by `c + κ`.
    pub fn with_c_shift(&self, kappa: f64) -> Self {
        let mut out = self.clone();
        out.c.terms.push(Term {
            signal: SigmaSignal::Constant { value: kappa },
            profile: Profile::Const(1.0),
        });
        out.bounds.c_max += kappa;
        out.bounds.c_min += kappa;
        out.bounds.c_sup_abs = out.bounds.c_max.abs().max(out.bounds.c_min.abs());
        if let Some(t) = &mut out.table {
            for row in t.spec.c.iter_mut() {
                for v in row.iter_mut() {
                    *v += kappa;
                }
            }
        }
        out
    }

    /// Copy with `a`, `b`, `c` perturbed additively by `δ·p(x)` terms.
    pub fn perturbed(&self, da: f64, db: f64, dc: f64, shape: &Profile) -> Result<Self> {
        let mut out = self.clone();
        out.period = self.period.or_else(|| self.separable_sigma().and_then(|s| s.period()));
        let add = |coef: &mut Coefficient, d: f64| {
            if d != 0.0 {
                coef.terms.push(Term {
                    signal: SigmaSignal::Constant { value: d },
                    profile: shape.clone(),
                });
            }
        };
        add(&mut out.a, da);
        add(&mut out.b, db);
        add(&mut out.c, dc);
        let (a_rng, b_rng, c_rng) = (out.a.range(), out.b.range(), out.c.range());
        if !(a_rng.0 > 0.0) {
            return Err(GpeError::InvalidField("perturbation destroys ellipticity".into()));
        }
        out.alpha = a_rng.0;
        out.bounds = Bounds {
            a_sup: a_rng.0.abs().max(a_rng.1.abs()),
            b_sup: b_rng.0.abs().max(b_rng.1.abs()),
            c_sup_abs: c_rng.0.abs().max(c_rng.1.abs()),
            c_max: c_rng.1,
            c_min: c_rng.0,
        };
        Ok(out)
    }

    /// Same coefficients on another interval (profiles keep their reference
    /// coordinate, so a constant field stays constant).
    pub fn on_domain(&self, domain: Domain1D) -> Result<Self> {
        let domain = Domain1D::new(domain.x_lo, domain.x_hi)?;
        if self.table.is_some() {
            return Err(GpeError::InvalidField("tabulated fields are tied to their grid".into()));
        }
        Ok(Self {
            domain,
            ..self.clone()
        })
    }

    /// Time at which the underlying (unreflected, unshifted) coefficients are read.
    pub fn effective_time(&self, t: f64) -> f64 {
        let t = match self.reflection {
            None => t,
            Some(HalfLine::Plus) => t.abs(),
            Some(HalfLine::Minus) => -t.abs(),
        };
        t + self.time_shift
    }

    pub fn eval(&self, t: f64, x: f64) -> Result<(f64, f64, f64)> {
        if !self.domain.contains(x) {
            return Err(GpeError::OutsideDomain {
                x,
                x_lo: self.domain.x_lo,
                x_hi: self.domain.x_hi,
            });
        }
        let te = self.effective_time(t);
        if let Some(table) = &self.table {
            return Ok(table.eval(te, x));
        }
        let xi = self.domain.unit(x);
        Ok((self.a.eval(te, xi), self.b.eval(te, xi), self.c.eval(te, xi)))
    }

    pub fn on_nodes(&self, xs: &[f64]) -> NodalField<'_> {
        let xis: Vec<f64> = xs.iter().map(|&x| self.domain.unit(x)).collect();
        let prof = |p: &Profile| xis.iter().map(|&xi| p.eval_unit(xi)).collect::<Vec<_>>();
        let coefs = [&self.a, &self.b, &self.c];
        NodalField {
            field: self,
            xs: xs.to_vec(),
            base: coefs.map(|c| prof(&c.base)),
            terms: coefs.map(|c| c.terms.iter().map(|t| prof(&t.profile)).collect()),
        }
    }

    /// The time signal `σ` when `c = c0(x) + σ(t)` and `a`, `b` are time-free.
    pub fn separable_sigma(&self) -> Option<&SigmaSignal> {
        if self.table.is_some() || !self.a.terms.is_empty() || !self.b.terms.is_empty() {
            return None;
        }
        match self.c.terms.as_slice() {
            [term] if term.profile.is_unit_constant() => Some(&term.signal),
            _ => None,
        }
    }

    /// Whether `a`, `b` are time-free and `c = c0(x) + Σ_k s_k(t)`.
    fn separable_signals(&self) -> Option<Vec<&SigmaSignal>> {
        if self.table.is_some() || !self.a.terms.is_empty() || !self.b.terms.is_empty() {
            return None;
        }
        if self.c.terms.iter().all(|t| t.profile.is_unit_constant()) {
            Some(self.c.signals().collect())
        } else {
            None
        }
    }

    /// Field with the time signal removed (`c ← c0`), when separable.
    pub fn time_free_part(&self) -> Result<Self> {
        if self.separable_signals().is_none() {
            return Err(GpeError::NotSeparable(format!("{:?} field", self.kind)));
        }
        let mut out = self.clone();
        out.c.terms.clear();
        let r = out.c.range();
        out.bounds.c_max = r.1;
        out.bounds.c_min = r.0;
        out.bounds.c_sup_abs = r.0.abs().max(r.1.abs());
        out.kind = FieldKind::TimeIndependent;
        Ok(out)
    }

    /// Value of the pure time signal at `t` (sum over all separable terms).
    pub fn sigma_value(&self, t: f64) -> Result<f64> {
        let sigs = self
            .separable_signals()
            .ok_or_else(|| GpeError::NotSeparable(format!("{:?} field", self.kind)))?;
        let te = self.effective_time(t);
        Ok(sigs.iter().map(|s| s.value(te)).sum())
    }

    /// `∫_{t0}^{t1} σ`, exact where a closed form exists, otherwise composite
    /// Simpson with step `DEFAULT_DT_QUAD` (error `O(step²)` for piecewise
    /// smooth signals).
    pub fn integral_sigma(&self, t0: f64, t1: f64) -> Result<f64> {
        self.integral_sigma_with(t0, t1, DEFAULT_DT_QUAD)
    }

    pub fn integral_sigma_with(&self, t0: f64, t1: f64, dt_quad: f64) -> Result<f64> {
        let sigs = self
            .separable_signals()
            .ok_or_else(|| GpeError::NotSeparable(format!("{:?} field", self.kind)))?;
        if t1 < t0 {
            return Err(GpeError::InvalidState(format!("integral bounds reversed: {t0} > {t1}")));
        }
        let mut total = 0.0;
        for sig in sigs {
            total += self.integrate_effective(t0, t1, |u0, u1| {
                sig.exact_integral(u0, u1)
                    .unwrap_or_else(|| simpson(|u| sig.value(u), u0, u1, dt_quad))
            });
        }
        Ok(total)
    }

    /// Integrates a raw-time primitive over the effective-time image of `[t0, t1]`.
    fn integrate_effective(&self, t0: f64, t1: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        let s = self.time_shift;
        let direct = |a: f64, b: f64| if b > a { f(a + s, b + s) } else { 0.0 };
        let mirrored = |a: f64, b: f64| if b > a { f(s - b, s - a) } else { 0.0 };
        match self.reflection {
            None => direct(t0, t1),
            Some(HalfLine::Plus) => mirrored(t0, t1.min(0.0)) + direct(t0.max(0.0), t1),
            Some(HalfLine::Minus) => direct(t0, t1.min(0.0)) + mirrored(t0.max(0.0), t1),
        }
    }

    /// Whether every signal in the field has a closed-form antiderivative.
    pub fn has_exact_integral(&self) -> bool {
        self.separable_signals()
            .map(|s| s.iter().all(|sig| sig.has_exact_integral()))
            .unwrap_or(false)
    }

    /// Short stable identifier of the field and its time transformation.
    pub fn fingerprint(&self) -> String {
        format!(
            "{}|reflect={:?}|shift={}|domain=[{},{}]",
            serde_json::to_string(&self.spec).unwrap_or_default(),
            self.reflection,
            self.time_shift,
            self.domain.x_lo,
            self.domain.x_hi
        )
    }
}
