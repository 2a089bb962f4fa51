//! Elliptic structures on an open set of C² = R⁴ and their chart germs.
//!
//! A field assigns to each point `q = (x, y)` the family of planes
//! `{δy = λ δx + H(q, λ) δx̄}` (plus the vertical plane), where `|D_λ H| < 1`.
//! Chart germs `h(z, w, λ)` describe the same family in coordinates adapted
//! to one plane of one fiber, normalized so that `h(0,0,0) = 0` and
//! `D₃h(0,0,0) = 0`. A J-curve written as a graph `w = f(z)` then solves
//! `∂f/∂z̄ = h(z, f, ∂f/∂z)`.
//!
//! Real-linear maps `ξ ↦ aξ + bξ̄` of C are written as pairs `(a, b)`; their
//! operator norm is `|a| + |b|`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann4::{intersection_sign, plane_from_span, IntersectionSign, OrientedPlane, Vec4};
use crate::sampling;

/// Step for central finite differences of germs.
pub const GERM_FD_STEP: f64 = 1e-6;
/// Tolerance for a plane to belong to a fiber.
pub const FIBER_RESIDUAL_TOL: f64 = 1e-9;
/// Condition-number bound for the α-recovery system.
pub const RECOVERY_CONDITION_LIMIT: f64 = 10.0;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Wirtinger pair `(∂/∂v, ∂/∂v̄)`.
pub type Wirtinger = (C64, C64);

pub fn real_linear_norm(d: Wirtinger) -> f64 {
    d.0.norm() + d.1.norm()
}

/// Matrix of `ξ ↦ aξ + bξ̄` acting on `(Re ξ, Im ξ)`.
pub fn real_linear_matrix(a: C64, b: C64) -> Matrix2<f64> {
    Matrix2::new(a.re + b.re, -a.im + b.im, a.im + b.im, a.re - b.re)
}

/// Inverse of [`real_linear_matrix`].
pub fn real_linear_parts(m: &Matrix2<f64>) -> Wirtinger {
    let a = C64::new((m[(0, 0)] + m[(1, 1)]) / 2.0, (m[(1, 0)] - m[(0, 1)]) / 2.0);
    let b = C64::new((m[(0, 0)] - m[(1, 1)]) / 2.0, (m[(1, 0)] + m[(0, 1)]) / 2.0);
    (a, b)
}

fn apply(m: &Matrix2<f64>, z: C64) -> C64 {
    let v = m * Vector2::new(z.re, z.im);
    C64::new(v[0], v[1])
}

/// Central-difference Wirtinger derivatives of `f` at `v`.
pub fn fd_wirtinger<F: Fn(C64) -> Result<C64>>(f: F, v: C64, h: f64) -> Result<Wirtinger> {
    let fx = (f(v + h)? - f(v - h)?) / (2.0 * h);
    let fy = (f(v + I * h)? - f(v - I * h)?) / (2.0 * h);
    Ok(((fx - I * fy) / 2.0, (fx + I * fy) / 2.0))
}

/// One monomial `c · z^a z̄^b w^c w̄^d λ^e λ̄^f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub coeff: C64,
    pub exps: [u32; 6],
}

/// Polynomial in `(z, z̄, w, w̄, λ, λ̄)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PolyGerm {
    pub terms: Vec<PolyTerm>,
}

fn powi(z: C64, n: u32) -> C64 {
    let mut r = C64::new(1.0, 0.0);
    for _ in 0..n {
        r *= z;
    }
    r
}

impl PolyGerm {
    pub fn new(terms: Vec<PolyTerm>) -> Self {
        Self { terms }
    }

    pub fn term(coeff: C64, exps: [u32; 6]) -> PolyTerm {
        PolyTerm { coeff, exps }
    }

    fn vars(z: C64, w: C64, l: C64) -> [C64; 6] {
        [z, z.conj(), w, w.conj(), l, l.conj()]
    }

    pub fn eval(&self, z: C64, w: C64, l: C64) -> C64 {
        let v = Self::vars(z, w, l);
        self.terms
            .iter()
            .map(|t| t.exps.iter().zip(v.iter()).fold(t.coeff, |acc, (&e, &x)| acc * powi(x, e)))
            .sum()
    }

    /// Partial derivative in slot `k` of `(z, z̄, w, w̄, λ, λ̄)`.
    fn partial(&self, k: usize, z: C64, w: C64, l: C64) -> C64 {
        let v = Self::vars(z, w, l);
        let mut s = C64::new(0.0, 0.0);
        for t in &self.terms {
            if t.exps[k] == 0 {
                continue;
            }
            let mut p = t.coeff * t.exps[k] as f64;
            for (j, (&e, &x)) in t.exps.iter().zip(v.iter()).enumerate() {
                p *= powi(x, if j == k { e - 1 } else { e });
            }
            s += p;
        }
        s
    }

    pub fn wirtinger(&self, slot: usize, z: C64, w: C64, l: C64) -> Wirtinger {
        (self.partial(2 * slot, z, w, l), self.partial(2 * slot + 1, z, w, l))
    }

    fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if !(t.coeff.re.is_finite() && t.coeff.im.is_finite()) {
                return Err(Error::validation("germ coefficients must be finite"));
            }
            if t.exps.iter().sum::<u32>() > 16 {
                return Err(Error::validation("germ monomials are limited to total degree 16"));
            }
        }
        Ok(())
    }
}

/// Polydisk on which a germ is declared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GermDomain {
    pub z_radius: f64,
    pub w_radius: f64,
    pub lambda_radius: f64,
}

impl Default for GermDomain {
    fn default() -> Self {
        Self { z_radius: 1.0, w_radius: 1.0, lambda_radius: 1.0 }
    }
}

impl GermDomain {
    pub fn contains(&self, z: C64, w: C64, l: C64) -> bool {
        z.norm() <= self.z_radius && w.norm() <= self.w_radius && l.norm() <= self.lambda_radius
    }
}

/// Real-linear change of chart `z' = φ z`, `w' = ψ w` making the fiber
/// tangent complex-linear at the base plane.
#[derive(Debug, Clone, PartialEq)]
struct Frame {
    phi_inv: Matrix2<f64>,
    psi: Matrix2<f64>,
    psi_inv: Matrix2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
enum GermSource {
    Zero,
    Polynomial(PolyGerm),
    /// Germ of a field at a base point, in sheared coordinates
    /// `x = x0 + z`, `y = y0 + w + λ0 z + μ z̄`, optionally followed by a frame.
    Field {
        field: Box<FieldDef>,
        base: (C64, C64),
        lambda0: C64,
        mu: C64,
        frame: Option<Frame>,
    },
}

/// Local germ `h(z, w, λ)` with its declared domain and normalization flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartGerm {
    source: GermSource,
    pub domain: GermDomain,
    /// `h(0,0,0) = 0` holds by construction.
    pub value_normalized: bool,
    /// `D₃h(0,0,0) = 0` holds by construction.
    pub slope_normalized: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GermAudit {
    pub samples: usize,
    pub sup_d3: f64,
    pub value_at_origin: f64,
    pub d3_at_origin: f64,
    pub pass: bool,
}

impl ChartGerm {
    pub fn zero(domain: GermDomain) -> Self {
        Self { source: GermSource::Zero, domain, value_normalized: true, slope_normalized: true }
    }

    pub fn polynomial(p: PolyGerm, domain: GermDomain) -> Result<Self> {
        p.validate()?;
        let o = C64::new(0.0, 0.0);
        let value_normalized = p.eval(o, o, o).norm() < 1e-12;
        let slope_normalized = real_linear_norm(p.wirtinger(2, o, o, o)) < 1e-12;
        Ok(Self { source: GermSource::Polynomial(p), domain, value_normalized, slope_normalized })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.source, GermSource::Zero)
    }

    pub fn eval(&self, z: C64, w: C64, l: C64) -> Result<C64> {
        match &self.source {
            GermSource::Zero => Ok(C64::new(0.0, 0.0)),
            GermSource::Polynomial(p) => Ok(p.eval(z, w, l)),
            GermSource::Field { field, base, lambda0, mu, frame } => match frame {
                None => {
                    let q = (base.0 + z, base.1 + w + lambda0 * z + mu * z.conj());
                    Ok(field.h_field(q, lambda0 + l)? - mu)
                }
                Some(fr) => framed_eval(field, *base, *lambda0, *mu, fr, z, w, l),
            },
        }
    }

    /// Wirtinger derivatives in slot 0 (z), 1 (w) or 2 (λ).
    pub fn derivative(&self, slot: usize, z: C64, w: C64, l: C64) -> Result<Wirtinger> {
        match &self.source {
            GermSource::Zero => Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0))),
            GermSource::Polynomial(p) => Ok(p.wirtinger(slot, z, w, l)),
            GermSource::Field { field, frame: None, .. } if slot == 2 && !field.depends_on_slope() => {
                Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0)))
            }
            _ => {
                let f = |v: C64| match slot {
                    0 => self.eval(v, w, l),
                    1 => self.eval(z, v, l),
                    _ => self.eval(z, w, v),
                };
                let c = [z, w, l][slot];
                fd_wirtinger(f, c, GERM_FD_STEP)
            }
        }
    }

    pub fn d3_norm(&self, z: C64, w: C64, l: C64) -> Result<f64> {
        Ok(real_linear_norm(self.derivative(2, z, w, l)?))
    }

    /// Samples `‖D₃h‖` on the declared domain and checks the normalization.
    pub fn audit(&self, samples: usize, seed: u64) -> Result<GermAudit> {
        let mut r = sampling::rng(seed);
        let o = C64::new(0.0, 0.0);
        let mut sup = self.d3_norm(o, o, o)?;
        let d0 = sup;
        let h0 = self.eval(o, o, o)?.norm();
        for _ in 0..samples {
            let z = sampling::random_in_disk(&mut r, self.domain.z_radius);
            let w = sampling::random_in_disk(&mut r, self.domain.w_radius);
            let l = sampling::random_in_disk(&mut r, self.domain.lambda_radius);
            sup = sup.max(self.d3_norm(z, w, l)?);
        }
        let normalized_ok = (!self.value_normalized || h0 < 1e-12) && (!self.slope_normalized || d0 < 1e-12);
        Ok(GermAudit {
            samples,
            sup_d3: sup,
            value_at_origin: h0,
            d3_at_origin: d0,
            pass: sup < 1.0 && normalized_ok,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn framed_eval(
    field: &FieldDef,
    base: (C64, C64),
    lambda0: C64,
    mu: C64,
    fr: &Frame,
    z: C64,
    w: C64,
    l: C64,
) -> Result<C64> {
    let zs = apply(&fr.phi_inv, z);
    let ws = apply(&fr.psi_inv, w);
    let q = (base.0 + zs, base.1 + ws + lambda0 * zs + mu * zs.conj());
    // find the sheared slope ν whose image under the frame has linear part l
    let image = |nu: C64| -> Result<Wirtinger> {
        let hs = field.h_field(q, lambda0 + nu)? - mu;
        Ok(real_linear_parts(&(fr.psi * real_linear_matrix(nu, hs) * fr.phi_inv)))
    };
    let mut nu = real_linear_parts(&(fr.psi_inv * real_linear_matrix(l, C64::new(0.0, 0.0)) * phi_of(fr))).0;
    for _ in 0..50 {
        let r = image(nu)?.0 - l;
        if r.norm() < 1e-14 {
            break;
        }
        let (da, db) = fd_wirtinger(|v| Ok(image(v)?.0), nu, GERM_FD_STEP)?;
        let jac = real_linear_matrix(da, db);
        let Some(inv) = jac.try_inverse() else {
            return Err(Error::Internal("singular frame correction".into()));
        };
        nu -= apply(&inv, r);
    }
    let (lin, anti) = image(nu)?;
    if (lin - l).norm() > 1e-10 {
        return Err(Error::Internal("frame correction did not converge".into()));
    }
    Ok(anti)
}

fn phi_of(fr: &Frame) -> Matrix2<f64> {
    fr.phi_inv.try_inverse().unwrap_or_else(Matrix2::identity)
}

/// Radial bump: 1 on `r ≤ inner`, 0 on `r ≥ outer`, smoothstep in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BumpProfile {
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// 1: cubic smoothstep (C¹), 2: quintic smoothstep (C²).
    pub smoothstep_order: u32,
}

impl Default for BumpProfile {
    fn default() -> Self {
        Self { inner_radius: 1.0, outer_radius: 2.0, smoothstep_order: 2 }
    }
}

impl BumpProfile {
    fn step(&self, t: f64) -> (f64, f64) {
        match self.smoothstep_order {
            1 => (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t)),
            _ => (
                t * t * t * (t * (6.0 * t - 15.0) + 10.0),
                30.0 * t * t * (t - 1.0) * (t - 1.0),
            ),
        }
    }

    /// `(ρ(r), ρ'(r))`.
    pub fn radial(&self, r: f64) -> (f64, f64) {
        if r <= self.inner_radius {
            return (1.0, 0.0);
        }
        if r >= self.outer_radius {
            return (0.0, 0.0);
        }
        let w = self.outer_radius - self.inner_radius;
        let (s, ds) = self.step((r - self.inner_radius) / w);
        (1.0 - s, -ds / w)
    }

    /// `(ρ, ∂ρ/∂x, ∂ρ/∂x̄)` at `x`.
    pub fn at(&self, x: C64) -> (f64, C64, C64) {
        let r = x.norm();
        let (rho, dr) = self.radial(r);
        if dr == 0.0 {
            return (rho, C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        }
        (rho, x.conj() * (dr / (2.0 * r)), x * (dr / (2.0 * r)))
    }
}

/// Parameters of the tame structure that is standard on the unit bidisk and
/// twisted in the annulus `1 < |x| < 2` so that its lines are the graphs
/// `y = α + αx + c ρ(x) ᾱ x²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Example5 {
    pub coefficient: f64,
    #[serde(default)]
    pub bump: BumpProfile,
    #[serde(default = "default_alpha_radius")]
    pub alpha_radius: f64,
}

fn default_alpha_radius() -> f64 {
    0.2
}

impl Default for Example5 {
    fn default() -> Self {
        Self { coefficient: 0.2, bump: BumpProfile::default(), alpha_radius: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "camelCase")]
pub enum FieldDef {
    Standard,
    Example5(Example5),
    /// Plane family `δy = λδx + H δx̄` with `H` a polynomial in
    /// `(x, x̄, y, ȳ, λ, λ̄)`.
    GermTable(PolyGerm),
}

/// Build-time audit of an example field.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Example5Audit {
    pub samples: usize,
    /// Largest condition number of the recovery system over points where it
    /// stays below the limit.
    pub max_condition: f64,
    /// Fraction of the sampled `|x| < 2` points where the system is too
    /// ill-conditioned (the fold of the line family).
    pub singular_fraction: f64,
    pub sup_b: f64,
    /// Minimum of `1 + |λ|² − |b|²` over samples (area of positive
    /// orthonormal bases under the standard symplectic form, up to scale).
    pub min_taming: f64,
}

impl FieldDef {
    pub fn depends_on_slope(&self) -> bool {
        match self {
            FieldDef::GermTable(p) => p.terms.iter().any(|t| t.exps[4] + t.exps[5] > 0),
            _ => false,
        }
    }

    /// `H(q, λ)`: the antilinear part of the plane with slope `λ` at `q`.
    pub fn h_field(&self, q: (C64, C64), lambda: C64) -> Result<C64> {
        match self {
            FieldDef::Standard => Ok(C64::new(0.0, 0.0)),
            FieldDef::Example5(e) => e.b(q.0, q.1),
            FieldDef::GermTable(p) => Ok(p.eval(q.0, q.1, lambda)),
        }
    }

    pub fn h_field_slope(&self, q: (C64, C64), lambda: C64) -> Result<Wirtinger> {
        match self {
            FieldDef::GermTable(p) => Ok(p.wirtinger(2, q.0, q.1, lambda)),
            _ => Ok((C64::new(0.0, 0.0), C64::new(0.0, 0.0))),
        }
    }

    /// The plane `δy = λδx + H(q,λ)δx̄` as an oriented plane of R⁴.
    pub fn fiber_plane(&self, q: (C64, C64), lambda: C64) -> Result<OrientedPlane> {
        graph_plane(lambda, self.h_field(q, lambda)?)
    }

    pub fn as_example5(&self) -> Option<&Example5> {
        match self {
            FieldDef::Example5(e) => Some(e),
            _ => None,
        }
    }
}

/// Oriented tangent plane `{(ξ, aξ + bξ̄)}`.
pub fn graph_plane(a: C64, b: C64) -> Result<OrientedPlane> {
    let col = |xi: C64| {
        let eta = a * xi + b * xi.conj();
        Vec4::new(xi.re, xi.im, eta.re, eta.im)
    };
    plane_from_span(&col(C64::new(1.0, 0.0)), &col(I))
}

/// `(a, b)` with `P = {(ξ, aξ + bξ̄)}`, or `None` for planes that are not
/// graphs over the first factor.
pub fn plane_slopes(p: &OrientedPlane) -> Result<Option<Wirtinger>> {
    let (x, y) = crate::grassmann4::spheres_to_plane(p)?;
    let m = Matrix2::new(x[0], y[0], x[1], y[1]);
    if m.determinant().abs() < 1e-9 {
        return Ok(None);
    }
    let n = Matrix2::new(x[2], y[2], x[3], y[3]);
    let inv = m.try_inverse().ok_or_else(|| Error::numerical("singular plane projection"))?;
    Ok(Some(real_linear_parts(&(n * inv))))
}

pub fn build_example5(params: Example5) -> Result<(FieldDef, Example5Audit)> {
    if !(params.coefficient >= 0.0 && params.coefficient <= 0.2) {
        return Err(Error::validation("example coefficient must lie in [0, 1/5]"));
    }
    let b = params.bump;
    if !(b.inner_radius == 1.0 && b.outer_radius == 2.0) {
        return Err(Error::validation("bump radii are fixed at 1 and 2"));
    }
    if !matches!(b.smoothstep_order, 1 | 2) {
        return Err(Error::validation("smoothstep order must be 1 or 2"));
    }
    if !(params.alpha_radius > 0.0 && params.alpha_radius <= 0.2) {
        return Err(Error::validation("alpha radius must lie in (0, 0.2]"));
    }
    let audit = params.audit(4000, 17);
    Ok((FieldDef::Example5(params), audit))
}

impl Example5 {
    /// `(P, Q)` with `y = Pα + Qᾱ` on the line through `x`.
    fn recovery(&self, x: C64) -> (C64, C64) {
        let (rho, _, _) = self.bump.at(x);
        (C64::new(1.0, 0.0) + x, x * x * (self.coefficient * rho))
    }

    pub fn recovery_condition(&self, x: C64) -> f64 {
        let (p, q) = self.recovery(x);
        let gap = (p.norm() - q.norm()).abs();
        if gap == 0.0 {
            f64::INFINITY
        } else {
            (p.norm() + q.norm()) / gap
        }
    }

    /// Parameter of the line of the family through `(x, y)`.
    pub fn recover_alpha(&self, x: C64, y: C64) -> Result<C64> {
        let (p, q) = self.recovery(x);
        let cond = self.recovery_condition(x);
        if !(cond < RECOVERY_CONDITION_LIMIT) {
            return Err(Error::domain(format!(
                "line family folds near x = {x}: recovery condition {cond:.3e}"
            )));
        }
        Ok((p.conj() * y - q * y.conj()) / (p.norm_sqr() - q.norm_sqr()))
    }

    /// `b(x, y) = c ᾱ x² ∂ρ/∂x̄` for the line of parameter α through `(x, y)`;
    /// zero off the annulus and off the swept parameter disk.
    pub fn b(&self, x: C64, y: C64) -> Result<C64> {
        let r = x.norm();
        if r <= self.bump.inner_radius || r >= self.bump.outer_radius || self.coefficient == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let alpha = self.recover_alpha(x, y)?;
        if alpha.norm() > self.alpha_radius {
            return Ok(C64::new(0.0, 0.0));
        }
        let (_, _, drho_bar) = self.bump.at(x);
        Ok(alpha.conj() * x * x * drho_bar * self.coefficient)
    }

    pub fn line(&self, alpha: C64) -> Result<LineGraph> {
        if !(alpha.norm() <= self.alpha_radius) {
            return Err(Error::domain(format!(
                "line parameter {alpha} outside the disk of radius {}",
                self.alpha_radius
            )));
        }
        Ok(LineGraph { alpha, field: *self })
    }

    fn audit(&self, samples: usize, seed: u64) -> Example5Audit {
        let mut r = sampling::rng(seed);
        let mut max_condition = 0.0f64;
        let mut singular = 0usize;
        let mut sup_b = 0.0f64;
        let mut min_taming = f64::INFINITY;
        for _ in 0..samples {
            let x = sampling::random_in_disk(&mut r, 2.0);
            let alpha = sampling::random_in_disk(&mut r, self.alpha_radius);
            let lambda = sampling::random_in_disk(&mut r, 2.0);
            let cond = self.recovery_condition(x);
            if cond < RECOVERY_CONDITION_LIMIT {
                max_condition = max_condition.max(cond);
            } else {
                singular += 1;
                continue;
            }
            let y = LineGraph { alpha, field: *self }.eval_unchecked(x);
            if let Ok(b) = self.b(x, y) {
                sup_b = sup_b.max(b.norm());
                min_taming = min_taming.min(1.0 + lambda.norm_sqr() - b.norm_sqr());
            }
        }
        Example5Audit {
            samples,
            max_condition,
            singular_fraction: singular as f64 / samples as f64,
            sup_b,
            min_taming,
        }
    }
}

/// The line `y = f_α(x) = α + αx + c ρ(x) ᾱ x²` of an example field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineGraph {
    pub alpha: C64,
    pub field: Example5,
}

pub fn line_alpha(field: &FieldDef, alpha: C64) -> Result<LineGraph> {
    match field {
        FieldDef::Example5(e) => e.line(alpha),
        _ => Err(Error::validation("line families exist only for the example field")),
    }
}

impl LineGraph {
    pub(crate) fn eval_unchecked(&self, x: C64) -> C64 {
        let a = self.alpha;
        let (rho, _, _) = self.field.bump.at(x);
        a + a * x + a.conj() * x * x * (self.field.coefficient * rho)
    }

    pub fn eval(&self, x: C64) -> Result<C64> {
        if !(x.norm() < self.field.bump.outer_radius) {
            return Err(Error::domain("line graphs are defined on |x| < 2"));
        }
        Ok(self.eval_unchecked(x))
    }

    /// `(∂f/∂x, ∂f/∂x̄)`.
    pub fn derivative(&self, x: C64) -> Wirtinger {
        let a = self.alpha;
        let c = self.field.coefficient;
        let (rho, dx, dxb) = self.field.bump.at(x);
        (a + a.conj() * c * (dx * x * x + x * 2.0 * rho), a.conj() * c * dxb * x * x)
    }

    pub fn tangent_plane(&self, x: C64) -> Result<OrientedPlane> {
        let (a, b) = self.derivative(x);
        graph_plane(a, b)
    }

    /// CSV sample table on an `n × n` grid over `|x| < 2`.
    pub fn to_csv(&self, n: usize) -> String {
        let mut s = String::from("re_x,im_x,re_y,im_y\n");
        let rmax = self.field.bump.outer_radius;
        for i in 0..n {
            for j in 0..n {
                let x = C64::new(
                    -rmax + 2.0 * rmax * (j as f64 + 0.5) / n as f64,
                    -rmax + 2.0 * rmax * (i as f64 + 0.5) / n as f64,
                );
                if let Ok(y) = self.eval(x) {
                    s.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", x.re, x.im, y.re, y.im));
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LineIntersection {
    pub x: C64,
    pub y: C64,
    pub sign: IntersectionSign,
}

/// All intersections of two lines inside `|x| < 2`, by Newton's method from a
/// grid of seeds.
pub fn line_intersections(a: &LineGraph, b: &LineGraph) -> Result<Vec<LineIntersection>> {
    if a.alpha == b.alpha {
        return Err(Error::validation("lines coincide"));
    }
    let g = |x: C64| a.eval_unchecked(x) - b.eval_unchecked(x);
    let dg = |x: C64| {
        let (p, q) = a.derivative(x);
        let (r, s) = b.derivative(x);
        (p - r, q - s)
    };
    let rmax = a.field.bump.outer_radius;
    let mut roots: Vec<C64> = Vec::new();
    let n = 24;
    for i in 0..n {
        for j in 0..n {
            let mut x = C64::new(
                -rmax + 2.0 * rmax * (j as f64 + 0.5) / n as f64,
                -rmax + 2.0 * rmax * (i as f64 + 0.5) / n as f64,
            );
            if x.norm() >= rmax {
                continue;
            }
            let mut ok = false;
            for _ in 0..60 {
                let v = g(x);
                if v.norm() < 1e-15 * (a.alpha - b.alpha).norm().max(1e-300) {
                    ok = true;
                    break;
                }
                let (p, q) = dg(x);
                let Some(inv) = real_linear_matrix(p, q).try_inverse() else { break };
                let step = apply(&inv, v);
                x -= step;
                if !(x.norm() < rmax) {
                    break;
                }
                if step.norm() < 1e-15 {
                    ok = g(x).norm() < 1e-12 * (a.alpha - b.alpha).norm();
                    break;
                }
            }
            if ok && x.norm() < rmax && !roots.iter().any(|r| (r - x).norm() < 1e-8) {
                roots.push(x);
            }
        }
    }
    roots
        .into_iter()
        .map(|x| {
            let sign = intersection_sign(&a.tangent_plane(x)?, &b.tangent_plane(x)?);
            Ok(LineIntersection { x, y: a.eval_unchecked(x), sign })
        })
        .collect()
}

/// Germ of `field` at `point` adapted to `plane`.
pub fn germ_at(field: &FieldDef, point: (C64, C64), plane: &OrientedPlane) -> Result<ChartGerm> {
    let Some((lambda0, mu)) = plane_slopes(plane)? else {
        return Err(Error::validation("vertical planes are not graphs over the first factor"));
    };
    let expected = field.h_field(point, lambda0)?;
    if (expected - mu).norm() > FIBER_RESIDUAL_TOL {
        return Err(Error::validation(format!(
            "plane is not in the fiber at the point (residual {:.3e})",
            (expected - mu).norm()
        )));
    }
    let flat = GermDomain { z_radius: 1.0, w_radius: f64::MAX, lambda_radius: f64::MAX };
    let domain = match field {
        FieldDef::Standard => return Ok(ChartGerm::zero(flat)),
        FieldDef::Example5(e) => {
            if e.coefficient == 0.0 {
                return Ok(ChartGerm::zero(flat));
            }
            let room = (e.bump.outer_radius - point.0.norm()).max(0.0);
            GermDomain { z_radius: (0.5 * room).min(0.5), w_radius: 0.25, lambda_radius: 0.5 }
        }
        FieldDef::GermTable(_) => GermDomain { z_radius: 0.25, w_radius: 0.25, lambda_radius: 0.25 },
    };
    let (da, db) = field.h_field_slope(point, lambda0)?;
    let frame = if da.norm() + db.norm() < 1e-14 {
        None
    } else {
        Some(normalizing_frame(da, db)?)
    };
    let germ = ChartGerm {
        source: GermSource::Field { field: Box::new(field.clone()), base: point, lambda0, mu, frame },
        domain,
        value_normalized: true,
        slope_normalized: true,
    };
    let o = C64::new(0.0, 0.0);
    let h0 = germ.eval(o, o, o)?.norm();
    let d0 = germ.d3_norm(o, o, o)?;
    if h0 > 1e-12 || d0 > 1e-7 {
        return Err(Error::Internal(format!(
            "chart normalization failed: |h(0)| = {h0:.3e}, |D3 h(0)| = {d0:.3e}"
        )));
    }
    Ok(germ)
}

/// Complex structures on both factors commuting with the fiber tangent
/// `ν ↦ (ξ ↦ νξ + (Aν + Bν̄)ξ̄)`, turned into a change of chart.
fn normalizing_frame(a: C64, b: C64) -> Result<Frame> {
    let m1 = real_linear_matrix(C64::new(1.0, 0.0), a + b);
    let mi = real_linear_matrix(I, (a - b) * I);
    let m1_inv = m1
        .try_inverse()
        .ok_or_else(|| Error::Internal("degenerate fiber tangent".into()))?;
    let k = m1_inv * mi;
    let tr = k.trace() / 2.0;
    let disc = k.determinant() - tr * tr;
    if disc <= 1e-14 {
        return Err(Error::Internal("fiber tangent has no compatible complex structure".into()));
    }
    let mut j = (k - Matrix2::identity() * tr) / disc.sqrt();
    if j[(1, 0)] < 0.0 {
        j = -j;
    }
    let kw = m1 * j * m1_inv;
    let phi_inv = Matrix2::new(1.0, j[(0, 0)], 0.0, j[(1, 0)]);
    let psi_inv = Matrix2::new(1.0, kw[(0, 0)], 0.0, kw[(1, 0)]);
    let psi = psi_inv
        .try_inverse()
        .ok_or_else(|| Error::Internal("degenerate normalizing frame".into()))?;
    Ok(Frame { phi_inv, psi, psi_inv })
}

/// `ω₀(e₁, e₂)` for the positive orthonormal basis of the graph plane
/// `{(ξ, λξ + bξ̄)}`; positive iff the plane is tamed by the standard form.
pub fn standard_taming_area(lambda: C64, b: C64) -> f64 {
    let p = match graph_plane(lambda, b) {
        Ok(p) => p,
        Err(_) => return f64::NAN,
    };
    // ω₀ = dx1∧dx2 + dx3∧dx4 pairs with the plane bivector through e12 + e34
    let bv = p.bivector();
    bv.0[0] + bv.0[5]
}

/// Random points of the example field's chart region with their planes.
pub fn sample_example5_planes<R: Rng>(e: &Example5, r: &mut R) -> ((C64, C64), C64) {
    let x = sampling::random_in_disk(r, 1.95);
    let alpha = sampling::random_in_disk(r, e.alpha_radius);
    let y = LineGraph { alpha, field: *e }.eval_unchecked(x);
    let lambda = sampling::random_in_disk(r, 1.0);
    ((x, y), lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng;

    fn ex() -> Example5 {
        Example5::default()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn real_linear_roundtrip() {
        let (a, b) = (c(0.3, -1.2), c(0.7, 0.1));
        let m = real_linear_matrix(a, b);
        let z = c(0.4, 0.9);
        assert!((apply(&m, z) - (a * z + b * z.conj())).norm() < 1e-15);
        let (a2, b2) = real_linear_parts(&m);
        assert!((a - a2).norm() < 1e-15 && (b - b2).norm() < 1e-15);
    }

    #[test]
    fn bump_regions() {
        let p = BumpProfile::default();
        assert_eq!(p.radial(0.5), (1.0, 0.0));
        assert_eq!(p.radial(1.0), (1.0, 0.0));
        assert_eq!(p.radial(2.0), (0.0, 0.0));
        let (r, d) = p.radial(1.5);
        assert!((r - 0.5).abs() < 1e-15);
        let fd = (p.radial(1.5 + 1e-6).0 - p.radial(1.5 - 1e-6).0) / 2e-6;
        assert!((d - fd).abs() < 1e-8);
        let x = c(1.1, -0.7);
        let (_, dx, dxb) = p.at(x);
        let (fdx, fdxb) = fd_wirtinger(|v| Ok(C64::new(p.at(v).0, 0.0)), x, 1e-6).unwrap();
        assert!((dx - fdx).norm() < 1e-8 && (dxb - fdxb).norm() < 1e-8);
    }

    #[test]
    fn line_invariants() {
        let e = ex();
        let field = FieldDef::Example5(e);
        let l0 = line_alpha(&field, c(0.0, 0.0)).unwrap();
        for x in [c(0.3, 0.2), c(-1.5, 0.1), c(0.0, 1.9)] {
            assert_eq!(l0.eval(x).unwrap(), c(0.0, 0.0));
        }
        let a = c(0.12, -0.05);
        let l = line_alpha(&field, a).unwrap();
        assert_eq!(l.eval(c(0.0, 0.0)).unwrap(), a);
        assert!((l.derivative(c(0.0, 0.0)).0 - a).norm() < 1e-15);
        let x = c(0.4, -0.6);
        let closed = a + a * x + a.conj() * x * x * 0.2;
        assert!((l.eval(x).unwrap() - closed).norm() < 1e-15);
        assert!(line_alpha(&field, c(0.3, 0.0)).is_err());
        assert!(line_alpha(&FieldDef::Standard, a).is_err());
        assert!(l.eval(c(2.0, 0.0)).is_err());
        let csv = l.to_csv(8);
        assert!(csv.starts_with("re_x,im_x,re_y,im_y\n"));
    }

    #[test]
    fn b_vanishes_off_the_annulus_and_matches_lines() {
        let e = ex();
        let mut r = rng(3);
        for _ in 0..500 {
            let ((x, y), _) = sample_example5_planes(&e, &mut r);
            if x.norm() <= 1.0 {
                assert_eq!(e.b(x, y).unwrap(), c(0.0, 0.0));
            }
        }
        assert_eq!(e.b(c(2.5, 0.0), c(7.0, 1.0)).unwrap(), c(0.0, 0.0));
        // along each line b equals the antiholomorphic derivative
        let mut checked = 0;
        for _ in 0..200 {
            let alpha = sampling::random_in_disk(&mut r, 0.2);
            let l = e.line(alpha).unwrap();
            for k in 0..40 {
                let x = C64::from_polar(1.0 + k as f64 / 40.0, 0.7 * k as f64);
                match e.b(x, l.eval(x).unwrap()) {
                    Ok(b) => {
                        assert!((b - l.derivative(x).1).norm() < 1e-12);
                        checked += 1;
                    }
                    Err(err) => assert!(matches!(err, Error::Domain(_))),
                }
            }
        }
        assert!(checked > 7000);
    }

    #[test]
    fn recovery_is_singular_on_the_fold() {
        let e = ex();
        assert!(e.recover_alpha(c(-1.29, 0.0), c(0.0, 0.0)).is_err());
        assert!(e.recovery_condition(c(1.5, 0.0)) < 2.0);
    }

    #[test]
    fn build_and_audit() {
        let (f, audit) = build_example5(ex()).unwrap();
        assert!(f.as_example5().is_some());
        assert!(audit.sup_b < 1.0);
        assert!(audit.min_taming > 0.0);
        assert!(audit.singular_fraction > 0.0 && audit.singular_fraction < 0.1);
        assert!(build_example5(Example5 { coefficient: 0.3, ..ex() }).is_err());
    }

    #[test]
    fn intersections_of_lines() {
        let e = ex();
        let mut r = rng(21);
        for _ in 0..50 {
            let a = e.line(sampling::random_in_disk(&mut r, 0.2)).unwrap();
            let b = e.line(sampling::random_in_disk(&mut r, 0.2)).unwrap();
            let pts = line_intersections(&a, &b).unwrap();
            assert_eq!(pts.len(), 1, "{pts:?}");
            assert_eq!(pts[0].sign, IntersectionSign::Positive);
        }
    }

    #[test]
    fn standard_and_unit_bidisk_germs_vanish() {
        let p = graph_plane(c(0.3, 0.1), c(0.0, 0.0)).unwrap();
        let g = germ_at(&FieldDef::Standard, (c(0.2, 0.0), c(1.0, 1.0)), &p).unwrap();
        assert!(g.is_zero());
        let field = FieldDef::Example5(ex());
        let g = germ_at(&field, (c(0.3, 0.2), c(0.1, 0.0)), &graph_plane(c(0.0, 0.0), c(0.0, 0.0)).unwrap()).unwrap();
        for z in [c(0.1, 0.1), c(-0.2, 0.05)] {
            assert_eq!(g.eval(z, c(0.05, 0.0), c(0.1, 0.0)).unwrap(), c(0.0, 0.0));
        }
        let zero = FieldDef::Example5(Example5 { coefficient: 0.0, ..ex() });
        assert!(germ_at(&zero, (c(1.5, 0.0), c(0.0, 0.0)), &p).unwrap().is_zero());
    }

    #[test]
    fn annulus_germ_is_nonzero_and_normalized() {
        let e = ex();
        let l = e.line(c(0.1, 0.05)).unwrap();
        let x = c(1.4, 0.3);
        let (lam, mu) = l.derivative(x);
        let field = FieldDef::Example5(e);
        let g = germ_at(&field, (x, l.eval(x).unwrap()), &graph_plane(lam, mu).unwrap()).unwrap();
        let o = c(0.0, 0.0);
        assert!(g.eval(o, o, o).unwrap().norm() < 1e-12);
        assert!(g.eval(c(0.1, 0.0), o, o).unwrap().norm() > 1e-4);
        let audit = g.audit(200, 1).unwrap();
        assert!(audit.pass, "{audit:?}");
        // a plane outside the fiber is rejected
        let bad = graph_plane(lam, mu + 0.01).unwrap();
        assert!(germ_at(&field, (x, l.eval(x).unwrap()), &bad).unwrap_err().is_validation());
    }

    #[test]
    fn slope_dependent_table_is_normalized() {
        // H = 0.3 λ̄ + 0.2 λ + 0.1 x̄ λ̄²
        let table = PolyGerm::new(vec![
            PolyGerm::term(c(0.3, 0.0), [0, 0, 0, 0, 0, 1]),
            PolyGerm::term(c(0.0, 0.2), [0, 0, 0, 0, 1, 0]),
            PolyGerm::term(c(0.1, 0.0), [0, 1, 0, 0, 0, 2]),
        ]);
        let field = FieldDef::GermTable(table);
        let p = (c(0.1, 0.1), c(0.0, 0.0));
        let lam = c(0.2, -0.1);
        let plane = field.fiber_plane(p, lam).unwrap();
        let g = germ_at(&field, p, &plane).unwrap();
        let o = c(0.0, 0.0);
        assert!(g.eval(o, o, o).unwrap().norm() < 1e-12);
        assert!(g.d3_norm(o, o, o).unwrap() < 1e-7);
        assert!(g.audit(100, 2).unwrap().sup_d3 < 1.0);
    }

    #[test]
    fn taming_area() {
        assert!((standard_taming_area(c(0.0, 0.0), c(0.0, 0.0)) - 1.0).abs() < 1e-12);
        let mut r = rng(5);
        for _ in 0..200 {
            let l = sampling::random_in_disk(&mut r, 3.0);
            let b = sampling::random_in_disk(&mut r, 0.99);
            let area = standard_taming_area(l, b);
            let (n1, n2) = (1.0 + (l + b).norm_sqr(), 1.0 + (l - b).norm_sqr());
            let g = -2.0 * (b.conj() * l).im;
            let expect = (1.0 + l.norm_sqr() - b.norm_sqr()) / (n1 * n2 - g * g).sqrt();
            assert!(area > 0.0 && (area - expect).abs() < 1e-9, "{area} {expect}");
        }
    }
}
