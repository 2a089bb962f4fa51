//! The dual construction at the level of linear algebra, pencil tangents in
//! line-parameter space, and the certificate that the dual of the example
//! field is not a linear structure.
//!
//! A pairing `i: A → Hom(P, N)` between 2-planes is stored as the tensor
//! `(M₁, M₂)` with `i(α) = α₁M₁ + α₂M₂`. The dual `i*(ξ)(α) = i(α)(ξ)` is the
//! transposed tensor `N_b[:, a] = M_a[:, b]`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::elliptic_field::{real_linear_matrix, real_linear_parts, FieldDef, LineGraph};
use crate::error::{Error, Result};
use crate::sampling;

pub type V2 = Vector2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingMap {
    pub m: [Matrix2<f64>; 2],
}

impl PairingMap {
    pub fn new(m1: Matrix2<f64>, m2: Matrix2<f64>) -> Self {
        Self { m: [m1, m2] }
    }

    /// `i(α)ξ = αξ`.
    pub fn complex_multiplication() -> Self {
        Self::from_fiber_slope(C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    }

    /// `i(α)ξ = αξ + (Aα + Bᾱ)ξ̄`: the tangent of a fiber whose chart germ
    /// has `D₃h = (A, B)` at the base plane.
    pub fn from_fiber_slope(a: C64, b: C64) -> Self {
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        Self::new(real_linear_matrix(one, a + b), real_linear_matrix(i, (a - b) * i))
    }

    pub fn at(&self, alpha: &V2) -> Matrix2<f64> {
        self.m[0] * alpha[0] + self.m[1] * alpha[1]
    }

    /// `i(α)(ξ)`, summed in an order symmetric under transposition so that
    /// the dual identity holds bit for bit.
    pub fn apply(&self, alpha: &V2, xi: &V2) -> V2 {
        let t = |a: usize, b: usize, n: usize| (alpha[a] * xi[b]) * self.m[a][(n, b)];
        V2::from_fn(|n, _| (t(0, 0, n) + t(1, 1, n)) + (t(0, 1, n) + t(1, 0, n)))
    }

    /// The transposed tensor.
    pub fn dual(&self) -> PairingMap {
        let mut n = [Matrix2::zeros(); 2];
        for (b, nb) in n.iter_mut().enumerate() {
            for a in 0..2 {
                nb.set_column(a, &self.m[a].column(b));
            }
        }
        PairingMap { m: n }
    }

    /// Exact test that `det i(α) > 0` for every `α ≠ 0` and that `α ↦ i(α)`
    /// winds like complex multiplication.
    pub fn is_elliptic(&self) -> bool {
        let d1 = self.m[0].determinant();
        let d2 = self.m[1].determinant();
        let mixed = (self.m[0] + self.m[1]).determinant() - d1 - d2;
        let (a1, _) = real_linear_parts(&self.m[0]);
        let (a2, _) = real_linear_parts(&self.m[1]);
        d1 > 0.0 && 4.0 * d1 * d2 - mixed * mixed > 0.0 && (a1.conj() * a2).im > 0.0
    }
}

/// `i*(ξ)` as a map from the parameter plane to `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualMap {
    dual: PairingMap,
    xi: V2,
}

impl DualMap {
    pub fn apply(&self, alpha: &V2) -> V2 {
        self.dual.apply(&self.xi, alpha)
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        self.dual.at(&self.xi)
    }
}

pub fn dual_pairing(i: &PairingMap, xi: &V2) -> DualMap {
    DualMap { dual: i.dual(), xi: *xi }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DualEllipticityReport {
    pub source_elliptic: bool,
    pub samples: usize,
    /// Smallest `det i*(ξ)` over sampled unit ξ.
    pub min_det: f64,
    pub failures: usize,
    /// The exact test applied to the dual tensor.
    pub dual_elliptic: bool,
    pub pass: bool,
}

/// Sampled check that `det i*(ξ) > 0` for unit ξ. The source must pass the
/// exact ellipticity test first; otherwise the dual is not examined.
pub fn dual_fiber_elliptic(i: &PairingMap, samples: usize, seed: u64) -> DualEllipticityReport {
    if !i.is_elliptic() {
        return DualEllipticityReport {
            source_elliptic: false,
            samples: 0,
            min_det: f64::NAN,
            failures: 0,
            dual_elliptic: false,
            pass: false,
        };
    }
    let dual = i.dual();
    let mut r = sampling::rng(seed);
    let mut min_det = f64::INFINITY;
    let mut failures = 0;
    for _ in 0..samples {
        let t: f64 = r.gen_range(0.0..std::f64::consts::TAU);
        let d = dual.at(&V2::new(t.cos(), t.sin())).determinant();
        min_det = min_det.min(d);
        if !(d > 0.0) {
            failures += 1;
        }
    }
    let dual_elliptic = dual.is_elliptic();
    DualEllipticityReport {
        source_elliptic: true,
        samples,
        min_det,
        failures,
        dual_elliptic,
        pass: failures == 0 && dual_elliptic,
    }
}

/// Elliptic pairing drawn at random: a fiber slope with `|A| + |B| < 1`
/// conjugated by random orientation-preserving maps of `P` and `N`.
pub fn random_elliptic_pairing<R: Rng>(r: &mut R) -> PairingMap {
    let budget: f64 = r.gen_range(0.0..0.95);
    let split: f64 = r.gen();
    let a = C64::from_polar(budget * split, r.gen_range(0.0..std::f64::consts::TAU));
    let b = C64::from_polar(budget * (1.0 - split), r.gen_range(0.0..std::f64::consts::TAU));
    let base = PairingMap::from_fiber_slope(a, b);
    let gl_plus = |r: &mut R| loop {
        let m = Matrix2::from_fn(|_, _| sampling::standard_normal(r));
        if m.determinant() > 0.1 {
            return m;
        }
    };
    let (g, h) = (gl_plus(r), gl_plus(r));
    PairingMap::new(g * base.m[0] * h, g * base.m[1] * h)
}

/// A one-parameter family of lines `t ↦ L(t)` with a base line `L(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum PencilPath {
    /// `L(tα, tα)` of the example field; `L(0)` is the x-axis.
    Example5Scaled { alpha: C64 },
    /// Standard lines `y = y_v + (slope + t)(x − x_v)` through `v`.
    StandardPencil { slope: C64 },
    /// A fixed line of the example field.
    Constant { alpha: C64 },
}

/// Line-parameter derivative and limit intersection of a pencil path.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PencilTangent {
    /// Derivative at `t = 0` of the line parameters (intercept, slope).
    pub parameter_derivative: [C64; 2],
    /// `lim_{t→0} L(t) ∩ L(0)` as a point of C², when the path moves.
    pub limit_intersection: Option<[C64; 2]>,
    /// Differences of the Richardson-extrapolated limit across step halving.
    pub richardson_error: f64,
    /// Observed convergence order of the central difference, when
    /// measurable above roundoff.
    pub observed_order: Option<f64>,
}

enum PathLines<'a> {
    Example(&'a crate::elliptic_field::Example5, C64),
    Standard(C64, C64, C64),
}

impl PathLines<'_> {
    fn eval(&self, t: f64, x: C64) -> C64 {
        match self {
            PathLines::Example(e, a) => LineGraph { alpha: a * t, field: **e }.eval_unchecked(x),
            PathLines::Standard(xv, yv, s) => yv + (s + t) * (x - xv),
        }
    }

    fn params(&self, t: f64) -> [C64; 2] {
        match self {
            PathLines::Example(_, a) => [a * t, a * t],
            PathLines::Standard(xv, yv, s) => [yv - (s + t) * xv, s + t],
        }
    }
}

fn newton_root<F: Fn(C64) -> C64>(f: F, seed: C64, bound: f64) -> Option<C64> {
    let mut x = seed;
    for _ in 0..80 {
        let v = f(x);
        let (a, b) = crate::elliptic_field::fd_wirtinger(|z| Ok(f(z)), x, 1e-7).ok()?;
        let inv = real_linear_matrix(a, b).try_inverse()?;
        let s = inv * V2::new(v.re, v.im);
        x -= C64::new(s[0], s[1]);
        if !(x.norm() < bound) {
            return None;
        }
        if s.norm() < 1e-14 * (1.0 + x.norm()) {
            return Some(x);
        }
    }
    (f(x).norm() < 1e-12).then_some(x)
}

/// Tangent of a pencil path at `t = 0`. `v` is the pencil point; its first
/// coordinate seeds the root finder for the limit intersection.
pub fn pencil_tangent(field: &FieldDef, v: (C64, C64), path: &PencilPath) -> Result<PencilTangent> {
    let lines = match (path, field) {
        (PencilPath::Example5Scaled { alpha }, FieldDef::Example5(e)) => {
            if alpha.norm() > e.alpha_radius {
                return Err(Error::domain("path leaves the declared parameter disk"));
            }
            PathLines::Example(e, *alpha)
        }
        (PencilPath::Constant { alpha }, FieldDef::Example5(e)) => {
            if alpha.norm() > e.alpha_radius {
                return Err(Error::domain("path leaves the declared parameter disk"));
            }
            return Ok(PencilTangent {
                parameter_derivative: [C64::new(0.0, 0.0); 2],
                limit_intersection: None,
                richardson_error: 0.0,
                observed_order: None,
            });
        }
        (PencilPath::StandardPencil { slope }, FieldDef::Standard) => PathLines::Standard(v.0, v.1, *slope),
        _ => return Err(Error::validation("path does not belong to the field's line family")),
    };

    let h = 1e-3;
    let central = |s: f64| {
        let (p, m) = (lines.params(s), lines.params(-s));
        [(p[0] - m[0]) / (2.0 * s), (p[1] - m[1]) / (2.0 * s)]
    };
    let d = [central(h), central(h / 2.0), central(h / 4.0)];
    let diff = |a: &[C64; 2], b: &[C64; 2]| (a[0] - b[0]).norm() + (a[1] - b[1]).norm();
    let (e1, e2) = (diff(&d[0], &d[1]), diff(&d[1], &d[2]));
    let observed_order = (e2 > 1e-13).then(|| (e1 / e2).log2());
    let rich = [
        (d[2][0] * 4.0 - d[1][0]) / 3.0,
        (d[2][1] * 4.0 - d[1][1]) / 3.0,
    ];

    let bound = 2.0;
    let mut xs = Vec::new();
    for s in [h, h / 2.0, h / 4.0] {
        let q = |x: C64| (lines.eval(s, x) - lines.eval(0.0, x)) / s;
        let Some(x) = newton_root(q, v.0, bound) else {
            return Err(Error::numerical(format!(
                "no intersection of L(t) with L(0) found near x = {} at t = {s:e}",
                v.0
            )));
        };
        xs.push(x);
    }
    let limit = (xs[2] * 4.0 - xs[1]) / 3.0;
    let richardson_error = ((xs[1] * 4.0 - xs[0]) / 3.0 - limit).norm();
    Ok(PencilTangent {
        parameter_derivative: rich,
        limit_intersection: Some([limit, lines.eval(0.0, limit)]),
        richardson_error,
        observed_order,
    })
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DualCertificate {
    pub alpha: C64,
    pub coefficient: f64,
    /// Smaller-modulus root of `α + αx + cᾱx² = 0`.
    pub v: C64,
    /// Smaller-modulus root of `α + αx − cᾱx² = 0`.
    pub w: C64,
    /// The other roots (absent when the equations are linear).
    pub v_other: Option<C64>,
    pub w_other: Option<C64>,
    pub separation: f64,
    pub residual_v: f64,
    pub residual_w: f64,
    pub warnings: Vec<String>,
}

/// Roots of `a x² + b x + c`, smaller modulus first; linear when `a = 0`.
fn quadratic(a: C64, b: C64, c: C64) -> (C64, Option<C64>) {
    if a == C64::new(0.0, 0.0) {
        return (-c / b, None);
    }
    let s = (b * b - a * c * 4.0).sqrt();
    let s = if (b.conj() * s).re >= 0.0 { s } else { -s };
    let q = (b + s) * -0.5;
    let (r1, r2) = (c / q, q / a);
    if r1.norm() <= r2.norm() {
        (r1, Some(r2))
    } else {
        (r2, Some(r1))
    }
}

pub fn nonlinearity_certificate(c: f64, alpha: C64) -> Result<DualCertificate> {
    if alpha == C64::new(0.0, 0.0) || !(alpha.re.is_finite() && alpha.im.is_finite()) {
        return Err(Error::validation("alpha must be a nonzero finite complex number"));
    }
    if !(0.0..=0.2).contains(&c) {
        return Err(Error::validation("coefficient must lie in [0, 1/5]"));
    }
    let q = alpha.conj() * c;
    let (v, v_other) = quadratic(q, alpha, alpha);
    let (w, w_other) = quadratic(-q, alpha, alpha);
    let res = |x: C64, sign: f64| (alpha + alpha * x + q * x * x * sign).norm() / alpha.norm();
    let mut warnings = Vec::new();
    for (name, x) in [("v", v), ("w", w)] {
        if x.norm() > 1.0 {
            warnings.push(format!(
                "root {name} = {x:.7} lies outside the unit disk, where the bump is not identically 1"
            ));
        }
    }
    Ok(DualCertificate {
        alpha,
        coefficient: c,
        v,
        w,
        v_other,
        w_other,
        separation: (v - w).norm(),
        residual_v: res(v, 1.0),
        residual_w: res(w, -1.0),
        warnings,
    })
}

/// Certificates for a batch of `(c, α)` inputs, in input order.
pub fn certificate_sweep(inputs: &[(f64, C64)]) -> Vec<Result<DualCertificate>> {
    inputs.par_iter().map(|&(c, a)| nonlinearity_certificate(c, a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic_field::Example5;
    use crate::sampling::rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn complex_model_dual_is_multiplication() {
        let i = PairingMap::complex_multiplication();
        let xi = V2::new(0.3, -0.7);
        let d = dual_pairing(&i, &xi);
        let expect = real_linear_matrix(c(0.3, -0.7), c(0.0, 0.0));
        assert!((d.matrix() - expect).norm() < 1e-15);
        let zero = dual_pairing(&i, &V2::zeros());
        assert_eq!(zero.apply(&V2::new(1.0, 2.0)), V2::zeros());
    }

    #[test]
    fn identity_is_bitwise_and_dual_is_involutive() {
        let mut r = rng(1);
        for _ in 0..1000 {
            let i = PairingMap::new(
                Matrix2::from_fn(|_, _| sampling::standard_normal(&mut r)),
                Matrix2::from_fn(|_, _| sampling::standard_normal(&mut r)),
            );
            let xi = V2::new(sampling::standard_normal(&mut r), sampling::standard_normal(&mut r));
            let al = V2::new(sampling::standard_normal(&mut r), sampling::standard_normal(&mut r));
            assert_eq!(dual_pairing(&i, &xi).apply(&al), i.apply(&al, &xi));
            assert_eq!(i.dual().dual(), i);
        }
    }

    #[test]
    fn ellipticity_tests() {
        assert!(PairingMap::complex_multiplication().is_elliptic());
        assert!(PairingMap::from_fiber_slope(c(0.4, 0.1), c(-0.2, 0.3)).is_elliptic());
        assert!(!PairingMap::from_fiber_slope(c(0.6, 0.0), c(0.5, 0.0)).is_elliptic());
        // conjugate multiplication has det > 0 but the wrong winding
        let conj = PairingMap::new(real_linear_matrix(c(1.0, 0.0), c(0.0, 0.0)), real_linear_matrix(c(0.0, -1.0), c(0.0, 0.0)));
        assert!(!conj.is_elliptic());
        let rep = dual_fiber_elliptic(&conj, 10, 1);
        assert!(!rep.source_elliptic && !rep.pass);
        let mut r = rng(2);
        for s in 0..50 {
            let i = random_elliptic_pairing(&mut r);
            assert!(i.is_elliptic());
            let rep = dual_fiber_elliptic(&i, 200, s);
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn certificate_values() {
        let cert = nonlinearity_certificate(0.2, c(1.0, 0.0)).unwrap();
        assert!((cert.v - c((-5.0 + 5f64.sqrt()) / 2.0, 0.0)).norm() < 1e-12);
        assert!((cert.w - c((5.0 - 45f64.sqrt()) / 2.0, 0.0)).norm() < 1e-12);
        assert!((cert.separation - 0.5278640).abs() < 1e-7);
        assert_eq!(cert.warnings.len(), 1);
        let zero = nonlinearity_certificate(0.0, c(0.3, 0.4)).unwrap();
        assert_eq!(zero.v, c(-1.0, 0.0));
        assert_eq!(zero.separation, 0.0);
        let a = c(0.6, -0.8);
        let (p, q) = (nonlinearity_certificate(0.2, a).unwrap(), nonlinearity_certificate(0.2, a * c(0.0, 1.0)).unwrap());
        assert!((p.v - q.w).norm() < 1e-12 && (p.w - q.v).norm() < 1e-12);
        assert!(nonlinearity_certificate(0.3, a).is_err());
        assert!(nonlinearity_certificate(0.1, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn pencils() {
        let v = (c(0.3, -0.2), c(0.5, 0.1));
        let t = pencil_tangent(&FieldDef::Standard, v, &PencilPath::StandardPencil { slope: c(0.2, 0.0) }).unwrap();
        let p = t.limit_intersection.unwrap();
        assert!((p[0] - v.0).norm() < 1e-9 && (p[1] - v.1).norm() < 1e-9);
        assert!((t.parameter_derivative[1] - c(1.0, 0.0)).norm() < 1e-9);

        let field = FieldDef::Example5(Example5::default());
        let z = pencil_tangent(&field, v, &PencilPath::Constant { alpha: c(0.1, 0.0) }).unwrap();
        assert_eq!(z.parameter_derivative, [c(0.0, 0.0); 2]);

        let alpha = c(0.1, 0.0);
        let t = pencil_tangent(&field, (c(-1.3, 0.0), c(0.0, 0.0)), &PencilPath::Example5Scaled { alpha }).unwrap();
        let x = t.limit_intersection.unwrap()[0];
        let e = Example5::default();
        let (rho, _, _) = e.bump.at(x);
        assert!((alpha + alpha * x + alpha.conj() * x * x * (0.2 * rho)).norm() < 1e-9);
        assert!(x.norm() > 1.0 && x.norm() < 1.382);
        assert!(pencil_tangent(&field, v, &PencilPath::Example5Scaled { alpha: c(0.5, 0.0) }).is_err());
    }
}
