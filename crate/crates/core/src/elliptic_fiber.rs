//! One fiber of an elliptic structure.
//!
//! A surface of elliptic type in the Grassmannian of R^4 is the graph
//! `{(a(u), u) : u ∈ S²₋}` of a contraction `a: S²₋ → S²₊`. Both spheres are
//! identified with the unit sphere of R^3 through the coordinate bases of
//! [`crate::grassmann4`]; this is also the fixed isometry `v⁺ ↦ v⁻, w⁺ ↦ w⁻`
//! used by the retraction.
//!
//! Every nonzero `x ∈ R^4` lies in exactly one plane of an elliptic fiber.
//! With `L±_x(v) = √2 ι_x(v)` (isometries from R^3 onto `x⊥` for unit `x`),
//! `x ∈ φ(a(u), u)` iff `L+_x a(u) = L-_x u`, i.e. `u = M_x a(u)` with the
//! orthogonal matrix `M_x = (L-_x)ᵀ L+_x`. The plane through `x` is found by
//! Banach iteration of that map.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Matrix4, SMatrix};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grassmann4::{Bivector, OrientedPlane, Vec3, Vec4};
use crate::sampling::{self, sphere_exp, sphere_log, tangent_basis, IcoGrid};

/// Unit-norm tolerance for evaluator outputs.
pub const VALUE_UNIT_TOL: f64 = 1e-10;
/// Default pass margin: a fiber passes when `lipEstimate < 1 − margin`.
pub const DEFAULT_MARGIN: f64 = 1e-3;
/// Central finite-difference step on the sphere.
pub const FD_STEP: f64 = 1e-5;

/// Contraction `a: S²₋ → S²₊` describing one elliptic fiber.
#[derive(Debug, Clone, PartialEq)]
pub enum FiberMap {
    /// `a ≡ direction`: the complex lines of one linear complex structure.
    Constant { direction: Vec3 },
    /// `a(u) = (center + strength·u)/|center + strength·u|` with `|center| = 1`.
    /// Its Lipschitz constant is `strength/(1 − strength)` for `strength < 1`.
    RadialPull { center: Vec3, strength: f64 },
    /// `a(u) = R u` for a rotation `R`; an isometry, never a contraction.
    Isometry { rotation: Matrix3<f64> },
    /// Values on the vertices of an icosahedral grid, interpolated linearly
    /// on the faces and projected back to the sphere.
    SampledGrid(SampledFiber),
    /// `u ↦ exp_c(t · log_c(base(u)))` for the fixed point `c` of `base`.
    Retracted { base: Box<FiberMap>, center: Vec3, t: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFiber {
    pub level: u32,
    pub values: Vec<Vec3>,
    grid: IcoGrid,
}

impl PartialEq for IcoGrid {
    fn eq(&self, other: &Self) -> bool {
        self.vertices.len() == other.vertices.len()
    }
}

impl SampledFiber {
    pub fn new(level: u32, values: Vec<Vec3>) -> Result<Self> {
        let grid = IcoGrid::new(level);
        if values.len() != grid.vertices.len() {
            return Err(Error::validation(format!(
                "level {level} grid needs {} values, got {}",
                grid.vertices.len(),
                values.len()
            )));
        }
        Ok(Self { level, values, grid })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.grid.vertices
    }

    fn eval(&self, u: &Vec3) -> Vec3 {
        let (f, w) = self.grid.locate(u);
        let v = self.values[f[0]] * w[0] + self.values[f[1]] * w[1] + self.values[f[2]] * w[2];
        let n = v.norm();
        if n > 0.0 {
            v / n
        } else {
            v
        }
    }
}

impl FiberMap {
    /// The fiber of the standard complex structure of C².
    pub fn standard() -> Self {
        FiberMap::Constant { direction: Vec3::x() }
    }

    pub fn radial_pull(center: Vec3, strength: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&strength) {
            return Err(Error::validation("radial pull strength must lie in [0, 1)"));
        }
        let n = center.norm();
        if n < 1e-12 {
            return Err(Error::validation("radial pull center must be nonzero"));
        }
        Ok(FiberMap::RadialPull { center: center / n, strength })
    }

    /// Radial pull with prescribed Lipschitz constant `lip`.
    pub fn with_lipschitz(center: Vec3, lip: f64) -> Result<Self> {
        Self::radial_pull(center, lip / (1.0 + lip))
    }

    pub fn identity() -> Self {
        FiberMap::Isometry { rotation: Matrix3::identity() }
    }

    /// Samples `self` on a level-`level` icosahedral grid.
    pub fn sample_to_grid(&self, level: u32) -> SampledFiber {
        let grid = IcoGrid::new(level);
        let values = grid.vertices.iter().map(|u| self.value(u)).collect();
        SampledFiber { level, values, grid }
    }

    pub fn value(&self, u: &Vec3) -> Vec3 {
        match self {
            FiberMap::Constant { direction } => *direction,
            FiberMap::RadialPull { center, strength } => (center + u * *strength).normalize(),
            FiberMap::Isometry { rotation } => rotation * u,
            FiberMap::SampledGrid(s) => s.eval(u),
            FiberMap::Retracted { base, center, t } => {
                let a = base.value(u);
                match sphere_log(center, &a) {
                    Some(v) => sphere_exp(center, &(v * *t)),
                    None => a,
                }
            }
        }
    }

    /// Closed-form differential, when available, as an extrinsic 3×3 map
    /// acting on tangent vectors at `u`.
    pub fn analytic_differential(&self, u: &Vec3) -> Option<Matrix3<f64>> {
        match self {
            FiberMap::Constant { .. } => Some(Matrix3::zeros()),
            FiberMap::RadialPull { center, strength } => {
                let v = center + u * *strength;
                let n = v.norm();
                let w = v / n;
                Some((Matrix3::identity() - w * w.transpose()) * (*strength / n))
            }
            FiberMap::Isometry { rotation } => Some(*rotation),
            _ => None,
        }
    }

    /// Central finite-difference differential along a tangent basis at `u`.
    pub fn fd_differential(&self, u: &Vec3) -> Matrix3x2<f64> {
        let (e1, e2) = tangent_basis(u);
        let col = |e: &Vec3| {
            let p = self.value(&sphere_exp(u, &(e * FD_STEP)));
            let m = self.value(&sphere_exp(u, &(e * -FD_STEP)));
            (p - m) / (2.0 * FD_STEP)
        };
        Matrix3x2::from_columns(&[col(&e1), col(&e2)])
    }

    /// Differential restricted to the tangent plane at `u`, as a 3×2 matrix
    /// in the basis of [`tangent_basis`].
    pub fn differential(&self, u: &Vec3) -> Matrix3x2<f64> {
        match self.analytic_differential(u) {
            Some(d) => {
                let (e1, e2) = tangent_basis(u);
                Matrix3x2::from_columns(&[d * e1, d * e2])
            }
            None => self.fd_differential(u),
        }
    }

    /// Analytic Lipschitz constant where one is known.
    pub fn analytic_lipschitz(&self) -> Option<f64> {
        match self {
            FiberMap::Constant { .. } => Some(0.0),
            FiberMap::RadialPull { strength, .. } => Some(strength / (1.0 - strength)),
            FiberMap::Isometry { .. } => Some(1.0),
            _ => None,
        }
    }
}

fn operator_norm(m: &Matrix3x2<f64>) -> f64 {
    m.singular_values().max()
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EllipticityReport {
    pub lip_estimate: f64,
    /// Same maximum computed with central finite differences only.
    pub fd_lip_estimate: f64,
    pub sample_count: usize,
    pub worst_point: [f64; 3],
    pub margin: f64,
    pub pass: bool,
    pub diagnostics: Vec<String>,
}

/// Samples `sup |da|` on a level-`resolution` icosahedral grid.
pub fn audit_ellipticity(f: &FiberMap, resolution: u32) -> Result<EllipticityReport> {
    audit_ellipticity_with_margin(f, resolution, DEFAULT_MARGIN)
}

pub fn audit_ellipticity_with_margin(
    f: &FiberMap,
    resolution: u32,
    margin: f64,
) -> Result<EllipticityReport> {
    if resolution < 2 {
        return Err(Error::validation("audit resolution must be at least 2"));
    }
    let grid = IcoGrid::new(resolution);
    let rows: Vec<(f64, f64, f64)> = grid
        .vertices
        .par_iter()
        .map(|u| {
            let a = f.value(u);
            let unit_defect = (a.norm() - 1.0).abs();
            let fd = operator_norm(&f.fd_differential(u));
            let an = f
                .analytic_differential(u)
                .map(|d| {
                    let (e1, e2) = tangent_basis(u);
                    operator_norm(&Matrix3x2::from_columns(&[d * e1, d * e2]))
                })
                .unwrap_or(fd);
            (an, fd, unit_defect)
        })
        .collect();

    let mut diagnostics = Vec::new();
    let mut lip = 0.0f64;
    let mut fd_lip = 0.0f64;
    let mut worst = 0;
    let mut unit_ok = true;
    for (i, &(an, fd, defect)) in rows.iter().enumerate() {
        if !(defect <= VALUE_UNIT_TOL) {
            if unit_ok {
                diagnostics.push(format!(
                    "evaluator value at vertex {i} is not unit (defect {defect:.3e})"
                ));
            }
            unit_ok = false;
        }
        if an > lip {
            lip = an;
            worst = i;
        }
        fd_lip = fd_lip.max(fd);
    }
    if (lip - fd_lip).abs() > 1e-4 * lip.max(1.0) {
        diagnostics.push(format!(
            "analytic and finite-difference estimates disagree ({lip:.6} vs {fd_lip:.6})"
        ));
    }
    let u = grid.vertices[worst];
    Ok(EllipticityReport {
        lip_estimate: lip,
        fd_lip_estimate: fd_lip,
        sample_count: grid.vertices.len(),
        worst_point: [u.x, u.y, u.z],
        margin,
        pass: unit_ok && lip < 1.0 - margin,
        diagnostics,
    })
}

/// Iteration controls for the fixed-point solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationControls {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for IterationControls {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-12 }
    }
}

/// `(L+_x, L-_x)` as 4×3 matrices for a unit vector `x`.
fn contraction_frames(x: &Vec4) -> (SMatrix<f64, 4, 3>, SMatrix<f64, 4, 3>) {
    let s = std::f64::consts::SQRT_2;
    let mut lp = SMatrix::<f64, 4, 3>::zeros();
    let mut lm = SMatrix::<f64, 4, 3>::zeros();
    for k in 0..3 {
        let mut v = Vec3::zeros();
        v[k] = 1.0;
        lp.set_column(k, &(Bivector::from_sd_coords(&v).interior(x) * s));
        lm.set_column(k, &(Bivector::from_asd_coords(&v).interior(x) * s));
    }
    (lp, lm)
}

/// The orthogonal matrix `M_x` of the fixed-point equation `u = M_x a(u)`.
pub fn transport_matrix(x: &Vec4) -> Matrix3<f64> {
    let (lp, lm) = contraction_frames(&x.normalize());
    lm.transpose() * lp
}

/// Result of the fixed-point construction of the plane through a vector.
#[derive(Debug, Clone)]
pub struct PlaneSolution {
    pub plane: OrientedPlane,
    pub iterations: usize,
    /// Sphere-point displacement per iteration.
    pub history: Vec<f64>,
}

impl PlaneSolution {
    /// Largest ratio of successive displacements in the local regime
    /// (displacements between 1e-10 and 0.1).
    pub fn convergence_ratio(&self) -> f64 {
        self.history
            .windows(2)
            .filter(|w| w[0] > 1e-10 && w[0] < 0.1)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }
}

fn nonzero_unit(x: &Vec4) -> Result<Vec4> {
    let n = x.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::validation("vector must be nonzero and finite"));
    }
    Ok(x / n)
}

/// The plane of the fiber containing `x`, by Banach iteration `u ← M_x a(u)`.
pub fn plane_containing(f: &FiberMap, x: &Vec4) -> Result<PlaneSolution> {
    plane_containing_with(f, x, IterationControls::default())
}

pub fn plane_containing_with(
    f: &FiberMap,
    x: &Vec4,
    controls: IterationControls,
) -> Result<PlaneSolution> {
    let xh = nonzero_unit(x)?;
    let m = transport_matrix(&xh);
    let mut u = m * f.value(&(m.transpose() * Vec3::x()));
    let mut history = Vec::new();
    for it in 0..controls.max_iterations {
        let next = (m * f.value(&u)).normalize();
        let d = (next - u).norm();
        history.push(d);
        u = next;
        if d <= controls.tolerance {
            let plane = OrientedPlane { u_plus: f.value(&u), u_minus: u };
            return Ok(PlaneSolution { plane, iterations: it + 1, history });
        }
        if !d.is_finite() {
            break;
        }
    }
    Err(Error::convergence(history))
}

/// Newton solve of `u = M_x a(u)` started at `guess`. Follows the local
/// branch even where `a` is not a contraction; used by the audits.
pub fn plane_containing_near(f: &FiberMap, x: &Vec4, guess: &Vec3) -> Result<OrientedPlane> {
    let xh = nonzero_unit(x)?;
    let m = transport_matrix(&xh);
    let mut u = guess.normalize();
    let mut history = Vec::new();
    for _ in 0..60 {
        let r = u - m * f.value(&u);
        let (e1, e2) = tangent_basis(&u);
        let da = f.differential(&u);
        let mda = m * da;
        // Jacobian of u ↦ u − M a(u) on the tangent plane, projected onto it.
        let jac = Matrix2::new(
            1.0 - e1.dot(&mda.column(0)),
            -e1.dot(&mda.column(1)),
            -e2.dot(&mda.column(0)),
            1.0 - e2.dot(&mda.column(1)),
        );
        let rhs = nalgebra::Vector2::new(e1.dot(&r), e2.dot(&r));
        let res = r.norm();
        history.push(res);
        if res < 1e-14 {
            break;
        }
        let Some(step) = jac.lu().solve(&rhs) else {
            return Err(Error::numerical("singular Jacobian in local plane solve"));
        };
        u = sphere_exp(&u, &(-(e1 * step[0] + e2 * step[1])));
    }
    let res = (u - m * f.value(&u)).norm();
    if res > 1e-10 {
        return Err(Error::convergence(history));
    }
    Ok(OrientedPlane { u_plus: f.value(&u), u_minus: u })
}

/// `J(x)`: the positive quarter turn of `x` inside the plane containing it.
pub fn twisted_j(f: &FiberMap, x: &Vec4) -> Result<Vec4> {
    let sol = plane_containing(f, x)?;
    Ok(sol.plane.bivector().interior(x))
}

/// `J(x)` on the local branch through the plane with ASD point near `guess`.
pub fn twisted_j_near(f: &FiberMap, x: &Vec4, guess: &Vec3) -> Result<(Vec4, OrientedPlane)> {
    let p = plane_containing_near(f, x, guess)?;
    Ok((p.bivector().interior(x), p))
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    /// Worst value of the checked quantity (an error, or a minimum determinant).
    pub worst: f64,
    pub witness: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TwistedAudit {
    pub sample_count: usize,
    pub seed: u64,
    pub lipschitz_estimate: f64,
    pub failures: usize,
    pub properties: Vec<PropertyCheck>,
}

impl TwistedAudit {
    pub fn pass(&self) -> bool {
        self.properties.iter().all(|p| p.pass)
    }

    pub fn property(&self, name: &str) -> Option<&PropertyCheck> {
        self.properties.iter().find(|p| p.name.starts_with(name))
    }
}

struct SampleOutcome {
    square: f64,
    homogeneity: f64,
    lipschitz: f64,
    linearity: f64,
    orientation: f64,
    x: Vec4,
    failed: bool,
}

fn audit_sample(f: &FiberMap, seed: u64, index: u64) -> SampleOutcome {
    let mut r = sampling::substream(seed, index);
    let u = sampling::random_unit3(&mut r);
    let plane = OrientedPlane { u_plus: f.value(&u), u_minus: u };
    let (bx, by) = plane.basis();
    let theta: f64 = r.gen_range(0.0..std::f64::consts::TAU);
    let scale: f64 = r.gen_range(0.2..5.0);
    let x = (bx * theta.cos() + by * theta.sin()) * scale;
    let fail = |x: Vec4| SampleOutcome {
        square: f64::INFINITY,
        homogeneity: f64::INFINITY,
        lipschitz: f64::INFINITY,
        linearity: f64::INFINITY,
        orientation: f64::NEG_INFINITY,
        x,
        failed: true,
    };
    let Ok((jx, p)) = twisted_j_near(f, &x, &u) else { return fail(x) };
    let guess = p.u_minus;
    let Ok((jjx, _)) = twisted_j_near(f, &jx, &guess) else { return fail(x) };
    let square = (jjx + x).norm() / x.norm();

    let t: f64 = r.gen_range(0.1..10.0);
    let Ok((jtx, _)) = twisted_j_near(f, &(x * t), &guess) else { return fail(x) };
    let homogeneity = (jtx - jx * t).norm() / (t * x.norm());

    let (a, b): (f64, f64) = (r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
    let y = x * a + jx * b;
    let linearity = match twisted_j_near(f, &y, &guess) {
        Ok((jy, _)) => (jy - (jx * a - x * b)).norm() / y.norm().max(1e-300),
        Err(_) => return fail(x),
    };

    // ξ in span(x, Jx)⊥, dJ_x ξ by central differences
    let (pz, pw) = p.orthogonal().basis();
    let phi: f64 = r.gen_range(0.0..std::f64::consts::TAU);
    let xi = pz * phi.cos() + pw * phi.sin();
    let h = FD_STEP * x.norm();
    let (Ok((jp, _)), Ok((jm, _))) =
        (twisted_j_near(f, &(x + xi * h), &guess), twisted_j_near(f, &(x - xi * h), &guess))
    else {
        return fail(x);
    };
    let dj = (jp - jm) / (2.0 * h);
    let lipschitz = (jp - jm).norm() / (2.0 * h);
    let frame = Matrix4::from_columns(&[x / x.norm(), jx / x.norm(), xi, dj]);
    let orientation = frame.determinant();

    SampleOutcome { square, homogeneity, lipschitz, linearity, orientation, x, failed: false }
}

/// Sampled audit of the twisted structure: `J² = −Id`, homogeneity and a
/// Lipschitz estimate, linearity on `span(x, Jx)` and the orientation of
/// `(x, Jx, ξ, dJ_x ξ)`.
///
/// Samples are drawn as a random plane of the fiber and a random vector in
/// it, and `J` is evaluated on the local branch through that plane, so the
/// audit also runs (and reports failures) on non-elliptic fibers.
pub fn audit_twisted_properties(f: &FiberMap, sample_count: usize, seed: u64) -> TwistedAudit {
    let outcomes: Vec<SampleOutcome> = (0..sample_count as u64)
        .into_par_iter()
        .map(|i| audit_sample(f, seed, i))
        .collect();

    let tol = 1e-8;
    let mut checks: Vec<PropertyCheck> = Vec::new();
    let mut worst_by = |name: &str, key: &dyn Fn(&SampleOutcome) -> f64, larger_is_worse: bool, pass: &dyn Fn(f64) -> bool| {
        let mut worst = if larger_is_worse { 0.0 } else { f64::INFINITY };
        let mut witness = None;
        for o in &outcomes {
            let v = key(o);
            let worse = if larger_is_worse { !(v <= worst) } else { !(v >= worst) };
            if worse {
                worst = v;
                witness = Some([o.x[0], o.x[1], o.x[2], o.x[3]]);
            }
        }
        checks.push(PropertyCheck { name: name.to_string(), pass: pass(worst), worst, witness });
    };
    worst_by("(i) J^2 = -Id", &|o| o.square, true, &|w| w <= tol);
    worst_by("(ii) homogeneity", &|o| o.homogeneity, true, &|w| w <= tol);
    worst_by("(ii) Lipschitz estimate", &|o| o.lipschitz, true, &|w| w.is_finite());
    worst_by("(iv) linear on span(x, Jx)", &|o| o.linearity, true, &|w| w <= tol);
    worst_by("(v) orientation of (x, Jx, xi, dJ xi)", &|o| o.orientation, false, &|w| w > 0.0);

    let lipschitz_estimate = outcomes.iter().map(|o| o.lipschitz).fold(0.0, f64::max);
    TwistedAudit {
        sample_count,
        seed,
        lipschitz_estimate,
        failures: outcomes.iter().filter(|o| o.failed).count(),
        properties: checks,
    }
}

/// Fixed point of `a` seen as a self-map of S² under the coordinate
/// identification of the two spheres.
pub fn fixed_point(f: &FiberMap, controls: IterationControls) -> Result<(Vec3, Vec<f64>)> {
    let mut u = f.value(&Vec3::x());
    let mut history = Vec::new();
    for _ in 0..controls.max_iterations {
        let next = f.value(&u);
        let d = (next - u).norm();
        history.push(d);
        u = next;
        if d <= controls.tolerance {
            return Ok((u, history));
        }
    }
    Err(Error::convergence(history))
}

/// Deformation `h_t = exp_c(t · log_c a)` from the constant fiber at the
/// fixed point `c` of `a` (t = 0) to `a` itself (t = 1).
pub fn retract_to_linear(f: &FiberMap, t: f64) -> Result<FiberMap> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::validation("retraction parameter must lie in [0, 1]"));
    }
    if t == 1.0 {
        return Ok(f.clone());
    }
    if let FiberMap::Constant { .. } = f {
        return Ok(f.clone());
    }
    let (center, _) = fixed_point(f, IterationControls { max_iterations: 2000, tolerance: 1e-14 })?;
    if t == 0.0 {
        return Ok(FiberMap::Constant { direction: center });
    }
    Ok(FiberMap::Retracted { base: Box::new(f.clone()), center, t })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann4::{e, intersection_sign, IntersectionSign};
    use crate::sampling::{random_unit3, random_unit4, rng};

    fn half() -> FiberMap {
        FiberMap::with_lipschitz(Vec3::new(0.3, -0.5, 0.8), 0.5).unwrap()
    }

    #[test]
    fn audits() {
        let r = audit_ellipticity(&FiberMap::standard(), 2).unwrap();
        assert_eq!(r.lip_estimate, 0.0);
        assert!(r.pass);
        let r = audit_ellipticity(&FiberMap::identity(), 2).unwrap();
        assert!((r.lip_estimate - 1.0).abs() < 1e-9, "{r:?}");
        assert!(!r.pass);
        let r = audit_ellipticity(&half(), 4).unwrap();
        assert!((0.45..=0.55).contains(&r.lip_estimate), "{}", r.lip_estimate);
        assert!((r.lip_estimate - r.fd_lip_estimate).abs() < 1e-6);
        assert!(r.pass);
        assert!(audit_ellipticity(&half(), 1).is_err());
    }

    #[test]
    fn standard_planes() {
        let f = FiberMap::standard();
        let p = plane_containing(&f, &e(0)).unwrap().plane;
        let q = crate::grassmann4::plane_to_spheres(&e(0), &e(1)).unwrap();
        assert!(p.distance(&q) < 1e-12);
        let p = plane_containing(&f, &e(2)).unwrap().plane;
        let q = crate::grassmann4::plane_to_spheres(&e(2), &e(3)).unwrap();
        assert!(p.distance(&q) < 1e-12);
        let j = twisted_j(&f, &e(0)).unwrap();
        assert!((j - e(1)).norm() < 1e-12);
    }

    #[test]
    fn plane_contains_vector_and_lies_in_fiber() {
        let f = half();
        let mut r = rng(4);
        for _ in 0..300 {
            let x = random_unit4(&mut r) * r.gen_range(0.1..10.0);
            let sol = plane_containing(&f, &x).unwrap();
            assert!(sol.plane.contains(&x, 1e-9));
            assert!((sol.plane.u_plus - f.value(&sol.plane.u_minus)).norm() < 1e-9);
            assert!(sol.convergence_ratio() <= 0.5 + 0.05);
            let jx = twisted_j(&f, &x).unwrap();
            assert!((jx.norm() - x.norm()).abs() < 1e-9 * x.norm());
            assert!(jx.dot(&x).abs() < 1e-9 * x.norm_squared());
            let jjx = twisted_j(&f, &jx).unwrap();
            assert!((jjx + x).norm() < 1e-8 * x.norm());
            assert_eq!(twisted_j(&f, &(x * 2.0)).unwrap(), jx * 2.0);
        }
        assert!(plane_containing(&f, &Vec4::zeros()).is_err());
    }

    #[test]
    fn positive_transversality_inequality() {
        let f = half();
        let mut r = rng(8);
        for _ in 0..2000 {
            let (u, v) = (random_unit3(&mut r), random_unit3(&mut r));
            let gap = f.value(&u).dot(&f.value(&v)) - u.dot(&v);
            assert!(gap > 0.0);
            let p = OrientedPlane { u_plus: f.value(&u), u_minus: u };
            let q = OrientedPlane { u_plus: f.value(&v), u_minus: v };
            if gap > 1e-6 {
                assert_eq!(intersection_sign(&p, &q), IntersectionSign::Positive);
            }
        }
    }

    #[test]
    fn twisted_audit_examples() {
        let a = audit_twisted_properties(&FiberMap::standard(), 200, 1);
        assert!(a.pass(), "{a:#?}");
        let a = audit_twisted_properties(&half(), 200, 2);
        assert!(a.pass(), "{a:#?}");
        let bad = FiberMap::with_lipschitz(Vec3::z(), 1.2).unwrap();
        let a = audit_twisted_properties(&bad, 1000, 3);
        assert!(!a.property("(v)").unwrap().pass, "{a:#?}");
    }

    #[test]
    fn retraction_endpoints() {
        let f = half();
        assert_eq!(retract_to_linear(&f, 1.0).unwrap(), f);
        let c = FiberMap::standard();
        assert_eq!(retract_to_linear(&c, 0.3).unwrap(), c);
        let FiberMap::Constant { direction } = retract_to_linear(&f, 0.0).unwrap() else {
            panic!("t = 0 must give a constant fiber")
        };
        assert!((f.value(&direction) - direction).norm() < 1e-12);
        for t in [0.25, 0.5, 0.75] {
            let g = retract_to_linear(&f, t).unwrap();
            let rep = audit_ellipticity(&g, 3).unwrap();
            assert!(rep.pass && rep.lip_estimate <= 0.5 + 1e-6, "t = {t}: {rep:?}");
        }
        assert!(retract_to_linear(&f, 1.5).is_err());
    }

    #[test]
    fn sampled_fiber_tracks_source() {
        let f = half();
        let s = FiberMap::SampledGrid(f.sample_to_grid(4));
        let mut r = rng(12);
        for _ in 0..100 {
            let u = random_unit3(&mut r);
            assert!((s.value(&u) - f.value(&u)).norm() < 5e-3);
        }
        assert!(SampledFiber::new(2, vec![Vec3::x(); 3]).is_err());
    }
}
