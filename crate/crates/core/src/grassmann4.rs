//! Exact linear algebra on 2-vectors of oriented Euclidean R^4.
//!
//! The Grassmannian of oriented 2-planes in R^4 is modelled as the product of
//! the unit spheres of the self-dual (SD) and anti-self-dual (ASD) parts of
//! `Λ²R⁴`: a plane with positive orthonormal basis `(x, y)` corresponds to
//! `(√2 (x∧y)₊, √2 (x∧y)₋)`.
//!
//! Sphere points are stored as 3-vectors of coordinates in the orthonormal
//! bases
//!
//! ```text
//! SD : s1 = (e12 + e34)/√2,  s2 = (e13 − e24)/√2,  s3 = (e14 + e23)/√2
//! ASD: a1 = (e12 − e34)/√2,  a2 = (e13 + e24)/√2,  a3 = (e14 − e23)/√2
//! ```
//!
//! With this convention the standard complex structure of C² (z = x1 + i x2,
//! w = x3 + i x4) has all its complex lines on `uPlus = (1, 0, 0)`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec4 = Vector4<f64>;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Tolerance for declaring two planes non-transverse (|det| of the 4×4 frame).
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Orthonormality tolerance for plane bases passed in by callers.
pub const ORTHONORMAL_TOL: f64 = 1e-9;
/// Unit-norm tolerance for sphere-pair inputs.
pub const UNIT_TOL: f64 = 1e-9;
/// Tangency tolerance for `tangent_correspondence`.
pub const TANGENCY_TOL: f64 = 1e-9;

/// A 2-vector of R^4 in the ordered basis e12, e13, e14, e23, e24, e34.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bivector(pub [f64; 6]);

impl Bivector {
    pub const ZERO: Bivector = Bivector([0.0; 6]);

    pub fn basis(i: usize, j: usize) -> Bivector {
        let mut c = [0.0; 6];
        let (idx, sign) = pair_index(i, j);
        c[idx] = sign;
        Bivector(c)
    }

    pub fn wedge(x: &Vec4, y: &Vec4) -> Bivector {
        let m = |i: usize, j: usize| x[i] * y[j] - x[j] * y[i];
        Bivector([m(0, 1), m(0, 2), m(0, 3), m(1, 2), m(1, 3), m(2, 3)])
    }

    pub fn dot(&self, other: &Bivector) -> f64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Hodge star for the orientation e1∧e2∧e3∧e4.
    pub fn hodge(&self) -> Bivector {
        let [c12, c13, c14, c23, c24, c34] = self.0;
        Bivector([c34, -c24, c23, c14, -c13, c12])
    }

    pub fn sd_part(&self) -> Bivector {
        (*self + self.hodge()) * 0.5
    }

    pub fn asd_part(&self) -> Bivector {
        (*self - self.hodge()) * 0.5
    }

    /// Antisymmetric matrix with `M[i][j]` the coefficient of e_i∧e_j.
    pub fn matrix(&self) -> Matrix4<f64> {
        let [c12, c13, c14, c23, c24, c34] = self.0;
        Matrix4::new(
            0.0, c12, c13, c14, //
            -c12, 0.0, c23, c24, //
            -c13, -c23, 0.0, c34, //
            -c14, -c24, -c34, 0.0,
        )
    }

    /// Interior product `ι_ξ(a∧b) = ⟨ξ,a⟩ b − ⟨ξ,b⟩ a`.
    pub fn interior(&self, xi: &Vec4) -> Vec4 {
        self.matrix().transpose() * xi
    }

    /// Coordinates of the SD part in the basis (s1, s2, s3).
    pub fn sd_coords(&self) -> Vec3 {
        let [c12, c13, c14, c23, c24, c34] = self.0;
        Vec3::new(c12 + c34, c13 - c24, c14 + c23) * FRAC_1_SQRT_2
    }

    /// Coordinates of the ASD part in the basis (a1, a2, a3).
    pub fn asd_coords(&self) -> Vec3 {
        let [c12, c13, c14, c23, c24, c34] = self.0;
        Vec3::new(c12 - c34, c13 + c24, c14 - c23) * FRAC_1_SQRT_2
    }

    pub fn from_sd_coords(v: &Vec3) -> Bivector {
        let k = FRAC_1_SQRT_2;
        Bivector([v[0] * k, v[1] * k, v[2] * k, v[2] * k, -v[1] * k, v[0] * k])
    }

    pub fn from_asd_coords(v: &Vec3) -> Bivector {
        let k = FRAC_1_SQRT_2;
        Bivector([v[0] * k, v[1] * k, v[2] * k, -v[2] * k, v[1] * k, -v[0] * k])
    }
}

fn pair_index(i: usize, j: usize) -> (usize, f64) {
    assert!(i < 4 && j < 4 && i != j, "invalid basis pair ({i}, {j})");
    let (a, b, s) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
    let idx = match (a, b) {
        (0, 1) => 0,
        (0, 2) => 1,
        (0, 3) => 2,
        (1, 2) => 3,
        (1, 3) => 4,
        _ => 5,
    };
    (idx, s)
}

impl Add for Bivector {
    type Output = Bivector;
    fn add(self, rhs: Bivector) -> Bivector {
        let mut c = self.0;
        c.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
        Bivector(c)
    }
}

impl Sub for Bivector {
    type Output = Bivector;
    fn sub(self, rhs: Bivector) -> Bivector {
        self + (-rhs)
    }
}

impl Neg for Bivector {
    type Output = Bivector;
    fn neg(self) -> Bivector {
        self * -1.0
    }
}

impl Mul<f64> for Bivector {
    type Output = Bivector;
    fn mul(self, k: f64) -> Bivector {
        Bivector(self.0.map(|c| c * k))
    }
}

/// Splits `b` into its self-dual and anti-self-dual parts.
pub fn sd_split(b: &Bivector) -> (Bivector, Bivector) {
    (b.sd_part(), b.asd_part())
}

/// An oriented 2-plane of R^4 as a point of S²₊ × S²₋.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedPlane {
    pub u_plus: Vec3,
    pub u_minus: Vec3,
}

impl OrientedPlane {
    /// Validates unit norms (within [`UNIT_TOL`]) and renormalizes.
    pub fn new(u_plus: Vec3, u_minus: Vec3) -> Result<Self> {
        let (np, nm) = (u_plus.norm(), u_minus.norm());
        if (np - 1.0).abs() > UNIT_TOL || (nm - 1.0).abs() > UNIT_TOL {
            return Err(Error::validation(format!(
                "sphere pair is not unit: |u+| = {np}, |u-| = {nm}"
            )));
        }
        Ok(Self { u_plus: u_plus / np, u_minus: u_minus / nm })
    }

    /// The unit decomposable 2-vector `x∧y` of the plane.
    pub fn bivector(&self) -> Bivector {
        (Bivector::from_sd_coords(&self.u_plus) + Bivector::from_asd_coords(&self.u_minus))
            * FRAC_1_SQRT_2
    }

    pub fn reversed(&self) -> Self {
        Self { u_plus: -self.u_plus, u_minus: -self.u_minus }
    }

    /// The orthogonal complement, oriented so that `P ⊕ P⊥` is positive.
    pub fn orthogonal(&self) -> Self {
        Self { u_plus: self.u_plus, u_minus: -self.u_minus }
    }

    /// Deterministic positive orthonormal basis of the plane.
    pub fn basis(&self) -> (Vec4, Vec4) {
        basis_of(&self.bivector())
    }

    /// Whether the (nonzero) vector `v` lies in the plane, to `tol` relative.
    pub fn contains(&self, v: &Vec4, tol: f64) -> bool {
        let (x, y) = self.basis();
        let r = v - x * x.dot(v) - y * y.dot(v);
        r.norm() <= tol * v.norm()
    }

    /// Sphere-pair distance `max(|Δu+|, |Δu-|)`.
    pub fn distance(&self, other: &OrientedPlane) -> f64 {
        (self.u_plus - other.u_plus).norm().max((self.u_minus - other.u_minus).norm())
    }
}

fn basis_of(b: &Bivector) -> (Vec4, Vec4) {
    let m = b.matrix();
    // -M² is the orthogonal projector onto the plane of a unit decomposable 2-vector.
    let proj = -(m * m);
    let mut k = 0;
    let mut best = -1.0;
    for j in 0..4 {
        let n = proj.column(j).norm();
        if n > best {
            best = n;
            k = j;
        }
    }
    let x: Vec4 = proj.column(k).into_owned().normalize();
    let y = b.interior(&x);
    let y = (y - x * x.dot(&y)).normalize();
    (x, y)
}

/// The sphere pair of the oriented plane spanned by an orthonormal pair.
pub fn plane_to_spheres(x: &Vec4, y: &Vec4) -> Result<OrientedPlane> {
    let err = (x.norm_squared() - 1.0)
        .abs()
        .max((y.norm_squared() - 1.0).abs())
        .max(x.dot(y).abs());
    if !err.is_finite() || err > ORTHONORMAL_TOL {
        return Err(Error::validation(format!(
            "basis is not orthonormal (defect {err:.3e})"
        )));
    }
    let b = Bivector::wedge(x, y);
    let up = b.sd_coords() * std::f64::consts::SQRT_2;
    let um = b.asd_coords() * std::f64::consts::SQRT_2;
    Ok(OrientedPlane { u_plus: up.normalize(), u_minus: um.normalize() })
}

/// The oriented plane spanned by an arbitrary independent pair.
pub fn plane_from_span(x: &Vec4, y: &Vec4) -> Result<OrientedPlane> {
    let nx = x.norm();
    if !(nx > 1e-12) || !nx.is_finite() {
        return Err(Error::validation("spanning vectors must be nonzero"));
    }
    let x = x / nx;
    let y = y - x * x.dot(y);
    let ny = y.norm();
    if !(ny > 1e-12 * nx) {
        return Err(Error::validation("spanning vectors are dependent"));
    }
    plane_to_spheres(&x, &(y / ny))
}

/// A positive orthonormal basis of the plane with the given sphere pair.
pub fn spheres_to_plane(p: &OrientedPlane) -> Result<(Vec4, Vec4)> {
    let p = OrientedPlane::new(p.u_plus, p.u_minus)?;
    Ok(p.basis())
}

/// A tangent vector of S²₊ × S²₋ seen as a map `P → P⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentHom {
    /// Matrix of `A` from the basis `source` of P to the basis `target` of P⊥.
    pub matrix: Matrix2<f64>,
    pub det: f64,
    pub alpha_plus: Vec3,
    pub alpha_minus: Vec3,
    pub source: (Vec4, Vec4),
    pub target: (Vec4, Vec4),
}

/// Convention constant of the determinant law:
/// `det A = DET_LAW_CONSTANT · (|α₋|² − |α₊|²)`.
///
/// Pinned by the curve-differentiation oracle in the tests below, which
/// also shows `A = √2 · H ∘ j_P` for the directly differentiated
/// representative `H ∈ Hom(P, P⊥)`.
pub const DET_LAW_CONSTANT: f64 = 0.5;

/// Maps a tangent vector `(α₊, α₋)` at `p` to `A ∈ Hom(P, P⊥)` with
/// `A ξ = proj_{P⊥} ι_ξ(α₊ + α₋)`.
pub fn tangent_correspondence(p: &OrientedPlane, a_plus: &Vec3, a_minus: &Vec3) -> Result<TangentHom> {
    let tp = a_plus.dot(&p.u_plus).abs();
    let tm = a_minus.dot(&p.u_minus).abs();
    if tp > TANGENCY_TOL * a_plus.norm().max(1.0) || tm > TANGENCY_TOL * a_minus.norm().max(1.0) {
        return Err(Error::validation(format!(
            "tangent data not tangent to the spheres (defects {tp:.3e}, {tm:.3e})"
        )));
    }
    let alpha = Bivector::from_sd_coords(a_plus) + Bivector::from_asd_coords(a_minus);
    let source = p.basis();
    let target = p.orthogonal().basis();
    let ax = alpha.interior(&source.0);
    let ay = alpha.interior(&source.1);
    let matrix = Matrix2::new(
        target.0.dot(&ax),
        target.0.dot(&ay),
        target.1.dot(&ax),
        target.1.dot(&ay),
    );
    Ok(TangentHom {
        det: matrix.determinant(),
        matrix,
        alpha_plus: *a_plus,
        alpha_minus: *a_minus,
        source,
        target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntersectionSign {
    Positive,
    Negative,
    Degenerate,
}

impl IntersectionSign {
    pub fn as_i32(self) -> i32 {
        match self {
            IntersectionSign::Positive => 1,
            IntersectionSign::Negative => -1,
            IntersectionSign::Degenerate => 0,
        }
    }
}

/// Determinant of the frame (x_p, y_p, x_q, y_q); equals
/// `½(⟨u₊,v₊⟩ − ⟨u₋,v₋⟩)` for the two sphere pairs.
pub fn frame_determinant(p: &OrientedPlane, q: &OrientedPlane) -> f64 {
    let (xp, yp) = p.basis();
    let (xq, yq) = q.basis();
    Matrix4::from_columns(&[xp, yp, xq, yq]).determinant()
}

/// Orientation of `P ⊕ Q` relative to R^4 when the planes are transverse.
pub fn intersection_sign(p: &OrientedPlane, q: &OrientedPlane) -> IntersectionSign {
    let d = frame_determinant(p, q);
    if d.abs() < DEGENERACY_TOL {
        IntersectionSign::Degenerate
    } else if d > 0.0 {
        IntersectionSign::Positive
    } else {
        IntersectionSign::Negative
    }
}

/// Standard unit vector e_{i+1}.
pub fn e(i: usize) -> Vec4 {
    let mut v = Vec4::zeros();
    v[i] = 1.0;
    v
}
