//! Seeded sampling helpers and the icosahedral sphere grids used by audits.

use nalgebra::{Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grassmann4::{Vec3, Vec4};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `index` of `seed`, used for per-sample generators
/// so that parallel maps stay reproducible.
pub fn substream(seed: u64, index: u64) -> SeededRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index.wrapping_add(1));
    r
}

pub fn standard_normal<R: Rng>(r: &mut R) -> f64 {
    // Box–Muller; one draw per call keeps streams simple.
    let u1: f64 = r.gen_range(f64::EPSILON..1.0);
    let u2: f64 = r.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn random_unit3<R: Rng>(r: &mut R) -> Vec3 {
    loop {
        let v = Vector3::new(standard_normal(r), standard_normal(r), standard_normal(r));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

pub fn random_unit4<R: Rng>(r: &mut R) -> Vec4 {
    loop {
        let v = Vector4::new(
            standard_normal(r),
            standard_normal(r),
            standard_normal(r),
            standard_normal(r),
        );
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

pub fn random_orthonormal_pair<R: Rng>(r: &mut R) -> (Vec4, Vec4) {
    let x = random_unit4(r);
    loop {
        let y = random_unit4(r);
        let y = y - x * x.dot(&y);
        let n = y.norm();
        if n > 1e-6 {
            return (x, y / n);
        }
    }
}

/// Uniform point of the closed disk of radius `radius` in C.
pub fn random_in_disk<R: Rng>(r: &mut R, radius: f64) -> num_complex::Complex64 {
    let rad = radius * r.gen::<f64>().sqrt();
    let t = r.gen_range(0.0..std::f64::consts::TAU);
    num_complex::Complex64::from_polar(rad, t)
}

/// Orthonormal basis of the tangent plane of S² at `u`.
pub fn tangent_basis(u: &Vec3) -> (Vec3, Vec3) {
    let a = if u.x.abs() < 0.6 { Vec3::x() } else if u.y.abs() < 0.6 { Vec3::y() } else { Vec3::z() };
    let e1 = (a - u * u.dot(&a)).normalize();
    let e2 = u.cross(&e1);
    (e1, e2)
}

/// Geodesic exponential on S².
pub fn sphere_exp(u: &Vec3, v: &Vec3) -> Vec3 {
    let t = v.norm();
    if t < 1e-300 {
        return *u;
    }
    (u * t.cos() + v * (t.sin() / t)).normalize()
}

/// Geodesic logarithm on S²; `None` at the cut point.
pub fn sphere_log(u: &Vec3, w: &Vec3) -> Option<Vec3> {
    let c = u.dot(w).clamp(-1.0, 1.0);
    let perp = w - u * c;
    let s = perp.norm();
    if s < 1e-300 {
        return if c > 0.0 { Some(Vec3::zeros()) } else { None };
    }
    let theta = s.atan2(c);
    Some(perp * (theta / s))
}

/// Icosahedral sphere grid refined `level` times (level 0 = icosahedron).
#[derive(Debug, Clone)]
pub struct IcoGrid {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl IcoGrid {
    pub fn new(level: u32) -> Self {
        let p = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec3> = [
            (-1.0, p, 0.0),
            (1.0, p, 0.0),
            (-1.0, -p, 0.0),
            (1.0, -p, 0.0),
            (0.0, -1.0, p),
            (0.0, 1.0, p),
            (0.0, -1.0, -p),
            (0.0, 1.0, -p),
            (p, 0.0, -1.0),
            (p, 0.0, 1.0),
            (-p, 0.0, -1.0),
            (-p, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..level {
            let mut cache = std::collections::HashMap::new();
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
                let key = (a.min(b), a.max(b));
                *cache.entry(key).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for &[a, b, c] in &faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        Self { vertices, faces }
    }

    /// Face containing the direction `u` with its barycentric weights.
    pub fn locate(&self, u: &Vec3) -> ([usize; 3], [f64; 3]) {
        let mut best = (self.faces[0], [1.0, 0.0, 0.0]);
        let mut best_min = f64::NEG_INFINITY;
        for f in &self.faces {
            let m = nalgebra::Matrix3::from_columns(&[
                self.vertices[f[0]],
                self.vertices[f[1]],
                self.vertices[f[2]],
            ]);
            let Some(inv) = m.try_inverse() else { continue };
            let w = inv * u;
            let s = w.sum();
            if s <= 0.0 {
                continue;
            }
            let w = w / s;
            let mn = w.min();
            if mn > best_min {
                best_min = mn;
                best = (*f, [w[0], w[1], w[2]]);
                if mn >= 0.0 {
                    break;
                }
            }
        }
        best
    }
}

/// Latitude–longitude grid of `n × n` cell centres on S².
pub fn latlong_grid(n: usize) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let z = -1.0 + (2.0 * i as f64 + 1.0) / n as f64;
        let s = (1.0 - z * z).max(0.0).sqrt();
        for j in 0..n {
            let phi = std::f64::consts::TAU * (j as f64 + 0.5) / n as f64;
            out.push(Vec3::new(s * phi.cos(), s * phi.sin(), z));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        for (level, nv) in [(0, 12), (1, 42), (2, 162), (3, 642)] {
            let g = IcoGrid::new(level);
            assert_eq!(g.vertices.len(), nv);
            assert_eq!(g.faces.len(), 20 * 4usize.pow(level));
        }
    }

    #[test]
    fn locate_reproduces_vertices() {
        let g = IcoGrid::new(2);
        let mut r = rng(5);
        for _ in 0..100 {
            let u = random_unit3(&mut r);
            let (f, w) = g.locate(&u);
            assert!(w.iter().all(|&x| x >= -1e-12));
            let p: Vec3 = g.vertices[f[0]] * w[0] + g.vertices[f[1]] * w[1] + g.vertices[f[2]] * w[2];
            assert!((p.normalize() - u).norm() < 1e-12);
        }
    }

    #[test]
    fn exp_log_inverse() {
        let mut r = rng(9);
        for _ in 0..100 {
            let u = random_unit3(&mut r);
            let w = random_unit3(&mut r);
            let v = sphere_log(&u, &w).unwrap();
            assert!(v.dot(&u).abs() < 1e-12);
            assert!((sphere_exp(&u, &v) - w).norm() < 1e-10);
        }
    }

    #[test]
    fn substreams_differ_and_repeat() {
        let a: f64 = substream(1, 0).gen();
        let b: f64 = substream(1, 1).gen();
        let c: f64 = substream(1, 0).gen();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
