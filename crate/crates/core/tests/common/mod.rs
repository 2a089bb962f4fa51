//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use elliptic_core::elliptic_fiber::{transport_matrix, FiberMap};
use elliptic_core::grassmann4::{Vec3, Vec4};
use elliptic_core::sampling::latlong_grid;
use num_complex::Complex64 as C64;

/// Polynomial extrapolation to `t = 0` through `(t_i, v_i)` (Neville).
pub fn extrapolate_to_zero(ts: &[f64], vs: &[C64]) -> C64 {
    let mut p = vs.to_vec();
    let n = ts.len();
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (p[i + 1] * ts[i] - p[i] * ts[i + k]) / (ts[i] - ts[i + k]);
        }
    }
    p[0]
}

/// Holomorphic Taylor coefficients `a_k` (k ≤ order) of a smooth function at
/// 0: the mode-k Fourier coefficient on the circle of radius s is
/// `a_k s^k + O(s^{k+2})`, extrapolated in s².
pub fn holomorphic_jet<F: Fn(C64) -> C64>(f: F, order: usize, scale: f64) -> Vec<C64> {
    let m = 64;
    let radii: Vec<f64> = (1..=6).map(|i| scale * i as f64 / 6.0).collect();
    (0..=order)
        .map(|k| {
            let vals: Vec<C64> = radii
                .iter()
                .map(|&s| {
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..m {
                        let t = std::f64::consts::TAU * j as f64 / m as f64;
                        acc += f(C64::from_polar(s, t)) * C64::from_polar(1.0, -(k as f64) * t);
                    }
                    acc / (m as f64 * s.powi(k as i32))
                })
                .collect();
            let ts: Vec<f64> = radii.iter().map(|s| s * s).collect();
            extrapolate_to_zero(&ts, &vals)
        })
        .collect()
}

/// Brute-force scan of `|u − M_x a(u)|` over a lat-long grid of `n × n`
/// cells. Returns the grid points within `tau` of solving the equation.
pub fn fixed_point_candidates(f: &FiberMap, x: &Vec4, n: usize, tau: f64) -> Vec<Vec3> {
    let m = transport_matrix(x);
    latlong_grid(n)
        .into_iter()
        .filter(|u| (u - m * f.value(u)).norm() < tau)
        .collect()
}

/// Minimiser of `|a(u) − u|` by successively refined lat-long scans around
/// the best grid point.
pub fn brute_force_fixed_point(f: &FiberMap) -> Vec3 {
    let grid = latlong_grid(200);
    let mut best = grid
        .iter()
        .copied()
        .min_by(|a, b| (f.value(a) - a).norm().partial_cmp(&(f.value(b) - b).norm()).unwrap())
        .unwrap();
    let mut h = 0.05;
    for _ in 0..60 {
        let (e1, e2) = elliptic_core::sampling::tangent_basis(&best);
        let mut cand = best;
        let mut val = (f.value(&best) - best).norm();
        for i in -4..=4 {
            for j in -4..=4 {
                let u = (best + e1 * (h * i as f64 / 4.0) + e2 * (h * j as f64 / 4.0)).normalize();
                let v = (f.value(&u) - u).norm();
                if v < val {
                    val = v;
                    cand = u;
                }
            }
        }
        if cand == best {
            h *= 0.5;
        }
        best = cand;
    }
    best
}

/// Roots of `a z² + b z + c` (a ≠ 0).
pub fn quadratic_roots(a: C64, b: C64, c: C64) -> [C64; 2] {
    let d = (b * b - a * c * 4.0).sqrt();
    [(-b + d) / (a * 2.0), (-b - d) / (a * 2.0)]
}

/// Dual degree by brute force over all nodal/cuspidal profiles satisfying
/// the class formula `d* = d(d−1) − 2δ − 3κ`.
pub fn class_formula(d: i64, delta: i64, kappa: i64) -> i64 {
    d * (d - 1) - 2 * delta - 3 * kappa
}

/// Distance from `x` to the plane with sphere pair `(up, um)`, through the
/// matrix `B_ij` of its unit bivector, whose square is minus the projector
/// onto the plane.
pub fn plane_distance(up: &Vec3, um: &Vec3, x: &Vec4) -> f64 {
    let e12 = (up[0] + um[0]) / 2.0;
    let e34 = (up[0] - um[0]) / 2.0;
    let e13 = (up[1] + um[1]) / 2.0;
    let e24 = (um[1] - up[1]) / 2.0;
    let e14 = (up[2] + um[2]) / 2.0;
    let e23 = (up[2] - um[2]) / 2.0;
    let b = nalgebra::Matrix4::new(
        0.0, e12, e13, e14, //
        -e12, 0.0, e23, e24, //
        -e13, -e23, 0.0, e34, //
        -e14, -e24, -e34, 0.0,
    );
    // -B² projects onto the plane
    (x + b * (b * x)).norm()
}
