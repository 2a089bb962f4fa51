//! Local J-curves as graphs: Picard iteration for `∂f/∂z̄ = h(z, f, ∂f/∂z)`.
//!
//! The Cauchy–Green operator `T g(z) = −(1/π) ∫∫_D g(ζ)/(ζ − z) dA` is
//! applied mode by mode on a polar grid (Chebyshev radii, equispaced angles).
//! Writing `g = Σ G_m(ρ) e^{imφ}`, mode `m` of `g` feeds mode `m − 1` of `T g`:
//!
//! ```text
//! m ≥ 1: −2 ∫_r^R (r/ρ)^{m−1} G_m(ρ) dρ
//! m ≤ 0:  2 ∫_0^r (ρ/r)^{1−m} G_m(ρ) dρ
//! ```
//!
//! Jet preservation subtracts the Taylor coefficients
//! `c_k = −2 ∫_0^R ρ^{−k} G_{k+1}(ρ) dρ`, `k ≤ K`, computed from a fit of
//! `G_{k+1}` of the form `ρ^{k+1} Q(ρ)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::sync::Arc;

use crate::elliptic_field::ChartGerm;
use crate::error::{Error, Result};

pub const MAX_JET_ORDER: usize = 8;
/// Sup-norm bound on the equation residual of a returned solution.
pub const RESIDUAL_LIMIT: f64 = 1e-6;
/// Updates below this level are treated as roundoff when estimating the
/// contraction ratio.
pub const NOISE_FLOOR: f64 = 1e-11;

/// Holomorphic jet `f(0) + λ₀ z + Σ a_k z^k` prescribed at the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Jet {
    pub value: C64,
    pub slope: C64,
    /// Coefficients of `z², z³, …`.
    pub higher: Vec<C64>,
}

impl Jet {
    pub fn new(value: C64, slope: C64) -> Self {
        Self { value, slope, higher: Vec::new() }
    }

    pub fn with_higher(mut self, higher: Vec<C64>) -> Self {
        self.higher = higher;
        self
    }

    pub fn order(&self) -> usize {
        1 + self.higher.len()
    }

    pub fn coefficients(&self) -> Vec<C64> {
        let mut c = vec![self.value, self.slope];
        c.extend_from_slice(&self.higher);
        c
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coefficients().iter().rev().fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    fn validate(&self, g: &ChartGerm) -> Result<()> {
        if self.order() > MAX_JET_ORDER {
            return Err(Error::validation(format!("jet order is limited to {MAX_JET_ORDER}")));
        }
        if self.coefficients().iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::validation("jet coefficients must be finite"));
        }
        if self.value.norm() > g.domain.w_radius || self.slope.norm() > g.domain.lambda_radius {
            return Err(Error::validation("jet lies outside the germ's domain"));
        }
        Ok(())
    }
}

/// Complex values on an `n × n` grid over `[−R, R]²`, present inside the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskGridFunction {
    pub radius: f64,
    pub n: usize,
    /// Row-major, row index along `Im z`.
    pub values: Vec<Option<C64>>,
}

impl DiskGridFunction {
    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize, j: usize) -> C64 {
        let h = self.spacing();
        C64::new(-self.radius + h * j as f64, -self.radius + h * i as f64)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<C64> {
        self.values[i * self.n + j]
    }

    /// Samples `f` on the grid points inside the disk.
    pub fn from_fn<F: Fn(C64) -> C64>(radius: f64, n: usize, f: F) -> Self {
        let mut g = Self { radius, n, values: vec![None; n * n] };
        for i in 0..n {
            for j in 0..n {
                let z = g.point(i, j);
                if z.norm() <= radius * (1.0 + 1e-12) {
                    g.values[i * n + j] = Some(f(z));
                }
            }
        }
        g
    }

    /// Bicubic (Catmull–Rom) interpolation; bilinear near the rim.
    pub fn interpolate(&self, z: C64) -> Result<C64> {
        let h = self.spacing();
        let fx = (z.re + self.radius) / h;
        let fy = (z.im + self.radius) / h;
        let (j0, i0) = (fx.floor() as isize, fy.floor() as isize);
        let (tx, ty) = (fx - j0 as f64, fy - i0 as f64);
        let at = |i: isize, j: isize| -> Option<C64> {
            if i < 0 || j < 0 || i >= self.n as isize || j >= self.n as isize {
                return None;
            }
            self.get(i as usize, j as usize)
        };
        let cubic = |p: [C64; 4], t: f64| {
            let a = -p[0] * 0.5 + p[1] * 1.5 - p[2] * 1.5 + p[3] * 0.5;
            let b = p[0] - p[1] * 2.5 + p[2] * 2.0 - p[3] * 0.5;
            let c = (p[2] - p[0]) * 0.5;
            ((a * t + b) * t + c) * t + p[1]
        };
        let mut rows = [C64::new(0.0, 0.0); 4];
        let mut full = true;
        'outer: for (k, di) in (-1..=2).enumerate() {
            let mut p = [C64::new(0.0, 0.0); 4];
            for (l, dj) in (-1..=2).enumerate() {
                match at(i0 + di, j0 + dj) {
                    Some(v) => p[l] = v,
                    None => {
                        full = false;
                        break 'outer;
                    }
                }
            }
            rows[k] = cubic(p, tx);
        }
        if full {
            return Ok(cubic(rows, ty));
        }
        match (at(i0, j0), at(i0, j0 + 1), at(i0 + 1, j0), at(i0 + 1, j0 + 1)) {
            (Some(a), Some(b), Some(c), Some(d)) => {
                Ok((a * (1.0 - tx) + b * tx) * (1.0 - ty) + (c * (1.0 - tx) + d * tx) * ty)
            }
            _ => Err(Error::domain("point is outside the sampled disk")),
        }
    }

    /// Largest difference at grid points shared with `other` (same radius,
    /// one grid a refinement of the other).
    pub fn sup_difference(&self, other: &DiskGridFunction) -> Result<f64> {
        if (self.radius - other.radius).abs() > 1e-15 {
            return Err(Error::validation("grids have different radii"));
        }
        let (coarse, fine) = if self.n <= other.n { (self, other) } else { (other, self) };
        if (fine.n - 1) % (coarse.n - 1) != 0 {
            return Err(Error::validation("grids are not nested"));
        }
        let s = (fine.n - 1) / (coarse.n - 1);
        let mut d = 0.0f64;
        for i in 0..coarse.n {
            for j in 0..coarse.n {
                if let (Some(a), Some(b)) = (coarse.get(i, j), fine.get(i * s, j * s)) {
                    d = d.max((a - b).norm());
                }
            }
        }
        Ok(d)
    }

    pub fn sup_error<F: Fn(C64) -> C64>(&self, exact: F) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.n {
            for j in 0..self.n {
                if let Some(v) = self.get(i, j) {
                    d = d.max((v - exact(self.point(i, j))).norm());
                }
            }
        }
        d
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("re_z,im_z,re_f,im_f\n");
        for i in 0..self.n {
            for j in 0..self.n {
                if let Some(v) = self.get(i, j) {
                    let z = self.point(i, j);
                    s.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", z.re, z.im, v.re, v.im));
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SolveTrace {
    /// Sup-norm size of each Picard update.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub contraction_ratio: f64,
    /// Equation residual of the returned grid function.
    pub equation_residual: f64,
    pub radius: f64,
    pub n: usize,
    pub radius_halvings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SolverControls {
    fn default() -> Self {
        Self { max_iterations: 200, tolerance: 1e-12 }
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    for i in 0..q {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=q {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if q == 0 { 1.0 } else if q == 1 { t } else { p1 };
            let pm = if q == 1 { 1.0 } else { p0 };
            dp = q as f64 * (t * p - pm) / (t * t - 1.0);
            let dt = p / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x[q - 1 - i] = t;
        w[q - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    (x, w)
}

/// Chebyshev points of the first kind on (0, R) with barycentric tools.
#[derive(Debug, Clone)]
struct RadialNodes {
    r: Vec<f64>,
    w: Vec<f64>,
}

impl RadialNodes {
    fn new(nr: usize, radius: f64) -> Self {
        let mut r = Vec::with_capacity(nr);
        let mut w = Vec::with_capacity(nr);
        for j in 0..nr {
            let t = std::f64::consts::PI * (j as f64 + 0.5) / nr as f64;
            r.push(0.5 * radius * (1.0 - t.cos()));
            w.push(if j % 2 == 0 { t.sin() } else { -t.sin() });
        }
        Self { r, w }
    }

    /// Values of all Lagrange basis polynomials at `x`.
    fn basis(&self, x: f64, out: &mut [f64]) {
        for (l, &rl) in self.r.iter().enumerate() {
            if x == rl {
                out.iter_mut().for_each(|v| *v = 0.0);
                out[l] = 1.0;
                return;
            }
        }
        let mut s = 0.0;
        for l in 0..self.r.len() {
            out[l] = self.w[l] / (x - self.r[l]);
            s += out[l];
        }
        out.iter_mut().for_each(|v| *v /= s);
    }

    fn differentiation(&self) -> DMatrix<f64> {
        let n = self.r.len();
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (self.w[j] / self.w[i]) / (self.r[i] - self.r[j]);
                    d[(i, j)] = v;
                    diag -= v;
                }
            }
            d[(i, i)] = diag;
        }
        d
    }
}

/// Precomputed polar discretization of the disk of radius `R`.
struct PolarGrid {
    radius: f64,
    nodes: RadialNodes,
    nt: usize,
    diff: DMatrix<f64>,
    /// Operator for input mode `m`, indexed by `m.rem_euclid(nt)`.
    ops: Vec<DMatrix<f64>>,
    /// Functionals giving `c_k` from mode `k + 1`, `k ≤ MAX_JET_ORDER`.
    taylor: Vec<DVector<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn mode_of(idx: usize, nt: usize) -> i64 {
    let h = (nt / 2) as i64;
    let m = idx as i64;
    if m >= h {
        m - nt as i64
    } else {
        m
    }
}

impl PolarGrid {
    fn new(n: usize, radius: f64) -> Self {
        let nr = n.div_ceil(2);
        let nt = n - 1;
        let nodes = RadialNodes::new(nr, radius);
        let diff = nodes.differentiation();

        // inner rule on s ∈ (0, 1), exact for the polynomial integrands
        let (gx, gw) = gauss_legendre(nr / 2 + nt / 4 + 8);
        let inner_pts: Vec<(f64, f64)> = gx.iter().zip(&gw).map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
        // outer rule: geometric panels of ratio 3/2 from r_j to R
        let (px, pw) = gauss_legendre(nr / 2 + 16);
        let mut buf = vec![0.0; nr];

        let mut inner_basis: Vec<Vec<(f64, Vec<f64>)>> = Vec::with_capacity(nr);
        let mut outer_basis: Vec<Vec<(f64, f64, Vec<f64>)>> = Vec::with_capacity(nr);
        for &rj in &nodes.r {
            let ib = inner_pts
                .iter()
                .map(|&(s, w)| {
                    nodes.basis(rj * s, &mut buf);
                    (s, w * rj, buf.clone())
                })
                .map(|(s, w, b)| (s, b.into_iter().map(|v| v * w).collect::<Vec<_>>()))
                .collect();
            inner_basis.push(ib);
            let mut ob = Vec::new();
            let mut a = rj;
            while a < radius {
                let b = (a * 1.5).min(radius);
                for (&x, &w) in px.iter().zip(&pw) {
                    let rho = a + (b - a) * 0.5 * (x + 1.0);
                    nodes.basis(rho, &mut buf);
                    ob.push((rho, w * 0.5 * (b - a), buf.clone()));
                }
                a = b;
            }
            outer_basis.push(ob);
        }

        let mut ops = vec![DMatrix::zeros(nr, nr); nt];
        for (idx, op) in ops.iter_mut().enumerate() {
            let m = mode_of(idx, nt);
            for j in 0..nr {
                let rj = nodes.r[j];
                if m >= 1 {
                    let k = (m - 1) as i32;
                    for (rho, w, b) in &outer_basis[j] {
                        let f = -2.0 * w * (rj / rho).powi(k);
                        for l in 0..nr {
                            op[(j, l)] += f * b[l];
                        }
                    }
                } else {
                    let e = (1 - m) as i32;
                    for (s, b) in &inner_basis[j] {
                        let f = 2.0 * s.powi(e);
                        for l in 0..nr {
                            op[(j, l)] += f * b[l];
                        }
                    }
                }
            }
        }

        let (qx, qw) = gauss_legendre(nr + 8);
        let taylor = (0..=MAX_JET_ORDER.min(nr.saturating_sub(2)))
            .map(|k| {
                let cols = nr - k - 1;
                let cheb = |j: usize, rho: f64| (j as f64 * (2.0 * rho / radius - 1.0).clamp(-1.0, 1.0).acos()).cos();
                let a = DMatrix::from_fn(nr, cols, |l, j| {
                    let rho = nodes.r[l];
                    rho.powi(k as i32 + 1) * cheb(j, rho)
                });
                let integrals = DVector::from_fn(cols, |j, _| {
                    qx.iter()
                        .zip(&qw)
                        .map(|(&x, &w)| {
                            let rho = 0.5 * radius * (x + 1.0);
                            0.5 * radius * w * rho * cheb(j, rho)
                        })
                        .sum::<f64>()
                });
                let pinv = a.pseudo_inverse(1e-14 * radius.powi(k as i32 + 1)).unwrap_or_else(|_| DMatrix::zeros(cols, nr));
                pinv.transpose() * integrals * -2.0
            })
            .collect();

        let mut planner = FftPlanner::new();
        Self {
            radius,
            fwd: planner.plan_fft_forward(nt),
            inv: planner.plan_fft_inverse(nt),
            nodes,
            nt,
            diff,
            ops,
            taylor,
        }
    }

    fn nr(&self) -> usize {
        self.nodes.r.len()
    }

    fn point(&self, j: usize, i: usize) -> C64 {
        C64::from_polar(self.nodes.r[j], std::f64::consts::TAU * i as f64 / self.nt as f64)
    }

    /// Nodal values (ring-major) to modes `[idx][ring]`.
    fn to_modes(&self, vals: &[C64]) -> Vec<Vec<C64>> {
        let (nr, nt) = (self.nr(), self.nt);
        let mut modes = vec![vec![C64::new(0.0, 0.0); nr]; nt];
        let mut buf = vec![C64::new(0.0, 0.0); nt];
        for j in 0..nr {
            buf.copy_from_slice(&vals[j * nt..(j + 1) * nt]);
            self.fwd.process(&mut buf);
            for idx in 0..nt {
                modes[idx][j] = buf[idx] / nt as f64;
            }
        }
        modes
    }

    fn to_values(&self, modes: &[Vec<C64>]) -> Vec<C64> {
        let (nr, nt) = (self.nr(), self.nt);
        let mut vals = vec![C64::new(0.0, 0.0); nr * nt];
        let mut buf = vec![C64::new(0.0, 0.0); nt];
        for j in 0..nr {
            for idx in 0..nt {
                buf[idx] = modes[idx][j];
            }
            self.inv.process(&mut buf);
            vals[j * nt..(j + 1) * nt].copy_from_slice(&buf);
        }
        vals
    }

    fn shift_down(&self, idx_in: usize) -> Option<usize> {
        let m = mode_of(idx_in, self.nt) - 1;
        if m < -((self.nt / 2) as i64) {
            None
        } else {
            Some(m.rem_euclid(self.nt as i64) as usize)
        }
    }

    /// `∂f/∂z` from nodal values.
    fn dz(&self, vals: &[C64]) -> Vec<C64> {
        let modes = self.to_modes(vals);
        let nr = self.nr();
        let mut out = vec![vec![C64::new(0.0, 0.0); nr]; self.nt];
        for (idx, fm) in modes.iter().enumerate() {
            let Some(t) = self.shift_down(idx) else { continue };
            let m = mode_of(idx, self.nt) as f64;
            for j in 0..nr {
                let d: C64 = (0..nr).map(|l| fm[l] * self.diff[(j, l)]).sum();
                out[t][j] = (d + fm[j] * (m / self.nodes.r[j])) * 0.5;
            }
        }
        self.to_values(&out)
    }

    /// Jet-preserving Cauchy–Green transform of nodal values.
    fn cauchy(&self, vals: &[C64], order: Option<usize>) -> Vec<C64> {
        let modes = self.to_modes(vals);
        let nr = self.nr();
        let mut out = vec![vec![C64::new(0.0, 0.0); nr]; self.nt];
        for (idx, gm) in modes.iter().enumerate() {
            let Some(t) = self.shift_down(idx) else { continue };
            let op = &self.ops[idx];
            for j in 0..nr {
                out[t][j] = (0..nr).map(|l| gm[l] * op[(j, l)]).sum();
            }
        }
        let kmax = order.map_or(0, |k| (k + 1).min(self.taylor.len()));
        for k in 0..kmax {
            let src = &modes[(k + 1) % self.nt];
            let ck: C64 = self.taylor[k].iter().zip(src).map(|(&b, &g)| g * b).sum();
            for j in 0..nr {
                out[k][j] -= ck * self.nodes.r[j].powi(k as i32);
            }
        }
        self.to_values(&out)
    }

    /// Spectral evaluation at an arbitrary point of the closed disk.
    fn evaluate(&self, modes: &[Vec<C64>], z: C64, buf: &mut [f64]) -> C64 {
        let r = z.norm().min(self.radius);
        self.nodes.basis(r, buf);
        let e = if r > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        let mut s = C64::new(0.0, 0.0);
        for (idx, fm) in modes.iter().enumerate() {
            let m = mode_of(idx, self.nt);
            let v: C64 = fm.iter().zip(buf.iter()).map(|(&a, &b)| a * b).sum();
            s += v * e.powi(m as i32);
        }
        s
    }
}

fn eval_germ(g: &ChartGerm, z: C64, w: C64, l: C64) -> Result<C64> {
    let d = &g.domain;
    if w.norm() > d.w_radius || l.norm() > d.lambda_radius || z.norm() > d.z_radius * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "graph leaves the germ domain at z = {z:.4} (w = {w:.4}, slope = {l:.4})"
        )));
    }
    g.eval(z, w, l)
}

/// Sup over interior grid points of `|∂f/∂z̄ − h(z, f, ∂f/∂z)|`, using
/// fourth-order central differences; points whose stencil leaves the disk
/// are excluded.
pub fn residual(g: &ChartGerm, f: &DiskGridFunction) -> Result<f64> {
    let n = f.n as isize;
    let h = f.spacing();
    let at = |i: isize, j: isize| -> Option<C64> {
        if i < 0 || j < 0 || i >= n || j >= n {
            None
        } else {
            f.get(i as usize, j as usize)
        }
    };
    let mut sup = 0.0f64;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            let Some(v) = at(i, j) else { continue };
            let sx = [at(i, j - 2), at(i, j - 1), at(i, j + 1), at(i, j + 2)];
            let sy = [at(i - 2, j), at(i - 1, j), at(i + 1, j), at(i + 2, j)];
            let (Some(x0), Some(x1), Some(x2), Some(x3)) = (sx[0], sx[1], sx[2], sx[3]) else { continue };
            let (Some(y0), Some(y1), Some(y2), Some(y3)) = (sy[0], sy[1], sy[2], sy[3]) else { continue };
            let fx = (x0 - x1 * 8.0 + x2 * 8.0 - x3) / (12.0 * h);
            let fy = (y0 - y1 * 8.0 + y2 * 8.0 - y3) / (12.0 * h);
            let i_unit = C64::new(0.0, 1.0);
            let fz = (fx - i_unit * fy) * 0.5;
            let fzb = (fx + i_unit * fy) * 0.5;
            let hv = eval_germ(g, f.point(i as usize, j as usize), v, fz)?;
            sup = sup.max((fzb - hv).norm());
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::validation("grid too coarse for residual evaluation"));
    }
    Ok(sup)
}

fn contraction_ratio(history: &[f64]) -> f64 {
    history
        .windows(2)
        .filter(|w| w[0] > NOISE_FLOOR)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max)
}

/// Fixed point of `f ← P(jet) + T[h(·, f, ∂f)]` on the disk of radius
/// `radius`, sampled on an `n × n` grid.
pub fn picard_solve(
    g: &ChartGerm,
    jet: &Jet,
    radius: f64,
    n: usize,
) -> Result<(DiskGridFunction, SolveTrace)> {
    picard_solve_with(g, jet, radius, n, SolverControls::default())
}

pub fn picard_solve_with(
    g: &ChartGerm,
    jet: &Jet,
    radius: f64,
    n: usize,
    controls: SolverControls,
) -> Result<(DiskGridFunction, SolveTrace)> {
    if n.is_multiple_of(2) || !(17..=257).contains(&n) {
        return Err(Error::validation("grid size must be odd and between 17 and 257"));
    }
    if !(radius > 0.0 && radius <= g.domain.z_radius) {
        return Err(Error::validation("solve radius must be positive and inside the germ's z-domain"));
    }
    jet.validate(g)?;
    let grid = PolarGrid::new(n, radius);
    let (nr, nt) = (grid.nr(), grid.nt);
    let pts: Vec<C64> = (0..nr).flat_map(|j| (0..nt).map(move |i| (j, i))).map(|(j, i)| grid.point(j, i)).collect();
    let seed: Vec<C64> = pts.iter().map(|&z| jet.eval(z)).collect();
    let order = jet.order();

    let mut f = seed.clone();
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..controls.max_iterations {
        let fz = grid.dz(&f);
        let rhs = pts
            .iter()
            .zip(f.iter().zip(&fz))
            .map(|(&z, (&w, &l))| eval_germ(g, z, w, l))
            .collect::<Result<Vec<_>>>()?;
        let t = grid.cauchy(&rhs, Some(order));
        let next: Vec<C64> = seed.iter().zip(&t).map(|(a, b)| a + b).collect();
        let d = next.iter().zip(&f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        history.push(d);
        f = next;
        if !d.is_finite() {
            break;
        }
        if d <= controls.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::convergence(history));
    }

    let modes = grid.to_modes(&f);
    let out = DiskGridFunction::from_fn(radius, n, |z| grid.evaluate(&modes, z, &mut vec![0.0; nr]));
    let eq = residual(g, &out)?;
    let trace = SolveTrace {
        iterations: history.len(),
        contraction_ratio: contraction_ratio(&history),
        residuals: history,
        converged,
        equation_residual: eq,
        radius,
        n,
        radius_halvings: 0,
    };
    if !(eq < RESIDUAL_LIMIT) {
        return Err(Error::numerical(format!(
            "solution residual {eq:.3e} exceeds {RESIDUAL_LIMIT:.0e}"
        )));
    }
    Ok((out, trace))
}

/// Solve on half the germ's z-domain, halving the radius up to three times
/// when the iteration fails to converge or leaves the germ's domain.
pub fn solve_with_radius_policy(g: &ChartGerm, jet: &Jet, n: usize) -> Result<(DiskGridFunction, SolveTrace)> {
    let mut radius = 0.5 * g.domain.z_radius;
    let mut last = None;
    for halvings in 0..=3 {
        match picard_solve(g, jet, radius, n) {
            Ok((f, mut t)) => {
                t.radius_halvings = halvings;
                return Ok((f, t));
            }
            Err(e @ (Error::Convergence { .. } | Error::Domain(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
        radius *= 0.5;
    }
    Err(last.unwrap_or_else(|| Error::Internal("radius policy exhausted".into())))
}

/// Independent solves run concurrently; each solve is itself sequential.
pub fn solve_batch(jobs: &[(ChartGerm, Jet, f64, usize)]) -> Vec<Result<(DiskGridFunction, SolveTrace)>> {
    jobs.par_iter().map(|(g, j, r, n)| picard_solve(g, j, *r, *n)).collect()
}

/// Evaluation of the polar Cauchy–Green operator on a function given in
/// closed form; exposed for operator tests.
pub fn cauchy_transform_on_grid<F: Fn(C64) -> C64>(
    g: F,
    radius: f64,
    n: usize,
    order: Option<usize>,
) -> DiskGridFunction {
    let grid = PolarGrid::new(n, radius);
    let (nr, nt) = (grid.nr(), grid.nt);
    let vals: Vec<C64> = (0..nr).flat_map(|j| (0..nt).map(move |i| (j, i))).map(|(j, i)| g(grid.point(j, i))).collect();
    let modes = grid.to_modes(&grid.cauchy(&vals, order));
    DiskGridFunction::from_fn(radius, n, |z| grid.evaluate(&modes, z, &mut vec![0.0; nr]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic_field::{GermDomain, PolyGerm};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        for k in 0..20 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k + 1) as f64 };
            assert!((q - exact).abs() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn transform_of_antiholomorphic_monomials() {
        for k in 0..4 {
            let t = cauchy_transform_on_grid(|z| z.conj().powi(k), 0.5, 33, Some(1));
            let err = t.sup_error(|z| z.conj().powi(k + 1) / (k + 1) as f64);
            assert!(err < 1e-13, "k = {k}: {err}");
        }
    }

    #[test]
    fn transform_inverts_dbar() {
        // ∂̄(z² z̄³/3) = z² z̄²; jet-preserving transform kills the z^k parts
        let t = cauchy_transform_on_grid(|z| z * z * z.conj() * z.conj(), 0.5, 33, Some(4));
        let err = t.sup_error(|z| z * z * z.conj().powi(3) / 3.0);
        assert!(err < 1e-13, "{err}");
        // a mode that does produce holomorphic terms: g = z̄⁰ z³ → T = z³ z̄
        let t = cauchy_transform_on_grid(|z| z.powi(3), 0.5, 33, Some(3));
        assert!(t.sup_error(|z| z.powi(3) * z.conj()) < 1e-13);
    }

    #[test]
    fn holomorphic_and_linear_cases() {
        let zero = ChartGerm::zero(GermDomain::default());
        let lam = c(0.3, -0.2);
        let (f, t) = picard_solve(&zero, &Jet::new(c(0.0, 0.0), lam), 0.5, 65).unwrap();
        assert!(f.sup_error(|z| lam * z) < 1e-13);
        assert!(t.converged);

        let kappa = c(0.4, 0.1);
        let g = ChartGerm::polynomial(
            PolyGerm::new(vec![PolyGerm::term(kappa, [0, 0, 0, 0, 0, 1])]),
            GermDomain::default(),
        )
        .unwrap();
        let (f, t) = picard_solve(&g, &Jet::new(c(0.0, 0.0), lam), 0.5, 65).unwrap();
        assert!(f.sup_error(|z| lam * z + kappa * lam.conj() * z.conj()) < 1e-8);
        assert!(t.contraction_ratio <= 0.4 + 0.2);
    }

    #[test]
    fn exponential_case() {
        let eps = 0.3;
        let g = ChartGerm::polynomial(
            PolyGerm::new(vec![PolyGerm::term(c(eps, 0.0), [0, 0, 1, 0, 0, 0])]),
            GermDomain { z_radius: 1.0, w_radius: 2.0, lambda_radius: 1.0 },
        )
        .unwrap();
        let (f, t) = picard_solve(&g, &Jet::new(c(1.0, 0.0), c(0.0, 0.0)), 0.5, 65).unwrap();
        let err = f.sup_error(|z| (z.conj() * eps).exp());
        assert!(err < 1e-7, "{err}");
        assert!(t.contraction_ratio <= 0.2, "{t:?}");
        assert!(t.residuals.windows(2).all(|w| w[1] <= w[0] || w[1] < 1e-12));
    }

    #[test]
    fn residual_examples() {
        let zero = ChartGerm::zero(GermDomain::default());
        let f = DiskGridFunction::from_fn(0.5, 65, |z| c(0.2, 0.5) * z);
        assert!(residual(&zero, &f).unwrap() < 1e-10);
        let eps = c(0.25, 0.0);
        let g = ChartGerm::polynomial(PolyGerm::new(vec![PolyGerm::term(eps, [0; 6])]), GermDomain::default()).unwrap();
        let f = DiskGridFunction::from_fn(0.5, 65, |z| eps * z.conj());
        assert!(residual(&g, &f).unwrap() < 1e-10);
        let mut noisy = f.clone();
        let mut r = crate::sampling::rng(1);
        for v in noisy.values.iter_mut().flatten() {
            *v += crate::sampling::random_in_disk(&mut r, 1e-3);
        }
        assert!(residual(&g, &noisy).unwrap() > 1e-4);
        let far = DiskGridFunction::from_fn(0.5, 65, |_| c(5.0, 0.0));
        assert!(matches!(residual(&zero, &far), Err(Error::Domain(_))));
    }

    #[test]
    fn validation_errors() {
        let zero = ChartGerm::zero(GermDomain::default());
        let j = Jet::new(c(0.0, 0.0), c(0.0, 0.0));
        assert!(picard_solve(&zero, &j, 0.5, 64).unwrap_err().is_validation());
        assert!(picard_solve(&zero, &j, 2.0, 65).unwrap_err().is_validation());
        let long = j.clone().with_higher(vec![c(0.0, 0.0); 8]);
        assert!(picard_solve(&zero, &long, 0.5, 65).unwrap_err().is_validation());
        let far = Jet::new(c(3.0, 0.0), c(0.0, 0.0));
        assert!(picard_solve(&zero, &far, 0.5, 65).unwrap_err().is_validation());
    }

    #[test]
    fn higher_jets_are_preserved() {
        let zero = ChartGerm::zero(GermDomain::default());
        let j = Jet::new(c(0.1, 0.0), c(0.2, 0.1)).with_higher(vec![c(0.05, 0.0), c(0.0, -0.03)]);
        let (f, _) = picard_solve(&zero, &j, 0.5, 33).unwrap();
        assert!(f.sup_error(|z| j.eval(z)) < 1e-13);
    }

    #[test]
    fn interpolation_and_export() {
        let f = DiskGridFunction::from_fn(0.5, 33, |z| z * z);
        let z = c(0.11, -0.07);
        assert!((f.interpolate(z).unwrap() - z * z).norm() < 1e-6);
        assert!(f.interpolate(c(0.7, 0.0)).is_err());
        assert!(f.to_csv().lines().count() > 33 * 33 / 2);
        let g = DiskGridFunction::from_fn(0.5, 65, |z| z * z);
        assert!(f.sup_difference(&g).unwrap() < 1e-15);
    }
}
