//! Positivity checks against symplectic forms: Monte Carlo Crofton pairings
//! of surface patches with measured line families, and sampled taming of the
//! fiber planes of a field.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elliptic_field::{Example5, FieldDef, LineGraph, Wirtinger};
use crate::error::{Error, Result};
use crate::grassmann4::{e, intersection_sign, plane_from_span, OrientedPlane, Vec4};
use crate::sampling;

pub const NEWTON_TOL: f64 = 1e-10;
pub const TANGENCY_TOL: f64 = 1e-8;
const MAX_RESAMPLES: u64 = 1024;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn lift(a: C64, b: C64) -> Vec4 {
    Vec4::new(a.re, a.im, b.re, b.im)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum PatchMap {
    /// `τ ↦ point + τ·direction`.
    ComplexLine { point: [C64; 2], direction: [C64; 2] },
    /// `τ ↦ (τ, Σ coeffs[k] τ^k)`.
    PolynomialGraph { coeffs: Vec<C64> },
    /// Disjoint union; counts add.
    Union { parts: Vec<SurfacePatch> },
}

/// A map from the rectangle `s_range × t_range` into C², with `τ = s + it`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SurfacePatch {
    pub map: PatchMap,
    pub s_range: [f64; 2],
    pub t_range: [f64; 2],
    #[serde(default)]
    pub reversed: bool,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_resolution() -> usize {
    64
}

impl SurfacePatch {
    fn square(map: PatchMap, half_width: f64) -> Self {
        Self {
            map,
            s_range: [-half_width, half_width],
            t_range: [-half_width, half_width],
            reversed: false,
            resolution: default_resolution(),
        }
    }

    /// The complex line `{z = z0}` over a square of `w` values.
    pub fn vertical_line(z0: C64, half_width: f64) -> Self {
        Self::square(
            PatchMap::ComplexLine { point: [z0, c(0.0, 0.0)], direction: [c(0.0, 0.0), c(1.0, 0.0)] },
            half_width,
        )
    }

    pub fn polynomial_graph(coeffs: Vec<C64>, half_width: f64) -> Self {
        Self::square(PatchMap::PolynomialGraph { coeffs }, half_width)
    }

    pub fn union(parts: Vec<SurfacePatch>) -> Self {
        Self::square(PatchMap::Union { parts }, 0.0)
    }

    pub fn reversed(mut self) -> Self {
        self.reversed = !self.reversed;
        self
    }

    fn tau(&self, s: f64, t: f64) -> C64 {
        if self.reversed {
            c(s, self.t_range[0] + self.t_range[1] - t)
        } else {
            c(s, t)
        }
    }

    /// `Φ(s, t)` with partials `Φ_s`, `Φ_t`.
    fn eval(&self, s: f64, t: f64) -> ([C64; 2], [C64; 2], [C64; 2]) {
        let tau = self.tau(s, t);
        let dt = if self.reversed { -1.0 } else { 1.0 };
        let i = c(0.0, dt);
        match &self.map {
            PatchMap::ComplexLine { point, direction } => (
                [point[0] + tau * direction[0], point[1] + tau * direction[1]],
                *direction,
                [direction[0] * i, direction[1] * i],
            ),
            PatchMap::PolynomialGraph { coeffs } => {
                let (mut w, mut dw) = (c(0.0, 0.0), c(0.0, 0.0));
                for a in coeffs.iter().rev() {
                    dw = dw * tau + w;
                    w = w * tau + a;
                }
                ([tau, w], [c(1.0, 0.0), dw], [i, dw * i])
            }
            PatchMap::Union { .. } => unreachable!("unions are split before evaluation"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PatchMap::Union { parts } = &self.map {
            return parts.iter().try_for_each(|p| p.validate());
        }
        let ok = |r: &[f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] < r[1];
        if !ok(&self.s_range) || !ok(&self.t_range) {
            return Err(Error::validation("patch ranges must be finite and increasing"));
        }
        if self.resolution < 4 {
            return Err(Error::validation("patch resolution must be at least 4"));
        }
        if let PatchMap::ComplexLine { direction, .. } = &self.map {
            if direction[0].norm() + direction[1].norm() == 0.0 {
                return Err(Error::validation("complex line patch needs a nonzero direction"));
            }
        }
        Ok(())
    }
}

/// A line drawn from a sampler, as a graph `w = g(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SampledLine {
    Affine { intercept: C64, slope: C64 },
    Example5(LineGraph),
}

impl SampledLine {
    fn eval(&self, z: C64) -> Option<C64> {
        match self {
            SampledLine::Affine { intercept, slope } => Some(intercept + slope * z),
            SampledLine::Example5(l) => l.eval(z).ok(),
        }
    }

    fn derivative(&self, z: C64) -> Wirtinger {
        match self {
            SampledLine::Affine { slope, .. } => (*slope, c(0.0, 0.0)),
            SampledLine::Example5(l) => l.derivative(z),
        }
    }
}

/// A declared measure on a line family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "camelCase", deny_unknown_fields)]
pub enum LineSampler {
    /// Lines through `(−1, w₁)` and `(1, w₂)` with `w₁, w₂` uniform in the
    /// disk of the given radius.
    StandardTwoPoint { radius: f64 },
    /// Lines `L(α, α)` of the example field with `α` uniform in its disk.
    Example5Disk { field: Example5 },
}

impl LineSampler {
    pub fn standard() -> Self {
        LineSampler::StandardTwoPoint { radius: 0.5 }
    }

    pub fn sample<R: Rng>(&self, r: &mut R) -> SampledLine {
        match self {
            LineSampler::StandardTwoPoint { radius } => {
                let w1 = sampling::random_in_disk(r, *radius);
                let w2 = sampling::random_in_disk(r, *radius);
                SampledLine::Affine { intercept: (w1 + w2) * 0.5, slope: (w2 - w1) * 0.5 }
            }
            LineSampler::Example5Disk { field } => {
                let alpha = sampling::random_in_disk(r, field.alpha_radius);
                SampledLine::Example5(LineGraph { alpha, field: *field })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PatchIntersection {
    pub s: f64,
    pub t: f64,
    pub point: [C64; 2],
    pub sign: i32,
}

struct Local {
    f: C64,
    jac: Matrix2<f64>,
    phi: [C64; 2],
    patch_frame: [Vec4; 2],
    line_frame: [Vec4; 2],
}

fn local(p: &SurfacePatch, line: &SampledLine, s: f64, t: f64) -> Option<Local> {
    let (phi, ps, pt) = p.eval(s, t);
    let g = line.eval(phi[0])?;
    let (gx, gxb) = line.derivative(phi[0]);
    let fs = ps[1] - gx * ps[0] - gxb * ps[0].conj();
    let ft = pt[1] - gx * pt[0] - gxb * pt[0].conj();
    let i = c(0.0, 1.0);
    Some(Local {
        f: phi[1] - g,
        jac: Matrix2::new(fs.re, ft.re, fs.im, ft.im),
        phi,
        patch_frame: [lift(ps[0], ps[1]), lift(pt[0], pt[1])],
        line_frame: [lift(c(1.0, 0.0), gx + gxb), lift(i, (gx - gxb) * i)],
    })
}

/// Change of `arg F` along the segment `a → b`, bisected until each step
/// turns by less than π/3.
fn arg_change(p: &SurfacePatch, line: &SampledLine, a: (f64, f64, C64), b: (f64, f64, C64), depth: u32) -> Option<f64> {
    let d = (b.2 / a.2).arg();
    if d.abs() < std::f64::consts::FRAC_PI_3 || depth == 0 {
        return Some(d);
    }
    let (s, t) = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
    let m = (s, t, local(p, line, s, t)?.f);
    Some(arg_change(p, line, a, m, depth - 1)? + arg_change(p, line, m, b, depth - 1)?)
}

/// Winding number of `F` around the cell `[s0,s1]×[t0,t1]`.
fn cell_winding(p: &SurfacePatch, line: &SampledLine, s0: f64, s1: f64, t0: f64, t1: f64) -> Option<i32> {
    let corner = |s, t| local(p, line, s, t).map(|l| (s, t, l.f));
    let c = [corner(s0, t0)?, corner(s1, t0)?, corner(s1, t1)?, corner(s0, t1)?];
    let total: f64 = (0..4).map(|k| arg_change(p, line, c[k], c[(k + 1) % 4], 12)).sum::<Option<f64>>()?;
    Some((total / std::f64::consts::TAU).round() as i32)
}

fn newton(p: &SurfacePatch, line: &SampledLine, mut s: f64, mut t: f64, scale: f64) -> Option<(f64, f64)> {
    for _ in 0..60 {
        let l = local(p, line, s, t)?;
        let step = l.jac.try_inverse()? * Vector2::new(l.f.re, l.f.im);
        s -= step[0];
        t -= step[1];
        if !(s.is_finite() && t.is_finite()) || step.norm() > 10.0 * scale {
            return None;
        }
        if step.norm() < NEWTON_TOL * (1.0 + s.abs() + t.abs()) {
            return (local(p, line, s, t)?.f.norm() < NEWTON_TOL).then_some((s, t));
        }
    }
    None
}

enum Found {
    Root(PatchIntersection),
    Tangential,
}

/// Roots in a cell whose signs account for its winding number `w`,
/// subdividing when Newton from the center does not find them all.
#[allow(clippy::too_many_arguments)]
fn cell_roots(
    p: &SurfacePatch,
    line: &SampledLine,
    (s0, s1, t0, t1): (f64, f64, f64, f64),
    w: i32,
    depth: u32,
    scale: f64,
    out: &mut Vec<Found>,
) {
    let tol = 1e-9 * scale;
    let inside = |s: f64, t: f64| s >= s0 - tol && s <= s1 + tol && t >= t0 - tol && t <= t1 + tol;
    let mut local_roots = Vec::new();
    if let Some((s, t)) = newton(p, line, 0.5 * (s0 + s1), 0.5 * (t0 + t1), scale) {
        if inside(s, t) {
            if let Some(l) = local(p, line, s, t) {
                let sign = (l.jac.determinant().abs() >= TANGENCY_TOL)
                    .then(|| {
                        let a = plane_from_span(&l.patch_frame[0], &l.patch_frame[1]).ok()?;
                        let b = plane_from_span(&l.line_frame[0], &l.line_frame[1]).ok()?;
                        Some(intersection_sign(&a, &b).as_i32())
                    })
                    .flatten()
                    .filter(|&k| k != 0);
                let Some(sign) = sign else {
                    out.push(Found::Tangential);
                    return;
                };
                local_roots.push(PatchIntersection { s, t, point: l.phi, sign });
            }
        }
    }
    let got: i32 = local_roots.iter().map(|r| r.sign).sum();
    if got == w && !local_roots.is_empty() || depth == 0 {
        out.extend(local_roots.into_iter().map(Found::Root));
        if got != w {
            out.push(Found::Tangential);
        }
        return;
    }
    let (sm, tm) = (0.5 * (s0 + s1), 0.5 * (t0 + t1));
    for q in [(s0, sm, t0, tm), (sm, s1, t0, tm), (s0, sm, tm, t1), (sm, s1, tm, t1)] {
        match cell_winding(p, line, q.0, q.1, q.2, q.3) {
            Some(0) => {}
            Some(k) => cell_roots(p, line, q, k, depth - 1, scale, out),
            None => out.push(Found::Tangential),
        }
    }
}

/// Transverse intersections of a (non-union) patch with a line, or `None`
/// when some intersection is tangential or cannot be resolved.
fn piece_intersections(p: &SurfacePatch, line: &SampledLine) -> Option<Vec<PatchIntersection>> {
    let n = p.resolution;
    let (s0, s1, t0, t1) = (p.s_range[0], p.s_range[1], p.t_range[0], p.t_range[1]);
    let scale = (s1 - s0).max(t1 - t0);
    let ss = |i: usize| s0 + (s1 - s0) * i as f64 / (n - 1) as f64;
    let ts = |j: usize| t0 + (t1 - t0) * j as f64 / (n - 1) as f64;
    let vals: Vec<Option<C64>> =
        (0..n * n).map(|k| local(p, line, ss(k / n), ts(k % n)).map(|l| l.f)).collect();
    let node = |i: usize, j: usize| vals[i * n + j].map(|f| (ss(i), ts(j), f));
    // arg changes along s-edges (i,j)→(i+1,j) and t-edges (i,j)→(i,j+1)
    let edge = |a: Option<(f64, f64, C64)>, b: Option<(f64, f64, C64)>| arg_change(p, line, a?, b?, 12);
    let es: Vec<Option<f64>> = (0..(n - 1) * n).map(|k| edge(node(k / n, k % n), node(k / n + 1, k % n))).collect();
    let et: Vec<Option<f64>> = (0..n * (n - 1)).map(|k| edge(node(k / (n - 1), k % (n - 1)), node(k / (n - 1), k % (n - 1) + 1))).collect();
    let mut found = Vec::new();
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let sides = [es[i * n + j], et[(i + 1) * (n - 1) + j], es[i * n + j + 1], et[i * (n - 1) + j]];
            // cells reaching outside the line's chart are skipped
            let [Some(a), Some(b), Some(c), Some(d)] = sides else { continue };
            let w = ((a + b - c - d) / std::f64::consts::TAU).round() as i32;
            if w != 0 {
                cell_roots(p, line, (ss(i), ss(i + 1), ts(j), ts(j + 1)), w, 6, scale, &mut found);
            }
        }
    }
    let mut roots: Vec<PatchIntersection> = Vec::new();
    for f in found {
        match f {
            Found::Tangential => return None,
            Found::Root(r) => {
                if !roots.iter().any(|q| (q.s - r.s).abs() + (q.t - r.t).abs() < 1e-7 * (1.0 + scale)) {
                    roots.push(r);
                }
            }
        }
    }
    Some(roots)
}

/// All transverse intersections of the patch with the line, or `None` when
/// some intersection is tangential.
pub fn intersections(p: &SurfacePatch, line: &SampledLine) -> Option<Vec<PatchIntersection>> {
    match &p.map {
        PatchMap::Union { parts } => {
            let mut all = Vec::new();
            for part in parts {
                all.extend(intersections(part, line)?);
            }
            Some(all)
        }
        _ => piece_intersections(p, line),
    }
}

pub fn signed_count(p: &SurfacePatch, line: &SampledLine) -> Option<i32> {
    intersections(p, line).map(|v| v.iter().map(|x| x.sign).sum())
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CroftonEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub sample_count: usize,
    pub seed: u64,
    /// Draws rejected for tangential intersection and redrawn.
    pub rejected: usize,
}

/// Per-sample signed counts, in sample order, with the rejection tally.
pub fn crofton_counts(s: &SurfacePatch, lines: &LineSampler, n: usize, seed: u64) -> Result<(Vec<i32>, usize)> {
    s.validate()?;
    if n < 100 {
        return Err(Error::validation("crofton pairing needs at least 100 samples"));
    }
    let per: Vec<Result<(i32, usize)>> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            for attempt in 0..MAX_RESAMPLES {
                let mut r = sampling::substream(seed, k * MAX_RESAMPLES + attempt);
                let line = lines.sample(&mut r);
                if let Some(count) = signed_count(s, &line) {
                    return Ok((count, attempt as usize));
                }
            }
            Err(Error::numerical(format!("sample {k}: every redraw met the patch tangentially")))
        })
        .collect();
    let mut counts = Vec::with_capacity(n);
    let mut rejected = 0;
    for p in per {
        let (cnt, rej) = p?;
        counts.push(cnt);
        rejected += rej;
    }
    Ok((counts, rejected))
}

pub fn crofton_pairing(s: &SurfacePatch, lines: &LineSampler, n: usize, seed: u64) -> Result<CroftonEstimate> {
    let (counts, rejected) = crofton_counts(s, lines, n, seed)?;
    let nf = n as f64;
    let mean = counts.iter().map(|&k| k as f64).sum::<f64>() / nf;
    let var = counts.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(CroftonEstimate { mean, stderr: (var / nf).sqrt(), sample_count: n, seed, rejected })
}

/// Constant-coefficient 2-form `Σ ω_ij dx_i∧dx_j` in the order
/// 12, 13, 14, 23, 24, 34.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoForm(pub [f64; 6]);

impl TwoForm {
    /// `dx₁∧dx₂ + dx₃∧dx₄`.
    pub fn standard() -> Self {
        TwoForm([1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
    }

    /// Value on a positive orthonormal basis of `p`.
    pub fn area(&self, p: &OrientedPlane) -> f64 {
        let b = p.bivector();
        self.0.iter().zip(b.0.iter()).map(|(w, x)| w * x).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TamingReport {
    pub form: TwoForm,
    pub samples: usize,
    /// Points skipped because the field is not evaluable there.
    pub skipped: usize,
    pub min: f64,
    pub worst_point: Option<[C64; 2]>,
    /// Slope of the worst plane; `None` for the vertical plane.
    pub worst_slope: Option<C64>,
    pub pass: bool,
}

fn stereographic(u: &crate::grassmann4::Vec3) -> Option<C64> {
    let d = 1.0 - u[2];
    (d > 1e-12).then(|| c(u[0] / d, u[1] / d))
}

/// Minimum of `ω` over positive orthonormal bases of sampled fiber planes.
/// At each sampled point the vertical plane is included along with a slope
/// drawn uniformly on the Riemann sphere.
pub fn taming_check(field: &FieldDef, form: &TwoForm, samples: usize, seed: u64) -> Result<TamingReport> {
    if samples == 0 {
        return Err(Error::validation("taming check needs at least one sample"));
    }
    if form.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("form coefficients must be finite"));
    }
    let vertical = plane_from_span(&e(2), &e(3))?;
    let results: Vec<Option<(f64, [C64; 2], Option<C64>)>> = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let mut r = sampling::substream(seed, k);
            let (q, lambda) = match field {
                FieldDef::Standard => {
                    let q = [sampling::random_in_disk(&mut r, 2.0), sampling::random_in_disk(&mut r, 2.0)];
                    (q, stereographic(&sampling::random_unit3(&mut r)))
                }
                FieldDef::Example5(ex) => {
                    let x = sampling::random_in_disk(&mut r, 1.95);
                    let alpha = sampling::random_in_disk(&mut r, ex.alpha_radius);
                    let y = LineGraph { alpha, field: *ex }.eval(x).ok()?;
                    ([x, y], stereographic(&sampling::random_unit3(&mut r)))
                }
                FieldDef::GermTable(_) => {
                    let q = [sampling::random_in_disk(&mut r, 0.5), sampling::random_in_disk(&mut r, 0.5)];
                    (q, Some(sampling::random_in_disk(&mut r, 0.5)))
                }
            };
            let mut worst = (f64::INFINITY, q, None);
            let mut consider = |p: &OrientedPlane, l: Option<C64>| {
                let v = form.area(p);
                if v < worst.0 {
                    worst = (v, q, l);
                }
            };
            if !matches!(field, FieldDef::GermTable(_)) {
                consider(&vertical, None);
            }
            if let Some(l) = lambda {
                let p = field.fiber_plane((q[0], q[1]), l).ok()?;
                consider(&p, Some(l));
            }
            Some(worst)
        })
        .collect();
    let mut report = TamingReport {
        form: *form,
        samples,
        skipped: 0,
        min: f64::INFINITY,
        worst_point: None,
        worst_slope: None,
        pass: false,
    };
    for res in results {
        match res {
            None => report.skipped += 1,
            Some((v, q, l)) => {
                if v < report.min {
                    report.min = v;
                    report.worst_point = Some(q);
                    report.worst_slope = l;
                }
            }
        }
    }
    report.pass = report.min > 0.0 && report.skipped < samples;
    Ok(report)
}
