//! Cross-ratio maps, the Hirota system, Bäcklund transforms and transfer matrices.
//!
//! Face corners are read as `(x, y, x', y')` with positions taken from the
//! edge vectors of the quad, so the formulas also apply on closed surfaces.
//! The inverse parameter of a Bäcklund transform is `−λ`: with that reading
//! `B_{−λ}^{f(O)}(B_λ^u(f)) = f` holds for both kinds.

use crate::cellular::QuadComplex;
use crate::critical::CriticalMap;
use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Default spectral samples for zero-curvature checks.
pub const LAMBDA_SAMPLES: [f64; 3] = [0.3, 1.1, 2.7];

fn corners(cx: &QuadComplex, q: usize) -> Result<[C64; 4]> {
    cx.quad_local_coords(q).ok_or_else(|| Error::InvalidParameter("complex has no embedding".into()))
}

fn scale(f: &[C64]) -> f64 {
    f.iter().fold(0.0f64, |a, v| a.max(v.norm())).max(1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FaceResiduals {
    /// `|cr(f) − cr(Z)|` per face.
    pub cross_ratio: Vec<f64>,
    /// `|(f(y') − f(y))/(f(x') − f(x)) − (y' − y)/(x' − x)|` per face.
    pub diagonal_ratio: Vec<f64>,
    /// Faces where a denominator vanished.
    pub singular: Vec<usize>,
}

impl FaceResiduals {
    pub fn max_cross_ratio(&self) -> f64 {
        self.cross_ratio.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_diagonal_ratio(&self) -> f64 {
        self.diagonal_ratio.iter().cloned().fold(0.0, f64::max)
    }
}

/// `(a−b)(c−d)/((b−c)(d−a))` for corners `[a, b, c, d] = [x, y, x', y']`
/// written as `(y−x)(y'−x')/((x−y')(x'−y))`.
fn cross_ratio(p: [C64; 4]) -> Option<C64> {
    let [x, y, xp, yp] = p;
    let den = (x - yp) * (xp - y);
    let s = (p.iter().fold(0.0f64, |a, v| a.max(v.norm()))).max(1e-300);
    if den.norm() < 1e-14 * s * s {
        return None;
    }
    Some((y - x) * (yp - xp) / den)
}

fn diagonal_ratio(p: [C64; 4]) -> Option<C64> {
    let [x, y, xp, yp] = p;
    let den = xp - x;
    let s = (p.iter().fold(0.0f64, |a, v| a.max(v.norm()))).max(1e-300);
    if den.norm() < 1e-14 * s {
        return None;
    }
    Some((yp - y) / den)
}

/// Residuals of the cross-ratio and diagonal-ratio conditions on every face.
pub fn cross_ratio_residual(cx: &QuadComplex, f: &[C64]) -> Result<FaceResiduals> {
    let mut cr = Vec::with_capacity(cx.n_faces());
    let mut dr = Vec::with_capacity(cx.n_faces());
    let mut singular = Vec::new();
    for q in 0..cx.n_faces() {
        let z = corners(cx, q)?;
        let v = cx.quad(q).map(|i| f[i]);
        match (cross_ratio(v), cross_ratio(z), diagonal_ratio(v), diagonal_ratio(z)) {
            (Some(a), Some(b), Some(c), Some(d)) => {
                cr.push((a - b).norm());
                dr.push((c - d).norm());
            }
            _ => {
                singular.push(q);
                cr.push(f64::NAN);
                dr.push(f64::NAN);
            }
        }
    }
    Ok(FaceResiduals { cross_ratio: cr, diagonal_ratio: dr, singular })
}

/// Hirota face sum around `x → y → x' → y' → x`.
fn hirota_face(z: [C64; 4], w: [C64; 4]) -> C64 {
    (0..4).map(|k| (z[(k + 1) % 4] - z[k]) * w[k] * w[(k + 1) % 4]).sum()
}

/// Hirota residual per face, relative to the largest term.
pub fn hirota_residual(cx: &QuadComplex, w: &[C64]) -> Result<Vec<f64>> {
    (0..cx.n_faces())
        .map(|q| {
            let z = corners(cx, q)?;
            let wv = cx.quad(q).map(|i| w[i]);
            let s = (0..4).map(|k| ((z[(k + 1) % 4] - z[k]) * wv[k] * wv[(k + 1) % 4]).norm()).fold(0.0, f64::max);
            Ok(hirota_face(z, wv).norm() / s.max(1e-300))
        })
        .collect()
}

/// `w(y')` from the other three corners so that the Hirota sum vanishes.
pub fn hirota_solve_fourth(z: [C64; 4], wx: C64, wy: C64, wxp: C64) -> Result<C64> {
    let [x, y, xp, yp] = z;
    let den = (x - yp) * wx + (yp - xp) * wxp;
    if den.norm() < 1e-14 {
        return Err(Error::SingularFace { face: 0, reason: "Hirota solve has a zero denominator".into() });
    }
    Ok(-((y - x) * wx * wy + (xp - y) * wy * wxp) / den)
}

fn bfs_tree(cx: &QuadComplex, root: usize) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
    let n = cx.n_vertices();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for (w, e) in cx.diamond_neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some((v, e));
                queue.push_back(w);
            }
        }
    }
    (order, parent)
}

/// `Z(b) − Z(a)` along edge `e` leaving `a`.
fn step(cx: &QuadComplex, e: usize, from: usize) -> C64 {
    let d = cx.dz().expect("embedding")[e];
    if cx.edge(e)[0] == from {
        d
    } else {
        -d
    }
}

/// `f` with `f(y) − f(x) = (y − x) w(x) w(y)` and `f(origin) = 0`. Refused when
/// the form is not closed, reporting a vertex on an offending loop.
pub fn hirota_integrate(cx: &QuadComplex, w: &[C64]) -> Result<Vec<C64>> {
    let root = cx.origin().unwrap_or(0);
    let (order, parent) = bfs_tree(cx, root);
    let mut f = vec![ZERO; cx.n_vertices()];
    for &v in &order[1..] {
        let (u, e) = parent[v].unwrap();
        f[v] = f[u] + step(cx, e, u) * w[u] * w[v];
    }
    let s = scale(w).powi(2) * scale(&cx.dz().unwrap().to_vec());
    for (e, &[a, b]) in cx.edges().iter().enumerate() {
        let h = (f[b] - f[a] - step(cx, e, a) * w[a] * w[b]).norm();
        if h > 1e-10 * s {
            return Err(Error::Holonomy { vertex: b, holonomy: h });
        }
    }
    Ok(f)
}

/// Hirota field of a quadratic holomorphic `f`, with `w(origin) = w0`.
pub fn hirota_from_function(cx: &QuadComplex, f: &[C64], w0: C64) -> Result<Vec<C64>> {
    let root = cx.origin().unwrap_or(0);
    let (order, parent) = bfs_tree(cx, root);
    let mut w = vec![ZERO; cx.n_vertices()];
    w[root] = w0;
    for &v in &order[1..] {
        let (u, e) = parent[v].unwrap();
        let den = step(cx, e, u) * w[u];
        if den.norm() < 1e-300 {
            return Err(Error::SingularFace { face: e, reason: "zero Hirota value".into() });
        }
        w[v] = (f[v] - f[u]) / den;
    }
    Ok(w)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BacklundKind {
    Linear,
    Quadratic,
}

/// Solve the edge relation for `f_λ(y)` given `f(x) = a`, `f(y) = b`,
/// `f_λ(x) = xl` and `d = y − x`.
pub fn edge_solve(kind: BacklundKind, lambda: C64, d: C64, a: C64, b: C64, xl: C64) -> Result<C64> {
    match kind {
        BacklundKind::Linear => {
            let den = lambda - d;
            if den.norm() < 1e-14 {
                return Err(Error::InvalidParameter(format!("degenerate edge: λ = {lambda} equals y − x")));
            }
            Ok(a + (xl - b) * (lambda + d) / den)
        }
        BacklundKind::Quadratic => {
            if lambda.norm() < 1e-300 {
                return Err(Error::InvalidParameter("λ = 0".into()));
            }
            let q = d * d / (lambda * lambda);
            let den = (a - b) + q * (xl - a);
            if den.norm() < 1e-14 * (a.norm() + b.norm() + xl.norm()).max(1.0) {
                return Err(Error::InvalidParameter("degenerate edge in quadratic solve".into()));
            }
            Ok((xl * (a - b) + q * (xl - a) * b) / den)
        }
    }
}

/// Edge relation mismatch, scaled by the size of the values involved.
fn edge_residual(kind: BacklundKind, lambda: C64, d: C64, a: C64, b: C64, xl: C64, yl: C64) -> f64 {
    let s = a.norm().max(b.norm()).max(xl.norm()).max(yl.norm()).max(1.0);
    match kind {
        BacklundKind::Linear => ((xl - b) * (lambda + d) - (yl - a) * (lambda - d)).norm() / (s * (lambda.norm() + d.norm())),
        BacklundKind::Quadratic => {
            let q = d * d / (lambda * lambda);
            ((yl - xl) * (a - b) - q * (xl - a) * (b - yl)).norm() / (s * s * (1.0 + q.norm()))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BacklundSheet {
    pub kind: BacklundKind,
    pub lambda: C64,
    pub u: C64,
    pub base: Vec<C64>,
    pub values: Vec<C64>,
    /// Largest edge-relation residual over all edges.
    pub edge_residual: f64,
}

/// `B_λ^u(f)` by BFS from the origin.
pub fn backlund(cx: &QuadComplex, f: &[C64], lambda: C64, u: C64, kind: BacklundKind) -> Result<BacklundSheet> {
    let root = cx.origin().unwrap_or(0);
    let (order, parent) = bfs_tree(cx, root);
    let mut g = vec![ZERO; cx.n_vertices()];
    g[root] = u;
    for &v in &order[1..] {
        let (x, e) = parent[v].unwrap();
        g[v] = edge_solve(kind, lambda, step(cx, e, x), f[x], f[v], g[x])?;
    }
    let worst = cx
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| edge_residual(kind, lambda, step(cx, e, a), f[a], f[b], g[a], g[b]))
        .fold(0.0, f64::max);
    if !(worst < 1e-10) {
        return Err(Error::Consistency(format!("Bäcklund sheet is inconsistent on some face: {worst:.3e}")));
    }
    Ok(BacklundSheet { kind, lambda, u, base: f.to_vec(), values: g, edge_residual: worst })
}

/// `max |B_{−λ}^{f(O)}(B_λ^u(f)) − f|`, relative.
pub fn backlund_roundtrip(cx: &QuadComplex, f: &[C64], lambda: C64, u: C64, kind: BacklundKind) -> Result<f64> {
    let root = cx.origin().unwrap_or(0);
    let g = backlund(cx, f, lambda, u, kind)?;
    let h = backlund(cx, &g.values, -lambda, f[root], kind)?;
    Ok(h.values.iter().zip(f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale(f))
}

/// Random rhombus with holomorphic data of the given kind; returns the gap
/// between `f_λ(x')` reached through `y` and through `y'`.
pub fn cube_consistency(kind: BacklundKind, rng: &mut impl rand::Rng) -> Result<f64> {
    use std::f64::consts::PI;
    let a1 = rng.gen_range(0.0..2.0 * PI);
    let a2 = a1 + rng.gen_range(0.2..PI - 0.2);
    let (d1, d2) = (C64::from_polar(1.0, a1), C64::from_polar(1.0, a2));
    let z = [ZERO, d1, d1 + d2, d2];
    let mut vals = [ZERO; 4];
    for v in &mut vals {
        *v = C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    }
    let [fx, fy, fxp, u] = vals;
    let fyp = match kind {
        BacklundKind::Linear => fy + (fxp - fx) * (z[3] - z[1]) / (z[2] - z[0]),
        BacklundKind::Quadratic => {
            let k = cross_ratio(z).unwrap();
            (fxp * (fy - fx) + k * fx * (fxp - fy)) / ((fy - fx) + k * (fxp - fy))
        }
    };
    let lambda = C64::from_polar(rng.gen_range(0.5..3.0), rng.gen_range(0.0..2.0 * PI));
    let via_y = {
        let ly = edge_solve(kind, lambda, d1, fx, fy, u)?;
        edge_solve(kind, lambda, d2, fy, fxp, ly)?
    };
    let via_yp = {
        let lyp = edge_solve(kind, lambda, d2, fx, fyp, u)?;
        edge_solve(kind, lambda, d1, fyp, fxp, lyp)?
    };
    Ok((via_y - via_yp).norm() / via_y.norm().max(1.0))
}

#[derive(Clone, Debug)]
pub struct TangentExponential {
    pub values: Vec<C64>,
    /// `‖d B_λ^u(f)[g]‖` relative to `‖B_λ^u(f)‖`.
    pub kernel_residual: f64,
}

/// Derivative at `s = 0` of a map holomorphic in `s`, from `n` samples on
/// the circle `|s| = r`.
fn circle_derivative(r: f64, n: usize, mut f: impl FnMut(C64) -> Result<Vec<C64>>) -> Result<Vec<C64>> {
    let mut acc: Vec<C64> = Vec::new();
    for k in 0..n {
        let s = C64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        let v = f(s)?;
        if acc.is_empty() {
            acc = vec![ZERO; v.len()];
        }
        for (a, b) in acc.iter_mut().zip(&v) {
            *a += b / s;
        }
    }
    Ok(acc.into_iter().map(|a| a / n as f64).collect())
}

/// `∂_v B_{−λ}^v(B_λ^u(f))` at `v = f(O)`. Both maps are holomorphic in
/// the seed, so derivatives are averaged over a small circle.
pub fn tangent_exponential(cx: &QuadComplex, f: &[C64], lambda: C64, u: C64, kind: BacklundKind) -> Result<TangentExponential> {
    let (r, n) = (1e-2, 16);
    let root = cx.origin().unwrap_or(0);
    let g = backlund(cx, f, lambda, u, kind)?.values;
    let t = circle_derivative(r, n, |s| backlund(cx, &g, -lambda, f[root] + s, kind).map(|b| b.values))?;
    let d = circle_derivative(r, n, |s| {
        let fs: Vec<C64> = f.iter().zip(&t).map(|(a, b)| a + b * s).collect();
        propagate(cx, &fs, lambda, u, kind)
    })?;
    let kernel_residual = d.iter().map(|v| v.norm()).fold(0.0, f64::max) / scale(&g);
    Ok(TangentExponential { values: t, kernel_residual })
}

/// Tree propagation without the consistency check, for perturbed inputs.
fn propagate(cx: &QuadComplex, f: &[C64], lambda: C64, u: C64, kind: BacklundKind) -> Result<Vec<C64>> {
    let root = cx.origin().unwrap_or(0);
    let (order, parent) = bfs_tree(cx, root);
    let mut g = vec![ZERO; cx.n_vertices()];
    g[root] = u;
    for &v in &order[1..] {
        let (x, e) = parent[v].unwrap();
        g[v] = edge_solve(kind, lambda, step(cx, e, x), f[x], f[v], g[x])?;
    }
    Ok(g)
}

/// `max |(g(y')−g(y))/(g(x')−g(x)) − (f(y')−f(y))/(f(x')−f(x))|` over faces.
pub fn epsg_residual(cx: &QuadComplex, f: &[C64], g: &[C64]) -> f64 {
    (0..cx.n_faces())
        .filter_map(|q| {
            let [x, y, xp, yp] = cx.quad(q);
            let rg = (g[yp] - g[y]) / (g[xp] - g[x]);
            let rf = (f[yp] - f[y]) / (f[xp] - f[x]);
            let r = (rg - rf).norm() / rf.norm().max(1.0);
            r.is_finite().then_some(r)
        })
        .fold(0.0, f64::max)
}

/// 2×2 complex matrix, row major.
pub type M2 = [C64; 4];

pub fn mul(a: &M2, b: &M2) -> M2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

pub fn add(a: &M2, b: &M2) -> M2 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

pub fn det(a: &M2) -> C64 {
    a[0] * a[3] - a[1] * a[2]
}

pub fn inverse(a: &M2) -> Option<M2> {
    let d = det(a);
    let s = a.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if d.norm() < 1e-14 * s * s {
        return None;
    }
    Some([a[3] / d, -a[1] / d, -a[2] / d, a[0] / d])
}

/// `min_c ‖b − c a‖ / ‖b‖`: equality of 2×2 matrices up to a scalar.
pub fn projective_gap(a: &M2, b: &M2) -> f64 {
    let aa: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let bb: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if aa == 0.0 || bb == 0.0 {
        return if aa == 0.0 && bb == 0.0 { 0.0 } else { 1.0 };
    }
    let c: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>() / aa;
    let r: f64 = a.iter().zip(b).map(|(x, y)| (y - c * x).norm_sqr()).sum::<f64>().sqrt();
    r / bb
}

/// Data carried by the transfer matrices.
#[derive(Clone, Debug)]
pub enum Lax<'a> {
    /// Holomorphic `f`.
    Linear(&'a [C64]),
    /// Hirota field `w`.
    Hirota(&'a [C64]),
}

impl Lax<'_> {
    /// `L = L₀ + λ L₁` on edge `e` traversed from `from`.
    pub fn coefficients(&self, cx: &QuadComplex, e: usize, from: usize) -> [M2; 2] {
        let [a, b] = cx.edge(e);
        let to = if a == from { b } else { a };
        let d = step(cx, e, from);
        match self {
            Lax::Linear(f) => [[d, -2.0 * d * (f[from] + f[to]), ZERO, -d], [ONE, ZERO, ZERO, ONE]],
            Lax::Hirota(w) => [
                [ONE, -d * w[to], ZERO, w[to] / w[from]],
                [ZERO, ZERO, -d / w[from], ZERO],
            ],
        }
    }

    pub fn matrix(&self, cx: &QuadComplex, e: usize, from: usize, lambda: C64) -> M2 {
        let [l0, l1] = self.coefficients(cx, e, from);
        add(&l0, &l1.map(|v| v * lambda))
    }
}

/// Moving frame at one spectral value.
#[derive(Clone, Debug)]
pub struct MovingFrame {
    pub lambda: C64,
    pub psi: Vec<M2>,
    pub dpsi: Vec<M2>,
    /// `A = Ψ' Ψ⁻¹`; `None` where Ψ is singular.
    pub a: Vec<Option<M2>>,
}

/// `Ψ(y) = L((x, y); λ) Ψ(x)` with `Ψ(O) = I`, jointly with `dΨ/dλ`.
pub fn moving_frame(cx: &QuadComplex, lax: &Lax, lambda: C64) -> MovingFrame {
    let root = cx.origin().unwrap_or(0);
    let (order, parent) = bfs_tree(cx, root);
    moving_frame_on(cx, lax, lambda, &order, &parent)
}

fn moving_frame_on(
    cx: &QuadComplex,
    lax: &Lax,
    lambda: C64,
    order: &[usize],
    parent: &[Option<(usize, usize)>],
) -> MovingFrame {
    let n = cx.n_vertices();
    let id: M2 = [ONE, ZERO, ZERO, ONE];
    let mut psi = vec![id; n];
    let mut dpsi = vec![[ZERO; 4]; n];
    for &v in &order[1..] {
        let (x, e) = parent[v].unwrap();
        let [l0, l1] = lax.coefficients(cx, e, x);
        let l = add(&l0, &l1.map(|c| c * lambda));
        psi[v] = mul(&l, &psi[x]);
        dpsi[v] = add(&mul(&l1, &psi[x]), &mul(&l, &dpsi[x]));
    }
    let a = (0..n).map(|v| inverse(&psi[v]).map(|inv| mul(&dpsi[v], &inv))).collect();
    MovingFrame { lambda, psi, dpsi, a }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZeroCurvature {
    pub lambda: C64,
    /// Largest projective mismatch of the two paths across a face.
    pub face_gap: f64,
    /// Largest projective mismatch of Ψ between two spanning trees.
    pub path_gap: f64,
    /// Vertices where Ψ is singular.
    pub singular: usize,
}

/// Zero-curvature checks at each spectral value.
pub fn zero_curvature(cx: &QuadComplex, lax: &Lax, lambdas: &[C64]) -> Vec<ZeroCurvature> {
    lambdas
        .iter()
        .map(|&lambda| {
            let mut face_gap: f64 = 0.0;
            for q in 0..cx.n_faces() {
                let s = cx.sides(q);
                let v = cx.quad(q);
                let p1 = mul(&lax.matrix(cx, s[1], v[1], lambda), &lax.matrix(cx, s[0], v[0], lambda));
                let p2 = mul(&lax.matrix(cx, s[2], v[3], lambda), &lax.matrix(cx, s[3], v[0], lambda));
                face_gap = face_gap.max(projective_gap(&p1, &p2));
            }
            let first = moving_frame(cx, lax, lambda);
            let root = cx.origin().unwrap_or(0);
            let (order, parent) = reverse_bfs(cx, root);
            let second = moving_frame_on(cx, lax, lambda, &order, &parent);
            let path_gap = first
                .psi
                .iter()
                .zip(&second.psi)
                .map(|(a, b)| projective_gap(a, b))
                .fold(0.0, f64::max);
            let singular = first.a.iter().filter(|a| a.is_none()).count();
            ZeroCurvature { lambda, face_gap, path_gap, singular }
        })
        .collect()
}

fn reverse_bfs(cx: &QuadComplex, root: usize) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
    let n = cx.n_vertices();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    seen[root] = true;
    // depth-first, so the tree differs from the breadth-first one
    while let Some(v) = stack.pop() {
        order.push(v);
        for (w, e) in cx.diamond_neighbors(v).into_iter().rev() {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some((v, e));
                stack.push(w);
            }
        }
    }
    (order, parent)
}

/// Poles of `A(x; λ)` in the linear case: the zeros `±(y − x)` of `det Ψ` over
/// the path edges, with cancelling pairs removed.
pub fn linear_pole_candidates(map: &CriticalMap, cx: &QuadComplex, x: usize) -> Vec<(C64, i32)> {
    let mut out: Vec<(C64, i32)> = Vec::new();
    for d in map.path_steps(cx, x) {
        for (p, m) in [(-d, 1), (d, 1)] {
            match out.iter_mut().find(|(c, _)| (c - p).norm() < 1e-9) {
                Some(entry) => entry.1 += m,
                None => out.push((p, m)),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellular::{generate_rhombic_patch, PatchShape, PatchStyle};
    use crate::critical::{check_critical, exp_all, Monomials};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn patch() -> (QuadComplex, CriticalMap) {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 4.0 }, 1.0, PatchStyle::Square).unwrap();
        let m = check_critical(&cx).unwrap();
        (cx, m)
    }

    fn mobius(z: &[C64]) -> Vec<C64> {
        let (a, b, c, d) = (C64::new(1.0, 0.5), C64::new(0.2, -1.0), C64::new(0.05, 0.02), C64::new(1.0, 0.3));
        z.iter().map(|z| (a * z + b) / (c * z + d)).collect()
    }

    #[test]
    fn cross_ratio_cases() {
        let (cx, m) = patch();
        let r = cross_ratio_residual(&cx, &m.z).unwrap();
        assert!(r.max_cross_ratio() < 1e-14 && r.max_diagonal_ratio() < 1e-14);
        let r = cross_ratio_residual(&cx, &mobius(&m.z)).unwrap();
        assert!(r.max_cross_ratio() < 1e-12);
        let bar: Vec<C64> = m.z.iter().map(|z| z.conj()).collect();
        let r = cross_ratio_residual(&cx, &bar).unwrap();
        assert!(r.max_diagonal_ratio() > 0.1);
        let flat = vec![ONE; m.n_vertices()];
        assert_eq!(cross_ratio_residual(&cx, &flat).unwrap().singular.len(), cx.n_faces());
    }

    #[test]
    fn hirota_unit_field() {
        let (cx, m) = patch();
        let w = vec![ONE; m.n_vertices()];
        assert!(hirota_residual(&cx, &w).unwrap().iter().all(|&r| r < 1e-14));
        let f = hirota_integrate(&cx, &w).unwrap();
        for v in 0..f.len() {
            assert!((f[v] - m.z[v]).norm() < 1e-12);
        }
    }

    #[test]
    fn hirota_fourth_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = [ZERO, C64::from_polar(1.0, 0.3), C64::from_polar(1.0, 0.3) + C64::from_polar(1.0, 1.6), C64::from_polar(1.0, 1.6)];
        let mut c = || C64::new(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
        let (a, b, d) = (c(), c(), c());
        let w4 = hirota_solve_fourth(z, a, b, d).unwrap();
        let s = hirota_face(z, [a, b, d, w4]).norm();
        assert!(s < 1e-12);
    }

    #[test]
    fn hirota_roundtrip_from_mobius() {
        let (cx, m) = patch();
        let f = mobius(&m.z);
        let w = hirota_from_function(&cx, &f, C64::new(0.7, 0.2)).unwrap();
        assert!(hirota_residual(&cx, &w).unwrap().iter().all(|&r| r < 1e-10));
        let g = hirota_integrate(&cx, &w).unwrap();
        let o = m.origin;
        for v in 0..f.len() {
            assert!((g[v] - (f[v] - f[o])).norm() < 1e-10);
        }
        assert!(cross_ratio_residual(&cx, &g).unwrap().max_cross_ratio() < 1e-10);
    }

    #[test]
    fn backlund_linear_and_quadratic() {
        let (cx, m) = patch();
        let lin = Monomials::new(&m, &cx, 3).unwrap().cochain(3).values;
        let quad = mobius(&m.z);
        let lambda = C64::new(0.8, 1.3);
        let u = C64::new(-0.4, 0.9);
        let s = backlund(&cx, &lin, lambda, u, BacklundKind::Linear).unwrap();
        assert_eq!(s.values[m.origin], u);
        assert!(cross_ratio_residual(&cx, &s.values).unwrap().max_diagonal_ratio() < 1e-10);
        assert!(backlund_roundtrip(&cx, &lin, lambda, u, BacklundKind::Linear).unwrap() < 1e-10);
        assert!(backlund_roundtrip(&cx, &quad, lambda, u, BacklundKind::Quadratic).unwrap() < 1e-10);
        let bad: Vec<C64> = m.z.iter().map(|z| z.conj()).collect();
        assert!(backlund(&cx, &bad, lambda, u, BacklundKind::Linear).is_err());
        assert!(backlund(&cx, &lin, ONE, u, BacklundKind::Linear).is_err());
    }

    #[test]
    fn cubes_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for kind in [BacklundKind::Linear, BacklundKind::Quadratic] {
            for _ in 0..50 {
                assert!(cube_consistency(kind, &mut rng).unwrap() < 1e-10);
            }
        }
    }

    #[test]
    fn tangent_exponential_linear_is_exponential() {
        let (cx, m) = patch();
        let lambda = C64::new(2.5, 0.7);
        let f: Vec<C64> = m.z.iter().map(|z| z * 0.5 + 1.0).collect();
        let t = tangent_exponential(&cx, &f, lambda, C64::new(0.3, 0.1), BacklundKind::Linear).unwrap();
        assert!(t.kernel_residual < 1e-10);
        let e = exp_all(&m, &cx, -2.0 / lambda).unwrap();
        for v in 0..e.len() {
            assert!((t.values[v] - e[v]).norm() < 1e-10 * e[v].norm().max(1.0));
        }
        assert!(epsg_residual(&cx, &f, &t.values) < 1e-9);
    }

    #[test]
    fn tangent_exponential_quadratic_kernel() {
        let (cx, m) = patch();
        let t = tangent_exponential(&cx, &m.z, C64::new(2.0, 1.0), C64::new(3.4, -1.2), BacklundKind::Quadratic).unwrap();
        assert!(t.kernel_residual < 1e-10, "{}", t.kernel_residual);
    }

    #[test]
    fn zero_curvature_linear_and_hirota() {
        let (cx, m) = patch();
        let ls: Vec<C64> = LAMBDA_SAMPLES.iter().map(|&l| C64::new(l, 0.0)).collect();
        for zc in zero_curvature(&cx, &Lax::Linear(&m.z), &ls) {
            assert!(zc.face_gap < 1e-10 && zc.path_gap < 1e-9, "{zc:?}");
        }
        let w = hirota_from_function(&cx, &mobius(&m.z), ONE).unwrap();
        for zc in zero_curvature(&cx, &Lax::Hirota(&w), &ls) {
            assert!(zc.face_gap < 1e-10 && zc.path_gap < 1e-9, "{zc:?}");
        }
        let e = 0;
        let [a, _] = cx.edge(e);
        let d = step(&cx, e, a);
        let l = C64::new(0.7, 0.1);
        let dt = det(&Lax::Linear(&m.z).matrix(&cx, e, a, l));
        assert!((dt - (l + d) * (l - d)).norm() < 1e-14);
    }

    #[test]
    fn frame_derivative_matches_difference() {
        let (cx, m) = patch();
        let lax = Lax::Linear(&m.z);
        let l = C64::new(0.9, 0.2);
        let h = 1e-6;
        let a = moving_frame(&cx, &lax, l);
        let p = moving_frame(&cx, &lax, l + h);
        let q = moving_frame(&cx, &lax, l - h);
        for v in 0..m.n_vertices() {
            for k in 0..4 {
                let fd = (p.psi[v][k] - q.psi[v][k]) / (2.0 * h);
                assert!((fd - a.dpsi[v][k]).norm() < 1e-5 * a.dpsi[v][k].norm().max(1.0));
            }
        }
        let far = (0..m.n_vertices()).max_by_key(|&v| m.dist[v]).unwrap();
        let poles = linear_pole_candidates(&m, &cx, far);
        assert!(poles.len() <= 4);
    }

    #[test]
    fn circle_pattern_reading() {
        let (cx, m) = patch();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // w real on primal, unimodular on dual
        let w: Vec<C64> = (0..m.n_vertices())
            .map(|v| if m.eps[v] > 0.0 { C64::new(rng.gen_range(0.5..2.0), 0.0) } else { C64::from_polar(1.0, rng.gen_range(0.0..6.0)) })
            .collect();
        for (e, &[a, b]) in cx.edges().iter().enumerate() {
            let (x, y) = if m.eps[a] > 0.0 { (a, b) } else { (b, a) };
            let df = step(&cx, e, x) * w[x] * w[y];
            let reading = C64::from_polar(w[x].re, w[y].arg()) * step(&cx, e, x);
            assert!((df - reading).norm() < 1e-14);
        }
    }
}
