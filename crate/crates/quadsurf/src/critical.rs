//! Critical maps: quad-graphs embedded with every face a rhombus of side δ.
//!
//! On such maps the discrete exponential `exp(:λ:x)` is a product of Möbius
//! factors along any ⋄ path from the origin, the monomials `Z^{:k:}` are its
//! Taylor coefficients in λ, and the Green function is a contour integral of
//! the exponential against `log(δλ/2)/λ`.
//!
//! Monomials are stored scaled as `P_k = Z^{:k:}/k! · (2/δ)^k` in double-double
//! precision. The series `Σ λ^k Z^{:k:}/k!` cancels heavily far from the origin,
//! so plain doubles lose all digits near the radius of convergence.

use crate::calculus::holomorphicity_residual;
use crate::cellular::{Cochain, ComplexTag, QuadComplex};
use crate::error::{Error, Result};
use crate::linalg::rank_c;
use crate::solver::GraphLaplacian;
use crate::C64;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;
use twofloat::TwoFloat;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Relative tolerance for side lengths and ρ.
pub const RHOMBUS_TOL: f64 = 1e-12;
/// Upper bound on the number of series terms.
pub const SERIES_CAP: usize = 4000;

/// A validated rhombic embedding with a BFS tree rooted at the origin.
#[derive(Clone, Debug)]
pub struct CriticalMap {
    /// Vertex positions with `z[origin] = 0`. On a closed surface these are
    /// the positions along the BFS tree.
    pub z: Vec<C64>,
    pub delta: f64,
    /// Smallest rhombus half-angle.
    pub theta_min: f64,
    /// Smallest rhombus angle.
    pub min_angle: f64,
    /// Unit direction of each ⋄ edge in its stored orientation.
    pub directions: Vec<C64>,
    pub origin: usize,
    /// +1 on the colour of the origin, −1 on the other.
    pub eps: Vec<f64>,
    /// ⋄ distance to the origin.
    pub dist: Vec<usize>,
    /// `(parent vertex, edge)` in the BFS tree.
    pub parent: Vec<Option<(usize, usize)>>,
    /// Vertices in BFS order, origin first.
    pub order: Vec<usize>,
    pub open: bool,
    /// Worst slack of `d sinθ/4 ≤ |x|/δ ≤ d`; `None` on closed surfaces.
    pub dist_slack: Option<f64>,
}

/// Spectral parameter query.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ExpQuery {
    pub lambda: C64,
    pub order: usize,
    pub alpha: f64,
}

impl Default for ExpQuery {
    fn default() -> Self {
        ExpQuery { lambda: ONE, order: 3, alpha: 2.0 }
    }
}

fn bfs(cx: &QuadComplex, root: usize, reverse: bool) -> (Vec<usize>, Vec<Option<(usize, usize)>>, Vec<usize>) {
    let n = cx.n_vertices();
    let mut dist = vec![usize::MAX; n];
    let mut parent = vec![None; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    dist[root] = 0;
    queue.push_back(root);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        let mut nb = cx.diamond_neighbors(v);
        if reverse {
            nb.reverse();
        }
        for (w, e) in nb {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                parent[w] = Some((v, e));
                queue.push_back(w);
            }
        }
    }
    (dist, parent, order)
}

/// Validate a rhombic embedding. Every failing face is listed in the error.
pub fn check_critical(cx: &QuadComplex) -> Result<CriticalMap> {
    let dz = cx.dz().ok_or_else(|| Error::InvalidParameter("complex has no embedding".into()))?;
    if cx.n_faces() == 0 {
        return Err(Error::InvalidParameter("complex has no faces".into()));
    }
    let mut lens: Vec<f64> = dz.iter().map(|d| d.norm()).collect();
    lens.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let delta = lens[lens.len() / 2];
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("zero edge length".into()));
    }
    let mut bad = Vec::new();
    let mut min_angle = PI;
    for q in 0..cx.n_faces() {
        let s = cx.quad_sides_dz(q).unwrap();
        if let Some(k) = (0..4).find(|&k| (s[k].norm() - delta).abs() > RHOMBUS_TOL * delta) {
            bad.push((q, format!("side {k} has length {:.15} instead of {delta}", s[k].norm())));
            continue;
        }
        let (d1, d2) = cx.quad_diagonals(q).unwrap();
        let rho = d2.norm() / d1.norm();
        if (rho - cx.rho(q)).abs() > RHOMBUS_TOL * rho.max(1.0) {
            bad.push((q, format!("rho {} differs from diagonal ratio {rho}", cx.rho(q))));
            continue;
        }
        for k in 0..4 {
            let a = (-s[k] / s[(k + 1) % 4]).arg().abs();
            min_angle = min_angle.min(a);
        }
    }
    if !bad.is_empty() {
        return Err(Error::NotCritical { faces: bad });
    }
    let origin = cx.origin().unwrap_or(0);
    let (dist, parent, order) = bfs(cx, origin, false);
    if order.len() != cx.n_vertices() {
        return Err(Error::Disconnected("critical map must be connected".into()));
    }
    let n = cx.n_vertices();
    let mut z = vec![ZERO; n];
    for &v in &order[1..] {
        let (u, e) = parent[v].unwrap();
        z[v] = z[u] + edge_step(cx, dz, e, u);
    }
    let open = !cx.is_closed();
    if let (true, Some(given)) = (open, cx.z()) {
        let z0 = given[origin];
        let dev = (0..n).map(|v| (given[v] - z0 - z[v]).norm()).fold(0.0, f64::max);
        if dev > 1e-9 * delta * (n as f64).sqrt() {
            return Err(Error::Consistency(format!("vertex positions disagree with edge vectors by {dev:.3e}")));
        }
    }
    let oc = cx.color(origin);
    let eps = (0..n).map(|v| if cx.color(v) == oc { 1.0 } else { -1.0 }).collect();
    let dist_slack = if open {
        let s = min_angle.sin() / 4.0;
        Some((0..n).map(|v| {
            let d = dist[v] as f64;
            let r = z[v].norm() / delta;
            (r - d * s).min(d - r)
        })
        .fold(f64::INFINITY, f64::min))
    } else {
        None
    };
    Ok(CriticalMap {
        z,
        delta,
        theta_min: min_angle / 2.0,
        min_angle,
        directions: dz.iter().map(|d| d / d.norm()).collect(),
        origin,
        eps,
        dist,
        parent,
        order,
        open,
        dist_slack,
    })
}

/// Displacement along edge `e` leaving vertex `from`.
fn edge_step(cx: &QuadComplex, dz: &[C64], e: usize, from: usize) -> C64 {
    if cx.edge(e)[0] == from {
        dz[e]
    } else {
        -dz[e]
    }
}

impl CriticalMap {
    pub fn n_vertices(&self) -> usize {
        self.z.len()
    }

    /// `Z(b) − Z(a)` for the edge `e` traversed from `a`.
    pub fn step(&self, cx: &QuadComplex, e: usize, from: usize) -> C64 {
        let d = self.directions[e] * self.delta;
        if cx.edge(e)[0] == from {
            d
        } else {
            -d
        }
    }

    /// Edge steps from the origin to `x` along the BFS tree.
    pub fn path_steps(&self, cx: &QuadComplex, x: usize) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.dist[x]);
        let mut v = x;
        while let Some((u, e)) = self.parent[v] {
            out.push(self.step(cx, e, u));
            v = u;
        }
        out.reverse();
        out
    }

    fn require_open(&self, what: &str) -> Result<()> {
        if self.open {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{what} needs a simply connected patch")))
        }
    }

    pub fn dist_bound_holds(&self) -> Option<bool> {
        self.dist_slack.map(|s| s >= -1e-12)
    }

    pub fn eps_cochain(&self) -> Cochain {
        Cochain::new(0, ComplexTag::Lambda, self.eps.iter().map(|&e| C64::new(e, 0.0)).collect())
    }
}

/// Möbius factor of one edge step `dz`.
fn exp_factor(lambda: C64, dz: C64) -> Result<C64> {
    let w = lambda * dz / 2.0;
    let den = ONE - w;
    if den.norm() < 1e-14 {
        return Err(Error::Pole { theta: dz.arg() });
    }
    Ok((ONE + w) / den)
}

/// `exp(:λ:x)` along an explicit sequence of edge steps.
pub fn exp_along(lambda: C64, steps: &[C64]) -> Result<C64> {
    steps.iter().try_fold(ONE, |acc, &d| Ok(acc * exp_factor(lambda, d)?))
}

/// `exp(:λ:x)` at a single vertex, along the BFS path from the origin.
pub fn exp_rational(map: &CriticalMap, cx: &QuadComplex, lambda: C64, x: usize) -> Result<C64> {
    exp_along(lambda, &map.path_steps(cx, x))
}

/// `exp(:λ:)` at every vertex, propagated along the BFS tree.
pub fn exp_all(map: &CriticalMap, cx: &QuadComplex, lambda: C64) -> Result<Vec<C64>> {
    let mut out = vec![ONE; map.n_vertices()];
    for &v in &map.order[1..] {
        let (u, e) = map.parent[v].unwrap();
        out[v] = out[u] * exp_factor(lambda, map.step(cx, e, u))?;
    }
    Ok(out)
}

/// `exp(:λ:)` along a second spanning tree (neighbours visited in reverse
/// order); returns the largest relative difference to [`exp_all`].
pub fn exp_second_path_gap(map: &CriticalMap, cx: &QuadComplex, lambda: C64) -> Result<f64> {
    let first = exp_all(map, cx, lambda)?;
    let (_, parent, order) = bfs(cx, map.origin, true);
    let mut second = vec![ONE; map.n_vertices()];
    for &v in &order[1..] {
        let (u, e) = parent[v].unwrap();
        second[v] = second[u] * exp_factor(lambda, map.step(cx, e, u))?;
    }
    Ok(first
        .iter()
        .zip(&second)
        .map(|(a, b)| (a - b).norm() / a.norm().max(1.0))
        .fold(0.0, f64::max))
}

/// Largest relative residual of `f(y) − f(x) = λ (f(x) + f(y))/2 · (y − x)` over all edges.
pub fn exp_edge_residual(map: &CriticalMap, cx: &QuadComplex, lambda: C64, f: &[C64]) -> f64 {
    cx.edges()
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| {
            let dz = map.step(cx, e, a);
            let r = f[b] - f[a] - lambda * (f[a] + f[b]) / 2.0 * dz;
            r.norm() / f[a].norm().max(f[b].norm()).max(1.0)
        })
        .fold(0.0, f64::max)
}

/// `((1 + λx/2n)/(1 − λx/2n))^n`: the exponential on a straight path of `n` equal steps.
pub fn straight_path_exp(lambda: C64, x: C64, n: usize) -> C64 {
    let w = lambda * x / (2.0 * n as f64);
    ((ONE + w) / (ONE - w)).powu(n as u32)
}

/// Complex double-double.
#[derive(Clone, Copy, Debug, Default)]
pub struct Cdd {
    pub re: TwoFloat,
    pub im: TwoFloat,
}

impl Cdd {
    pub fn from_c64(z: C64) -> Self {
        Cdd { re: TwoFloat::from(z.re), im: TwoFloat::from(z.im) }
    }

    pub fn to_c64(self) -> C64 {
        C64::new(f64::from(self.re), f64::from(self.im))
    }

    pub fn add(self, o: Cdd) -> Cdd {
        Cdd { re: self.re + o.re, im: self.im + o.im }
    }

    pub fn mul(self, o: Cdd) -> Cdd {
        Cdd { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }

    pub fn mul_c64(self, o: C64) -> Cdd {
        Cdd { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }

    pub fn norm(self) -> f64 {
        self.to_c64().norm()
    }
}

/// Scaled monomials `P_k(x) = Z^{:k:}(x)/k! · (2/δ)^k`, `k ≤ kmax`.
#[derive(Clone, Debug)]
pub struct Monomials {
    pub delta: f64,
    /// `p[k][v]`.
    pub p: Vec<Vec<Cdd>>,
}

impl Monomials {
    /// Propagate `P_k(y) = P_k(x) + (P_{k−1}(x) + P_{k−1}(y))·(y − x)/δ` along the BFS tree.
    pub fn new(map: &CriticalMap, cx: &QuadComplex, kmax: usize) -> Result<Self> {
        map.require_open("monomials")?;
        let n = map.n_vertices();
        let mut p = vec![vec![Cdd::default(); n]; kmax + 1];
        for v in 0..n {
            p[0][v] = Cdd::from_c64(ONE);
        }
        for &v in &map.order[1..] {
            let (u, e) = map.parent[v].unwrap();
            let s = map.step(cx, e, u) / map.delta;
            for k in 1..=kmax {
                let inc = p[k - 1][u].add(p[k - 1][v]).mul_c64(s);
                p[k][v] = p[k][u].add(inc);
            }
        }
        let m = Monomials { delta: map.delta, p };
        // holonomy around faces, checked on the first few orders
        for k in 1..=kmax.min(4) {
            let (worst, v) = m.closure_residual(map, cx, k);
            if worst > 1e-9 {
                return Err(Error::Holonomy { vertex: v, holonomy: worst });
            }
        }
        Ok(m)
    }

    pub fn kmax(&self) -> usize {
        self.p.len() - 1
    }

    /// Relative mismatch of the recurrence on non-tree edges, with a vertex where it is worst.
    pub fn closure_residual(&self, map: &CriticalMap, cx: &QuadComplex, k: usize) -> (f64, usize) {
        let mut worst = (0.0, 0);
        for (e, &[a, b]) in cx.edges().iter().enumerate() {
            let s = map.step(cx, e, a) / map.delta;
            let pred = self.p[k][a].add(self.p[k - 1][a].add(self.p[k - 1][b]).mul_c64(s)).to_c64();
            let got = self.p[k][b].to_c64();
            let r = (pred - got).norm() / got.norm().max(1.0);
            if r > worst.0 {
                worst = (r, b);
            }
        }
        worst
    }

    /// `Z^{:k:}(v)/k!`.
    pub fn scaled(&self, k: usize, v: usize) -> C64 {
        self.p[k][v].to_c64() * (self.delta / 2.0).powi(k as i32)
    }

    /// `Z^{:k:}(v)`.
    pub fn value(&self, k: usize, v: usize) -> C64 {
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        self.scaled(k, v) * fact
    }

    pub fn cochain(&self, k: usize) -> Cochain {
        Cochain::new(0, ComplexTag::Lambda, (0..self.p[k].len()).map(|v| self.value(k, v)).collect())
    }
}

/// `Z^{:0:}, …, Z^{:kmax:}` as cochains.
pub fn monomials(map: &CriticalMap, cx: &QuadComplex, kmax: usize) -> Result<Vec<Cochain>> {
    let m = Monomials::new(map, cx, kmax)?;
    Ok((0..=kmax).map(|k| m.cochain(k)).collect())
}

/// Largest value of `|Z^{:k:}(x)/k!| / (((α+1)/(α−1))^{d(x)} (αδ/2)^k)` over
/// all vertices and `k ≤ kmax`; at most 1 when the growth bound holds.
pub fn growth_bound_ratio(map: &CriticalMap, mono: &Monomials, alpha: f64, kmax: usize) -> f64 {
    let c = (alpha + 1.0) / (alpha - 1.0);
    let mut worst: f64 = 0.0;
    for k in 0..=kmax.min(mono.kmax()) {
        for v in 0..map.n_vertices() {
            let bound = c.powi(map.dist[v] as i32) * alpha.powi(k as i32);
            worst = worst.max(mono.p[k][v].norm() / bound);
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesReport {
    pub value: C64,
    pub terms: usize,
    pub last_term: f64,
    /// Rigorous tail estimate from the growth bound, when it was reached.
    pub tail_bound: f64,
    pub converged: bool,
}

/// `Σ λ^k Z^{:k:}(x)/k!`, summed in double-double.
///
/// Stops when the tail bound `C^d (|μ|α)^{k+1}/(1 − |μ|α)`, with `μ = λδ/2`
/// and `α = (1 + 1/|μ|)/2`, drops below `1e-16·|partial|`, or when three
/// successive terms are that small past `k = 2d + 10`.
pub fn exp_series(map: &CriticalMap, mono: &Monomials, lambda: C64, x: usize) -> Result<SeriesReport> {
    let bound = 2.0 / map.delta;
    if lambda.norm() >= bound {
        return Err(Error::Divergent { lambda: lambda.norm(), bound });
    }
    let mu = lambda * map.delta / 2.0;
    let m = mu.norm();
    if m == 0.0 {
        return Ok(SeriesReport { value: ONE, terms: 1, last_term: 0.0, tail_bound: 0.0, converged: true });
    }
    let alpha = (1.0 + 1.0 / m) / 2.0;
    let r = m * alpha;
    let c = ((alpha + 1.0) / (alpha - 1.0)).powi(map.dist[x] as i32);
    let d = map.dist[x];
    let mu_dd = Cdd::from_c64(mu);
    let mut pow = Cdd::from_c64(ONE);
    let mut sum = Cdd::default();
    let mut small = 0;
    let mut last = 0.0;
    for k in 0..=mono.kmax() {
        let term = pow.mul(mono.p[k][x]);
        sum = sum.add(term);
        last = term.norm();
        let partial = sum.norm();
        let tail = c * r.powi(k as i32 + 1) / (1.0 - r);
        if tail < 1e-16 * partial {
            return Ok(SeriesReport { value: sum.to_c64(), terms: k + 1, last_term: last, tail_bound: tail, converged: true });
        }
        small = if last < 1e-16 * partial { small + 1 } else { 0 };
        if small >= 3 && k > 2 * d + 10 {
            return Ok(SeriesReport { value: sum.to_c64(), terms: k + 1, last_term: last, tail_bound: tail, converged: true });
        }
        pow = pow.mul(mu_dd);
    }
    Ok(SeriesReport {
        value: sum.to_c64(),
        terms: mono.kmax() + 1,
        last_term: last,
        tail_bound: f64::INFINITY,
        converged: false,
    })
}

/// `f† = ε·conj(f)`.
pub fn dagger(map: &CriticalMap, f: &[C64]) -> Vec<C64> {
    f.iter().zip(&map.eps).map(|(v, e)| v.conj() * *e).collect()
}

/// `F` with `F(O) = 0` and `F(y) − F(x) = (f(x) + f(y))/2 · (y − x)` on every edge.
pub fn primitive(map: &CriticalMap, cx: &QuadComplex, f: &[C64]) -> Result<Vec<C64>> {
    map.require_open("primitive")?;
    let mut out = vec![ZERO; map.n_vertices()];
    for &v in &map.order[1..] {
        let (u, e) = map.parent[v].unwrap();
        out[v] = out[u] + (f[u] + f[v]) / 2.0 * map.step(cx, e, u);
    }
    let scale = f.iter().fold(0.0f64, |a, v| a.max(v.norm())).max(1.0) * map.delta;
    for (e, &[a, b]) in cx.edges().iter().enumerate() {
        let h = (out[b] - out[a] - (f[a] + f[b]) / 2.0 * map.step(cx, e, a)).norm();
        if h > 1e-10 * scale {
            return Err(Error::Holonomy { vertex: b, holonomy: h });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct Derivative {
    pub dagger: Vec<C64>,
    pub derivative: Vec<C64>,
    /// ε-component removed from the raw derivative.
    pub gauge: C64,
    /// `max |f(y) − f(x) − (f'(x) + f'(y))/2·(y − x)|`, relative.
    pub residual: f64,
}

/// `f' = (4/δ²)(∫ f† dZ)†`, with the ε-component measured on the first quad
/// at the origin subtracted.
pub fn dagger_and_derivative(map: &CriticalMap, cx: &QuadComplex, f: &[C64]) -> Result<Derivative> {
    let scale = f.iter().fold(0.0f64, |a, v| a.max(v.norm())).max(1.0);
    let cr = holomorphicity_residual(cx, f).into_iter().fold(0.0, f64::max);
    if cr > 1e-9 * scale {
        return Err(Error::InvalidParameter(format!("function is not holomorphic: residual {cr:.3e}")));
    }
    let fd = dagger(map, f);
    let big = primitive(map, cx, &fd)?;
    let k = 4.0 / (map.delta * map.delta);
    let mut fp: Vec<C64> = dagger(map, &big).into_iter().map(|v| v * k).collect();
    let (q, _) = cx.occurrences(map.origin)[0];
    let quad = cx.quad(q);
    let gauge = quad.iter().map(|&v| fp[v] * map.eps[v]).sum::<C64>() / 4.0;
    for (v, e) in fp.iter_mut().zip(&map.eps) {
        *v -= gauge * *e;
    }
    let residual = cx
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &[a, b])| {
            let r = f[b] - f[a] - (fp[a] + fp[b]) / 2.0 * map.step(cx, e, a);
            r.norm() / scale
        })
        .fold(0.0, f64::max);
    Ok(Derivative { dagger: fd, derivative: fp, gauge, residual })
}

/// Distance of `f` from `span(ε)`: `min_c max |f − cε|` approximated by
/// removing the least-squares ε-component.
pub fn modulo_eps(map: &CriticalMap, f: &[C64]) -> f64 {
    let n = f.len() as f64;
    let c: C64 = f.iter().zip(&map.eps).map(|(v, e)| v * *e).sum::<C64>() / n;
    f.iter().zip(&map.eps).map(|(v, e)| (v - c * *e).norm()).fold(0.0, f64::max)
}

/// A chain of quads crossed through opposite sides.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Track {
    /// `(quad, parity)`; the track crosses sides `parity` and `parity + 2`.
    pub cells: Vec<(usize, usize)>,
    /// Direction of the crossed edges modulo π.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackReport {
    pub tracks: Vec<Track>,
    /// The two tracks through each quad.
    pub quad_tracks: Vec<[usize; 2]>,
    pub every_quad_two: bool,
    /// All tracks pairwise have distinct slopes.
    pub all_slopes_distinct: bool,
    /// Tracks that cross inside some quad have distinct slopes.
    pub crossing_slopes_distinct: bool,
}

/// Convexity rule applied to a [`TrackReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvexityRule {
    AllTracks,
    CrossingTracks,
}

impl TrackReport {
    pub fn verdict(&self, rule: ConvexityRule) -> bool {
        match rule {
            ConvexityRule::AllTracks => self.all_slopes_distinct,
            ConvexityRule::CrossingTracks => self.crossing_slopes_distinct,
        }
    }
}

fn find(p: &mut [usize], mut i: usize) -> usize {
    while p[i] != i {
        p[i] = p[p[i]];
        i = p[i];
    }
    i
}

fn slope_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

pub fn train_tracks(cx: &QuadComplex) -> TrackReport {
    let f = cx.n_faces();
    let mut p: Vec<usize> = (0..2 * f).collect();
    for e in 0..cx.n_edges() {
        let qs = cx.edge_quads(e);
        if qs.len() == 2 {
            let a = find(&mut p, 2 * qs[0].0 + qs[0].1 % 2);
            let b = find(&mut p, 2 * qs[1].0 + qs[1].1 % 2);
            p[a] = b;
        }
    }
    let mut id = vec![usize::MAX; 2 * f];
    let mut tracks: Vec<Track> = Vec::new();
    for c in 0..2 * f {
        let r = find(&mut p, c);
        if id[r] == usize::MAX {
            id[r] = tracks.len();
            tracks.push(Track { cells: Vec::new(), slope: None });
        }
        tracks[id[r]].cells.push((c / 2, c % 2));
    }
    let dz = cx.dz();
    for t in &mut tracks {
        if let Some(dz) = dz {
            let (q, par) = t.cells[0];
            t.slope = Some(dz[cx.sides(q)[par]].arg().rem_euclid(PI));
        }
    }
    let quad_tracks: Vec<[usize; 2]> =
        (0..f).map(|q| [id[find(&mut p, 2 * q)], id[find(&mut p, 2 * q + 1)]]).collect();
    let every_quad_two = quad_tracks.iter().all(|t| t[0] != t[1]);
    let slopes: Vec<Option<f64>> = tracks.iter().map(|t| t.slope).collect();
    let distinct = |a: usize, b: usize| match (slopes[a], slopes[b]) {
        (Some(x), Some(y)) => slope_gap(x, y) > 1e-9,
        _ => false,
    };
    let all_slopes_distinct =
        (0..tracks.len()).all(|a| (a + 1..tracks.len()).all(|b| distinct(a, b)));
    let crossing_slopes_distinct = quad_tracks.iter().all(|t| t[0] != t[1] && distinct(t[0], t[1]));
    TrackReport { tracks, quad_tracks, every_quad_two, all_slopes_distinct, crossing_slopes_distinct }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisProbe {
    pub n_vertices: usize,
    pub n_faces: usize,
    pub cr_rank: usize,
    /// `#vertices − rank` of the Cauchy-Riemann system.
    pub dim: usize,
    pub exp_rank: usize,
    pub is_basis: bool,
    /// `values[j][v] = exp(:λ_j:v)`.
    pub values: Vec<Vec<C64>>,
}

/// Rank of the exponentials `exp(:λ_j:)` against the dimension of the space
/// of holomorphic functions.
pub fn exp_basis_probe(map: &CriticalMap, cx: &QuadComplex, lambdas: &[f64]) -> Result<BasisProbe> {
    map.require_open("exponential basis probe")?;
    let n = cx.n_vertices();
    let f = cx.n_faces();
    let mut cr = DMatrix::<C64>::zeros(f, n);
    for q in 0..f {
        let [x, y, xp, yp] = cx.quad(q);
        let r = C64::i() * cx.rho(q);
        cr[(q, yp)] += ONE;
        cr[(q, y)] -= ONE;
        cr[(q, xp)] -= r;
        cr[(q, x)] += r;
    }
    let cr_rank = rank_c(&cr, 1e-10);
    let dim = n - cr_rank;
    let values: Vec<Vec<C64>> =
        lambdas.iter().map(|&l| exp_all(map, cx, C64::new(l, 0.0))).collect::<Result<_>>()?;
    let mut m = DMatrix::<C64>::zeros(n, values.len());
    for (j, col) in values.iter().enumerate() {
        // columns normalised so very different magnitudes don't mask rank
        let s = col.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        for v in 0..n {
            m[(v, j)] = col[v] / s;
        }
    }
    let exp_rank = rank_c(&m, 1e-10);
    Ok(BasisProbe {
        n_vertices: n,
        n_faces: f,
        cr_rank,
        dim,
        exp_rank,
        is_basis: exp_rank == dim && lambdas.len() == dim,
        values,
    })
}

/// Quadrature settings for the Green function.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GreenParams {
    /// Trapezoid nodes on the slit.
    pub nodes: usize,
    /// The slit is parametrised by `t = (2/δ)e^s`, `s ∈ [−s_max, s_max]`.
    pub s_max: f64,
    /// Allowed gap between the `N` and `2N` estimates.
    pub tol: f64,
}

impl Default for GreenParams {
    fn default() -> Self {
        GreenParams { nodes: 4096, s_max: 40.0, tol: 1e-6 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreenTable {
    pub values: Vec<C64>,
    /// Branch angle `arg(−conj(x)/|x|)` per vertex.
    pub phi: Vec<f64>,
    /// `ε(x) − 1`, the jump of the integrand across `|λ| = 2/δ`.
    pub e_inf: Vec<f64>,
    pub params: GreenParams,
    /// Largest `|G_N − G_2N|`.
    pub refinement_gap: f64,
}

/// `J = ∫ [E(t u) − 1 − e_∞·1_{t > 2/δ}] dt/t` by the trapezoid rule in `s = log(tδ/2)`.
fn slit_integral(steps: &[C64], u: C64, e_inf: f64, delta: f64, nodes: usize, s_max: f64) -> C64 {
    let h = 2.0 * s_max / nodes as f64;
    let a = 2.0 / delta;
    let mut sum = ZERO;
    for i in 0..=nodes {
        let s = -s_max + i as f64 * h;
        let lam = u * (a * s.exp());
        let e = steps.iter().fold(ONE, |acc, &d| {
            let w = lam * d / 2.0;
            acc * (ONE + w) / (ONE - w)
        });
        let jump = if i * 2 == nodes {
            e_inf / 2.0
        } else if s > 0.0 {
            e_inf
        } else {
            0.0
        };
        let w = if i == 0 || i == nodes { 0.5 } else { 1.0 };
        sum += (e - ONE - jump) * w;
    }
    sum * h
}

/// Green function value at one vertex: `(G, φ, e_∞, |G_N − G_2N|)`.
///
/// The loop integral around the poles is collapsed onto the slit along
/// `u = −conj(x)/|x|`, on which the exponential stays bounded. With the log
/// branch `arg λ ∈ (φ, φ + 2π)`:
/// `G = J/(4π) − i e_∞ (φ + π)/(4π)`.
pub fn green_at(map: &CriticalMap, cx: &QuadComplex, x: usize, params: &GreenParams) -> (C64, f64, f64, f64) {
    if x == map.origin {
        return (ZERO, 0.0, 0.0, 0.0);
    }
    let steps = map.path_steps(cx, x);
    let zx = map.z[x];
    let u = -zx.conj() / zx.norm();
    let phi = u.arg();
    let e_inf = map.eps[x] - 1.0;
    let j1 = slit_integral(&steps, u, e_inf, map.delta, params.nodes, params.s_max);
    let j2 = slit_integral(&steps, u, e_inf, map.delta, 2 * params.nodes, params.s_max);
    let branch = C64::new(0.0, -e_inf * (phi + PI) / (4.0 * PI));
    let g1 = j1 / (4.0 * PI) + branch;
    let g2 = j2 / (4.0 * PI) + branch;
    (g1, phi, e_inf, (g1 - g2).norm())
}

pub fn green_function(map: &CriticalMap, cx: &QuadComplex, params: &GreenParams) -> Result<GreenTable> {
    map.require_open("green function")?;
    if cx.is_boundary_vertex(map.origin) {
        return Err(Error::InvalidParameter("origin must be an interior vertex".into()));
    }
    let rows: Vec<(C64, f64, f64, f64)> =
        (0..map.n_vertices()).into_par_iter().map(|x| green_at(map, cx, x, params)).collect();
    let gap = rows.iter().map(|r| r.3).fold(0.0, f64::max);
    if gap > params.tol {
        return Err(Error::Quadrature(gap));
    }
    Ok(GreenTable {
        values: rows.iter().map(|r| r.0).collect(),
        phi: rows.iter().map(|r| r.1).collect(),
        e_inf: rows.iter().map(|r| r.2).collect(),
        params: *params,
        refinement_gap: gap,
    })
}

impl GreenTable {
    /// Value at `w` with its branch angle moved within π of `phi_ref`.
    pub fn on_branch(&self, w: usize, phi_ref: f64) -> C64 {
        let m = ((phi_ref - self.phi[w]) / (2.0 * PI)).round();
        self.values[w] + C64::new(0.0, -self.e_inf[w] * m / 2.0)
    }

    /// `max |ΔG − δ_O|` over interior vertices, neighbours read on a common branch.
    pub fn laplacian_residual(&self, map: &CriticalMap, cx: &QuadComplex) -> f64 {
        let mut worst: f64 = 0.0;
        for v in 0..map.n_vertices() {
            if cx.is_boundary_vertex(v) {
                continue;
            }
            let g = self.values[v];
            let mut lap = ZERO;
            for (w, k, _) in cx.lambda_neighbors(v) {
                lap += (g - self.on_branch(w, self.phi[v])) * cx.rho_lambda(k);
            }
            let target = if v == map.origin { 1.0 } else { 0.0 };
            worst = worst.max((lap - target).norm());
        }
        worst
    }

    pub fn to_csv(&self, map: &CriticalMap) -> String {
        let mut s = String::from("vertex,re_z,im_z,re_g,im_g\n");
        for (v, g) in self.values.iter().enumerate() {
            let z = map.z[v];
            s.push_str(&format!("{v},{},{},{},{}\n", z.re, z.im, g.re, g.im));
        }
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirichletComparison {
    pub radius: f64,
    pub compared: usize,
    pub max_difference: f64,
}

/// Compare `G(x) − G(O)` on the origin's colour near the centre with the
/// solution of `ΔG = δ_O` grounded on the boundary of a large disk patch.
pub fn green_dirichlet_oracle(
    map: &CriticalMap,
    cx: &QuadComplex,
    centre_radius: f64,
    params: &GreenParams,
) -> Result<DirichletComparison> {
    map.require_open("dirichlet oracle")?;
    let lap = GraphLaplacian::from_edges(
        cx.n_vertices(),
        (0..cx.n_lambda_edges()).map(|k| {
            let (a, b) = cx.lambda_edge(k);
            (a, b, cx.rho_lambda(k))
        }),
    );
    let fixed: Vec<Option<f64>> =
        (0..cx.n_vertices()).map(|v| if cx.is_boundary_vertex(v) { Some(0.0) } else { None }).collect();
    let mut b = vec![0.0; cx.n_vertices()];
    b[map.origin] = 1.0;
    let sol = lap.solve_dirichlet(&fixed, &b, 1e-13)?;
    let near: Vec<usize> = (0..map.n_vertices())
        .filter(|&v| map.eps[v] > 0.0 && map.z[v].norm() <= centre_radius * map.delta)
        .collect();
    let diffs: Vec<f64> = near
        .par_iter()
        .map(|&v| {
            let g = green_at(map, cx, v, params).0;
            (g.re - (sol[v] - sol[map.origin])).abs() + g.im.abs()
        })
        .collect();
    let radius = map.z.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(DirichletComparison { radius, compared: near.len(), max_difference: diffs.into_iter().fold(0.0, f64::max) })
}

/// Smallest `(MM'/ℓ) / (sin η / 4)` over random point pairs on rhombus
/// boundaries, `ℓ` the shorter boundary arc and `η` the smallest angle of the face.
pub fn diam_lemma_ratio(map: &CriticalMap, cx: &QuadComplex, samples: usize, rng: &mut impl rand::Rng) -> f64 {
    let mut worst = f64::INFINITY;
    for q in 0..cx.n_faces() {
        let s = cx.quad_sides_dz(q).unwrap();
        let corner = cx.quad_local_coords(q).unwrap();
        let eta = (0..4).map(|k| (-s[k] / s[(k + 1) % 4]).arg().abs()).fold(PI, f64::min);
        let per = 4.0 * map.delta;
        let point = |t: f64| {
            let k = ((t / map.delta) as usize).min(3);
            corner[k] + s[k] * ((t - k as f64 * map.delta) / map.delta)
        };
        for _ in 0..samples {
            let a = rng.gen::<f64>() * per;
            let b = rng.gen::<f64>() * per;
            let arc = (a - b).abs().min(per - (a - b).abs());
            if arc < 1e-9 * map.delta {
                continue;
            }
            let ratio = (point(a) - point(b)).norm() / arc;
            worst = worst.min(ratio / (eta.sin() / 4.0));
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub delta: f64,
    pub vertices: usize,
    pub error: f64,
}

/// `max |Z^{:k:} − z^k|` over the unit disk on square patches of mesh `2^{−level}`.
pub fn monomial_convergence(k: usize, levels: &[u32]) -> Result<Vec<ConvergenceRow>> {
    use crate::cellular::{generate_rhombic_patch, PatchShape, PatchStyle};
    levels
        .iter()
        .map(|&l| {
            let delta = 0.5f64.powi(l as i32);
            let cx = generate_rhombic_patch(PatchShape::Disk { radius: 1.0 / delta }, delta, PatchStyle::Square)?;
            let map = check_critical(&cx)?;
            let mono = Monomials::new(&map, &cx, k)?;
            let error = (0..map.n_vertices())
                .filter(|&v| map.z[v].norm() <= 1.0 + 1e-12)
                .map(|v| (mono.value(k, v) - map.z[v].powu(k as u32)).norm())
                .fold(0.0, f64::max);
            Ok(ConvergenceRow { delta, vertices: cx.n_vertices(), error })
        })
        .collect()
}

/// Successive error ratios of a convergence study.
pub fn ratios(rows: &[ConvergenceRow]) -> Vec<f64> {
    rows.windows(2).map(|w| w[0].error / w[1].error).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellular::{generate_rhombic_patch, generate_trihex_torus, PatchShape, PatchStyle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(r: f64) -> (QuadComplex, CriticalMap) {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: r }, 1.0, PatchStyle::Square).unwrap();
        let m = check_critical(&cx).unwrap();
        (cx, m)
    }

    fn neighbour(cx: &QuadComplex, m: &CriticalMap, target: C64) -> usize {
        (0..cx.n_vertices()).find(|&v| (m.z[v] - target).norm() < 1e-12).unwrap()
    }

    #[test]
    fn square_patch_is_critical() {
        let (_, m) = square(4.0);
        assert!((m.theta_min - PI / 4.0).abs() < 1e-12);
        assert_eq!(m.delta, 1.0);
        assert_eq!(m.dist_bound_holds(), Some(true));
    }

    #[test]
    fn trihex_angles() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 3.0 }, 1.0, PatchStyle::Trihex).unwrap();
        let m = check_critical(&cx).unwrap();
        assert!((m.min_angle - PI / 3.0).abs() < 1e-9);
        assert_eq!(m.dist_bound_holds(), Some(true));
        let t = generate_trihex_torus(2, 3, [1.0 / 3f64.sqrt(); 3]).unwrap();
        let mt = check_critical(&t).unwrap();
        assert!(!mt.open && mt.dist_slack.is_none());
    }

    #[test]
    fn perturbed_vertex_listed() {
        let cx = generate_rhombic_patch(PatchShape::Rect { m0: -2, m1: 2, n0: -2, n1: 2 }, 1.0, PatchStyle::Square)
            .unwrap();
        let v = (0..cx.n_vertices()).find(|&v| (cx.z().unwrap()[v] - C64::new(1.0, 1.0)).norm() < 1e-12).unwrap();
        let mut z = cx.z().unwrap().to_vec();
        z[v] += 0.1;
        let dz: Vec<C64> = cx.edges().iter().map(|&[a, b]| z[b] - z[a]).collect();
        let bad = cx.clone().with_embedding(Some(z), Some(dz));
        match check_critical(&bad) {
            Err(Error::NotCritical { faces }) => {
                assert_eq!(faces.len(), 4);
                for (q, _) in faces {
                    assert!(bad.quad(q).contains(&v));
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exponential_values() {
        let (cx, m) = square(3.0);
        let x = neighbour(&cx, &m, C64::new(1.0, 0.0));
        assert!((exp_rational(&m, &cx, ONE, x).unwrap() - 3.0).norm() < 1e-14);
        assert!((exp_rational(&m, &cx, ZERO, 7).unwrap() - ONE).norm() == 0.0);
        let l = C64::new(0.3, -0.7);
        let a = exp_all(&m, &cx, l).unwrap();
        let b = exp_all(&m, &cx, -l).unwrap();
        for v in 0..a.len() {
            assert!((a[v] * b[v] - ONE).norm() < 1e-12);
        }
        assert!(exp_edge_residual(&m, &cx, l, &a) < 1e-12);
        assert!(exp_second_path_gap(&m, &cx, l).unwrap() < 1e-12);
        match exp_rational(&m, &cx, C64::new(2.0, 0.0), x) {
            Err(Error::Pole { theta }) => assert!(theta.abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exp_tends_to_eps() {
        let (cx, m) = square(3.0);
        let e = exp_all(&m, &cx, C64::new(2e6, 1e5)).unwrap();
        for v in 0..e.len() {
            assert!((e[v] - m.eps[v]).norm() < 1e-4);
        }
    }

    #[test]
    fn monomials_match_powers() {
        let (cx, m) = square(5.0);
        let mono = Monomials::new(&m, &cx, 6).unwrap();
        for v in 0..m.n_vertices() {
            assert!((mono.value(1, v) - m.z[v]).norm() < 1e-13);
            assert!((mono.value(2, v) - m.z[v] * m.z[v]).norm() < 1e-12);
        }
        let cr: f64 = (1..=6)
            .map(|k| holomorphicity_residual(&cx, &mono.cochain(k).values).into_iter().fold(0.0, f64::max))
            .fold(0.0, f64::max);
        assert!(cr < 1e-9);
        // ZkxO at a neighbour of the origin
        for (w, _) in cx.diamond_neighbors(m.origin) {
            let d = m.z[w];
            for k in 1..=6 {
                let fact: f64 = (1..=k).map(|i| i as f64).product();
                let expect = (d / 2.0).powu(k as u32) * 2.0 * fact;
                assert!((mono.value(k, w) - expect).norm() < 1e-12 * expect.norm().max(1.0));
            }
        }
        // Z^{:k:} = k ∫ Z^{:k−1:} dZ
        let f = primitive(&m, &cx, &mono.cochain(3).values).unwrap();
        for v in 0..m.n_vertices() {
            assert!((f[v] * 4.0 - mono.value(4, v)).norm() < 1e-9 * mono.value(4, v).norm().max(1.0));
        }
    }

    #[test]
    fn series_matches_rational() {
        let (cx, m) = square(8.0);
        let mono = Monomials::new(&m, &cx, SERIES_CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let l = C64::from_polar(rng.gen_range(0.0..1.8), rng.gen_range(0.0..2.0 * PI));
            let exact = exp_all(&m, &cx, l).unwrap();
            for v in (0..m.n_vertices()).step_by(7) {
                let s = exp_series(&m, &mono, l, v).unwrap();
                assert!(s.converged);
                assert!((s.value - exact[v]).norm() < 1e-10 * exact[v].norm().max(1.0), "{l} {v} {s:?} {}", exact[v]);
            }
        }
        let r = exp_series(&m, &mono, ZERO, 5).unwrap();
        assert_eq!((r.value, r.terms), (ONE, 1));
        assert!(matches!(exp_series(&m, &mono, C64::new(0.0, 2.0), 5), Err(Error::Divergent { .. })));
        for a in [1.5, 2.0, 3.0] {
            assert!(growth_bound_ratio(&m, &mono, a, 40) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn derivative_of_z_and_exp() {
        let (cx, m) = square(4.0);
        let d = dagger_and_derivative(&m, &cx, &m.z).unwrap();
        assert!(d.residual < 1e-12);
        let one: Vec<C64> = d.derivative.iter().map(|v| v - ONE).collect();
        assert!(modulo_eps(&m, &one) < 1e-12);
        let l = C64::new(0.4, 0.2);
        let e = exp_all(&m, &cx, l).unwrap();
        let d = dagger_and_derivative(&m, &cx, &e).unwrap();
        let diff: Vec<C64> = d.derivative.iter().zip(&e).map(|(a, b)| a - l * b).collect();
        assert!(modulo_eps(&m, &diff) < 1e-10);
        let dual = exp_all(&m, &cx, 4.0 / l.conj()).unwrap();
        for v in 0..e.len() {
            assert!((d.dagger[v] - dual[v]).norm() < 1e-12 * dual[v].norm().max(1.0));
        }
        assert!(dagger_and_derivative(&m, &cx, &m.z.iter().map(|z| z.conj()).collect::<Vec<_>>()).is_err());
    }

    #[test]
    fn primitive_cases() {
        let (cx, m) = square(4.0);
        let f = primitive(&m, &cx, &vec![ONE; m.n_vertices()]).unwrap();
        for v in 0..f.len() {
            assert!((f[v] - m.z[v]).norm() < 1e-13);
        }
        let e: Vec<C64> = m.eps.iter().map(|&e| C64::new(e, 0.0)).collect();
        assert!(primitive(&m, &cx, &e).unwrap().iter().all(|v| v.norm() < 1e-13));
        let bad: Vec<C64> = m.z.iter().map(|z| z.conj()).collect();
        assert!(matches!(primitive(&m, &cx, &bad), Err(Error::Holonomy { .. })));
    }

    #[test]
    fn tracks_on_rectangle() {
        let cx = generate_rhombic_patch(PatchShape::Rect { m0: 0, m1: 4, n0: 0, n1: 3 }, 1.0, PatchStyle::Square)
            .unwrap();
        let t = train_tracks(&cx);
        assert_eq!(t.tracks.len(), 7);
        assert!(t.every_quad_two);
        assert!(!t.all_slopes_distinct);
        assert!(t.crossing_slopes_distinct);
    }

    #[test]
    fn basis_probe_rank() {
        let cx = generate_rhombic_patch(PatchShape::Rect { m0: -1, m1: 2, n0: -1, n1: 2 }, 1.0, PatchStyle::Square)
            .unwrap();
        let m = check_critical(&cx).unwrap();
        let ls: Vec<f64> = (1..=7).map(|j| 0.25 * j as f64).collect();
        let p = exp_basis_probe(&m, &cx, &ls).unwrap();
        assert_eq!((p.cr_rank, p.dim), (9, 7));
        assert!(p.is_basis);
        let mut rep = ls.clone();
        rep[6] = rep[0];
        let p = exp_basis_probe(&m, &cx, &rep).unwrap();
        assert_eq!(p.exp_rank, 6);
        assert!(!p.is_basis);
    }

    #[test]
    fn straight_path_second_order() {
        let l = C64::new(0.7, 0.4);
        let x = C64::new(1.2, -0.5);
        let err = |n| (straight_path_exp(l, x, n) - (l * x).exp()).norm();
        for w in [8, 16, 32].windows(2) {
            let r = err(w[0]) / err(w[1]);
            assert!((3.0..=5.0).contains(&r), "{r}");
        }
    }

    #[test]
    fn diam_lemma_holds() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 3.0 }, 1.0, PatchStyle::Trihex).unwrap();
        let m = check_critical(&cx).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(diam_lemma_ratio(&m, &cx, 200, &mut rng) >= 1.0);
    }

    #[test]
    fn green_small_patch() {
        let cx = generate_rhombic_patch(PatchShape::Rect { m0: -4, m1: 4, n0: -4, n1: 4 }, 1.0, PatchStyle::Square)
            .unwrap();
        let m = check_critical(&cx).unwrap();
        let g = green_function(&m, &cx, &GreenParams { nodes: 1024, ..Default::default() }).unwrap();
        assert!(g.laplacian_residual(&m, &cx) < 1e-6, "{}", g.laplacian_residual(&m, &cx));
        for v in 0..m.n_vertices() {
            if m.eps[v] > 0.0 && v != m.origin {
                assert!(g.values[v].im.abs() < 1e-6 && g.values[v].re < 0.0, "{:?}", g.values[v]);
            }
        }
    }
}
