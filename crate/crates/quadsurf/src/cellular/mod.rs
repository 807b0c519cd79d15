//! Quad-graph complexes and their doubles.
//!
//! A quad is stored as `[x, y, x', y']`, counterclockwise, with `x, x'`
//! primal and `y, y'` dual. Side `k` joins positions `k` and `k+1`.
//! Each ⋄-edge is stored once, oriented from the endpoint that sits at an
//! even quad position to the one at an odd position (primal → dual on a
//! well-coloured complex), so a quad traverses its sides with signs
//! `[+1, -1, +1, -1]`.
//!
//! Λ cells:
//! - 0-cells are the vertices;
//! - 1-cells: index `q < F` is the Γ edge `x_q → x'_q`, index `F + q` is the
//!   Γ* edge `y_q → y'_q`, its dual;
//! - 2-cells are indexed by vertices: cell `v` is the face `v*` of the other graph.

mod generate;
mod json;

pub use generate::{
    generate_origami, generate_rhombic_patch, generate_square_torus, generate_trihex_torus,
    trihex_criticality_residual, cycles_max_entry, permutation_from_cycles, ComplexBuilder, PatchShape, PatchStyle,
};
pub use json::{ComplexJson, CycleJson};

use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Traversal sign of side `k` relative to the stored edge orientation.
pub const SIDE_SIGN: [i64; 4] = [1, -1, 1, -1];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Primal,
    Dual,
}

impl Color {
    pub fn other(self) -> Color {
        match self {
            Color::Primal => Color::Dual,
            Color::Dual => Color::Primal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexTag {
    Lambda,
    Diamond,
}

/// Positive weights on Γ edges. Γ* values are reciprocals; values declared
/// for Γ* edges in an input file are kept only so validation can report them.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalStructure {
    pub rho: Vec<f64>,
    pub declared_dual: Vec<Option<f64>>,
}

impl ConformalStructure {
    pub fn uniform(n: usize, rho: f64) -> Self {
        ConformalStructure { rho: vec![rho; n], declared_dual: vec![None; n] }
    }

    pub fn from_gamma(rho: Vec<f64>) -> Self {
        let n = rho.len();
        ConformalStructure { rho, declared_dual: vec![None; n] }
    }
}

/// Integer chain on Λ or ⋄.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    pub degree: usize,
    pub tag: ComplexTag,
    pub coeffs: Vec<i64>,
}

impl Chain {
    pub fn zero(cx: &QuadComplex, tag: ComplexTag, degree: usize) -> Chain {
        Chain { degree, tag, coeffs: vec![0; cx.cell_count(tag, degree)] }
    }

    pub fn cell(cx: &QuadComplex, tag: ComplexTag, degree: usize, cell: usize, c: i64) -> Chain {
        let mut ch = Chain::zero(cx, tag, degree);
        ch.coeffs[cell] = c;
        ch
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &Chain) -> Chain {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        Chain {
            degree: self.degree,
            tag: self.tag,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: i64) -> Chain {
        Chain { degree: self.degree, tag: self.tag, coeffs: self.coeffs.iter().map(|a| a * s).collect() }
    }
}

/// Complex-valued cochain on Λ or ⋄.
#[derive(Clone, Debug, PartialEq)]
pub struct Cochain {
    pub degree: usize,
    pub tag: ComplexTag,
    pub values: Vec<C64>,
}

impl Cochain {
    pub fn new(degree: usize, tag: ComplexTag, values: Vec<C64>) -> Cochain {
        Cochain { degree, tag, values }
    }

    pub fn zero(cx: &QuadComplex, tag: ComplexTag, degree: usize) -> Cochain {
        Cochain { degree, tag, values: vec![C64::new(0.0, 0.0); cx.cell_count(tag, degree)] }
    }

    pub fn from_real(degree: usize, tag: ComplexTag, values: &[f64]) -> Cochain {
        Cochain { degree, tag, values: values.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    /// Evaluation on a chain: Σ c_i v_i.
    pub fn eval(&self, chain: &Chain) -> C64 {
        assert_eq!(self.values.len(), chain.coeffs.len());
        self.values.iter().zip(&chain.coeffs).map(|(v, &c)| v * c as f64).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn axpy(&self, a: C64, other: &Cochain) -> Cochain {
        Cochain {
            degree: self.degree,
            tag: self.tag,
            values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
        }
    }

    pub fn scale(&self, a: C64) -> Cochain {
        Cochain { degree: self.degree, tag: self.tag, values: self.values.iter().map(|x| x * a).collect() }
    }

    pub fn conj(&self) -> Cochain {
        Cochain { degree: self.degree, tag: self.tag, values: self.values.iter().map(|x| x.conj()).collect() }
    }
}

/// Closed or open walk on ⋄ given by its vertices and the edges between them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiamondPath {
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

impl DiamondPath {
    pub fn is_closed(&self) -> bool {
        self.vertices.len() == self.edges.len() + 1 && self.vertices.first() == self.vertices.last()
    }

    /// Sign of the `i`-th step relative to the stored edge orientation.
    pub fn step_sign(&self, cx: &QuadComplex, i: usize) -> i64 {
        let [a, _] = cx.edges[self.edges[i]];
        if a == self.vertices[i] {
            1
        } else {
            -1
        }
    }

    pub fn chain(&self, cx: &QuadComplex) -> Chain {
        let mut ch = Chain::zero(cx, ComplexTag::Diamond, 1);
        for i in 0..self.edges.len() {
            ch.coeffs[self.edges[i]] += self.step_sign(cx, i);
        }
        ch
    }

    pub fn reversed(&self) -> DiamondPath {
        let mut v = self.vertices.clone();
        v.reverse();
        let mut e = self.edges.clone();
        e.reverse();
        DiamondPath { vertices: v, edges: e }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Bipartite,
    EdgeValence,
    Orientation,
    Duality,
    Reciprocity,
    RhoPositivity,
    Euler,
    Connectivity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

/// Quad-graph with its conformal structure and optional embedding.
#[derive(Clone, Debug)]
pub struct QuadComplex {
    colors: Vec<Color>,
    z: Option<Vec<C64>>,
    dz: Option<Vec<C64>>,
    quads: Vec<[usize; 4]>,
    sides: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    conformal: ConformalStructure,
    origin: Option<usize>,
    lattice: Option<[C64; 2]>,
    cycles: Vec<DiamondPath>,
    edge_quads: Vec<Vec<(usize, usize)>>,
    occurrences: Vec<Vec<(usize, usize)>>,
    fans: Vec<Vec<(usize, usize)>>,
    fan_ok: Vec<bool>,
}

impl QuadComplex {
    /// Assemble a complex from explicit incidence data.
    ///
    /// `sides[q][k]` is the ⋄-edge joining positions `k` and `k+1` of quad `q`;
    /// `edges[e]` lists its endpoints as `[even-position end, odd-position end]`.
    /// Only index ranges and side/edge endpoint agreement are enforced here;
    /// everything else is reported by [`QuadComplex::validate`].
    pub fn from_parts(
        colors: Vec<Color>,
        quads: Vec<[usize; 4]>,
        sides: Vec<[usize; 4]>,
        edges: Vec<[usize; 2]>,
        conformal: ConformalStructure,
    ) -> Result<QuadComplex> {
        let nv = colors.len();
        if quads.len() != sides.len() || conformal.rho.len() != quads.len() {
            return Err(Error::InvalidComplex("quads, sides and rho lengths differ".into()));
        }
        if conformal.declared_dual.len() != quads.len() {
            return Err(Error::InvalidComplex("declared dual rho length differs".into()));
        }
        for (q, quad) in quads.iter().enumerate() {
            for k in 0..4 {
                if quad[k] >= nv {
                    return Err(Error::InvalidComplex(format!("quad {q} references vertex {}", quad[k])));
                }
                let e = sides[q][k];
                if e >= edges.len() {
                    return Err(Error::InvalidComplex(format!("quad {q} references edge {e}")));
                }
                let (a, b) = (quad[k], quad[(k + 1) % 4]);
                let [s, t] = edges[e];
                if !((s == a && t == b) || (s == b && t == a)) {
                    return Err(Error::InvalidComplex(format!(
                        "side {k} of quad {q} joins {a},{b} but edge {e} joins {s},{t}"
                    )));
                }
            }
        }
        for (e, &[s, t]) in edges.iter().enumerate() {
            if s >= nv || t >= nv {
                return Err(Error::InvalidComplex(format!("edge {e} references a missing vertex")));
            }
        }
        let mut edge_quads = vec![Vec::new(); edges.len()];
        let mut occurrences = vec![Vec::new(); nv];
        for (q, quad) in quads.iter().enumerate() {
            for k in 0..4 {
                edge_quads[sides[q][k]].push((q, k));
                occurrences[quad[k]].push((q, k));
            }
        }
        let mut cx = QuadComplex {
            colors,
            z: None,
            dz: None,
            quads,
            sides,
            edges,
            conformal,
            origin: None,
            lattice: None,
            cycles: Vec::new(),
            edge_quads,
            occurrences,
            fans: Vec::new(),
            fan_ok: Vec::new(),
        };
        cx.build_fans();
        Ok(cx)
    }

    fn build_fans(&mut self) {
        let nv = self.colors.len();
        self.fans = vec![Vec::new(); nv];
        self.fan_ok = vec![true; nv];
        for v in 0..nv {
            let occ = &self.occurrences[v];
            if occ.is_empty() {
                self.fan_ok[v] = false;
                continue;
            }
            // a sector (q,p) follows, counterclockwise, the sector across side p-1
            let start = occ
                .iter()
                .copied()
                .find(|&(q, p)| self.edge_quads[self.sides[q][p]].len() == 1)
                .unwrap_or(occ[0]);
            let mut fan = vec![start];
            let mut cur = start;
            let mut ok = true;
            loop {
                match self.next_sector(cur) {
                    Some(nx) if nx == start => break,
                    Some(nx) => {
                        if fan.contains(&nx) {
                            ok = false;
                            break;
                        }
                        fan.push(nx);
                        cur = nx;
                    }
                    None => {
                        let (q, p) = cur;
                        let e = self.sides[q][(p + 3) % 4];
                        if self.edge_quads[e].len() != 1 {
                            ok = false;
                        }
                        break;
                    }
                }
            }
            if fan.len() != occ.len() {
                ok = false;
            }
            self.fans[v] = fan;
            self.fan_ok[v] = ok;
        }
    }

    fn next_sector(&self, (q, p): (usize, usize)) -> Option<(usize, usize)> {
        let s = (p + 3) % 4;
        let e = self.sides[q][s];
        let v = self.quads[q][p];
        for &(q2, s2) in &self.edge_quads[e] {
            if (q2, s2) == (q, s) {
                continue;
            }
            if self.quads[q2][s2] == v {
                return Some((q2, s2));
            }
        }
        None
    }

    pub fn with_embedding(mut self, z: Option<Vec<C64>>, dz: Option<Vec<C64>>) -> Self {
        self.z = z;
        self.dz = dz;
        self
    }

    pub fn with_origin(mut self, origin: Option<usize>) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_lattice(mut self, lattice: Option<[C64; 2]>) -> Self {
        self.lattice = lattice;
        self
    }

    pub fn with_cycles(mut self, cycles: Vec<DiamondPath>) -> Self {
        self.cycles = cycles;
        self
    }

    pub fn n_vertices(&self) -> usize {
        self.colors.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.quads.len()
    }

    pub fn n_lambda_edges(&self) -> usize {
        2 * self.quads.len()
    }

    pub fn cell_count(&self, tag: ComplexTag, degree: usize) -> usize {
        match (tag, degree) {
            (_, 0) => self.n_vertices(),
            (ComplexTag::Lambda, 1) => self.n_lambda_edges(),
            (ComplexTag::Lambda, 2) => self.n_vertices(),
            (ComplexTag::Diamond, 1) => self.n_edges(),
            (ComplexTag::Diamond, 2) => self.n_faces(),
            _ => 0,
        }
    }

    pub fn color(&self, v: usize) -> Color {
        self.colors[v]
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub fn quads(&self) -> &[[usize; 4]] {
        &self.quads
    }

    pub fn quad(&self, q: usize) -> [usize; 4] {
        self.quads[q]
    }

    pub fn sides(&self, q: usize) -> [usize; 4] {
        self.sides[q]
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge_quads(&self, e: usize) -> &[(usize, usize)] {
        &self.edge_quads[e]
    }

    /// All `(quad, position)` occurrences of a vertex.
    pub fn occurrences(&self, v: usize) -> &[(usize, usize)] {
        &self.occurrences[v]
    }

    /// Occurrences of `v` in counterclockwise order. On a boundary vertex the
    /// fan starts at the sector whose clockwise side lies on the boundary.
    pub fn fan(&self, v: usize) -> &[(usize, usize)] {
        &self.fans[v]
    }

    pub fn z(&self) -> Option<&[C64]> {
        self.z.as_deref()
    }

    /// Displacement along each ⋄-edge in its stored orientation.
    pub fn dz(&self) -> Option<&[C64]> {
        self.dz.as_deref()
    }

    pub fn origin(&self) -> Option<usize> {
        self.origin
    }

    pub fn lattice(&self) -> Option<[C64; 2]> {
        self.lattice
    }

    pub fn attached_cycles(&self) -> &[DiamondPath] {
        &self.cycles
    }

    pub fn conformal(&self) -> &ConformalStructure {
        &self.conformal
    }

    pub fn conformal_mut(&mut self) -> &mut ConformalStructure {
        &mut self.conformal
    }

    /// ρ on the Γ edge of quad `q`.
    pub fn rho(&self, q: usize) -> f64 {
        self.conformal.rho[q]
    }

    /// ρ on a Λ edge.
    pub fn rho_lambda(&self, k: usize) -> f64 {
        let f = self.n_faces();
        if k < f {
            self.conformal.rho[k]
        } else {
            1.0 / self.conformal.rho[k - f]
        }
    }

    /// The Λ edge paired with `k`.
    pub fn dual_edge(&self, k: usize) -> usize {
        let f = self.n_faces();
        if k < f {
            k + f
        } else {
            k - f
        }
    }

    /// Endpoints of a Λ edge.
    pub fn lambda_edge(&self, k: usize) -> (usize, usize) {
        let f = self.n_faces();
        let q = &self.quads[k % f];
        if k < f {
            (q[0], q[2])
        } else {
            (q[1], q[3])
        }
    }

    /// Whether a Λ edge belongs to Γ.
    pub fn is_gamma_edge(&self, k: usize) -> bool {
        k < self.n_faces()
    }

    /// Signed Λ edges bounding the face `v*`, counterclockwise around `v`.
    pub fn lambda_face_boundary(&self, v: usize) -> Vec<(usize, i64)> {
        let f = self.n_faces();
        self.occurrences[v]
            .iter()
            .map(|&(q, p)| match p {
                0 => (f + q, 1),
                2 => (f + q, -1),
                1 => (q, -1),
                _ => (q, 1),
            })
            .collect()
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_quads[e].len() < 2
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.occurrences[v].iter().any(|&(q, p)| {
            self.is_boundary_edge(self.sides[q][p]) || self.is_boundary_edge(self.sides[q][(p + 3) % 4])
        })
    }

    pub fn is_closed(&self) -> bool {
        self.edge_quads.iter().all(|eq| eq.len() == 2)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }

    /// Genus of a closed connected surface.
    pub fn genus(&self) -> Option<usize> {
        let chi = self.euler_characteristic();
        if !self.is_closed() || chi > 2 || chi % 2 != 0 {
            return None;
        }
        Some(((2 - chi) / 2) as usize)
    }

    /// ⋄ neighbours of a vertex with the joining edge.
    pub fn diamond_neighbors(&self, v: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for &(q, p) in &self.occurrences[v] {
            let e = self.sides[q][p];
            if !out.iter().any(|&(_, e2)| e2 == e) {
                out.push((self.quads[q][(p + 1) % 4], e));
            }
            let e = self.sides[q][(p + 3) % 4];
            if !out.iter().any(|&(_, e2)| e2 == e) {
                out.push((self.quads[q][(p + 3) % 4], e));
            }
        }
        out
    }

    /// Λ neighbours of a vertex with the joining Λ edge and the sign of the
    /// traversal from `v`.
    pub fn lambda_neighbors(&self, v: usize) -> Vec<(usize, usize, i64)> {
        let f = self.n_faces();
        self.occurrences[v]
            .iter()
            .map(|&(q, p)| {
                let w = self.quads[q][(p + 2) % 4];
                let k = if p % 2 == 0 { q } else { f + q };
                let s = if p < 2 { 1 } else { -1 };
                (w, k, s)
            })
            .collect()
    }

    /// Combinatorial distance on ⋄ from `src` to every vertex.
    pub fn diamond_distances(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n_vertices()];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        while let Some(v) = queue.pop_front() {
            for (w, _) in self.diamond_neighbors(v) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n_vertices() == 0 || self.diamond_distances(0).iter().all(|&d| d != usize::MAX)
    }

    /// Boundary operator on Λ or ⋄ chains; degree-0 chains map to zero.
    pub fn boundary(&self, c: &Chain) -> Result<Chain> {
        self.check_chain(c)?;
        if c.degree == 0 {
            return Ok(Chain { degree: 0, tag: c.tag, coeffs: vec![0; c.coeffs.len()] });
        }
        let mut out = Chain::zero(self, c.tag, c.degree - 1);
        match (c.tag, c.degree) {
            (ComplexTag::Lambda, 1) => {
                for (k, &a) in c.coeffs.iter().enumerate() {
                    if a != 0 {
                        let (s, t) = self.lambda_edge(k);
                        out.coeffs[t] += a;
                        out.coeffs[s] -= a;
                    }
                }
            }
            (ComplexTag::Lambda, 2) => {
                for (v, &a) in c.coeffs.iter().enumerate() {
                    if a != 0 {
                        for (k, s) in self.lambda_face_boundary(v) {
                            out.coeffs[k] += a * s;
                        }
                    }
                }
            }
            (ComplexTag::Diamond, 1) => {
                for (e, &a) in c.coeffs.iter().enumerate() {
                    if a != 0 {
                        let [s, t] = self.edges[e];
                        out.coeffs[t] += a;
                        out.coeffs[s] -= a;
                    }
                }
            }
            (ComplexTag::Diamond, 2) => {
                for (q, &a) in c.coeffs.iter().enumerate() {
                    if a != 0 {
                        for k in 0..4 {
                            out.coeffs[self.sides[q][k]] += a * SIDE_SIGN[k];
                        }
                    }
                }
            }
            _ => return Err(Error::Degree(format!("chain degree {}", c.degree))),
        }
        Ok(out)
    }

    fn check_chain(&self, c: &Chain) -> Result<()> {
        if c.degree > 2 {
            return Err(Error::Degree(format!("chain degree {}", c.degree)));
        }
        let n = self.cell_count(c.tag, c.degree);
        if c.coeffs.len() != n {
            return Err(Error::Mismatch { expected: n, got: c.coeffs.len() });
        }
        Ok(())
    }

    /// Coboundary by Stokes: `(df)(c) = f(∂c)`.
    pub fn coboundary(&self, f: &Cochain) -> Result<Cochain> {
        if f.degree >= 2 {
            return Err(Error::Degree("coboundary of a 2-cochain is not representable".into()));
        }
        let n = self.cell_count(f.tag, f.degree);
        if f.values.len() != n {
            return Err(Error::Mismatch { expected: n, got: f.values.len() });
        }
        let zero = C64::new(0.0, 0.0);
        let vals: Vec<C64> = match (f.tag, f.degree) {
            (ComplexTag::Lambda, 0) => (0..self.n_lambda_edges())
                .map(|k| {
                    let (s, t) = self.lambda_edge(k);
                    f.values[t] - f.values[s]
                })
                .collect(),
            (ComplexTag::Lambda, _) => (0..self.n_vertices())
                .map(|v| self.lambda_face_boundary(v).iter().fold(zero, |acc, &(k, s)| acc + f.values[k] * s as f64))
                .collect(),
            (ComplexTag::Diamond, 0) => self.edges.iter().map(|&[s, t]| f.values[t] - f.values[s]).collect(),
            (ComplexTag::Diamond, _) => (0..self.n_faces())
                .map(|q| (0..4).fold(zero, |acc, k| acc + f.values[self.sides[q][k]] * SIDE_SIGN[k] as f64))
                .collect(),
        };
        Ok(Cochain { degree: f.degree + 1, tag: f.tag, values: vals })
    }

    /// Value of a ⋄ 1-cochain on side `k` of quad `q`, in traversal direction.
    pub fn side_value(&self, alpha: &[C64], q: usize, k: usize) -> C64 {
        alpha[self.sides[q][k]] * SIDE_SIGN[k] as f64
    }

    /// The four side displacements of a quad in traversal order.
    pub fn quad_sides_dz(&self, q: usize) -> Option<[C64; 4]> {
        let dz = self.dz.as_ref()?;
        Some([0, 1, 2, 3].map(|k| dz[self.sides[q][k]] * SIDE_SIGN[k] as f64))
    }

    /// Diagonals `(x' - x, y' - y)` of an embedded quad.
    pub fn quad_diagonals(&self, q: usize) -> Option<(C64, C64)> {
        let s = self.quad_sides_dz(q)?;
        Some((s[0] + s[1], s[1] + s[2]))
    }

    /// Integer-coordinate vertices of a quad relative to `x`, from edge displacements.
    pub fn quad_local_coords(&self, q: usize) -> Option<[C64; 4]> {
        let s = self.quad_sides_dz(q)?;
        let x = C64::new(0.0, 0.0);
        Some([x, x + s[0], x + s[0] + s[1], x + s[0] + s[1] + s[2]])
    }

    /// Report every violated structural invariant; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |kind, detail: String| out.push(Violation { kind, detail });
        for (q, quad) in self.quads.iter().enumerate() {
            let want = [Color::Primal, Color::Dual, Color::Primal, Color::Dual];
            for k in 0..4 {
                if self.colors[quad[k]] != want[k] {
                    push(
                        ViolationKind::Bipartite,
                        format!("quad {q} position {k}: vertex {} has colour {:?}", quad[k], self.colors[quad[k]]),
                    );
                }
            }
        }
        for (e, eq) in self.edge_quads.iter().enumerate() {
            if eq.is_empty() || eq.len() > 2 {
                push(ViolationKind::EdgeValence, format!("edge {e} lies in {} quads", eq.len()));
            } else if eq.len() == 2 {
                let (q0, s0) = eq[0];
                let (q1, s1) = eq[1];
                if self.quads[q0][s0] == self.quads[q1][s1] {
                    push(ViolationKind::Orientation, format!("edge {e} is traversed the same way by quads {q0} and {q1}"));
                }
            }
        }
        for (q, &r) in self.conformal.rho.iter().enumerate() {
            if !(r.is_finite() && r > 0.0) {
                push(ViolationKind::RhoPositivity, format!("rho on quad {q} is {r}"));
            }
            if let Some(d) = self.conformal.declared_dual[q] {
                if (r * d - 1.0).abs() > 1e-12 {
                    push(ViolationKind::Reciprocity, format!("rho(e)*rho(e*) = {} on quad {q}", r * d));
                }
            }
        }
        for v in 0..self.n_vertices() {
            if self.occurrences[v].is_empty() {
                push(ViolationKind::Duality, format!("vertex {v} lies in no quad"));
            } else if !self.fan_ok[v] {
                push(ViolationKind::Duality, format!("vertex {v} does not have a single fan of quads"));
            }
        }
        if !self.is_connected() {
            push(ViolationKind::Connectivity, "quad-graph is disconnected".into());
        }
        if self.is_closed() {
            let chi = self.euler_characteristic();
            if chi > 2 || chi % 2 != 0 {
                push(ViolationKind::Euler, format!("Euler characteristic {chi} is not 2-2g"));
            }
        }
        out
    }

    /// Double complex description: Γ and Γ* edge lists, pairing and face map.
    pub fn double(&self) -> DoubleComplex {
        let f = self.n_faces();
        DoubleComplex {
            gamma: (0..f).map(|k| self.lambda_edge(k)).collect(),
            gamma_star: (f..2 * f).map(|k| self.lambda_edge(k)).collect(),
            dual_pairing: (0..2 * f).map(|k| self.dual_edge(k)).collect(),
            face_of_vertex: (0..self.n_vertices()).collect(),
        }
    }
}

/// Explicit view of Λ = Γ ⊔ Γ*.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoubleComplex {
    pub gamma: Vec<(usize, usize)>,
    pub gamma_star: Vec<(usize, usize)>,
    /// Λ edge index ↦ dual Λ edge index.
    pub dual_pairing: Vec<usize>,
    /// Vertex `v` ↦ index of the face `v*` of the other graph.
    pub face_of_vertex: Vec<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus() -> QuadComplex {
        generate_square_torus(2, 2, std::f64::consts::FRAC_PI_4).unwrap()
    }

    #[test]
    fn torus_counts() {
        let cx = torus();
        assert_eq!((cx.n_vertices(), cx.n_edges(), cx.n_faces()), (16, 32, 16));
        assert_eq!(cx.genus(), Some(1));
        assert!(cx.validate().is_empty(), "{:?}", cx.validate());
    }

    #[test]
    fn edge_boundary_is_difference() {
        let cx = torus();
        let (s, t) = cx.lambda_edge(3);
        let b = cx.boundary(&Chain::cell(&cx, ComplexTag::Lambda, 1, 3, 1)).unwrap();
        assert_eq!(b.coeffs[t], 1);
        assert_eq!(b.coeffs[s], -1);
        assert_eq!(b.coeffs.iter().map(|c| c.abs()).sum::<i64>(), 2);
    }

    #[test]
    fn boundary_squared_vanishes() {
        let cx = torus();
        for tag in [ComplexTag::Lambda, ComplexTag::Diamond] {
            for c in 0..cx.cell_count(tag, 2) {
                let b = cx.boundary(&Chain::cell(&cx, tag, 2, c, 1)).unwrap();
                assert!(cx.boundary(&b).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn closed_surface_has_no_boundary() {
        let cx = torus();
        for tag in [ComplexTag::Lambda, ComplexTag::Diamond] {
            let all = Chain { degree: 2, tag, coeffs: vec![1; cx.cell_count(tag, 2)] };
            assert!(cx.boundary(&all).unwrap().is_zero());
        }
    }

    #[test]
    fn degree_zero_boundary_is_zero() {
        let cx = torus();
        let c = Chain::cell(&cx, ComplexTag::Diamond, 0, 0, 5);
        assert!(cx.boundary(&c).unwrap().is_zero());
    }

    #[test]
    fn coboundary_rejects_two_forms() {
        let cx = torus();
        let w = Cochain::zero(&cx, ComplexTag::Lambda, 2);
        assert!(cx.coboundary(&w).is_err());
    }

    #[test]
    fn constant_has_zero_coboundary() {
        let cx = torus();
        let f = Cochain::new(0, ComplexTag::Lambda, vec![C64::new(2.5, -1.0); cx.n_vertices()]);
        assert_eq!(cx.coboundary(&f).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn fans_are_complete_on_closed_surface() {
        let cx = torus();
        for v in 0..cx.n_vertices() {
            assert_eq!(cx.fan(v).len(), 4);
        }
    }

    #[test]
    fn bipartite_violation_reported() {
        let cx = torus();
        let mut colors = cx.colors().to_vec();
        let y = cx.quad(0)[1];
        colors[y] = Color::Primal;
        let bad = QuadComplex::from_parts(
            colors,
            cx.quads().to_vec(),
            (0..cx.n_faces()).map(|q| cx.sides(q)).collect(),
            cx.edges().to_vec(),
            cx.conformal().clone(),
        )
        .unwrap();
        assert!(bad.validate().iter().any(|v| v.kind == ViolationKind::Bipartite));
    }

    #[test]
    fn reciprocity_violation_reported() {
        let mut cx = torus();
        let r = cx.rho(0);
        cx.conformal_mut().declared_dual[0] = Some(2.0 / r);
        let rep = cx.validate();
        assert_eq!(rep.len(), 1);
        assert_eq!(rep[0].kind, ViolationKind::Reciprocity);
    }

    #[test]
    fn dual_pairing_is_involution() {
        let cx = torus();
        let d = cx.double();
        for k in 0..cx.n_lambda_edges() {
            assert_eq!(d.dual_pairing[d.dual_pairing[k]], k);
            assert!((cx.rho_lambda(k) * cx.rho_lambda(cx.dual_edge(k)) - 1.0).abs() < 1e-15);
        }
    }
}
