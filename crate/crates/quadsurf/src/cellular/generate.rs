//! Surface generators: square and tri-hex tori, origamis, rhombic patches.

use super::{Color, ConformalStructure, DiamondPath, QuadComplex, SIDE_SIGN};
use crate::error::{Error, Result};
use crate::C64;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::hash::Hash;

/// Incremental construction keyed by arbitrary edge labels, so multi-edges
/// between the same pair of vertices stay distinct.
pub struct ComplexBuilder<K> {
    colors: Vec<Color>,
    z: Vec<Option<C64>>,
    quads: Vec<[usize; 4]>,
    sides: Vec<[usize; 4]>,
    edges: Vec<[usize; 2]>,
    dz: Vec<Option<C64>>,
    rho: Vec<f64>,
    index: HashMap<K, usize>,
}

impl<K: Hash + Eq + std::fmt::Debug> Default for ComplexBuilder<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Hash + Eq + std::fmt::Debug> ComplexBuilder<K> {
    pub fn new() -> Self {
        ComplexBuilder {
            colors: Vec::new(),
            z: Vec::new(),
            quads: Vec::new(),
            sides: Vec::new(),
            edges: Vec::new(),
            dz: Vec::new(),
            rho: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn vertex(&mut self, color: Color, z: Option<C64>) -> usize {
        self.colors.push(color);
        self.z.push(z);
        self.colors.len() - 1
    }

    pub fn n_vertices(&self) -> usize {
        self.colors.len()
    }

    /// Add quad `v = [x, y, x', y']`; `keys[k]` labels the side from `v[k]` to
    /// `v[k+1]`, and `dz[k]` is its displacement when known.
    pub fn quad(&mut self, v: [usize; 4], keys: [K; 4], rho: f64, dz: Option<[C64; 4]>) -> Result<usize> {
        let mut side_ids = [0usize; 4];
        for (k, key) in keys.into_iter().enumerate() {
            let (a, b) = (v[k], v[(k + 1) % 4]);
            let stored = if k % 2 == 0 { [a, b] } else { [b, a] };
            let d = dz.map(|d| d[k] * SIDE_SIGN[k] as f64);
            let id = match self.index.get(&key) {
                Some(&id) => {
                    let [s, t] = self.edges[id];
                    if !((s == a && t == b) || (s == b && t == a)) {
                        return Err(Error::InvalidComplex(format!("edge key {key:?} reused with other endpoints")));
                    }
                    id
                }
                None => {
                    self.edges.push(stored);
                    self.dz.push(d);
                    self.index.insert(key, self.edges.len() - 1);
                    self.edges.len() - 1
                }
            };
            side_ids[k] = id;
        }
        self.quads.push(v);
        self.sides.push(side_ids);
        self.rho.push(rho);
        Ok(self.quads.len() - 1)
    }

    pub fn finish(self) -> Result<QuadComplex> {
        let z: Option<Vec<C64>> = self.z.iter().copied().collect();
        let mut dz: Option<Vec<C64>> = self.dz.iter().copied().collect();
        if dz.is_none() {
            if let Some(z) = &z {
                dz = Some(self.edges.iter().map(|&[s, t]| z[t] - z[s]).collect());
            }
        }
        let cx = QuadComplex::from_parts(
            self.colors,
            self.quads,
            self.sides,
            self.edges,
            ConformalStructure::from_gamma(self.rho),
        )?;
        Ok(cx.with_embedding(z, dz))
    }

    pub fn edge_id(&self, key: &K) -> Option<usize> {
        self.index.get(key).copied()
    }
}

/// Torus `(Z e^{iθ} + Z e^{-iθ}) / (2p e^{-iθ}, 2q e^{iθ})` with its critical weights.
///
/// Vertex `(a, b)` sits at `a e^{iθ} + b e^{-iθ}` with `a mod 2q`, `b mod 2p`,
/// and is primal when `a + b` is even. The first attached cycle runs along
/// `e^{-iθ}` (the `p` direction), the second along `e^{iθ}`.
pub fn generate_square_torus(p: usize, q: usize, theta: f64) -> Result<QuadComplex> {
    if p == 0 || q == 0 {
        return Err(Error::InvalidParameter("p and q must be positive".into()));
    }
    if !(theta > 1e-9 && theta < FRAC_PI_2 - 1e-9) {
        return Err(Error::InvalidParameter(format!("theta {theta} must lie in (0, pi/2)")));
    }
    let (na, nb) = (2 * q, 2 * p);
    let up = C64::from_polar(1.0, theta);
    let down = C64::from_polar(1.0, -theta);
    let id = |a: usize, b: usize| (a % na) * nb + (b % nb);
    let mut bld: ComplexBuilder<(u8, usize)> = ComplexBuilder::new();
    for a in 0..na {
        for b in 0..nb {
            let c = if (a + b) % 2 == 0 { Color::Primal } else { Color::Dual };
            bld.vertex(c, Some(up * a as f64 + down * b as f64));
        }
    }
    const DOWN: u8 = 0;
    const UP: u8 = 1;
    let (tan, cot) = (theta.tan(), 1.0 / theta.tan());
    for a in 0..na {
        for b in 0..nb {
            let l = id(a, b);
            let bottom = id(a, b + 1);
            let right = id(a + 1, b + 1);
            let top = id(a + 1, b);
            if (a + b) % 2 == 0 {
                bld.quad(
                    [l, bottom, right, top],
                    [(DOWN, l), (UP, bottom), (DOWN, top), (UP, l)],
                    tan,
                    Some([down, up, -down, -up]),
                )?;
            } else {
                bld.quad(
                    [bottom, right, top, l],
                    [(UP, bottom), (DOWN, top), (UP, l), (DOWN, l)],
                    cot,
                    Some([up, -down, -up, down]),
                )?;
            }
        }
    }
    let path = |dir: u8, len: usize| {
        let mut vs = vec![id(0, 0)];
        let mut es = Vec::new();
        let (mut a, mut b) = (0, 0);
        for _ in 0..len {
            es.push(bld.edge_id(&(dir, id(a, b))).unwrap());
            if dir == DOWN {
                b += 1;
            } else {
                a += 1;
            }
            vs.push(id(a, b));
        }
        DiamondPath { vertices: vs, edges: es }
    };
    let cycles = vec![path(DOWN, nb), path(UP, na)];
    let lattice = [down * (2 * p) as f64, up * (2 * q) as f64];
    let origin = id(0, 0);
    Ok(bld.finish()?.with_cycles(cycles).with_lattice(Some(lattice)).with_origin(Some(origin)))
}

/// `|ρ₁ρ₂ + ρ₂ρ₃ + ρ₃ρ₁ − 1|`: zero exactly when the tri-hex weights are critical.
pub fn trihex_criticality_residual(rhos: [f64; 3]) -> f64 {
    let [a, b, c] = rhos;
    (a * b + b * c + c * a - 1.0).abs()
}

fn circumcenter(a: C64, b: C64, c: C64) -> C64 {
    let (b, c) = (b - a, c - a);
    let d = 2.0 * (b.re * c.im - b.im * c.re);
    let (nb, nc) = (b.norm_sqr(), c.norm_sqr());
    a + C64::new((c.im * nb - b.im * nc) / d, (b.re * nc - c.re * nb) / d)
}

/// Torus tiled by `rows × cols` pairs of triangles; Γ is triangular, Γ* hexagonal.
///
/// `rhos = (ρ_−, ρ_\, ρ_/)` are the weights of the three edge directions.
/// When they are critical an embedding is attached with primal step `u = 1`
/// horizontally, rhombus side equal to the circumradius, and lattice
/// periods `cols·u` and `rows·v`.
pub fn generate_trihex_torus(rows: usize, cols: usize, rhos: [f64; 3]) -> Result<QuadComplex> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("rows and cols must be positive".into()));
    }
    if rhos.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidParameter(format!("weights {rhos:?} must be positive")));
    }
    let [rh, rb, rs] = rhos;
    let critical = trihex_criticality_residual(rhos) < 1e-12;
    // opposite angles: γ = arccot ρ, they sum to π exactly when critical
    let (gh, gb, gs) = ((1.0 / rh).atan(), (1.0 / rb).atan(), (1.0 / rs).atan());
    let big_r = 1.0 / (2.0 * gh.sin());
    let u = C64::new(1.0, 0.0);
    let v = C64::from_polar(2.0 * big_r * gs.sin(), gb);
    let p = |a: usize, b: usize| (b % rows) * cols + (a % cols);
    let n = rows * cols;
    let cu = |a: usize, b: usize| n + p(a, b);
    let cd = |a: usize, b: usize| 2 * n + p(a, b);
    let pos = |a: usize, b: usize| u * a as f64 + v * b as f64;
    let mut bld: ComplexBuilder<(u8, usize, u8)> = ComplexBuilder::new();
    let emb = |z: C64| if critical { Some(z) } else { None };
    for b in 0..rows {
        for a in 0..cols {
            bld.vertex(Color::Primal, emb(pos(a, b)));
        }
    }
    let up_center = |a: usize, b: usize| circumcenter(pos(a, b), pos(a + 1, b), pos(a, b + 1));
    let down_center = |a: usize, b: usize| circumcenter(pos(a + 1, b), pos(a + 1, b + 1), pos(a, b + 1));
    for b in 0..rows {
        for a in 0..cols {
            bld.vertex(Color::Dual, emb(up_center(a, b)));
        }
    }
    for b in 0..rows {
        for a in 0..cols {
            bld.vertex(Color::Dual, emb(down_center(a, b)));
        }
    }
    const U: u8 = 0;
    const D: u8 = 1;
    // corners: U(a,b) = [P(a,b), P(a+1,b), P(a,b+1)], D(a,b) = [P(a+1,b), P(a+1,b+1), P(a,b+1)]
    let up_corner = |a: usize, b: usize, c: usize| match c {
        0 => pos(a, b),
        1 => pos(a + 1, b),
        _ => pos(a, b + 1),
    };
    let down_corner = |a: usize, b: usize, c: usize| match c {
        0 => pos(a + 1, b),
        1 => pos(a + 1, b + 1),
        _ => pos(a, b + 1),
    };
    // displacement from a corner to the circumcenter
    let du = |a: usize, b: usize, c: usize| up_center(a, b) - up_corner(a, b, c);
    let dd = |a: usize, b: usize, c: usize| down_center(a, b) - down_corner(a, b, c);
    let wrap = |a: usize, k: usize| (a + k - 1) % k;
    for b in 0..rows {
        for a in 0..cols {
            let bm = wrap(b, rows);
            let am = wrap(a, cols);
            // horizontal edge P(a,b) → P(a+1,b)
            let dz = [dd(a, bm, 2), -dd(a, bm, 1), du(a, b, 1), -du(a, b, 0)];
            bld.quad(
                [p(a, b), cd(a, bm), p(a + 1, b), cu(a, b)],
                [(D, p(a, bm), 2), (D, p(a, bm), 1), (U, p(a, b), 1), (U, p(a, b), 0)],
                rh,
                if critical { Some(dz) } else { None },
            )?;
            // "/" edge P(a,b) → P(a,b+1)
            let dz = [du(a, b, 0), -du(a, b, 2), dd(am, b, 1), -dd(am, b, 0)];
            bld.quad(
                [p(a, b), cu(a, b), p(a, b + 1), cd(am, b)],
                [(U, p(a, b), 0), (U, p(a, b), 2), (D, p(am, b), 1), (D, p(am, b), 0)],
                rs,
                if critical { Some(dz) } else { None },
            )?;
            // "\" edge P(a+1,b) → P(a,b+1)
            let dz = [dd(a, b, 0), -dd(a, b, 2), du(a, b, 2), -du(a, b, 1)];
            bld.quad(
                [p(a + 1, b), cd(a, b), p(a, b + 1), cu(a, b)],
                [(D, p(a, b), 0), (D, p(a, b), 2), (U, p(a, b), 2), (U, p(a, b), 1)],
                rb,
                if critical { Some(dz) } else { None },
            )?;
        }
    }
    let mut cyc_u = DiamondPath { vertices: vec![p(0, 0)], edges: vec![] };
    for a in 0..cols {
        cyc_u.edges.push(bld.edge_id(&(U, p(a, 0), 0)).unwrap());
        cyc_u.vertices.push(cu(a, 0));
        cyc_u.edges.push(bld.edge_id(&(U, p(a, 0), 1)).unwrap());
        cyc_u.vertices.push(p(a + 1, 0));
    }
    let mut cyc_v = DiamondPath { vertices: vec![p(0, 0)], edges: vec![] };
    for b in 0..rows {
        cyc_v.edges.push(bld.edge_id(&(U, p(0, b), 0)).unwrap());
        cyc_v.vertices.push(cu(0, b));
        cyc_v.edges.push(bld.edge_id(&(U, p(0, b), 2)).unwrap());
        cyc_v.vertices.push(p(0, b + 1));
    }
    let lattice = if critical { Some([u * cols as f64, v * rows as f64]) } else { None };
    Ok(bld.finish()?.with_cycles(vec![cyc_u, cyc_v]).with_lattice(lattice).with_origin(Some(p(0, 0))))
}

fn check_perm(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n && p.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Permutation of `0..n` from 1-based cycle notation such as `"(1 2 3)(4 5)"`
/// or `"1 2 3 4"` (a single cycle). Points not mentioned are fixed.
pub fn permutation_from_cycles(s: &str, n: usize) -> Result<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut seen = vec![false; n];
    let body = s.trim();
    let groups: Vec<&str> = if body.contains('(') {
        body.split(')').map(|g| g.trim().trim_start_matches('(')).filter(|g| !g.trim().is_empty()).collect()
    } else if body.is_empty() {
        Vec::new()
    } else {
        vec![body]
    };
    for g in groups {
        let mut cyc = Vec::new();
        for tok in g.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
            let k: usize =
                tok.parse().map_err(|_| Error::InvalidParameter(format!("bad cycle entry '{tok}' in '{s}'")))?;
            if k == 0 || k > n {
                return Err(Error::InvalidParameter(format!("cycle entry {k} outside 1..={n}")));
            }
            if std::mem::replace(&mut seen[k - 1], true) {
                return Err(Error::InvalidParameter(format!("entry {k} repeated in '{s}'")));
            }
            cyc.push(k - 1);
        }
        for i in 0..cyc.len() {
            perm[cyc[i]] = cyc[(i + 1) % cyc.len()];
        }
    }
    Ok(perm)
}

/// Largest entry of a 1-based cycle string, 0 if none parse.
pub fn cycles_max_entry(s: &str) -> usize {
    s.split(|c: char| !c.is_ascii_digit()).filter_map(|t| t.parse().ok()).max().unwrap_or(0)
}

/// Square-tiled surface: square `i` has right neighbour `h[i]` and top
/// neighbour `v[i]` (0-based permutations). Each square is cut into four
/// quads around its centre; corners and centres are primal, side midpoints dual.
/// The Euler characteristic is `#corner classes − N`.
pub fn generate_origami(h: &[usize], v: &[usize], rho_default: f64) -> Result<QuadComplex> {
    let n = h.len();
    if n == 0 || !check_perm(h, n) || !check_perm(v, n) {
        return Err(Error::InvalidParameter("h and v must be permutations of the same size".into()));
    }
    if !(rho_default.is_finite() && rho_default > 0.0) {
        return Err(Error::InvalidParameter(format!("rho {rho_default} must be positive")));
    }
    // transitivity of <h, v>
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in [h[i], v[i]] {
            if !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    if !seen.iter().all(|&s| s) {
        return Err(Error::Disconnected("permutation group does not act transitively".into()));
    }
    // corner slots 4i + {0: BL, 1: BR, 2: TR, 3: TL}
    let mut uf = UnionFind((0..4 * n).collect());
    for i in 0..n {
        uf.union(4 * i + 1, 4 * h[i]);
        uf.union(4 * i + 2, 4 * h[i] + 3);
        uf.union(4 * i + 3, 4 * v[i]);
        uf.union(4 * i + 2, 4 * v[i] + 1);
    }
    let mut bld: ComplexBuilder<(u8, usize, u8)> = ComplexBuilder::new();
    let mut corner_id = HashMap::new();
    let mut corner = vec![0; 4 * n];
    for s in 0..4 * n {
        let r = uf.find(s);
        let next = corner_id.len();
        let id = *corner_id.entry(r).or_insert(next);
        corner[s] = id;
    }
    for _ in 0..corner_id.len() {
        bld.vertex(Color::Primal, None);
    }
    let nc = corner_id.len();
    let center = |i: usize| nc + i;
    let bmid = |i: usize| nc + n + i;
    let lmid = |i: usize| nc + 2 * n + i;
    for _ in 0..n {
        bld.vertex(Color::Primal, None);
    }
    for _ in 0..2 * n {
        bld.vertex(Color::Dual, None);
    }
    const B: u8 = 0;
    const L: u8 = 1;
    const I: u8 = 2;
    let half = C64::new(0.5, 0.0);
    let ihalf = C64::new(0.0, 0.5);
    for i in 0..n {
        let (bl, br, tr, tl) = (corner[4 * i], corner[4 * i + 1], corner[4 * i + 2], corner[4 * i + 3]);
        let (b, r, t, l, c) = (bmid(i), lmid(h[i]), bmid(v[i]), lmid(i), center(i));
        bld.quad([bl, b, c, l], [(B, i, 0), (I, i, 0), (I, i, 3), (L, i, 0)], rho_default, Some([half, ihalf, -half, -ihalf]))?;
        bld.quad([br, r, c, b], [(L, h[i], 0), (I, i, 1), (I, i, 0), (B, i, 1)], rho_default, Some([ihalf, -half, -ihalf, half]))?;
        bld.quad([tr, t, c, r], [(B, v[i], 1), (I, i, 2), (I, i, 1), (L, h[i], 1)], rho_default, Some([-half, -ihalf, half, ihalf]))?;
        bld.quad([tl, l, c, t], [(L, i, 1), (I, i, 3), (I, i, 2), (B, v[i], 0)], rho_default, Some([-ihalf, half, ihalf, -half]))?;
    }
    bld.finish()
}

/// Planar region for rhombic patches, in units of the lattice step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PatchShape {
    /// Cells whose vertices all lie within the given radius of the origin.
    Disk { radius: f64 },
    /// Square lattice vertices with `m ∈ [m0, m1]`, `n ∈ [n0, n1]`.
    Rect { m0: i64, m1: i64, n0: i64, n1: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatchStyle {
    Square,
    Trihex,
}

/// Simply connected critical patch with rhombi of side `delta` and the origin marked.
pub fn generate_rhombic_patch(shape: PatchShape, delta: f64, style: PatchStyle) -> Result<QuadComplex> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} must be positive")));
    }
    match style {
        PatchStyle::Square => square_patch(shape, delta),
        PatchStyle::Trihex => trihex_patch(shape, delta),
    }
}

fn inside(shape: PatchShape, z: C64) -> bool {
    match shape {
        PatchShape::Disk { radius } => z.norm() <= radius + 1e-12,
        PatchShape::Rect { m0, m1, n0, n1 } => {
            z.re >= m0 as f64 - 1e-12 && z.re <= m1 as f64 + 1e-12 && z.im >= n0 as f64 - 1e-12 && z.im <= n1 as f64 + 1e-12
        }
    }
}

fn bounds(shape: PatchShape) -> (i64, i64, i64, i64) {
    match shape {
        PatchShape::Disk { radius } => {
            let r = radius.ceil() as i64 + 2;
            (-r, r, -r, r)
        }
        PatchShape::Rect { m0, m1, n0, n1 } => (m0 - 1, m1 + 1, n0 - 1, n1 + 1),
    }
}

/// Cells of a planar patch given by their four corner lattice keys.
type Cell<K> = ([K; 4], [Color; 4]);

fn assemble<K: Copy + Ord + Hash + std::fmt::Debug>(
    mut cells: Vec<Cell<K>>,
    pos: impl Fn(K) -> C64,
    origin: K,
) -> Result<QuadComplex> {
    // drop cells until no vertex is pinched between two fans
    loop {
        let mut bld: ComplexBuilder<(K, K)> = ComplexBuilder::new();
        let mut ids: HashMap<K, usize> = HashMap::new();
        let mut keys: Vec<(K, Color)> = cells.iter().flat_map(|c| (0..4).map(|i| (c.0[i], c.1[i]))).collect();
        keys.sort_by(|a, b| a.0.cmp(&b.0));
        keys.dedup_by(|a, b| a.0 == b.0);
        for &(k, c) in &keys {
            ids.insert(k, bld.vertex(c, Some(pos(k))));
        }
        for (corners, _) in &cells {
            let v = corners.map(|k| ids[&k]);
            let key = |a: K, b: K| if a < b { (a, b) } else { (b, a) };
            bld.quad(
                v,
                [0, 1, 2, 3].map(|i| key(corners[i], corners[(i + 1) % 4])),
                1.0,
                None,
            )?;
        }
        let mut cx = bld.finish()?;
        let bad: Vec<usize> = (0..cx.n_vertices()).filter(|&v| cx.fan(v).len() != cx.occurrences(v).len()).collect();
        if bad.is_empty() {
            if cx.n_faces() == 0 {
                return Err(Error::InvalidParameter("region contains no quad".into()));
            }
            let o = *ids.get(&origin).ok_or_else(|| Error::InvalidParameter("origin not in patch".into()))?;
            let rho: Vec<f64> = (0..cx.n_faces())
                .map(|q| {
                    let (d1, d2) = cx.quad_diagonals(q).unwrap();
                    d2.norm() / d1.norm()
                })
                .collect();
            cx.conformal_mut().rho = rho;
            return Ok(cx.with_origin(Some(o)));
        }
        // keep the largest fan at the first pinched vertex
        let v = bad[0];
        let fan: Vec<usize> = cx.fan(v).iter().map(|&(q, _)| q).collect();
        let drop: Vec<usize> = cx.occurrences(v).iter().map(|&(q, _)| q).filter(|q| !fan.contains(q)).collect();
        let mut i = 0;
        cells.retain(|_| {
            let keep = !drop.contains(&i);
            i += 1;
            keep
        });
    }
}

fn square_patch(shape: PatchShape, delta: f64) -> Result<QuadComplex> {
    let (m0, m1, n0, n1) = bounds(shape);
    let col = |m: i64, n: i64| if (m + n).rem_euclid(2) == 0 { Color::Primal } else { Color::Dual };
    let mut cells = Vec::new();
    for m in m0..m1 {
        for n in n0..n1 {
            let corners = [(m, n), (m + 1, n), (m + 1, n + 1), (m, n + 1)];
            if !corners.iter().all(|&(a, b)| inside(shape, C64::new(a as f64, b as f64))) {
                continue;
            }
            let quad = if (m + n).rem_euclid(2) == 0 {
                corners
            } else {
                [corners[1], corners[2], corners[3], corners[0]]
            };
            cells.push((quad, quad.map(|(a, b)| col(a, b))));
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidParameter("region contains no quad".into()));
    }
    assemble(cells, |(a, b)| C64::new(a as f64, b as f64) * delta, (0, 0))
}

/// Keys: `(m, n, 0)` for the triangular-lattice point `m + n ω`, `(m, n, 1)` and
/// `(m, n, 2)` for the centres of the up and down triangles at `(m, n)`.
fn trihex_patch(shape: PatchShape, delta: f64) -> Result<QuadComplex> {
    let (m0, m1, n0, n1) = bounds(shape);
    let r = (m1 - m0).max(n1 - n0) * 2;
    let w = C64::from_polar(1.0, PI / 3.0);
    // primal step is √3 times the rhombus side
    let step = 3f64.sqrt();
    let pt = |m: i64, n: i64| (C64::new(m as f64, 0.0) + w * n as f64) * step;
    let pos = |(m, n, t): (i64, i64, u8)| match t {
        0 => pt(m, n),
        1 => (pt(m, n) + pt(m + 1, n) + pt(m, n + 1)) / 3.0,
        _ => (pt(m + 1, n) + pt(m + 1, n + 1) + pt(m, n + 1)) / 3.0,
    };
    let region = |z: C64| inside(shape, z / step);
    let tri_ok = |m: i64, n: i64, t: u8| {
        let c = if t == 1 { [pt(m, n), pt(m + 1, n), pt(m, n + 1)] } else { [pt(m + 1, n), pt(m + 1, n + 1), pt(m, n + 1)] };
        c.iter().all(|&z| region(z))
    };
    let mut cells = Vec::new();
    let cp = [Color::Primal, Color::Dual, Color::Primal, Color::Dual];
    for m in -r..=r {
        for n in -r..=r {
            // horizontal, "/" and "\" edges, as on the torus
            let h = [(m, n, 0), (m, n - 1, 2), (m + 1, n, 0), (m, n, 1)];
            let s = [(m, n, 0), (m, n, 1), (m, n + 1, 0), (m - 1, n, 2)];
            let b = [(m + 1, n, 0), (m, n, 2), (m, n + 1, 0), (m, n, 1)];
            for quad in [h, s, b] {
                let ok = quad.iter().all(|&(a, c, t)| if t == 0 { region(pt(a, c)) } else { tri_ok(a, c, t) });
                if ok {
                    cells.push((quad, cp));
                }
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::InvalidParameter("region contains no quad".into()));
    }
    assemble(cells, |k| pos(k) * delta, (0, 0, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellular::ViolationKind;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn cycle_notation() {
        assert_eq!(permutation_from_cycles("1 2 3 4", 4).unwrap(), vec![1, 2, 3, 0]);
        assert_eq!(permutation_from_cycles("(1 3)", 4).unwrap(), vec![2, 1, 0, 3]);
        assert_eq!(permutation_from_cycles("(1 2)(3 4)", 4).unwrap(), vec![1, 0, 3, 2]);
        assert_eq!(permutation_from_cycles("", 2).unwrap(), vec![0, 1]);
        assert!(permutation_from_cycles("(1 1)", 2).is_err());
        assert!(permutation_from_cycles("1 5", 4).is_err());
        assert_eq!(cycles_max_entry("(1 3)(2 7)"), 7);
        let h = permutation_from_cycles("1 2 3 4", 4).unwrap();
        let v = permutation_from_cycles("1 3", 4).unwrap();
        let cx = generate_origami(&h, &v, 1.0).unwrap();
        assert_eq!(cx.genus(), Some(2));
    }

    #[test]
    fn square_torus_weights() {
        let cx = generate_square_torus(1, 2, FRAC_PI_3).unwrap();
        let s3 = 3f64.sqrt();
        for q in 0..cx.n_faces() {
            let (d1, d2) = cx.quad_diagonals(q).unwrap();
            let r = cx.rho(q);
            assert!((r - d2.norm() / d1.norm()).abs() < 1e-12);
            if d1.im.abs() < 1e-12 {
                assert!((r - s3).abs() < 1e-12);
            } else {
                assert!((r - 1.0 / s3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn square_torus_rejects_degenerate_angle() {
        assert!(generate_square_torus(1, 1, 0.0).is_err());
        assert!(generate_square_torus(1, 1, FRAC_PI_2).is_err());
        assert!(generate_square_torus(0, 1, 0.5).is_err());
    }

    #[test]
    fn smallest_square_torus_is_valid() {
        let cx = generate_square_torus(1, 1, FRAC_PI_4).unwrap();
        assert_eq!(cx.n_faces(), 4);
        assert!(cx.validate().is_empty(), "{:?}", cx.validate());
        for c in cx.attached_cycles() {
            assert!(c.is_closed());
            let ch = c.chain(&cx);
            assert!(cx.boundary(&ch).unwrap().is_zero());
        }
    }

    #[test]
    fn trihex_equilateral() {
        let r = 1.0 / 3f64.sqrt();
        let cx = generate_trihex_torus(2, 2, [r; 3]).unwrap();
        assert!(trihex_criticality_residual([r; 3]) < 1e-12);
        assert!(cx.validate().is_empty(), "{:?}", cx.validate());
        assert_eq!(cx.euler_characteristic(), 0);
        assert!(cx.lattice().is_some());
        for q in 0..cx.n_faces() {
            let s = cx.quad_sides_dz(q).unwrap();
            for d in s {
                assert!((d.norm() - r).abs() < 1e-12);
            }
            let (d1, d2) = cx.quad_diagonals(q).unwrap();
            assert!((d2.norm() / d1.norm() - cx.rho(q)).abs() < 1e-12);
            // dual diagonal is the primal one turned by a quarter turn
            assert!((d2 / d1 * (1.0 / cx.rho(q)) - C64::i()).norm() < 1e-12);
        }
    }

    #[test]
    fn trihex_noncritical_has_no_embedding() {
        let cx = generate_trihex_torus(2, 3, [1.0; 3]).unwrap();
        assert!((trihex_criticality_residual([1.0; 3]) - 2.0).abs() < 1e-15);
        assert!(cx.z().is_none());
        assert!(cx.validate().is_empty());
        assert!(generate_trihex_torus(1, 1, [1.0, -1.0, 1.0]).is_err());
    }

    #[test]
    fn trihex_single_cell() {
        let r = 1.0 / 3f64.sqrt();
        let cx = generate_trihex_torus(1, 1, [r; 3]).unwrap();
        assert!(cx.validate().is_empty(), "{:?}", cx.validate());
        assert_eq!(cx.genus(), Some(1));
    }

    #[test]
    fn origami_examples() {
        let t = generate_origami(&[0, 1], &[1, 0], 1.0).unwrap();
        assert_eq!(t.genus(), Some(1));
        assert!(t.validate().is_empty(), "{:?}", t.validate());
        let g2 = generate_origami(&[1, 2, 3, 0], &[2, 1, 0, 3], 1.0).unwrap();
        assert_eq!(g2.euler_characteristic(), -2);
        assert_eq!(g2.genus(), Some(2));
        assert!(g2.validate().is_empty(), "{:?}", g2.validate());
        let one = generate_origami(&[0], &[0], 1.0).unwrap();
        assert_eq!(one.n_faces(), 4);
        assert_eq!(one.genus(), Some(1));
        assert!(one.validate().is_empty(), "{:?}", one.validate());
    }

    #[test]
    fn origami_rejects_intransitive() {
        let e = generate_origami(&[0, 1], &[0, 1], 1.0).unwrap_err();
        assert!(matches!(e, Error::Disconnected(_)));
    }

    #[test]
    fn square_patch_rhombi() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 4.0 }, 1.0, PatchStyle::Square).unwrap();
        assert!(!cx.is_closed());
        let o = cx.origin().unwrap();
        assert_eq!(cx.z().unwrap()[o], C64::new(0.0, 0.0));
        for q in 0..cx.n_faces() {
            for d in cx.quad_sides_dz(q).unwrap() {
                assert!((d.norm() - 1.0).abs() < 1e-14);
            }
        }
        let rep = cx.validate();
        assert!(rep.iter().all(|v| v.kind != ViolationKind::Bipartite && v.kind != ViolationKind::Duality), "{rep:?}");
        assert_eq!(cx.euler_characteristic(), 1);
    }

    #[test]
    fn trihex_patch_angles() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 3.0 }, 1.0, PatchStyle::Trihex).unwrap();
        assert!(cx.n_faces() > 10);
        assert_eq!(cx.euler_characteristic(), 1);
        for q in 0..cx.n_faces() {
            let s = cx.quad_sides_dz(q).unwrap();
            for k in 0..4 {
                assert!((s[k].norm() - 1.0).abs() < 1e-12);
                let ang = (-s[(k + 3) % 4] / s[k]).arg().abs();
                let ok = (ang - FRAC_PI_3).abs() < 1e-9 || (ang - 2.0 * FRAC_PI_3).abs() < 1e-9;
                assert!(ok, "angle {ang}");
            }
        }
    }

    #[test]
    fn empty_region_rejected() {
        assert!(generate_rhombic_patch(PatchShape::Disk { radius: 0.5 }, 1.0, PatchStyle::Square).is_err());
    }
}
