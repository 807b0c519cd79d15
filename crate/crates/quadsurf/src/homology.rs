//! Cycles on ⋄ and Λ, intersection numbers and harmonic differentials.
//!
//! A closed ⋄ path `C` has two left shifts: the Γ path through its primal
//! vertices and the Γ* path through its dual vertices, both running just to
//! the left of `C`. Intersection numbers of Λ cycles pair Γ with Γ*:
//! `a·b = Σ_q (a(e_q) b(e*_q) − a(e*_q) b(e_q))`, and on ⋄ `[a]·[b] = a_Γ · b_Γ*`.

use crate::calculus::{d0, divergence, doubled_wedge, lambda_laplacian, lift_with, wedge_diamond};
use crate::cellular::{Chain, Cochain, ComplexTag, DiamondPath, QuadComplex, SIDE_SIGN};
use crate::error::{Error, Result};
use crate::solver::{GraphLaplacian, DEFAULT_TOL};
use crate::C64;
use std::collections::VecDeque;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Spanning tree of ⋄, spanning cotree of the faces, and the `2g` edges in neither.
#[derive(Clone, Debug)]
pub struct TreeCotree {
    pub root: usize,
    /// `(parent vertex, edge)` for every non-root vertex.
    pub parent: Vec<Option<(usize, usize)>>,
    pub depth: Vec<usize>,
    pub in_tree: Vec<bool>,
    /// Edge to the parent face in the cotree.
    pub face_parent: Vec<Option<usize>>,
    pub face_order: Vec<usize>,
    pub leftover: Vec<usize>,
    /// Fundamental cycle of each leftover edge, traversing it in stored orientation.
    pub cycles: Vec<DiamondPath>,
}

impl TreeCotree {
    pub fn new(cx: &QuadComplex) -> Result<TreeCotree> {
        if !cx.is_closed() {
            return Err(Error::NotClosed("tree-cotree needs a closed surface".into()));
        }
        let n = cx.n_vertices();
        if n == 0 || !cx.is_connected() {
            return Err(Error::Disconnected("⋄ is not connected".into()));
        }
        let root = 0;
        let mut parent = vec![None; n];
        let mut depth = vec![usize::MAX; n];
        let mut in_tree = vec![false; cx.n_edges()];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for (w, e) in cx.diamond_neighbors(v) {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    parent[w] = Some((v, e));
                    in_tree[e] = true;
                    queue.push_back(w);
                }
            }
        }
        let nf = cx.n_faces();
        let mut face_parent = vec![None; nf];
        let mut seen = vec![false; nf];
        let mut in_cotree = vec![false; cx.n_edges()];
        let mut face_order = Vec::with_capacity(nf);
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(f) = queue.pop_front() {
            face_order.push(f);
            for e in cx.sides(f) {
                if in_tree[e] || in_cotree[e] {
                    continue;
                }
                for &(g, _) in cx.edge_quads(e) {
                    if !seen[g] {
                        seen[g] = true;
                        face_parent[g] = Some(e);
                        in_cotree[e] = true;
                        queue.push_back(g);
                    }
                }
            }
        }
        let leftover: Vec<usize> = (0..cx.n_edges()).filter(|&e| !in_tree[e] && !in_cotree[e]).collect();
        let mut tc = TreeCotree { root, parent, depth, in_tree, face_parent, face_order, leftover, cycles: Vec::new() };
        tc.cycles = tc.leftover.iter().map(|&e| tc.fundamental_cycle(cx, e)).collect();
        Ok(tc)
    }

    fn path_to_root(&self, mut v: usize) -> (Vec<usize>, Vec<usize>) {
        let mut verts = vec![v];
        let mut edges = Vec::new();
        while let Some((p, e)) = self.parent[v] {
            edges.push(e);
            verts.push(p);
            v = p;
        }
        (verts, edges)
    }

    /// Tree path `s → t` through their lowest common ancestor, then `e`.
    fn fundamental_cycle(&self, cx: &QuadComplex, e: usize) -> DiamondPath {
        let [s, t] = cx.edge(e);
        let (mut vt, mut et) = self.path_to_root(t);
        let (mut vs, mut es) = self.path_to_root(s);
        // strip the shared part above the common ancestor
        while vt.len() >= 2 && vs.len() >= 2 && vt[vt.len() - 2] == vs[vs.len() - 2] {
            vt.pop();
            vs.pop();
            et.pop();
            es.pop();
        }
        // t → lca, then lca → s, then s → t along e
        let mut vertices = vt;
        let mut edges = et;
        vs.reverse();
        es.reverse();
        vertices.extend_from_slice(&vs[1..]);
        edges.extend(es);
        edges.push(e);
        vertices.push(t);
        // rotate so the cycle starts with e traversed s → t
        let k = edges.len() - 1;
        let mut ve: Vec<usize> = vec![s, t];
        let mut ee = vec![e];
        ve.extend_from_slice(&vertices[1..k + 1]);
        ee.extend_from_slice(&edges[..k]);
        DiamondPath { vertices: ve, edges: ee }
    }

    /// Closed ⋄ 1-form dual to leftover edge `j`: zero on the tree, `δ` on
    /// leftover edges, completed across the cotree from the leaves up.
    pub fn cohomology_form(&self, cx: &QuadComplex, j: usize) -> Vec<C64> {
        let mut w = vec![ZERO; cx.n_edges()];
        w[self.leftover[j]] = C64::new(1.0, 0.0);
        for &f in self.face_order.iter().rev() {
            let Some(pe) = self.face_parent[f] else { continue };
            let sides = cx.sides(f);
            let mut s = ZERO;
            let mut coef = 0.0;
            for k in 0..4 {
                if sides[k] == pe {
                    coef += SIDE_SIGN[k] as f64;
                } else {
                    s += w[sides[k]] * SIDE_SIGN[k] as f64;
                }
            }
            w[pe] = -s / coef;
        }
        w
    }
}

/// The two left shifts `(C_Γ, C_Γ*)` of a closed ⋄ path, as Λ chains.
pub fn left_shift(cx: &QuadComplex, path: &DiamondPath) -> Result<(Chain, Chain)> {
    if !path.is_closed() || path.edges.is_empty() {
        return Err(Error::InvalidParameter("left shift needs a closed path".into()));
    }
    let nf = cx.n_faces();
    let mut cg = Chain::zero(cx, ComplexTag::Lambda, 1);
    let mut cgs = Chain::zero(cx, ComplexTag::Lambda, 1);
    let m = path.edges.len();
    for i in 0..m {
        let v = path.vertices[i];
        let e_in = path.edges[(i + m - 1) % m];
        let e_out = path.edges[i];
        if e_in == e_out {
            return Err(Error::InvalidParameter(format!("path backtracks at vertex {v}")));
        }
        let fan = cx.fan(v);
        let len = fan.len();
        let start = fan
            .iter()
            .position(|&(q, p)| cx.sides(q)[(p + 3) % 4] == e_in)
            .ok_or_else(|| Error::InvalidParameter(format!("edge {e_in} does not end at vertex {v}")))?;
        let mut idx = start;
        for step in 0..=len {
            if step == len {
                return Err(Error::InvalidParameter(format!("edge {e_out} does not leave vertex {v}")));
            }
            let (q, p) = fan[idx];
            let sign = if p == 1 || p == 2 { 1 } else { -1 };
            if p % 2 == 1 {
                cg.coeffs[q] += sign;
            } else {
                cgs.coeffs[nf + q] += sign;
            }
            if cx.sides(q)[p] == e_out {
                break;
            }
            idx = (idx + len - 1) % len;
        }
    }
    Ok((cg, cgs))
}

/// Intersection number of two Λ 1-chains.
pub fn lambda_intersection(cx: &QuadComplex, a: &Chain, b: &Chain) -> i64 {
    let f = cx.n_faces();
    (0..f).map(|q| a.coeffs[q] * b.coeffs[f + q] - a.coeffs[f + q] * b.coeffs[q]).sum()
}

/// Closed Λ 1-form whose period on any Λ cycle `a` is `a · c`.
pub fn crossing_cocycle(cx: &QuadComplex, c: &Chain) -> Vec<C64> {
    let f = cx.n_faces();
    let mut g = vec![ZERO; 2 * f];
    for q in 0..f {
        g[f + q] -= C64::new(c.coeffs[q] as f64, 0.0);
        g[q] += C64::new(c.coeffs[f + q] as f64, 0.0);
    }
    g
}

/// The harmonic form `η_c` with `∮_a η_c = a · c` for every Λ cycle `a`.
pub fn eta_form(cx: &QuadComplex, lap: &GraphLaplacian, c: &Chain) -> Result<Vec<C64>> {
    let g = crossing_cocycle(cx, c);
    let f = lap.solve_complex(&divergence(cx, &g), DEFAULT_TOL)?;
    let df = d0(cx, &f);
    Ok(g.iter().zip(&df).map(|(a, b)| a - b).collect())
}

/// Period `∮_c α` of a cochain on a chain.
pub fn period(c: &Chain, a: &[C64]) -> C64 {
    c.coeffs.iter().zip(a).filter(|(&k, _)| k != 0).map(|(&k, v)| v * k as f64).sum()
}

/// Integer symplectic change of basis for an antisymmetric unimodular form.
///
/// Returns `T` (rows are the new cycles in terms of the old) with
/// `T J Tᵀ = [[0, I], [−I, 0]]`. An already canonical form gives `T = I`.
pub fn symplectic_normalize(j: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let n = j.len();
    if n % 2 != 0 || j.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("intersection matrix must be square of even size".into()));
    }
    for a in 0..n {
        for b in 0..n {
            if j[a][b] != -j[b][a] {
                return Err(Error::InvalidParameter("intersection matrix is not antisymmetric".into()));
            }
        }
    }
    let pair = |u: &[i64], w: &[i64]| -> i64 {
        let mut s = 0;
        for a in 0..n {
            if u[a] == 0 {
                continue;
            }
            for b in 0..n {
                s += u[a] * j[a][b] * w[b];
            }
        }
        s
    };
    let mut pool: Vec<Vec<i64>> = (0..n).map(|i| (0..n).map(|k| i64::from(i == k)).collect()).collect();
    let mut avec = Vec::new();
    let mut bvec = Vec::new();
    while !pool.is_empty() {
        let v = pool.remove(0);
        // Euclid on the pairings until exactly one partner remains
        loop {
            let nz: Vec<usize> = (0..pool.len()).filter(|&i| pair(&v, &pool[i]) != 0).collect();
            if nz.is_empty() {
                return Err(Error::InvalidParameter("intersection form is degenerate".into()));
            }
            if nz.len() == 1 {
                break;
            }
            let piv = *nz.iter().min_by_key(|&&i| pair(&v, &pool[i]).abs()).unwrap();
            let pp = pair(&v, &pool[piv]);
            for &i in &nz {
                if i != piv {
                    let c = pair(&v, &pool[i]) / pp;
                    let pv = pool[piv].clone();
                    for (x, y) in pool[i].iter_mut().zip(&pv) {
                        *x -= c * y;
                    }
                }
            }
        }
        let wi = (0..pool.len()).find(|&i| pair(&v, &pool[i]) != 0).unwrap();
        let mut w = pool.remove(wi);
        let p = pair(&v, &w);
        if p.abs() != 1 {
            return Err(Error::InvalidParameter(format!("intersection form is not unimodular (pairing {p})")));
        }
        if p == -1 {
            w.iter_mut().for_each(|x| *x = -*x);
        }
        for u in pool.iter_mut() {
            let (uw, uv) = (pair(u, &w), pair(u, &v));
            for a in 0..n {
                u[a] += -uw * v[a] + uv * w[a];
            }
        }
        avec.push(v);
        bvec.push(w);
    }
    avec.extend(bvec);
    Ok(avec)
}

fn combine(chains: &[Chain], coeffs: &[i64]) -> Chain {
    let mut out = chains[0].scale(0);
    for (c, &k) in chains.iter().zip(coeffs) {
        if k != 0 {
            out = out.add(&c.scale(k));
        }
    }
    out
}

/// Canonical homology basis `ℵ_1..ℵ_2g` of ⋄ with its left shifts.
#[derive(Clone, Debug)]
pub struct CycleBasis {
    pub genus: usize,
    /// The closed paths the basis was built from.
    pub paths: Vec<DiamondPath>,
    /// Row `k` expresses `ℵ_k` in terms of `paths`.
    pub transform: Vec<Vec<i64>>,
    pub diamond: Vec<Chain>,
    pub gamma: Vec<Chain>,
    pub gamma_star: Vec<Chain>,
    /// Intersection matrix of `paths` before normalization.
    pub raw_intersection: Vec<Vec<i64>>,
}

impl CycleBasis {
    /// Basis from given closed paths, normalized to canonical intersections.
    pub fn from_paths(cx: &QuadComplex, paths: Vec<DiamondPath>) -> Result<CycleBasis> {
        let g = cx.genus().ok_or_else(|| Error::NotClosed("homology basis needs a closed surface".into()))?;
        if paths.len() != 2 * g {
            return Err(Error::Mismatch { expected: 2 * g, got: paths.len() });
        }
        if g == 0 {
            return Ok(CycleBasis {
                genus: 0,
                paths,
                transform: vec![],
                diamond: vec![],
                gamma: vec![],
                gamma_star: vec![],
                raw_intersection: vec![],
            });
        }
        let shifts: Vec<(Chain, Chain)> = paths.iter().map(|p| left_shift(cx, p)).collect::<Result<_>>()?;
        let raw: Vec<Vec<i64>> = shifts
            .iter()
            .map(|a| shifts.iter().map(|b| lambda_intersection(cx, &a.0, &b.1)).collect())
            .collect();
        let t = symplectic_normalize(&raw)?;
        let dchains: Vec<Chain> = paths.iter().map(|p| p.chain(cx)).collect();
        let gs: Vec<Chain> = shifts.iter().map(|s| s.0.clone()).collect();
        let gss: Vec<Chain> = shifts.iter().map(|s| s.1.clone()).collect();
        Ok(CycleBasis {
            genus: g,
            diamond: t.iter().map(|r| combine(&dchains, r)).collect(),
            gamma: t.iter().map(|r| combine(&gs, r)).collect(),
            gamma_star: t.iter().map(|r| combine(&gss, r)).collect(),
            transform: t,
            paths,
            raw_intersection: raw,
        })
    }

    /// Attached cycles when the complex carries a full set, tree-cotree cycles otherwise.
    pub fn canonical(cx: &QuadComplex) -> Result<CycleBasis> {
        let g = cx.genus().ok_or_else(|| Error::NotClosed("homology basis needs a closed surface".into()))?;
        let att = cx.attached_cycles();
        if att.len() == 2 * g && att.iter().all(|p| p.is_closed()) {
            return CycleBasis::from_paths(cx, att.to_vec());
        }
        let tc = TreeCotree::new(cx)?;
        CycleBasis::from_paths(cx, tc.cycles)
    }

    /// ⋄ intersection matrix of the normalized basis.
    pub fn intersection_matrix(&self, cx: &QuadComplex) -> Vec<Vec<i64>> {
        self.gamma.iter().map(|a| self.gamma_star.iter().map(|b| lambda_intersection(cx, a, b)).collect()).collect()
    }

    /// The `4g` Λ cycles `ℵ^Λ` in the order Γ(ℵ_k), Γ*(ℵ_k), Γ*(ℵ_{g+k}), Γ(ℵ_{g+k}).
    pub fn lambda_cycles(&self) -> Vec<Chain> {
        let g = self.genus;
        let mut out = Vec::with_capacity(4 * g);
        out.extend(self.gamma[..g].iter().cloned());
        out.extend(self.gamma_star[..g].iter().cloned());
        out.extend(self.gamma_star[g..].iter().cloned());
        out.extend(self.gamma[g..].iter().cloned());
        out
    }
}

/// Canonical basis of harmonic differentials on Λ and on ⋄.
#[derive(Clone, Debug)]
pub struct HarmonicBasis {
    pub genus: usize,
    pub cycles: CycleBasis,
    pub lambda_cycles: Vec<Chain>,
    /// `α_k`, `4g` Λ 1-forms with `∮_{ℵ^Λ_j} α_k = δ_jk`.
    pub alpha: Vec<Vec<C64>>,
    /// `α⋄_k`, `2g` closed ⋄ 1-forms with `∮_{ℵ_j} α⋄_k = δ_jk`.
    pub alpha_diamond: Vec<Vec<C64>>,
}

impl HarmonicBasis {
    pub fn new(cx: &QuadComplex, cycles: CycleBasis) -> Result<HarmonicBasis> {
        let g = cycles.genus;
        let lap = lambda_laplacian(cx);
        let lc = cycles.lambda_cycles();
        let etas: Vec<Vec<C64>> = lc.iter().map(|c| eta_form(cx, &lap, c)).collect::<Result<_>>()?;
        let mut alpha = vec![Vec::new(); 4 * g];
        for k in 0..2 * g {
            alpha[k] = etas[k + 2 * g].clone();
            alpha[k + 2 * g] = etas[k].iter().map(|v| -v).collect();
        }
        let mut alpha_diamond = Vec::with_capacity(2 * g);
        if g > 0 {
            let tc = TreeCotree::new(cx)?;
            for k in 0..2 * g {
                let (a, b) = if k < g { (k, k + g) } else { (k + g, k + 2 * g) };
                let mu: Vec<C64> = alpha[a].iter().zip(&alpha[b]).map(|(x, y)| x + y).collect();
                alpha_diamond.push(lift_with(cx, &tc, &mu, 0)?);
            }
        }
        Ok(HarmonicBasis { genus: g, cycles, lambda_cycles: lc, alpha, alpha_diamond })
    }

    pub fn canonical(cx: &QuadComplex) -> Result<HarmonicBasis> {
        HarmonicBasis::new(cx, CycleBasis::canonical(cx)?)
    }

    /// `∮_{ℵ^Λ_j} α_k`, row `j`, column `k`.
    pub fn lambda_periods(&self) -> Vec<Vec<C64>> {
        self.lambda_cycles.iter().map(|c| self.alpha.iter().map(|a| period(c, a)).collect()).collect()
    }

    /// `∮_{ℵ_j} α⋄_k`, row `j`, column `k`.
    pub fn diamond_periods(&self) -> Vec<Vec<C64>> {
        self.cycles.diamond.iter().map(|c| self.alpha_diamond.iter().map(|a| period(c, a)).collect()).collect()
    }

    /// Largest deviation of both period tables from the identity.
    pub fn duality_residual(&self) -> f64 {
        let dev = |t: Vec<Vec<C64>>| {
            let mut m: f64 = 0.0;
            for (j, row) in t.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    m = m.max((v - if j == k { 1.0 } else { 0.0 }).norm());
                }
            }
            m
        };
        dev(self.lambda_periods()).max(dev(self.diamond_periods()))
    }
}

/// `∬ η_a ∧ η_b` on Λ (both graphs, no ½); equals `a · b`.
pub fn intersection_by_wedge(cx: &QuadComplex, lap: &GraphLaplacian, a: &Chain, b: &Chain) -> Result<f64> {
    let ea = eta_form(cx, lap, a)?;
    let eb = eta_form(cx, lap, b)?;
    Ok(doubled_wedge(cx, &ea, &eb).re)
}

/// `∬ η⋄_a ∧ η⋄_b` for two ⋄ cycles given by their left shifts.
pub fn diamond_intersection_by_wedge(
    cx: &QuadComplex,
    tc: &TreeCotree,
    lap: &GraphLaplacian,
    a: (&Chain, &Chain),
    b: (&Chain, &Chain),
) -> Result<f64> {
    let lift = |(g, gs): (&Chain, &Chain)| -> Result<Cochain> {
        let mu = eta_form(cx, lap, &g.add(gs))?;
        Ok(Cochain::new(1, ComplexTag::Diamond, lift_with(cx, tc, &mu, 0)?))
    };
    let w = wedge_diamond(cx, &lift(a)?, &lift(b)?)?;
    Ok(w.values.iter().sum::<C64>().re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellular::{generate_origami, generate_square_torus, generate_trihex_torus};

    fn canonical(n: usize) -> Vec<Vec<i64>> {
        let g = n / 2;
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        if b == a + g && a < g {
                            1
                        } else if a == b + g && b < g {
                            -1
                        } else {
                            0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn tree_cotree_counts() {
        for cx in [generate_square_torus(2, 3, 0.5).unwrap(), generate_origami(&[1, 2, 0], &[0, 1, 2], 1.0).unwrap()] {
            let tc = TreeCotree::new(&cx).unwrap();
            assert_eq!(tc.leftover.len(), 2 * cx.genus().unwrap());
            for c in &tc.cycles {
                assert!(c.is_closed());
                assert!(cx.boundary(&c.chain(&cx)).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn cohomology_forms_are_closed_and_dual() {
        let cx = generate_origami(&[1, 2, 0], &[0, 1, 2], 1.0).unwrap();
        let tc = TreeCotree::new(&cx).unwrap();
        for j in 0..tc.leftover.len() {
            let w = Cochain::new(1, ComplexTag::Diamond, tc.cohomology_form(&cx, j));
            assert!(cx.coboundary(&w).unwrap().max_abs() < 1e-12);
            for (i, c) in tc.cycles.iter().enumerate() {
                let p = period(&c.chain(&cx), &w.values);
                assert!((p - if i == j { 1.0 } else { 0.0 }).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn left_shifts_are_closed_and_homologous() {
        let cx = generate_square_torus(3, 2, 0.8).unwrap();
        let tc = TreeCotree::new(&cx).unwrap();
        for c in &tc.cycles {
            let (g, gs) = left_shift(&cx, c).unwrap();
            assert!(cx.boundary(&g).unwrap().is_zero());
            assert!(cx.boundary(&gs).unwrap().is_zero());
            assert!(gs.coeffs[..cx.n_faces()].iter().all(|&k| k == 0));
            assert!(g.coeffs[cx.n_faces()..].iter().all(|&k| k == 0));
        }
    }

    #[test]
    fn normalize_identity_on_canonical() {
        let j = canonical(4);
        let t = symplectic_normalize(&j).unwrap();
        assert_eq!(t, canonical(4).iter().enumerate().map(|(i, _)| (0..4).map(|k| i64::from(i == k)).collect::<Vec<_>>()).collect::<Vec<_>>());
    }

    #[test]
    fn normalize_scrambled_form() {
        // J' = M J Mᵀ for a unimodular M
        let j = canonical(4);
        let m = [[1i64, 2, 0, 1], [0, 1, 0, 0], [3, 7, 1, 2], [0, 0, 0, 1]];
        let jp: Vec<Vec<i64>> = (0..4)
            .map(|a| (0..4).map(|b| (0..4).map(|c| (0..4).map(|d| m[a][c] * j[c][d] * m[b][d]).sum::<i64>()).sum()).collect())
            .collect();
        let t = symplectic_normalize(&jp).unwrap();
        let r: Vec<Vec<i64>> = (0..4)
            .map(|a| (0..4).map(|b| (0..4).map(|c| (0..4).map(|d| t[a][c] * jp[c][d] * t[b][d]).sum::<i64>()).sum()).collect())
            .collect();
        assert_eq!(r, canonical(4));
    }

    #[test]
    fn degenerate_form_rejected() {
        let j = vec![vec![0, 2], vec![-2, 0]];
        assert!(symplectic_normalize(&j).is_err());
    }

    #[test]
    fn square_torus_attached_cycles_are_canonical() {
        let cx = generate_square_torus(2, 3, 0.7).unwrap();
        let b = CycleBasis::canonical(&cx).unwrap();
        assert_eq!(b.raw_intersection, canonical(2));
        assert_eq!(b.intersection_matrix(&cx), canonical(2));
    }

    #[test]
    fn wedge_intersections_match() {
        let cx = generate_origami(&[1, 2, 0], &[0, 1, 2], 1.3).unwrap();
        let b = CycleBasis::canonical(&cx).unwrap();
        let lap = lambda_laplacian(&cx);
        let lc = b.lambda_cycles();
        for i in 0..lc.len() {
            for j in 0..lc.len() {
                let w = intersection_by_wedge(&cx, &lap, &lc[i], &lc[j]).unwrap();
                let c = lambda_intersection(&cx, &lc[i], &lc[j]) as f64;
                assert!((w - c).abs() < 1e-9, "{i} {j}: {w} vs {c}");
            }
        }
        let tc = TreeCotree::new(&cx).unwrap();
        let jm = b.intersection_matrix(&cx);
        for i in 0..2 * b.genus {
            for j in 0..2 * b.genus {
                let w = diamond_intersection_by_wedge(
                    &cx,
                    &tc,
                    &lap,
                    (&b.gamma[i], &b.gamma_star[i]),
                    (&b.gamma[j], &b.gamma_star[j]),
                )
                .unwrap();
                assert!((w - jm[i][j] as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn harmonic_basis_duality() {
        for cx in [
            generate_square_torus(2, 2, 0.6).unwrap(),
            generate_origami(&[1, 2, 0], &[0, 2, 1], 1.0).unwrap(),
            generate_trihex_torus(2, 2, [1.0, 1.0, 1.0 / 3f64.sqrt()]).unwrap(),
        ] {
            let hb = HarmonicBasis::canonical(&cx).unwrap();
            assert!(hb.duality_residual() < 1e-8, "{}", hb.duality_residual());
            for a in &hb.alpha {
                let (dc, dv) = crate::calculus::harmonicity_residual(&cx, a);
                assert!(dc < 1e-9 && dv < 1e-9);
            }
        }
    }

    #[test]
    fn alpha_live_on_one_graph() {
        let cx = generate_origami(&[1, 0], &[0, 1], 1.0).unwrap();
        let hb = HarmonicBasis::canonical(&cx).unwrap();
        let f = cx.n_faces();
        let g = hb.genus;
        for k in 0..4 * g {
            let on_gamma = hb.alpha[k][f..].iter().all(|v| v.norm() < 1e-12);
            let on_star = hb.alpha[k][..f].iter().all(|v| v.norm() < 1e-12);
            assert!(on_gamma ^ on_star);
        }
    }
}
