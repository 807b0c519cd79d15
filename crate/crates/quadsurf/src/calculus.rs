//! Discrete exterior calculus on (Λ, ⋄, ρ).
//!
//! Conventions on Λ 1-forms: `(*α)(e) = −α(e*)/ρ(e)` and `(*α)(e*) = ρ(e) α(e)`
//! for a Γ edge `e`, so `*² = −1`. On 0- and 2-forms the star only moves the
//! value between a vertex `v` and the face `v*`.
//!
//! Two normalizations of the pairing of 1-forms on Λ appear:
//! [`scalar_product`] and [`wedge_hetero`] carry a factor ½ so that the
//! averaging map is an isometry onto ⋄ forms; [`doubled_product`] and
//! [`doubled_wedge`] sum over both graphs without it, which is the pairing
//! under which crossing forms have integer periods.

use crate::cellular::{Cochain, ComplexTag, QuadComplex};
use crate::error::{Error, Result};
use crate::homology::TreeCotree;
use crate::solver::{GraphLaplacian, DEFAULT_TOL};
use crate::C64;
use serde::{Deserialize, Serialize};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn expect(f: &Cochain, tag: ComplexTag, degree: usize, cx: &QuadComplex) -> Result<()> {
    if f.tag != tag || f.degree != degree {
        return Err(Error::Degree(format!(
            "expected degree {degree} on {tag:?}, got degree {} on {:?}",
            f.degree, f.tag
        )));
    }
    let n = cx.cell_count(tag, degree);
    if f.values.len() != n {
        return Err(Error::Mismatch { expected: n, got: f.values.len() });
    }
    Ok(())
}

fn expect_closed(cx: &QuadComplex, what: &str) -> Result<()> {
    if cx.is_closed() {
        Ok(())
    } else {
        Err(Error::NotClosed(what.into()))
    }
}

/// Λ 1-form star on raw values.
pub fn star1(cx: &QuadComplex, a: &[C64]) -> Vec<C64> {
    let f = cx.n_faces();
    let mut out = vec![ZERO; 2 * f];
    for q in 0..f {
        let r = cx.rho(q);
        out[q] = -a[f + q] / r;
        out[f + q] = a[q] * r;
    }
    out
}

/// Hodge star on Λ cochains of any degree.
pub fn hodge_star(cx: &QuadComplex, f: &Cochain) -> Result<Cochain> {
    expect_closed(cx, "hodge star needs complete dual cells")?;
    if f.tag != ComplexTag::Lambda || f.degree > 2 {
        return Err(Error::Degree("hodge star acts on Λ cochains".into()));
    }
    expect(f, ComplexTag::Lambda, f.degree, cx)?;
    Ok(match f.degree {
        1 => Cochain::new(1, ComplexTag::Lambda, star1(cx, &f.values)),
        k => Cochain::new(2 - k, ComplexTag::Lambda, f.values.clone()),
    })
}

/// Weighted graph Laplacian of Λ: Γ and Γ* edges with their own ρ.
pub fn lambda_laplacian(cx: &QuadComplex) -> GraphLaplacian {
    GraphLaplacian::from_edges(
        cx.n_vertices(),
        (0..cx.n_lambda_edges()).map(|k| {
            let (a, b) = cx.lambda_edge(k);
            (a, b, cx.rho_lambda(k))
        }),
    )
}

/// `d_Λ` on functions, raw values.
pub fn d0(cx: &QuadComplex, f: &[C64]) -> Vec<C64> {
    (0..cx.n_lambda_edges())
        .map(|k| {
            let (a, b) = cx.lambda_edge(k);
            f[b] - f[a]
        })
        .collect()
}

/// `d_Λ` on 1-forms, raw values.
pub fn d1(cx: &QuadComplex, a: &[C64]) -> Vec<C64> {
    (0..cx.n_vertices())
        .map(|v| cx.lambda_face_boundary(v).iter().fold(ZERO, |s, &(k, sg)| s + a[k] * sg as f64))
        .collect()
}

/// `dᵀ W α`: the weighted divergence at each vertex. Zero exactly when α is co-closed.
pub fn divergence(cx: &QuadComplex, a: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; cx.n_vertices()];
    for k in 0..cx.n_lambda_edges() {
        let (s, t) = cx.lambda_edge(k);
        let w = a[k] * cx.rho_lambda(k);
        out[t] += w;
        out[s] -= w;
    }
    out
}

/// `Δ = −d*d* − *d*d`. On functions this is `Σ ρ (f(x) − f(x_k))` and is
/// evaluated directly, which also works on complexes with boundary (boundary
/// vertices then see only their truncated star).
pub fn laplacian(cx: &QuadComplex, f: &Cochain) -> Result<Cochain> {
    if f.tag != ComplexTag::Lambda {
        return Err(Error::Degree("laplacian acts on Λ cochains".into()));
    }
    expect(f, ComplexTag::Lambda, f.degree, cx)?;
    match f.degree {
        0 => {
            let mut out = vec![ZERO; cx.n_vertices()];
            for k in 0..cx.n_lambda_edges() {
                let (a, b) = cx.lambda_edge(k);
                let w = cx.rho_lambda(k) * (f.values[a] - f.values[b]);
                out[a] += w;
                out[b] -= w;
            }
            Ok(Cochain::new(0, ComplexTag::Lambda, out))
        }
        1 => {
            expect_closed(cx, "1-form laplacian")?;
            let a = &f.values;
            // −d*d*α
            let t1 = d0(cx, &d1(cx, &star1(cx, a)));
            let t1: Vec<C64> = t1.iter().map(|v| -v).collect();
            // −*d*dα
            let t2 = star1(cx, &d0(cx, &d1(cx, a)));
            Ok(Cochain::new(1, ComplexTag::Lambda, t1.iter().zip(&t2).map(|(x, y)| x - y).collect()))
        }
        2 => {
            expect_closed(cx, "2-form laplacian")?;
            let v = d1(cx, &star1(cx, &d0(cx, &f.values)));
            Ok(Cochain::new(2, ComplexTag::Lambda, v.iter().map(|x| -x).collect()))
        }
        _ => Err(Error::Degree("degree above 2".into())),
    }
}

/// `(α, β) = ½ Σ_e ρ(e) α(e) conj β(e)`.
pub fn scalar_product(cx: &QuadComplex, a: &Cochain, b: &Cochain) -> Result<C64> {
    expect(a, ComplexTag::Lambda, 1, cx)?;
    expect(b, ComplexTag::Lambda, 1, cx)?;
    Ok(0.5 * raw_product(cx, &a.values, &b.values))
}

/// `Σ_e ρ(e) α(e) conj β(e)`, twice [`scalar_product`].
pub fn doubled_product(cx: &QuadComplex, a: &Cochain, b: &Cochain) -> Result<C64> {
    expect(a, ComplexTag::Lambda, 1, cx)?;
    expect(b, ComplexTag::Lambda, 1, cx)?;
    Ok(raw_product(cx, &a.values, &b.values))
}

pub(crate) fn raw_product(cx: &QuadComplex, a: &[C64], b: &[C64]) -> C64 {
    (0..cx.n_lambda_edges()).map(|k| cx.rho_lambda(k) * a[k] * b[k].conj()).sum()
}

/// Per-face `½ (α(e) β(e*) − α(e*) β(e))`, a ⋄ 2-cochain.
pub fn wedge_hetero(cx: &QuadComplex, a: &Cochain, b: &Cochain) -> Result<Cochain> {
    expect(a, ComplexTag::Lambda, 1, cx)?;
    expect(b, ComplexTag::Lambda, 1, cx)?;
    let f = cx.n_faces();
    let v = (0..f).map(|q| 0.5 * (a.values[q] * b.values[f + q] - a.values[f + q] * b.values[q])).collect();
    Ok(Cochain::new(2, ComplexTag::Diamond, v))
}

/// Total of [`wedge_hetero`] over both graphs without the ½.
pub fn doubled_wedge(cx: &QuadComplex, a: &[C64], b: &[C64]) -> C64 {
    let f = cx.n_faces();
    (0..f).map(|q| a[q] * b[f + q] - a[f + q] * b[q]).sum()
}

/// `∬` of a ⋄ 2-cochain.
pub fn integrate(w: &Cochain) -> C64 {
    w.values.iter().sum()
}

/// Product of ⋄ cochains of degrees `k + l ≤ 2`.
pub fn wedge_diamond(cx: &QuadComplex, a: &Cochain, b: &Cochain) -> Result<Cochain> {
    if a.tag != ComplexTag::Diamond || b.tag != ComplexTag::Diamond {
        return Err(Error::Degree("wedge_diamond acts on ⋄ cochains".into()));
    }
    if a.degree + b.degree > 2 {
        return Err(Error::Degree(format!("degrees {} + {} exceed 2", a.degree, b.degree)));
    }
    expect(a, ComplexTag::Diamond, a.degree, cx)?;
    expect(b, ComplexTag::Diamond, b.degree, cx)?;
    let (f, g) = (&a.values, &b.values);
    let out = match (a.degree, b.degree) {
        (0, 0) => f.iter().zip(g).map(|(x, y)| x * y).collect(),
        (0, 1) | (1, 0) => {
            let (fun, form) = if a.degree == 0 { (f, g) } else { (g, f) };
            cx.edges().iter().enumerate().map(|(e, &[s, t])| 0.5 * (fun[s] + fun[t]) * form[e]).collect()
        }
        (0, 2) | (2, 0) => {
            let (fun, form) = if a.degree == 0 { (f, g) } else { (g, f) };
            cx.quads().iter().enumerate().map(|(q, v)| 0.25 * (fun[v[0]] + fun[v[1]] + fun[v[2]] + fun[v[3]]) * form[q]).collect()
        }
        _ => (0..cx.n_faces())
            .map(|q| {
                let sa = [0, 1, 2, 3].map(|k| cx.side_value(f, q, k));
                let sb = [0, 1, 2, 3].map(|k| cx.side_value(g, q, k));
                0.25 * (0..4).map(|k| sa[(k + 3) % 4] * sb[k] - sa[k] * sb[(k + 3) % 4]).sum::<C64>()
            })
            .collect(),
    };
    Ok(Cochain::new(a.degree + b.degree, ComplexTag::Diamond, out))
}

/// Averaging map from ⋄ cochains to Λ cochains.
pub fn average(cx: &QuadComplex, a: &Cochain) -> Result<Cochain> {
    if a.tag != ComplexTag::Diamond {
        return Err(Error::Degree("average acts on ⋄ cochains".into()));
    }
    expect(a, ComplexTag::Diamond, a.degree, cx)?;
    Ok(match a.degree {
        0 => Cochain::new(0, ComplexTag::Lambda, a.values.clone()),
        1 => Cochain::new(1, ComplexTag::Lambda, average1(cx, &a.values)),
        _ => {
            let mut out = vec![ZERO; cx.n_vertices()];
            for (q, quad) in cx.quads().iter().enumerate() {
                for &v in quad {
                    out[v] += 0.5 * a.values[q];
                }
            }
            Cochain::new(2, ComplexTag::Lambda, out)
        }
    })
}

pub(crate) fn average1(cx: &QuadComplex, a: &[C64]) -> Vec<C64> {
    let f = cx.n_faces();
    let mut out = vec![ZERO; 2 * f];
    for q in 0..f {
        let s = [0, 1, 2, 3].map(|k| cx.side_value(a, q, k));
        out[q] = 0.5 * (s[0] + s[1] - s[2] - s[3]);
        out[f + q] = 0.5 * (s[1] + s[2] - s[0] - s[3]);
    }
    out
}

/// `ε`: +1 on primal vertices, −1 on dual ones.
pub fn biconstant(cx: &QuadComplex) -> Cochain {
    let v = cx
        .colors()
        .iter()
        .map(|c| match c {
            crate::Color::Primal => C64::new(1.0, 0.0),
            crate::Color::Dual => C64::new(-1.0, 0.0),
        })
        .collect();
    Cochain::new(0, ComplexTag::Lambda, v)
}

/// Same values as [`biconstant`], tagged as a ⋄ function.
pub fn biconstant_diamond(cx: &QuadComplex) -> Cochain {
    let mut e = biconstant(cx);
    e.tag = ComplexTag::Diamond;
    e
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyReport {
    pub dirichlet: f64,
    pub conformal: f64,
    pub area: f64,
    pub dirichlet_gamma: f64,
    pub dirichlet_gamma_star: f64,
}

impl EnergyReport {
    /// `|E_C − (E_D − 𝒜)|` relative to the largest term.
    pub fn identity_residual(&self) -> f64 {
        let scale = self.dirichlet.abs().max(self.conformal.abs()).max(self.area.abs()).max(1e-300);
        (self.conformal - (self.dirichlet - self.area)).abs() / scale
    }
}

/// Dirichlet energy, conformal energy and algebraic image area of a function.
pub fn energies(cx: &QuadComplex, f: &Cochain) -> Result<EnergyReport> {
    expect(f, ComplexTag::Lambda, 0, cx)?;
    let df = d0(cx, &f.values);
    let nf = cx.n_faces();
    let half = |range: std::ops::Range<usize>| -> f64 {
        range.map(|k| cx.rho_lambda(k) * df[k].norm_sqr()).sum::<f64>() * 0.5
    };
    let eg = half(0..nf);
    let egs = half(nf..2 * nf);
    let dirichlet = 0.5 * 0.5 * raw_product(cx, &df, &df).re;
    let sdf = star1(cx, &df);
    let defect: Vec<C64> = df.iter().zip(&sdf).map(|(a, b)| a - C64::i() * b).collect();
    let conformal = 0.25 * 0.5 * raw_product(cx, &defect, &defect).re;
    let dfc: Vec<C64> = df.iter().map(|z| z.conj()).collect();
    let w: C64 = (0..nf).map(|q| 0.5 * (df[q] * dfc[nf + q] - df[nf + q] * dfc[q])).sum();
    let area = (C64::i() * 0.5 * w).re;
    Ok(EnergyReport { dirichlet, conformal, area, dirichlet_gamma: eg, dirichlet_gamma_star: egs })
}

#[derive(Clone, Debug)]
pub struct HodgeSplit {
    pub exact: Cochain,
    pub coexact: Cochain,
    pub harmonic: Cochain,
    /// Potential `f` with `exact = d f`.
    pub potential: Vec<C64>,
}

/// `df` closest to `a` in the weighted norm, with its potential.
pub fn exact_projection(cx: &QuadComplex, lap: &GraphLaplacian, a: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
    let f = lap.solve_complex(&divergence(cx, a), DEFAULT_TOL)?;
    Ok((d0(cx, &f), f))
}

/// Orthogonal splitting `α = df + *dg + h` with `h` harmonic.
pub fn hodge_decompose(cx: &QuadComplex, a: &Cochain) -> Result<HodgeSplit> {
    expect_closed(cx, "hodge decomposition")?;
    expect(a, ComplexTag::Lambda, 1, cx)?;
    let lap = lambda_laplacian(cx);
    let (exact, potential) = exact_projection(cx, &lap, &a.values)?;
    let (e2, _) = exact_projection(cx, &lap, &star1(cx, &a.values))?;
    let coexact: Vec<C64> = star1(cx, &e2).iter().map(|v| -v).collect();
    let harmonic: Vec<C64> = (0..a.values.len()).map(|k| a.values[k] - exact[k] - coexact[k]).collect();
    Ok(HodgeSplit {
        exact: Cochain::new(1, ComplexTag::Lambda, exact),
        coexact: Cochain::new(1, ComplexTag::Lambda, coexact),
        harmonic: Cochain::new(1, ComplexTag::Lambda, harmonic),
        potential,
    })
}

/// Harmonic part of a Λ 1-form (closed input needs only the exact correction).
pub fn harmonic_part(cx: &QuadComplex, lap: &GraphLaplacian, a: &[C64]) -> Result<Vec<C64>> {
    let (ex, _) = exact_projection(cx, lap, a)?;
    let (e2, _) = exact_projection(cx, lap, &star1(cx, a))?;
    let co = star1(cx, &e2);
    Ok((0..a.len()).map(|k| a[k] - ex[k] + co[k]).collect())
}

/// `(max |dα|, max |dᵀWα|)`; both vanish exactly on harmonic forms.
pub fn harmonicity_residual(cx: &QuadComplex, a: &[C64]) -> (f64, f64) {
    let m = |v: Vec<C64>| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    (m(d1(cx, a)), m(divergence(cx, a)))
}

/// Projections onto the `∓i` eigenspaces of `*`: `(d′ part, d″ part)`.
pub fn type_split(cx: &QuadComplex, a: &Cochain) -> Result<(Cochain, Cochain)> {
    expect(a, ComplexTag::Lambda, 1, cx)?;
    let s = star1(cx, &a.values);
    let i = C64::i();
    let p: Vec<C64> = a.values.iter().zip(&s).map(|(x, y)| 0.5 * (x + i * y)).collect();
    let m: Vec<C64> = a.values.iter().zip(&s).map(|(x, y)| 0.5 * (x - i * y)).collect();
    Ok((Cochain::new(1, ComplexTag::Lambda, p), Cochain::new(1, ComplexTag::Lambda, m)))
}

/// Per-face `|f(y') − f(y) − iρ (f(x') − f(x))|`; zero on holomorphic functions.
pub fn holomorphicity_residual(cx: &QuadComplex, f: &[C64]) -> Vec<f64> {
    cx.quads()
        .iter()
        .enumerate()
        .map(|(q, v)| (f[v[3]] - f[v[1]] - C64::i() * cx.rho(q) * (f[v[2]] - f[v[0]])).norm())
        .collect()
}

/// Shoelace area of an embedded quad.
pub fn face_area(cx: &QuadComplex, q: usize) -> Option<f64> {
    let p = cx.quad_local_coords(q)?;
    let mut a = 0.0;
    for k in 0..4 {
        let (u, w) = (p[k], p[(k + 1) % 4]);
        a += u.re * w.im - w.re * u.im;
    }
    Some(0.5 * a)
}

/// Vertex coefficients of `∂` and `∂̄` on face `q`: `f ↦ Σ_k c[k] f(v_k)`.
fn del_coefficients(cx: &QuadComplex, q: usize) -> Result<([C64; 4], [C64; 4], f64)> {
    let p = cx.quad_local_coords(q).ok_or_else(|| Error::InvalidParameter("∂ needs an embedding".into()))?;
    let area = face_area(cx, q).unwrap();
    if area.abs() < 1e-14 {
        return Err(Error::SingularFace { face: q, reason: format!("area {area:.3e}") });
    }
    let i = C64::i();
    let mut c = [ZERO; 4];
    let mut cb = [ZERO; 4];
    for k in 0..4 {
        let dz = p[(k + 1) % 4] - p[(k + 3) % 4];
        c[k] = i / (4.0 * area) * dz.conj();
        cb[k] = -i / (4.0 * area) * dz;
    }
    Ok((c, cb, area))
}

/// `(∂f, ∂̄f)` as ⋄ 2-cochains from the face contour integrals of `f dZ̄` and `f dZ`.
pub fn del_delbar(cx: &QuadComplex, f: &Cochain) -> Result<(Cochain, Cochain)> {
    if f.degree != 0 {
        return Err(Error::Degree("∂ acts on functions".into()));
    }
    let mut d = Vec::with_capacity(cx.n_faces());
    let mut db = Vec::with_capacity(cx.n_faces());
    for q in 0..cx.n_faces() {
        let (c, cb, _) = del_coefficients(cx, q)?;
        let v = cx.quad(q);
        d.push((0..4).map(|k| c[k] * f.values[v[k]]).sum());
        db.push((0..4).map(|k| cb[k] * f.values[v[k]]).sum());
    }
    Ok((Cochain::new(2, ComplexTag::Diamond, d), Cochain::new(2, ComplexTag::Diamond, db)))
}

/// Extensions of `∂, ∂̄` from faces back to vertices: `(∂₂₀ g)(v) = Σ_F 8𝒜_F c_F(v) g(F)`,
/// with `c_F` the vertex coefficients of `∂` on `F`. With this scaling
/// `½(∂₂₀∂̄ + ∂̄₂₀∂) = Δ` at interior vertices of rhombic patches.
pub fn del_transpose(cx: &QuadComplex, g: &Cochain, bar: bool) -> Result<Cochain> {
    if g.degree != 2 || g.tag != ComplexTag::Diamond {
        return Err(Error::Degree("∂₂₀ acts on ⋄ 2-cochains".into()));
    }
    let mut out = vec![ZERO; cx.n_vertices()];
    for q in 0..cx.n_faces() {
        let (c, cb, area) = del_coefficients(cx, q)?;
        let cc = if bar { cb } else { c };
        for (k, &v) in cx.quad(q).iter().enumerate() {
            out[v] += 8.0 * area * cc[k] * g.values[q];
        }
    }
    Ok(Cochain::new(0, ComplexTag::Diamond, out))
}

/// Lift a closed Λ 1-form whose holonomies agree on Γ and Γ* to a closed ⋄
/// 1-form `ν` with `A(ν) = μ`, normalized by `ν(base_edge) = 0`.
pub fn lift_to_diamond(cx: &QuadComplex, mu: &Cochain, base_edge: usize) -> Result<Cochain> {
    expect(mu, ComplexTag::Lambda, 1, cx)?;
    if !cx.is_closed() {
        // no holonomy to match; μ must be exact on Λ
        let h = integrate_exact(cx, &mu.values)?;
        let mut nu: Vec<C64> = cx.edges().iter().map(|&[s, t]| h[t] - h[s]).collect();
        gauge_fix(cx, &mut nu, base_edge);
        return Ok(Cochain::new(1, ComplexTag::Diamond, nu));
    }
    let tc = TreeCotree::new(cx)?;
    lift_with(cx, &tc, &mu.values, base_edge).map(|v| Cochain::new(1, ComplexTag::Diamond, v))
}

pub(crate) fn lift_with(cx: &QuadComplex, tc: &TreeCotree, mu: &[C64], base_edge: usize) -> Result<Vec<C64>> {
    let scale = mu.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let dm = d1(cx, mu).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dm > 1e-9 * scale {
        return Err(Error::NotClosedForm(dm));
    }
    let g2 = tc.leftover.len();
    // periods on the fundamental cycles, read on both graphs
    let mut periods = vec![ZERO; g2];
    for (j, cyc) in tc.cycles.iter().enumerate() {
        let (cg, cgs) = crate::homology::left_shift(cx, cyc)?;
        let pg: C64 = cg.coeffs.iter().zip(mu).map(|(&c, m)| m * c as f64).sum();
        let pgs: C64 = cgs.coeffs.iter().zip(mu).map(|(&c, m)| m * c as f64).sum();
        if (pg - pgs).norm() > 1e-8 * scale {
            return Err(Error::NotLiftable(format!(
                "cycle {j}: holonomy {pg:.6e} on Γ but {pgs:.6e} on Γ*"
            )));
        }
        periods[j] = 0.5 * (pg + pgs);
    }
    // θ with those periods, then integrate the exact remainder
    let mut theta = vec![ZERO; cx.n_edges()];
    for j in 0..g2 {
        let w = tc.cohomology_form(cx, j);
        for e in 0..cx.n_edges() {
            theta[e] += periods[j] * w[e];
        }
    }
    let at = average1(cx, &theta);
    let rem: Vec<C64> = mu.iter().zip(&at).map(|(a, b)| a - b).collect();
    let h = integrate_exact(cx, &rem)?;
    let mut nu: Vec<C64> = cx.edges().iter().enumerate().map(|(e, &[s, t])| theta[e] + h[t] - h[s]).collect();
    gauge_fix(cx, &mut nu, base_edge);
    Ok(nu)
}

/// Subtract the multiple of `d_⋄ε` that zeroes `ν` on `base_edge`.
pub fn gauge_fix(cx: &QuadComplex, nu: &mut [C64], base_edge: usize) {
    let eps = biconstant(cx).values;
    let [s, t] = cx.edge(base_edge);
    let de = eps[t] - eps[s];
    let c = nu[base_edge] / de;
    for (e, &[s, t]) in cx.edges().iter().enumerate() {
        nu[e] -= c * (eps[t] - eps[s]);
    }
}

/// Potential of an exact Λ 1-form, built by BFS on each graph.
fn integrate_exact(cx: &QuadComplex, a: &[C64]) -> Result<Vec<C64>> {
    let n = cx.n_vertices();
    let mut h = vec![ZERO; n];
    let mut seen = vec![false; n];
    let mut adj: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    for k in 0..cx.n_lambda_edges() {
        let (s, t) = cx.lambda_edge(k);
        adj[s].push((t, k, 1.0));
        adj[t].push((s, k, -1.0));
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(w, k, s) in &adj[v] {
                let val = h[v] + a[k] * s;
                if !seen[w] {
                    seen[w] = true;
                    h[w] = val;
                    queue.push_back(w);
                } else if (h[w] - val).norm() > 1e-8 * scale {
                    return Err(Error::Holonomy { vertex: w, holonomy: (h[w] - val).norm() });
                }
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellular::{generate_rhombic_patch, generate_square_torus, PatchShape, PatchStyle};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rnd(n: usize, seed: u64) -> Vec<C64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect()
    }

    fn torus() -> QuadComplex {
        generate_square_torus(2, 3, 0.6).unwrap()
    }

    #[test]
    fn star_example_value() {
        let cx = torus();
        let f = cx.n_faces();
        let q = (0..f).find(|&q| (cx.rho(q) - 0.6f64.tan()).abs() < 1e-12).unwrap();
        let mut a = vec![ZERO; 2 * f];
        a[f + q] = C64::new(1.0, 0.0);
        let s = star1(&cx, &a);
        assert!((s[q] + C64::new(1.0 / cx.rho(q), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn star_squares_to_minus_one() {
        let cx = torus();
        let a = Cochain::new(1, ComplexTag::Lambda, rnd(cx.n_lambda_edges(), 1));
        let ss = hodge_star(&cx, &hodge_star(&cx, &a).unwrap()).unwrap();
        for (x, y) in ss.values.iter().zip(&a.values) {
            assert!((x + y).norm() < 1e-14);
        }
    }

    #[test]
    fn laplacian_of_indicator() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 3.0 }, 1.0, PatchStyle::Square).unwrap();
        let o = cx.origin().unwrap();
        let mut f = Cochain::zero(&cx, ComplexTag::Lambda, 0);
        f.values[o] = C64::new(1.0, 0.0);
        let l = laplacian(&cx, &f).unwrap();
        assert!((l.values[o] - C64::new(4.0, 0.0)).norm() < 1e-14);
        for (w, _, _) in cx.lambda_neighbors(o) {
            assert!((l.values[w] + C64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn composite_laplacian_matches_vertex_formula() {
        let cx = torus();
        let f = Cochain::new(0, ComplexTag::Lambda, rnd(cx.n_vertices(), 2));
        let direct = laplacian(&cx, &f).unwrap();
        let sf = hodge_star(&cx, &hodge_star(&cx, &f).unwrap()).unwrap();
        assert_eq!(sf.values, f.values);
        let comp = d1(&cx, &star1(&cx, &d0(&cx, &f.values)));
        for (a, b) in direct.values.iter().zip(&comp) {
            assert!((a + b).norm() < 1e-12);
        }
    }

    #[test]
    fn scalar_product_is_integral_of_wedge_with_star() {
        let cx = torus();
        let a = Cochain::new(1, ComplexTag::Lambda, rnd(cx.n_lambda_edges(), 3));
        let b = Cochain::new(1, ComplexTag::Lambda, rnd(cx.n_lambda_edges(), 4));
        let sp = scalar_product(&cx, &a, &b).unwrap();
        let sb = hodge_star(&cx, &b.conj()).unwrap();
        let w = integrate(&wedge_hetero(&cx, &a, &sb).unwrap());
        assert!((sp - w).norm() < 1e-12 * sp.norm());
        let ba = scalar_product(&cx, &b, &a).unwrap();
        assert!((sp - ba.conj()).norm() < 1e-14);
    }

    #[test]
    fn hetero_wedge_on_one_graph_vanishes() {
        let cx = torus();
        let mut a = rnd(cx.n_lambda_edges(), 5);
        for v in a.iter_mut().skip(cx.n_faces()) {
            *v = ZERO;
        }
        let a = Cochain::new(1, ComplexTag::Lambda, a);
        assert_eq!(wedge_hetero(&cx, &a, &a).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn area_of_square_face() {
        // single square with diagonals 2 and 2i
        let s = r#"{"vertices":[{"id":0,"color":"primal","z":[-1,0]},{"id":1,"color":"dual","z":[0,-1]},
                    {"id":2,"color":"primal","z":[1,0]},{"id":3,"color":"dual","z":[0,1]}],
                    "quads":[[0,1,2,3]],"meta":{"closed":false}}"#;
        let cx = QuadComplex::from_json(s).unwrap();
        let z: Vec<C64> = cx.z().unwrap().to_vec();
        let dz = Cochain::new(1, ComplexTag::Lambda, d0(&cx, &z));
        let dzb = dz.conj();
        let w = integrate(&wedge_hetero(&cx, &dz, &dzb).unwrap());
        assert!((w - C64::new(0.0, -4.0)).norm() < 1e-14);
        assert!((face_area(&cx, 0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn averaging_commutes_with_d() {
        let cx = torus();
        let f = Cochain::new(0, ComplexTag::Diamond, rnd(cx.n_vertices(), 6));
        let lhs = average(&cx, &cx.coboundary(&f).unwrap()).unwrap();
        let mut fl = f.clone();
        fl.tag = ComplexTag::Lambda;
        let rhs = cx.coboundary(&fl).unwrap();
        for (a, b) in lhs.values.iter().zip(&rhs.values) {
            assert!((a - b).norm() < 1e-14);
        }
        let de = cx.coboundary(&biconstant_diamond(&cx)).unwrap();
        assert_eq!(average(&cx, &de).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn biconstant_times_dz_vanishes() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 3.0 }, 0.5, PatchStyle::Trihex).unwrap();
        let z = Cochain::new(0, ComplexTag::Diamond, cx.z().unwrap().to_vec());
        let dz = cx.coboundary(&z).unwrap();
        let p = wedge_diamond(&cx, &biconstant_diamond(&cx), &dz).unwrap();
        assert!(p.max_abs() < 1e-15);
    }

    #[test]
    fn leibniz_rule() {
        let cx = torus();
        let f = Cochain::new(0, ComplexTag::Diamond, rnd(cx.n_vertices(), 7));
        let g = Cochain::new(0, ComplexTag::Diamond, rnd(cx.n_vertices(), 8));
        let fg = wedge_diamond(&cx, &f, &g).unwrap();
        let lhs = cx.coboundary(&fg).unwrap();
        let a = wedge_diamond(&cx, &cx.coboundary(&f).unwrap(), &g).unwrap();
        let b = wedge_diamond(&cx, &f, &cx.coboundary(&g).unwrap()).unwrap();
        for e in 0..cx.n_edges() {
            assert!((lhs.values[e] - a.values[e] - b.values[e]).norm() < 1e-13);
        }
        // 1-form level
        let al = Cochain::new(1, ComplexTag::Diamond, rnd(cx.n_edges(), 9));
        let dal = cx.coboundary(&al).unwrap();
        let fa = wedge_diamond(&cx, &f, &al).unwrap();
        let lhs = cx.coboundary(&fa).unwrap();
        let r1 = wedge_diamond(&cx, &cx.coboundary(&f).unwrap(), &al).unwrap();
        let r2 = wedge_diamond(&cx, &f, &dal).unwrap();
        for q in 0..cx.n_faces() {
            assert!((lhs.values[q] - r1.values[q] - r2.values[q]).norm() < 1e-13);
        }
    }

    #[test]
    fn averaged_wedge_matches_diamond_wedge() {
        let cx = torus();
        let a = Cochain::new(1, ComplexTag::Diamond, rnd(cx.n_edges(), 10));
        let b = Cochain::new(1, ComplexTag::Diamond, rnd(cx.n_edges(), 11));
        let lhs = wedge_hetero(&cx, &average(&cx, &a).unwrap(), &average(&cx, &b).unwrap()).unwrap();
        let rhs = wedge_diamond(&cx, &a, &b).unwrap();
        for q in 0..cx.n_faces() {
            assert!((lhs.values[q] - rhs.values[q]).norm() < 1e-13);
        }
    }

    #[test]
    fn energies_of_z_on_patch() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 4.0 }, 1.0, PatchStyle::Square).unwrap();
        let z = Cochain::new(0, ComplexTag::Lambda, cx.z().unwrap().to_vec());
        let e = energies(&cx, &z).unwrap();
        assert!(e.conformal.abs() < 1e-12 * e.dirichlet);
        assert!((e.dirichlet - e.area).abs() < 1e-12 * e.dirichlet);
        let c = Cochain::new(0, ComplexTag::Lambda, vec![C64::new(1.0, 1.0); cx.n_vertices()]);
        let e = energies(&cx, &c).unwrap();
        assert_eq!((e.dirichlet, e.conformal, e.area), (0.0, 0.0, 0.0));
    }

    #[test]
    fn del_of_z() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 3.0 }, 1.0, PatchStyle::Trihex).unwrap();
        let z = Cochain::new(0, ComplexTag::Diamond, cx.z().unwrap().to_vec());
        let (d, db) = del_delbar(&cx, &z).unwrap();
        for q in 0..cx.n_faces() {
            assert!((d.values[q] - 1.0).norm() < 1e-12);
            assert!(db.values[q].norm() < 1e-12);
        }
        let (d, db) = del_delbar(&cx, &z.conj()).unwrap();
        for q in 0..cx.n_faces() {
            assert!(d.values[q].norm() < 1e-12);
            assert!((db.values[q] - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn del_composition_gives_laplacian() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 4.0 }, 0.7, PatchStyle::Trihex).unwrap();
        let f = Cochain::new(0, ComplexTag::Diamond, rnd(cx.n_vertices(), 12));
        let (d, db) = del_delbar(&cx, &f).unwrap();
        let a = del_transpose(&cx, &db, false).unwrap();
        let b = del_transpose(&cx, &d, true).unwrap();
        let mut fl = f.clone();
        fl.tag = ComplexTag::Lambda;
        let lap = laplacian(&cx, &fl).unwrap();
        for v in (0..cx.n_vertices()).filter(|&v| !cx.is_boundary_vertex(v)) {
            let r = 0.5 * (a.values[v] + b.values[v]) - lap.values[v];
            assert!(r.norm() < 1e-12, "vertex {v}: {r}");
        }
    }

    #[test]
    fn random_energy_identity() {
        let cx = torus();
        for s in 0..10 {
            let f = Cochain::new(0, ComplexTag::Lambda, rnd(cx.n_vertices(), 100 + s));
            let e = energies(&cx, &f).unwrap();
            assert!(e.identity_residual() < 1e-12);
            assert!((e.dirichlet - 0.5 * (e.dirichlet_gamma + e.dirichlet_gamma_star)).abs() < 1e-12 * e.dirichlet);
        }
    }

    #[test]
    fn exact_form_decomposes_to_itself() {
        let cx = torus();
        let f = rnd(cx.n_vertices(), 13);
        let a = Cochain::new(1, ComplexTag::Lambda, d0(&cx, &f));
        let h = hodge_decompose(&cx, &a).unwrap();
        assert!(h.coexact.max_abs() < 1e-9);
        assert!(h.harmonic.max_abs() < 1e-9);
    }

    #[test]
    fn lift_of_exact_form() {
        let cx = torus();
        let f = rnd(cx.n_vertices(), 14);
        let mu = Cochain::new(1, ComplexTag::Lambda, d0(&cx, &f));
        let nu = lift_to_diamond(&cx, &mu, 0).unwrap();
        let fd = Cochain::new(0, ComplexTag::Diamond, f);
        let mut df = cx.coboundary(&fd).unwrap().values;
        gauge_fix(&cx, &mut df, 0);
        for (a, b) in nu.values.iter().zip(&df) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn patch_boundary_rejects_star() {
        let cx = generate_rhombic_patch(PatchShape::Disk { radius: 2.0 }, 1.0, PatchStyle::Square).unwrap();
        let a = Cochain::zero(&cx, ComplexTag::Lambda, 1);
        assert!(matches!(hodge_star(&cx, &a), Err(Error::NotClosed(_))));
    }

    #[test]
    fn random_values_rng_is_used() {
        let v = rnd(3, 0);
        assert!(v.iter().all(|z| z.norm() < 2.0));
    }
}
