//! Gram blocks, the star matrix, holomorphic bases and period matrices.
//!
//! Inner products here are the two-graph sums `Σ_e ρ(e) α(e) β(e)` (no ½),
//! which makes the Gram matrix of the α basis equal to the period integrals
//! of `*α` along the dual cycles.

use crate::calculus::{d0, doubled_wedge, raw_product, star1, wedge_diamond};
use crate::cellular::{Cochain, ComplexTag, QuadComplex};
use crate::error::{Error, Result};
use crate::homology::{period, HarmonicBasis};
use crate::linalg::{
    condition, crows_to_json, inverse, max_abs, max_abs_c, rows_to_json, sym_eigenvalues, to_complex, CMat, RMat,
};
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const MAX_COND: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct GramBlocks {
    pub genus: usize,
    /// `(α_k, α_ℓ)` from scalar products.
    pub gram: RMat,
    /// The same matrix from periods of `*α_ℓ`.
    pub gram_by_periods: RMat,
    pub a: RMat,
    pub b: RMat,
    pub c: RMat,
    pub d: RMat,
    pub a_gamma: RMat,
    pub a_gamma_star: RMat,
    pub b_gamma_gamma_star: RMat,
    pub b_gamma_star_gamma: RMat,
    pub c_gamma: RMat,
    pub c_gamma_star: RMat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GramReport {
    pub discrepancy: f64,
    pub symmetry: f64,
    pub min_eigenvalue: f64,
    pub block_structure: f64,
    pub star_identities: f64,
}

fn sub(m: &RMat, r: usize, c: usize, n: usize) -> RMat {
    m.view((r, c), (n, n)).into_owned()
}

/// Gram matrix of a harmonic basis, computed as scalar products and as periods.
pub fn gram_blocks(cx: &QuadComplex, hb: &HarmonicBasis) -> Result<GramBlocks> {
    let g = hb.genus;
    let n = 4 * g;
    let gram = DMatrix::from_fn(n, n, |k, l| raw_product(cx, &hb.alpha[k], &hb.alpha[l]).re);
    let stars: Vec<Vec<C64>> = hb.alpha.iter().map(|a| star1(cx, a)).collect();
    let gram_by_periods = DMatrix::from_fn(n, n, |k, l| {
        if k < 2 * g {
            period(&hb.lambda_cycles[k + 2 * g], &stars[l]).re
        } else {
            -period(&hb.lambda_cycles[k - 2 * g], &stars[l]).re
        }
    });
    let scale = max_abs(&gram).max(1.0);
    let disc = max_abs(&(&gram - &gram_by_periods));
    if disc > 1e-9 * scale {
        return Err(Error::Consistency(format!("Gram matrix by periods differs by {disc:.3e}")));
    }
    let h = 2 * g;
    let (a, d, b, c) = (sub(&gram, 0, 0, h), sub(&gram, 0, h, h), sub(&gram, h, 0, h), sub(&gram, h, h, h));
    Ok(GramBlocks {
        genus: g,
        a_gamma: sub(&a, 0, 0, g),
        a_gamma_star: sub(&a, g, g, g),
        b_gamma_star_gamma: sub(&b, 0, g, g),
        b_gamma_gamma_star: sub(&b, g, 0, g),
        c_gamma_star: sub(&c, 0, 0, g),
        c_gamma: sub(&c, g, g, g),
        gram,
        gram_by_periods,
        a,
        b,
        c,
        d,
    })
}

impl GramBlocks {
    pub fn report(&self) -> GramReport {
        let g = self.genus;
        let h = 2 * g;
        let symmetry = max_abs(&(&self.gram - self.gram.transpose()));
        let min_eigenvalue = sym_eigenvalues(&self.gram).first().cloned().unwrap_or(f64::INFINITY);
        let mut block: f64 = 0.0;
        for i in 0..h {
            for j in 0..h {
                let same = (i < g) == (j < g);
                if !same {
                    block = block.max(self.a[(i, j)].abs()).max(self.c[(i, j)].abs());
                } else {
                    block = block.max(self.b[(i, j)].abs());
                }
            }
        }
        let id = RMat::identity(h, h);
        let s1 = &self.b * &self.b - &self.c * &self.a + &id;
        let s2 = &self.a * &self.b - self.b.transpose() * &self.a;
        let s3 = &self.c * self.b.transpose() - &self.b * &self.c;
        let star_identities = max_abs(&s1).max(max_abs(&s2)).max(max_abs(&s3));
        GramReport {
            discrepancy: max_abs(&(&self.gram - &self.gram_by_periods)),
            symmetry,
            min_eigenvalue,
            block_structure: block,
            star_identities,
        }
    }
}

/// Matrix `S = [[−D, A], [−C, B]]` with `*α_k = Σ_ℓ S_kℓ α_ℓ`.
pub fn star_matrix(gb: &GramBlocks) -> RMat {
    let h = 2 * gb.genus;
    let mut s = RMat::zeros(2 * h, 2 * h);
    s.view_mut((0, 0), (h, h)).copy_from(&(-&gb.d));
    s.view_mut((0, h), (h, h)).copy_from(&gb.a);
    s.view_mut((h, 0), (h, h)).copy_from(&(-&gb.c));
    s.view_mut((h, h), (h, h)).copy_from(&gb.b);
    s
}

/// `max_k |*α_k − Σ_ℓ S_kℓ α_ℓ|` on cochains.
pub fn star_matrix_residual(cx: &QuadComplex, hb: &HarmonicBasis, s: &RMat) -> f64 {
    let mut m: f64 = 0.0;
    for (k, a) in hb.alpha.iter().enumerate() {
        let sa = star1(cx, a);
        for e in 0..sa.len() {
            let v: C64 = (0..hb.alpha.len()).map(|l| hb.alpha[l][e] * s[(k, l)]).sum();
            m = m.max((sa[e] - v).norm());
        }
    }
    m
}

fn combine(forms: &[Vec<C64>], coeffs: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; forms[0].len()];
    for (f, &c) in forms.iter().zip(coeffs) {
        if c != ZERO {
            for (o, v) in out.iter_mut().zip(f) {
                *o += c * v;
            }
        }
    }
    out
}

/// `ζ_k = (i − *) Σ_ℓ C⁻¹_kℓ α_{ℓ+2g}` and the condition number of `C`.
pub fn holomorphic_basis(cx: &QuadComplex, hb: &HarmonicBasis, gb: &GramBlocks) -> Result<(Vec<Vec<C64>>, f64)> {
    let h = 2 * gb.genus;
    let (cinv, cond) = inverse(&gb.c, MAX_COND)?;
    let last = &hb.alpha[h..];
    let zeta = (0..h)
        .map(|k| {
            let coeffs: Vec<C64> = (0..h).map(|l| C64::new(cinv[(k, l)], 0.0)).collect();
            let a = combine(last, &coeffs);
            let sa = star1(cx, &a);
            a.iter().zip(&sa).map(|(x, y)| C64::i() * x - y).collect()
        })
        .collect();
    Ok((zeta, cond))
}

/// Coordinates of `ζ_k` in the α basis from the eigen-condition `*ζ = −iζ`
/// and the normalization on the first `2g` cycles, by least squares.
pub fn zeta_coordinates_by_solve(gb: &GramBlocks) -> Result<CMat> {
    let h = 2 * gb.genus;
    let s = to_complex(&star_matrix(gb));
    // coordinates x (row vector): Σ_k x_k S_kℓ = −i x_ℓ, with x_j = δ_jk for j < 2g
    let st = s.transpose();
    let m = &st + CMat::identity(2 * h, 2 * h) * C64::i();
    let mut out = CMat::zeros(h, 2 * h);
    for k in 0..h {
        let lhs = m.columns(h, h).into_owned();
        let rhs = -m.column(k).into_owned();
        let sol = lhs.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::Consistency(e.into()))?;
        out[(k, k)] = C64::new(1.0, 0.0);
        for j in 0..h {
            out[(k, h + j)] = sol[j];
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodResiduals {
    pub normalization: f64,
    pub formula: f64,
    pub symmetry: f64,
    pub min_imag_eigenvalue: f64,
    pub holomorphic: f64,
    pub closed: f64,
    pub real_imag_split: f64,
    pub block_structure: f64,
    pub second_solve: f64,
    pub star_matrix: f64,
    pub condition_c: f64,
}

#[derive(Clone, Debug)]
pub struct PeriodData {
    pub genus: usize,
    pub zeta: Vec<Vec<C64>>,
    /// `Π_jk = ∮_{ℵ^Λ_{j+2g}} ζ_k`.
    pub pi: CMat,
    /// `C⁻¹(i − B)`.
    pub pi_formula: CMat,
    pub pi_gamma: CMat,
    pub pi_gamma_star: CMat,
    pub pi_diamond: CMat,
    pub diamond_applicable: bool,
    /// `‖C_Γ − C_Γ*‖ + ‖B_ΓΓ* − B_Γ*Γ‖` (max norms).
    pub closeness: f64,
    pub residuals: PeriodResiduals,
}

fn csub(m: &CMat, r: usize, c: usize, n: usize) -> CMat {
    m.view((r, c), (n, n)).into_owned()
}

/// Full period computation from a harmonic basis.
pub fn period_matrix(cx: &QuadComplex, hb: &HarmonicBasis, gb: &GramBlocks) -> Result<PeriodData> {
    let g = gb.genus;
    let h = 2 * g;
    let (zeta, cond) = holomorphic_basis(cx, hb, gb)?;
    let table = DMatrix::from_fn(2 * h, h, |j, k| period(&hb.lambda_cycles[j], &zeta[k]));
    let mut normalization: f64 = 0.0;
    for j in 0..h {
        for k in 0..h {
            normalization = normalization.max((table[(j, k)] - if j == k { 1.0 } else { 0.0 }).norm());
        }
    }
    let pi = table.rows(h, h).into_owned();
    let (cinv, _) = inverse(&gb.c, MAX_COND)?;
    let i_minus_b = CMat::identity(h, h) * C64::i() - to_complex(&gb.b);
    let pi_formula = to_complex(&cinv) * i_minus_b;
    let formula = max_abs_c(&(&pi - pi_formula.transpose()));
    let symmetry = max_abs_c(&(&pi - pi.transpose()));
    let im = pi.map(|z| z.im);
    let min_imag_eigenvalue = sym_eigenvalues(&im).first().cloned().unwrap_or(f64::INFINITY);
    let mut holomorphic: f64 = 0.0;
    let mut closed: f64 = 0.0;
    let mut split: f64 = 0.0;
    let nf = cx.n_faces();
    for (k, z) in zeta.iter().enumerate() {
        let sz = star1(cx, z);
        for e in 0..z.len() {
            holomorphic = holomorphic.max((sz[e] + C64::i() * z[e]).norm());
        }
        closed = closed.max(crate::calculus::d1(cx, z).iter().map(|v| v.norm()).fold(0.0, f64::max));
        // real on one graph, imaginary on the other
        let real_on_gamma = k < g;
        for (e, v) in z.iter().enumerate() {
            let on_gamma = e < nf;
            let bad = if on_gamma == real_on_gamma { v.im } else { v.re };
            split = split.max(bad.abs());
        }
    }
    let mut block: f64 = 0.0;
    for j in 0..h {
        for k in 0..h {
            let v = pi[(j, k)];
            let bad = if (j < g) == (k < g) { v.re } else { v.im };
            block = block.max(bad.abs());
        }
    }
    let pi_gamma = csub(&pi, 0, g, g) + csub(&pi, 0, 0, g);
    let pi_gamma_star = csub(&pi, g, 0, g) + csub(&pi, g, g, g);
    let pi_diamond = (&pi_gamma + &pi_gamma_star) * C64::new(0.5, 0.0);
    let closeness = max_abs(&(&gb.c_gamma - &gb.c_gamma_star)) + max_abs(&(&gb.b_gamma_gamma_star - &gb.b_gamma_star_gamma));
    // second solve: coordinates from the eigen-condition
    let coords = zeta_coordinates_by_solve(gb)?;
    let mut second_solve: f64 = 0.0;
    for k in 0..h {
        let coeffs: Vec<C64> = coords.row(k).iter().cloned().collect();
        let z2 = combine(&hb.alpha, &coeffs);
        for e in 0..z2.len() {
            second_solve = second_solve.max((z2[e] - zeta[k][e]).norm());
        }
    }
    let star_res = star_matrix_residual(cx, hb, &star_matrix(gb));
    Ok(PeriodData {
        genus: g,
        zeta,
        pi,
        pi_formula,
        pi_gamma,
        pi_gamma_star,
        pi_diamond,
        diamond_applicable: closeness < 1e-6,
        closeness,
        residuals: PeriodResiduals {
            normalization,
            formula,
            symmetry,
            min_imag_eigenvalue,
            holomorphic,
            closed,
            real_imag_split: split,
            block_structure: block,
            second_solve,
            star_matrix: star_res,
            condition_c: cond,
        },
    })
}

/// The `periods.json` document.
pub fn periods_json(gb: &GramBlocks, pd: &PeriodData) -> serde_json::Value {
    serde_json::json!({
        "g": pd.genus,
        "Pi": crows_to_json(&pd.pi),
        "Pi_Gamma": crows_to_json(&pd.pi_gamma),
        "Pi_GammaStar": crows_to_json(&pd.pi_gamma_star),
        "Pi_diamond": {
            "value": crows_to_json(&pd.pi_diamond),
            "applicable": pd.diamond_applicable,
            "closeness": pd.closeness,
        },
        "gram": {
            "A": rows_to_json(&gb.a),
            "B": rows_to_json(&gb.b),
            "C": rows_to_json(&gb.c),
            "D": rows_to_json(&gb.d),
        },
        "residuals": {
            "periods": &pd.residuals,
            "gram": gb.report(),
        },
    })
}

/// Everything from a complex in one call.
pub fn compute_periods(cx: &QuadComplex) -> Result<(HarmonicBasis, GramBlocks, PeriodData)> {
    let hb = HarmonicBasis::canonical(cx)?;
    if hb.genus == 0 {
        return Err(Error::InvalidParameter("genus 0 surface has no periods".into()));
    }
    let gb = gram_blocks(cx, &hb)?;
    let pd = period_matrix(cx, &hb, &gb)?;
    Ok((hb, gb, pd))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BilinearResidual {
    pub lhs: [f64; 2],
    pub rhs: [f64; 2],
    pub residual: f64,
}

fn residual(lhs: C64, rhs: C64) -> BilinearResidual {
    BilinearResidual { lhs: [lhs.re, lhs.im], rhs: [rhs.re, rhs.im], residual: (lhs - rhs).norm() }
}

fn check_closed_lambda(cx: &QuadComplex, t: &[C64]) -> Result<()> {
    let m = crate::calculus::d1(cx, t).iter().map(|v| v.norm()).fold(0.0, f64::max);
    let s = t.iter().map(|v| v.norm()).fold(1.0, f64::max);
    if m > 1e-9 * s {
        return Err(Error::NotClosedForm(m));
    }
    Ok(())
}

/// Riemann bilinear relation for two closed Λ 1-forms.
pub fn bilinear_lambda(cx: &QuadComplex, hb: &HarmonicBasis, t: &[C64], tp: &[C64]) -> Result<BilinearResidual> {
    check_closed_lambda(cx, t)?;
    check_closed_lambda(cx, tp)?;
    let h = 2 * hb.genus;
    let lc = &hb.lambda_cycles;
    let lhs = doubled_wedge(cx, t, tp);
    let rhs: C64 = (0..h)
        .map(|j| period(&lc[j], t) * period(&lc[j + h], tp) - period(&lc[j + h], t) * period(&lc[j], tp))
        .sum();
    Ok(residual(lhs, rhs))
}

/// Riemann bilinear relation for two closed ⋄ 1-forms.
pub fn bilinear_diamond(cx: &QuadComplex, hb: &HarmonicBasis, t: &[C64], tp: &[C64]) -> Result<BilinearResidual> {
    let a = Cochain::new(1, ComplexTag::Diamond, t.to_vec());
    let b = Cochain::new(1, ComplexTag::Diamond, tp.to_vec());
    for f in [&a, &b] {
        let m = cx.coboundary(f)?.max_abs();
        if m > 1e-9 * f.max_abs().max(1.0) {
            return Err(Error::NotClosedForm(m));
        }
    }
    let g = hb.genus;
    let cy = &hb.cycles.diamond;
    let lhs: C64 = wedge_diamond(cx, &a, &b)?.values.iter().sum();
    let rhs: C64 = (0..g)
        .map(|j| period(&cy[j], t) * period(&cy[j + g], tp) - period(&cy[j + g], t) * period(&cy[j], tp))
        .sum();
    Ok(residual(lhs, rhs))
}

/// `‖θ‖²` against the period expression with `*θ̄`, for harmonic θ.
pub fn harmonic_norm_identity(cx: &QuadComplex, hb: &HarmonicBasis, t: &[C64]) -> Result<BilinearResidual> {
    let tb: Vec<C64> = t.iter().map(|z| z.conj()).collect();
    let st = star1(cx, &tb);
    let r = bilinear_lambda(cx, hb, t, &st)?;
    let norm = raw_product(cx, t, t);
    Ok(residual(norm, C64::new(r.rhs[0], r.rhs[1])))
}

/// Random closed Λ forms: combinations of the α basis plus an exact part.
pub fn random_closed_lambda(cx: &QuadComplex, hb: &HarmonicBasis, rng: &mut impl rand::Rng) -> Vec<C64> {
    let mut r = || C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let coeffs: Vec<C64> = (0..hb.alpha.len()).map(|_| r()).collect();
    let f: Vec<C64> = (0..cx.n_vertices()).map(|_| r()).collect();
    let df = d0(cx, &f);
    combine(&hb.alpha, &coeffs).iter().zip(&df).map(|(a, b)| a + b).collect()
}

#[derive(Clone, Debug)]
pub struct DiamondGram {
    /// Assembled from the Λ blocks.
    pub from_blocks: RMat,
    /// `(A α⋄_k, A α⋄_ℓ)`.
    pub by_average: RMat,
    /// Per-face 4×4 weight formula.
    pub by_faces: RMat,
    pub determinant: f64,
}

/// Inner products of the ⋄ basis, three ways.
pub fn diamond_gram(cx: &QuadComplex, hb: &HarmonicBasis, gb: &GramBlocks) -> DiamondGram {
    let g = hb.genus;
    let mut from_blocks = RMat::zeros(2 * g, 2 * g);
    let bsum = &gb.b_gamma_gamma_star + &gb.b_gamma_star_gamma;
    from_blocks.view_mut((0, 0), (g, g)).copy_from(&(&gb.a_gamma + &gb.a_gamma_star));
    from_blocks.view_mut((0, g), (g, g)).copy_from(&bsum.transpose());
    from_blocks.view_mut((g, 0), (g, g)).copy_from(&bsum);
    from_blocks.view_mut((g, g), (g, g)).copy_from(&(&gb.c_gamma + &gb.c_gamma_star));
    let avg: Vec<Vec<C64>> = hb.alpha_diamond.iter().map(|a| crate::calculus::average1(cx, a)).collect();
    let by_average = DMatrix::from_fn(2 * g, 2 * g, |k, l| raw_product(cx, &avg[k], &avg[l]).re);
    let by_faces = DMatrix::from_fn(2 * g, 2 * g, |k, l| face_formula(cx, &hb.alpha_diamond[k], &hb.alpha_diamond[l]).re);
    let determinant = from_blocks.determinant();
    DiamondGram { from_blocks, by_average, by_faces, determinant }
}

/// `¼ Σ_F sᵀ M s̄` with `s` the four side integrals and `M` the ρ, ρ* weight matrix.
pub fn face_formula(cx: &QuadComplex, a: &[C64], b: &[C64]) -> C64 {
    let mut total = ZERO;
    for q in 0..cx.n_faces() {
        let (r, rs) = (cx.rho(q), 1.0 / cx.rho(q));
        let m = [
            [r + rs, r - rs, -r - rs, -r + rs],
            [r - rs, r + rs, -r + rs, -r - rs],
            [-r - rs, -r + rs, r + rs, r - rs],
            [-r + rs, -r - rs, r - rs, r + rs],
        ];
        let sa = [0, 1, 2, 3].map(|k| cx.side_value(a, q, k));
        let sb = [0, 1, 2, 3].map(|k| cx.side_value(b, q, k).conj());
        for i in 0..4 {
            for j in 0..4 {
                total += 0.25 * sa[i] * m[i][j] * sb[j];
            }
        }
    }
    total
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplittingReport {
    pub condition: f64,
    pub orthogonality: f64,
}

/// Splitting of harmonic forms into equal-holonomy and orthogonal parts.
pub fn h1_splitting(cx: &QuadComplex, hb: &HarmonicBasis, gb: &GramBlocks) -> SplittingReport {
    let g = hb.genus;
    let mut m = RMat::zeros(4 * g, 4 * g);
    let id = RMat::identity(g, g);
    let bt_diff = (&gb.b_gamma_gamma_star - &gb.b_gamma_star_gamma).transpose();
    let bt_sum = (&gb.b_gamma_gamma_star + &gb.b_gamma_star_gamma).transpose();
    let put = |m: &mut RMat, r: usize, c: usize, b: &RMat| m.view_mut((r * g, c * g), (g, g)).copy_from(b);
    put(&mut m, 0, 0, &id);
    put(&mut m, 0, 2, &bt_diff);
    put(&mut m, 0, 3, &(&gb.a_gamma - &gb.a_gamma_star));
    put(&mut m, 1, 1, &id);
    put(&mut m, 1, 2, &(&gb.c_gamma - &gb.c_gamma_star));
    put(&mut m, 1, 3, &(&gb.b_gamma_gamma_star - &gb.b_gamma_star_gamma));
    put(&mut m, 2, 2, &bt_sum);
    put(&mut m, 2, 3, &(&gb.a_gamma + &gb.a_gamma_star));
    put(&mut m, 3, 2, &(&gb.c_gamma + &gb.c_gamma_star));
    put(&mut m, 3, 3, &(&gb.b_gamma_gamma_star + &gb.b_gamma_star_gamma));
    let idx: Vec<usize> = (0..g).chain(2 * g..3 * g).collect();
    let par: Vec<Vec<C64>> =
        idx.iter().map(|&k| hb.alpha[k].iter().zip(&hb.alpha[k + g]).map(|(a, b)| a + b).collect()).collect();
    let perp: Vec<Vec<C64>> = idx
        .iter()
        .map(|&k| {
            let d: Vec<C64> = hb.alpha[k].iter().zip(&hb.alpha[k + g]).map(|(a, b)| a - b).collect();
            star1(cx, &d)
        })
        .collect();
    let mut orth: f64 = 0.0;
    for p in &par {
        for q in &perp {
            let s = raw_product(cx, p, q).norm() / (raw_product(cx, p, p).norm() * raw_product(cx, q, q).norm()).sqrt();
            orth = orth.max(s);
        }
    }
    SplittingReport { condition: condition(&m), orthogonality: orth }
}
