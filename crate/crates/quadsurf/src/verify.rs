//! Invariant suites shared by the command line, the bindings and the tests.
//!
//! Each suite returns a list of [`Check`]s. A check records the measured
//! value, the bound and how they compare; validation failures (bad input)
//! are kept apart from numerical ones so callers can pick an exit code.

use crate::calculus::{
    d1, divergence, energies, hodge_decompose, hodge_star, integrate, scalar_product, wedge_hetero,
};
use crate::cellular::{Chain, Cochain, ComplexTag, QuadComplex};
use crate::critical::{
    check_critical, exp_all, exp_edge_residual, exp_series, growth_bound_ratio, CriticalMap, Monomials, SERIES_CAP,
};
use crate::error::{Error, Result};
use crate::homology::HarmonicBasis;
use crate::integrable::{
    backlund_roundtrip, cross_ratio_residual, cube_consistency, epsg_residual, hirota_from_function,
    hirota_integrate, tangent_exponential, zero_curvature, BacklundKind, Lax, LAMBDA_SAMPLES,
};
use crate::linalg::{rank, RMat};
use crate::periods::{
    bilinear_lambda, compute_periods, harmonic_norm_identity, random_closed_lambda, GramBlocks, PeriodData,
};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Structure,
    Dec,
    Bilinear,
    Periods,
    Exp,
    Integrable,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Structure, Suite::Dec, Suite::Bilinear, Suite::Periods, Suite::Exp, Suite::Integrable];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Structure => "structure",
            Suite::Dec => "dec",
            Suite::Bilinear => "bilinear",
            Suite::Periods => "periods",
            Suite::Exp => "exp",
            Suite::Integrable => "integrable",
        }
    }

    /// Suites that make sense on this complex: the closed-surface ones on
    /// closed complexes, the critical ones on embedded patches.
    pub fn applicable(cx: &QuadComplex) -> Vec<Suite> {
        let mut out = vec![Suite::Structure];
        if cx.is_closed() {
            out.extend([Suite::Dec, Suite::Bilinear, Suite::Periods]);
        } else if cx.z().is_some() {
            out.extend([Suite::Exp, Suite::Integrable]);
        }
        out
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Validation,
    Numerical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Above,
    #[serde(rename = "==")]
    Equals,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub kind: CheckKind,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn new(suite: Suite, name: &str, kind: CheckKind, value: f64, relation: Relation, bound: f64) -> Check {
        let pass = match relation {
            Relation::AtMost => value <= bound,
            Relation::Above => value > bound,
            Relation::Equals => value == bound,
        };
        Check { suite, name: name.to_string(), kind, value, relation, bound, pass }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteError {
    pub suite: Suite,
    pub kind: CheckKind,
    pub message: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
    /// Suites that could not run.
    pub errors: Vec<SuiteError>,
}

impl Report {
    pub fn pass(&self) -> bool {
        self.errors.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn validation_failed(&self) -> bool {
        self.checks.iter().any(|c| !c.pass && c.kind == CheckKind::Validation)
            || self.errors.iter().any(|e| e.kind == CheckKind::Validation)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Sink<'a> {
    suite: Suite,
    out: &'a mut Vec<Check>,
}

impl Sink<'_> {
    fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.out.push(Check::new(self.suite, name, CheckKind::Numerical, value, Relation::AtMost, bound));
    }
    fn above(&mut self, name: &str, value: f64, bound: f64) {
        self.out.push(Check::new(self.suite, name, CheckKind::Numerical, value, Relation::Above, bound));
    }
    fn equals(&mut self, name: &str, value: f64, want: f64) {
        self.out.push(Check::new(self.suite, name, CheckKind::Numerical, value, Relation::Equals, want));
    }
}

/// Run the given suites; a suite that cannot start is recorded in `errors`.
pub fn run(cx: &QuadComplex, suites: &[Suite], seed: u64) -> Report {
    let mut report = Report::default();
    for &s in suites {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (s as u64) << 32);
        let mut sink = Sink { suite: s, out: &mut report.checks };
        let r = match s {
            Suite::Structure => {
                structure(cx, &mut sink);
                Ok(())
            }
            Suite::Dec => dec(cx, &mut sink, &mut rng),
            Suite::Bilinear => bilinear(cx, &mut sink, &mut rng),
            Suite::Periods => periods(cx, &mut sink),
            Suite::Exp => exp(cx, &mut sink, &mut rng),
            Suite::Integrable => integrable(cx, &mut sink, &mut rng),
        };
        if let Err(e) = r {
            let kind = if e.is_input() { CheckKind::Validation } else { CheckKind::Numerical };
            report.errors.push(SuiteError { suite: s, kind, message: e.to_string() });
        }
    }
    report
}

fn structure(cx: &QuadComplex, sink: &mut Sink) {
    let v = cx.validate();
    let mut kinds: Vec<String> = v.iter().map(|x| format!("{:?}", x.kind).to_lowercase()).collect();
    kinds.sort();
    kinds.dedup();
    let mut push = |name: &str, n: usize| {
        sink.out.push(Check::new(Suite::Structure, name, CheckKind::Validation, n as f64, Relation::Equals, 0.0));
    };
    push("violations", v.len());
    for k in kinds {
        push(&format!("violations.{k}"), v.iter().filter(|x| format!("{:?}", x.kind).to_lowercase() == k).count());
    }
}

fn crand(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// Small integers so that `d²` and `∂²` are evaluated without rounding.
fn int_cochain(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-9..=9) as f64, rng.gen_range(-9..=9) as f64)).collect()
}

fn max_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Dimension of the harmonic Λ 1-forms: kernel of `d` stacked on `d*`.
pub fn harmonic_dimension(cx: &QuadComplex) -> usize {
    let ne = cx.n_lambda_edges();
    let nv = cx.n_vertices();
    let mut m = RMat::zeros(2 * nv, ne);
    let mut unit = vec![C64::new(0.0, 0.0); ne];
    for k in 0..ne {
        unit[k] = C64::new(1.0, 0.0);
        for (i, v) in d1(cx, &unit).iter().enumerate() {
            m[(i, k)] = v.re;
        }
        for (i, v) in divergence(cx, &unit).iter().enumerate() {
            m[(nv + i, k)] = v.re;
        }
        unit[k] = C64::new(0.0, 0.0);
    }
    ne - rank(&m, 1e-10)
}

fn dec(cx: &QuadComplex, sink: &mut Sink, rng: &mut ChaCha8Rng) -> Result<()> {
    if !cx.is_closed() {
        return Err(Error::NotClosed("dec suite needs a closed surface".into()));
    }
    // d² and ∂²
    let mut dd: f64 = 0.0;
    let mut bb: i64 = 0;
    for tag in [ComplexTag::Lambda, ComplexTag::Diamond] {
        let f = Cochain::new(0, tag, int_cochain(rng, cx.cell_count(tag, 0)));
        dd = dd.max(cx.coboundary(&cx.coboundary(&f)?)?.max_abs());
        let coeffs: Vec<i64> = (0..cx.cell_count(tag, 2)).map(|_| rng.gen_range(-9..=9)).collect();
        let c = Chain { degree: 2, tag, coeffs };
        let b2 = cx.boundary(&cx.boundary(&c)?)?;
        bb = bb.max(b2.coeffs.iter().map(|x| x.abs()).max().unwrap_or(0));
    }
    sink.equals("d_squared", dd, 0.0);
    sink.equals("boundary_squared", bb as f64, 0.0);
    // *² = (−1)^k
    let mut ss: f64 = 0.0;
    for k in 0..=2 {
        let n = cx.cell_count(ComplexTag::Lambda, k);
        let a = Cochain::new(k, ComplexTag::Lambda, (0..n).map(|_| crand(rng)).collect());
        let s2 = hodge_star(cx, &hodge_star(cx, &a)?)?;
        let sign = if k == 1 { -1.0 } else { 1.0 };
        let r = s2.values.iter().zip(&a.values).map(|(x, y)| (x - sign * y).norm()).fold(0.0, f64::max);
        ss = ss.max(r);
    }
    sink.at_most("star_squared", ss, 1e-14);
    // (α, β) = ∬ α ∧ *β̄
    let ne = cx.n_lambda_edges();
    let mut sp: f64 = 0.0;
    for _ in 0..10 {
        let a = Cochain::new(1, ComplexTag::Lambda, (0..ne).map(|_| crand(rng)).collect());
        let b = Cochain::new(1, ComplexTag::Lambda, (0..ne).map(|_| crand(rng)).collect());
        let lhs = scalar_product(cx, &a, &b)?;
        let rhs = integrate(&wedge_hetero(cx, &a, &hodge_star(cx, &b.conj())?)?);
        let scale = (scalar_product(cx, &a, &a)?.re * scalar_product(cx, &b, &b)?.re).sqrt();
        sp = sp.max((lhs - rhs).norm() / scale);
    }
    sink.at_most("scalar_product_wedge", sp, 1e-12);
    // E_C = E_D − 𝒜
    let mut en: f64 = 0.0;
    for _ in 0..100 {
        let f = Cochain::new(0, ComplexTag::Lambda, (0..cx.n_vertices()).map(|_| crand(rng)).collect());
        en = en.max(energies(cx, &f)?.identity_residual());
    }
    sink.at_most("energy_identity", en, 1e-12);
    // Hodge decomposition
    let mut orth: f64 = 0.0;
    let mut recon: f64 = 0.0;
    let mut harm: f64 = 0.0;
    for _ in 0..3 {
        let a = Cochain::new(1, ComplexTag::Lambda, (0..ne).map(|_| crand(rng)).collect());
        let h = hodge_decompose(cx, &a)?;
        let parts = [&h.exact, &h.coexact, &h.harmonic];
        for i in 0..3 {
            for j in i + 1..3 {
                let nij = scalar_product(cx, parts[i], parts[j])?.norm();
                let ni = scalar_product(cx, parts[i], parts[i])?.re;
                let nj = scalar_product(cx, parts[j], parts[j])?.re;
                if ni > 0.0 && nj > 0.0 {
                    orth = orth.max(nij / (ni * nj).sqrt());
                }
            }
        }
        let sum: Vec<C64> = (0..ne).map(|k| a.values[k] - parts.iter().map(|p| p.values[k]).sum::<C64>()).collect();
        recon = recon.max(max_norm(&sum) / a.max_abs());
        let (c, dv) = (d1(cx, &h.harmonic.values), divergence(cx, &h.harmonic.values));
        harm = harm.max(max_norm(&c).max(max_norm(&dv)) / a.max_abs());
    }
    sink.at_most("hodge_orthogonality", orth, 1e-10);
    sink.at_most("hodge_reconstruction", recon, 1e-10);
    sink.at_most("hodge_harmonic_part", harm, 1e-10);
    let g = cx.genus().ok_or_else(|| Error::NotClosed("genus undefined".into()))?;
    sink.equals("harmonic_dimension", harmonic_dimension(cx) as f64, (4 * g) as f64);
    Ok(())
}

fn bilinear(cx: &QuadComplex, sink: &mut Sink, rng: &mut ChaCha8Rng) -> Result<()> {
    let hb = HarmonicBasis::canonical(cx)?;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t = random_closed_lambda(cx, &hb, rng);
        let tp = random_closed_lambda(cx, &hb, rng);
        let r = bilinear_lambda(cx, &hb, &t, &tp)?;
        let scale = C64::new(r.lhs[0], r.lhs[1]).norm().max(1.0);
        worst = worst.max(r.residual / scale);
    }
    sink.at_most("bilinear_closed_pairs", worst, 1e-9);
    let mut norm_id: f64 = 0.0;
    for _ in 0..5 {
        let coeffs: Vec<C64> = (0..hb.alpha.len()).map(|_| crand(rng)).collect();
        let t: Vec<C64> = (0..cx.n_lambda_edges()).map(|e| (0..coeffs.len()).map(|k| coeffs[k] * hb.alpha[k][e]).sum()).collect();
        let r = harmonic_norm_identity(cx, &hb, &t)?;
        norm_id = norm_id.max(r.residual / r.lhs[0].abs().max(1.0));
    }
    sink.at_most("harmonic_norm_identity", norm_id, 1e-9);
    Ok(())
}

fn periods(cx: &QuadComplex, sink: &mut Sink) -> Result<()> {
    let (_, gb, pd) = compute_periods(cx)?;
    sink.out.extend(period_checks(&gb, &pd));
    Ok(())
}

/// Residual checks on an already computed period matrix.
pub fn period_checks(gb: &GramBlocks, pd: &PeriodData) -> Vec<Check> {
    let mut out = Vec::new();
    let mut sink = Sink { suite: Suite::Periods, out: &mut out };
    let r = &pd.residuals;
    let gr = gb.report();
    sink.at_most("gram_by_periods", gr.discrepancy, 1e-9);
    sink.at_most("gram_symmetry", gr.symmetry, 1e-9);
    sink.above("gram_min_eigenvalue", gr.min_eigenvalue, 0.0);
    sink.at_most("gram_block_structure", gr.block_structure, 1e-9);
    sink.at_most("star_identities", gr.star_identities, 1e-9);
    sink.at_most("pi_normalization", r.normalization, 1e-8);
    sink.at_most("pi_formula", r.formula, 1e-8);
    sink.at_most("pi_symmetry", r.symmetry, 1e-8);
    sink.above("pi_min_imag_eigenvalue", r.min_imag_eigenvalue, 0.0);
    sink.at_most("pi_block_structure", r.block_structure, 1e-10);
    sink.at_most("zeta_holomorphic", r.holomorphic, 1e-8);
    sink.at_most("zeta_closed", r.closed, 1e-8);
    sink.at_most("real_imag_split", r.real_imag_split, 1e-8);
    sink.at_most("second_solve", r.second_solve, 1e-6);
    sink.at_most("star_matrix", r.star_matrix, 1e-8);
    out
}

/// Series-against-rational checks use every `stride`-th vertex.
fn exp(cx: &QuadComplex, sink: &mut Sink, rng: &mut ChaCha8Rng) -> Result<()> {
    let map = check_critical(cx)?;
    let one = C64::new(1.0, 0.0);
    let lambdas: Vec<C64> = (0..20).map(|_| C64::from_polar(rng.gen_range(0.0..1.8), rng.gen_range(0.0..2.0 * PI))).collect();
    let (mut edge, mut inv): (f64, f64) = (0.0, 0.0);
    for &l in lambdas.iter().take(5) {
        let a = exp_all(&map, cx, l)?;
        let b = exp_all(&map, cx, -l)?;
        edge = edge.max(exp_edge_residual(&map, cx, l, &a));
        inv = inv.max(a.iter().zip(&b).map(|(x, y)| (x * y - one).norm()).fold(0.0, f64::max));
    }
    sink.at_most("exp_edge_relation", edge, 1e-12);
    sink.at_most("exp_times_exp_minus", inv, 1e-12);
    let mono = Monomials::new(&map, cx, SERIES_CAP)?;
    let mut series: f64 = 0.0;
    let mut unconverged = 0usize;
    for &l in &lambdas {
        let exact = exp_all(&map, cx, l)?;
        for v in 0..map.n_vertices() {
            let s = exp_series(&map, &mono, l, v)?;
            if !s.converged {
                unconverged += 1;
            }
            series = series.max((s.value - exact[v]).norm() / exact[v].norm().max(1.0));
        }
    }
    sink.at_most("series_vs_rational", series, 1e-10);
    sink.equals("series_unconverged", unconverged as f64, 0.0);
    let mut growth: f64 = 0.0;
    for a in [1.5, 2.0, 3.0] {
        growth = growth.max(growth_bound_ratio(&map, &mono, a, 40));
    }
    sink.at_most("growth_bound_ratio", growth, 1.0);
    let sq = (0..map.n_vertices()).map(|v| (mono.value(2, v) - map.z[v] * map.z[v]).norm()).fold(0.0, f64::max);
    sink.at_most("z2_equals_square", sq, 1e-12);
    Ok(())
}

fn mobius(z: &[C64]) -> Vec<C64> {
    let (a, b, c, d) = (C64::new(1.0, 0.5), C64::new(0.2, -1.0), C64::new(0.05, 0.02), C64::new(1.0, 0.3));
    z.iter().map(|z| (a * z + b) / (c * z + d)).collect()
}

/// Spectral parameter with `0.5 ≤ |λ|/δ ≤ 2.5`, at least `δ/4` away from
/// every edge step, where the edge maps have their poles.
pub fn generic_lambda(map: &CriticalMap, rng: &mut impl Rng) -> C64 {
    loop {
        let l = C64::from_polar(map.delta * rng.gen_range(0.5..2.5), rng.gen_range(0.0..2.0 * PI));
        let near = map.directions.iter().any(|d| (l - d * map.delta).norm() < 0.25 * map.delta || (l + d * map.delta).norm() < 0.25 * map.delta);
        if !near {
            return l;
        }
    }
}

fn critical_patch(cx: &QuadComplex) -> Result<CriticalMap> {
    let map = check_critical(cx)?;
    if !map.open {
        return Err(Error::InvalidParameter("integrable suite runs on open critical patches".into()));
    }
    Ok(map)
}

fn integrable(cx: &QuadComplex, sink: &mut Sink, rng: &mut ChaCha8Rng) -> Result<()> {
    let map = critical_patch(cx)?;
    let lin = Monomials::new(&map, cx, 3)?.cochain(3).values;
    let mut rt: f64 = 0.0;
    for _ in 0..10 {
        let l = generic_lambda(&map, rng);
        let u = crand(rng) * 2.0;
        rt = rt.max(backlund_roundtrip(cx, &lin, l, u, BacklundKind::Linear)?);
    }
    sink.at_most("backlund_roundtrip", rt, 1e-10);
    let mut cube: f64 = 0.0;
    for kind in [BacklundKind::Linear, BacklundKind::Quadratic] {
        for _ in 0..50 {
            cube = cube.max(cube_consistency(kind, rng)?);
        }
    }
    sink.at_most("cube_consistency", cube, 1e-10);
    let f = mobius(&map.z);
    let w = hirota_from_function(cx, &f, C64::new(0.7, 0.2))?;
    let g = hirota_integrate(cx, &w)?;
    sink.at_most("hirota_cross_ratio", cross_ratio_residual(cx, &g)?.max_cross_ratio(), 1e-10);
    let ls: Vec<C64> = LAMBDA_SAMPLES.iter().map(|&l| C64::new(l, 0.0)).collect();
    let mut zc: f64 = 0.0;
    for z in zero_curvature(cx, &Lax::Linear(&map.z), &ls).into_iter().chain(zero_curvature(cx, &Lax::Hirota(&w), &ls)) {
        zc = zc.max(z.face_gap);
    }
    sink.at_most("zero_curvature_face", zc, 1e-10);
    let seed: Vec<C64> = map.z.iter().map(|z| z * 0.5 + 1.0).collect();
    let t = tangent_exponential(cx, &seed, C64::new(2.5, 0.7), C64::new(0.3, 0.1), BacklundKind::Linear)?;
    sink.at_most("tangent_kernel", t.kernel_residual, 1e-6);
    sink.at_most("epsg", epsg_residual(cx, &seed, &t.values), 1e-6);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellular::generate_square_torus;

    #[test]
    fn suites_parse() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn torus_passes_closed_suites() {
        let cx = generate_square_torus(1, 2, PI / 3.0).unwrap();
        let r = run(&cx, &Suite::applicable(&cx), 7);
        assert!(r.pass(), "{:?} {:?}", r.failures(), r.errors);
        assert_eq!(r.get("harmonic_dimension").unwrap().value, 4.0);
    }

    #[test]
    fn tampered_rho_fails_validation() {
        let cx = generate_square_torus(1, 1, PI / 4.0).unwrap();
        let mut j: serde_json::Value = serde_json::from_str(&cx.to_json()).unwrap();
        let q = cx.quad(0);
        j["rho"].as_array_mut().unwrap().push(serde_json::json!({"edge": [q[1], q[3]], "value": 7.5, "quad": 0}));
        let bad = QuadComplex::from_json(&j.to_string()).unwrap();
        let r = run(&bad, &[Suite::Structure], 0);
        assert!(r.validation_failed());
        assert_eq!(r.get("violations.reciprocity").unwrap().value, 1.0);
    }
}
