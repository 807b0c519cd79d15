//! `quadsurf` command line.
//!
//! Exit codes: 0 when everything passes, 1 for bad input or failed
//! validation, 2 when a numerical tolerance is missed.

mod plot;

use clap::{Args, Parser, Subcommand, ValueEnum};
use quadsurf::cellular::{
    cycles_max_entry, generate_origami, generate_rhombic_patch, generate_square_torus, generate_trihex_torus,
    permutation_from_cycles, PatchShape, PatchStyle,
};
use quadsurf::critical::{
    check_critical, exp_all, exp_edge_residual, exp_series, green_function, monomial_convergence, ratios,
    CriticalMap, GreenParams, Monomials, SERIES_CAP,
};
use quadsurf::homology::HarmonicBasis;
use quadsurf::integrable::{
    backlund, backlund_roundtrip, cross_ratio_residual, hirota_from_function, hirota_integrate, hirota_residual,
    BacklundKind,
};
use quadsurf::periods::{compute_periods, periods_json};
use quadsurf::verify::{self, period_checks, Suite};
use quadsurf::{Cochain, ComplexTag, Error, QuadComplex, C64};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "quadsurf", version, about = "Discrete Riemann surfaces on quad-graphs")]
struct Cli {
    /// Worker threads for parallel steps.
    #[arg(long, global = true, env = "DRS_THREADS")]
    threads: Option<usize>,
    /// Seed for every random sample.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a complex and write it as JSON.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Harmonic, holomorphic and period data of a closed surface.
    Periods {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Canonical cycles and the dual harmonic Λ 1-forms.
    HarmonicBasis {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run invariant suites and report every residual.
    Verify {
        input: PathBuf,
        /// Suite name, or `all` for every suite that applies to the input.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Discrete exponential on a critical patch.
    Exp {
        #[command(flatten)]
        patch: PatchArg,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        lambda: C64,
        /// Also sum the monomial series and report its gap.
        #[arg(long)]
        series: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Green function by contour quadrature.
    Green {
        #[command(flatten)]
        patch: PatchArg,
        /// Quadrature nodes; the check uses twice as many.
        #[arg(long, default_value_t = 4096)]
        nodes: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Bäcklund transform of a seed function.
    Backlund {
        #[command(flatten)]
        patch: PatchArg,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex)]
        lambda: C64,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, default_value = "0")]
        u: C64,
        #[arg(long, value_enum, default_value_t = Kind::Linear)]
        kind: Kind,
        /// Seed function; defaults to `z3` for linear and `mobius` for quadratic.
        #[arg(long, value_enum)]
        base: Option<Base>,
        /// Apply the inverse transform and report the error.
        #[arg(long)]
        roundtrip: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Hirota field of a seed function and its integration back.
    Hirota {
        #[command(flatten)]
        patch: PatchArg,
        #[arg(long, value_enum, default_value_t = Base::Mobius)]
        base: Base,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_complex, default_value = "1")]
        w0: C64,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Convergence of `Z^{:k:}` to `z^k` on the unit disk for `δ = 2^{-level}`.
    Convergence {
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        from: u32,
        #[arg(long, default_value_t = 6)]
        to: u32,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Critical square lattice torus with periods 2p e^{-iθ} and 2q e^{iθ}.
    SquareTorus {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        q: usize,
        /// Angle in radians.
        #[arg(long)]
        theta: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Triangular/hexagonal torus.
    Trihex {
        #[arg(long, default_value_t = 2)]
        rows: usize,
        #[arg(long, default_value_t = 3)]
        cols: usize,
        /// Three weights `r1,r2,r3`; default is the equilateral choice.
        #[arg(long, value_delimiter = ',')]
        rho: Option<Vec<f64>>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Square-tiled surface from two permutations.
    Origami {
        /// Right-neighbour permutation in 1-based cycle notation.
        #[arg(long)]
        h: String,
        /// Top-neighbour permutation in 1-based cycle notation.
        #[arg(long)]
        v: String,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Planar critical patch around the origin.
    RhombicPatch {
        #[arg(long, value_enum, default_value_t = Style::Square)]
        style: Style,
        #[arg(long, conflicts_with = "rect")]
        radius: Option<f64>,
        /// Lattice rectangle `m0,m1,n0,n1`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        rect: Option<Vec<i64>>,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PatchArg {
    /// Critical patch; a square disk of radius 6 when omitted.
    #[arg(long)]
    patch: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Style {
    Square,
    Trihex,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Linear,
    Quadratic,
}

impl From<Kind> for BacklundKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Linear => BacklundKind::Linear,
            Kind::Quadratic => BacklundKind::Quadratic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Base {
    Z,
    Z3,
    Mobius,
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

type Out = Result<(), Failure>;

fn parse_complex(s: &str) -> Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|_| format!("'{s}' is not a complex number `re,im`"));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("'{s}' is not a complex number `re,im`")),
    }
}

fn read_complex(path: &Path) -> Result<QuadComplex, Failure> {
    let s = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(QuadComplex::from_json(&s)?)
}

fn write_out(path: &Path, contents: &str) -> Out {
    std::fs::write(path, contents).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Write `body` to `output`, or print it when no file is given.
fn emit(output: &Option<PathBuf>, body: &str) -> Out {
    match output {
        Some(p) => write_out(p, body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn c2(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn load_patch(p: &PatchArg) -> Result<(QuadComplex, CriticalMap), Failure> {
    let cx = match &p.patch {
        Some(path) => read_complex(path)?,
        None => generate_rhombic_patch(PatchShape::Disk { radius: 6.0 }, 1.0, PatchStyle::Square)?,
    };
    let map = check_critical(&cx)?;
    Ok((cx, map))
}

fn base_function(map: &CriticalMap, cx: &QuadComplex, base: Base) -> Result<Vec<C64>, Failure> {
    Ok(match base {
        Base::Z => map.z.clone(),
        Base::Z3 => Monomials::new(map, cx, 3)?.cochain(3).values,
        Base::Mobius => {
            let (a, b, c, d) = (C64::new(1.0, 0.5), C64::new(0.2, -1.0), C64::new(0.05, 0.02), C64::new(1.0, 0.3));
            map.z.iter().map(|z| (a * z + b) / (c * z + d)).collect()
        }
    })
}

fn table(map: &CriticalMap, cols: &[(&str, &[C64])]) -> String {
    let mut s = String::from("vertex,re_z,im_z");
    for (name, _) in cols {
        s.push_str(&format!(",re_{name},im_{name}"));
    }
    s.push('\n');
    for v in 0..map.n_vertices() {
        s.push_str(&format!("{v},{},{}", map.z[v].re, map.z[v].im));
        for (_, c) in cols {
            s.push_str(&format!(",{},{}", c[v].re, c[v].im));
        }
        s.push('\n');
    }
    s
}

fn maybe_plot(plot: &Option<PathBuf>, cx: &QuadComplex, map: &CriticalMap, values: &[f64], title: &str) -> Out {
    match plot {
        Some(p) => write_out(p, &plot::patch_svg(cx, &map.z, values, title)),
        None => Ok(()),
    }
}

/// Print the summary line, then fail on the first `(name, value, bound)` above its bound.
fn tol_fail(summary: &serde_json::Value, limits: &[(&str, f64, f64)]) -> Out {
    println!("{}", serde_json::to_string(summary).expect("json value serializes"));
    match limits.iter().find(|(_, v, b)| !(v <= b)) {
        Some((what, v, b)) => Err(Failure::Numerical(format!("{what} = {v:.3e} exceeds {b:.1e}"))),
        None => Ok(()),
    }
}

fn gen(kind: GenKind) -> Out {
    let (cx, output) = match kind {
        GenKind::SquareTorus { p, q, theta, output } => (generate_square_torus(p, q, theta)?, output),
        GenKind::Trihex { rows, cols, rho, output } => {
            let r = match rho {
                Some(r) if r.len() == 3 => [r[0], r[1], r[2]],
                Some(_) => return Err(Failure::Input("--rho takes three weights r1,r2,r3".into())),
                None => [1.0 / 3f64.sqrt(); 3],
            };
            (generate_trihex_torus(rows, cols, r)?, output)
        }
        GenKind::Origami { h, v, rho, output } => {
            let n = cycles_max_entry(&h).max(cycles_max_entry(&v));
            let hp = permutation_from_cycles(&h, n)?;
            let vp = permutation_from_cycles(&v, n)?;
            (generate_origami(&hp, &vp, rho)?, output)
        }
        GenKind::RhombicPatch { style, radius, rect, delta, output } => {
            let shape = match (radius, rect) {
                (Some(r), None) => PatchShape::Disk { radius: r },
                (None, Some(r)) if r.len() == 4 => PatchShape::Rect { m0: r[0], m1: r[1], n0: r[2], n1: r[3] },
                (None, Some(_)) => return Err(Failure::Input("--rect takes m0,m1,n0,n1".into())),
                (None, None) => return Err(Failure::Input("rhombic-patch needs --radius or --rect".into())),
                (Some(_), Some(_)) => unreachable!("clap rejects both"),
            };
            let style = match style {
                Style::Square => PatchStyle::Square,
                Style::Trihex => PatchStyle::Trihex,
            };
            (generate_rhombic_patch(shape, delta, style)?, output)
        }
    };
    let v = cx.validate();
    if !v.is_empty() {
        return Err(Failure::Input(format!("generated complex is invalid: {}", v[0].detail)));
    }
    let mut body = cx.to_json();
    body.push('\n');
    emit(&output, &body)?;
    if output.is_some() {
        let s = json!({
            "vertices": cx.n_vertices(),
            "quads": cx.n_faces(),
            "closed": cx.is_closed(),
            "genus": cx.genus(),
        });
        println!("{s}");
    }
    Ok(())
}

fn periods(input: &Path, output: &Option<PathBuf>) -> Out {
    let cx = read_complex(input)?;
    let (_, gb, pd) = compute_periods(&cx)?;
    let checks = period_checks(&gb, &pd);
    let mut doc = periods_json(&gb, &pd);
    doc["checks"] = serde_json::to_value(&checks).expect("checks serialize");
    emit(output, &pretty(&doc))?;
    match checks.iter().find(|c| !c.pass) {
        Some(c) => Err(Failure::Numerical(format!("{} = {:.3e} misses its bound {:.1e}", c.name, c.value, c.bound))),
        None => Ok(()),
    }
}

fn harmonic_basis(input: &Path, output: &Option<PathBuf>) -> Out {
    let cx = read_complex(input)?;
    let hb = HarmonicBasis::canonical(&cx)?;
    let cochain = |v: &Vec<C64>, tag| Cochain::new(1, tag, v.clone()).to_json_value();
    let cycles: Vec<serde_json::Value> = hb
        .cycles
        .paths
        .iter()
        .map(|p| json!({ "vertices": p.vertices, "edges": p.edges }))
        .collect();
    let duality = hb.duality_residual();
    let doc = json!({
        "genus": hb.genus,
        "paths": cycles,
        "transform": hb.cycles.transform,
        "alpha": hb.alpha.iter().map(|a| cochain(a, ComplexTag::Lambda)).collect::<Vec<_>>(),
        "alpha_diamond": hb.alpha_diamond.iter().map(|a| cochain(a, ComplexTag::Diamond)).collect::<Vec<_>>(),
        "duality_residual": duality,
    });
    emit(output, &pretty(&doc))?;
    if duality <= 1e-8 {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("period duality residual {duality:.3e}")))
    }
}

fn run_verify(input: &Path, suite: &str, output: &Option<PathBuf>, seed: u64) -> Out {
    let cx = read_complex(input)?;
    let suites = if suite == "all" { Suite::applicable(&cx) } else { vec![suite.parse::<Suite>()?] };
    let report = verify::run(&cx, &suites, seed);
    let doc = json!({
        "input": input.display().to_string(),
        "seed": seed,
        "suites": suites,
        "pass": report.pass(),
        "checks": report.checks,
        "errors": report.errors,
    });
    emit(output, &pretty(&doc))?;
    if output.is_some() {
        for c in report.failures() {
            eprintln!("FAIL {}.{}: {:.3e}", c.suite, c.name, c.value);
        }
    }
    if report.pass() {
        Ok(())
    } else if report.validation_failed() {
        Err(Failure::Input("validation failed".into()))
    } else {
        Err(Failure::Numerical(format!("{} checks failed", report.failures().len() + report.errors.len())))
    }
}

fn exp(patch: &PatchArg, lambda: C64, series: bool, output: &Option<PathBuf>, plot: &Option<PathBuf>) -> Out {
    let (cx, map) = load_patch(patch)?;
    let e = exp_all(&map, &cx, lambda)?;
    let inv = exp_all(&map, &cx, -lambda)?;
    let edge = exp_edge_residual(&map, &cx, lambda, &e);
    let product = e.iter().zip(&inv).map(|(a, b)| (a * b - 1.0).norm()).fold(0.0, f64::max);
    let mut cols: Vec<(&str, &[C64])> = vec![("exp", &e)];
    let mut gap: Option<f64> = None;
    let sums: Vec<C64>;
    if series {
        let mono = Monomials::new(&map, &cx, SERIES_CAP)?;
        sums = (0..map.n_vertices())
            .map(|v| exp_series(&map, &mono, lambda, v).map(|r| r.value))
            .collect::<Result<_, _>>()?;
        gap = Some(
            sums.iter().zip(&e).map(|(s, x)| (s - x).norm() / x.norm().max(1.0)).fold(0.0, f64::max),
        );
        cols.push(("series", &sums));
    }
    emit(output, &table(&map, &cols))?;
    let logs: Vec<f64> = e.iter().map(|z| z.norm().log10()).collect();
    maybe_plot(plot, &cx, &map, &logs, &format!("log10 |e(λ)|, λ = {lambda}"))?;
    let summary = json!({
        "lambda": c2(lambda),
        "vertices": map.n_vertices(),
        "edge_residual": edge,
        "inverse_product_residual": product,
        "series_gap": gap,
    });
    tol_fail(
        &summary,
        &[("edge residual", edge, 1e-12), ("inverse product", product, 1e-12), ("series gap", gap.unwrap_or(0.0), 1e-10)],
    )
}

fn green(patch: &PatchArg, nodes: usize, output: &Option<PathBuf>, plot: &Option<PathBuf>) -> Out {
    if nodes < 16 {
        return Err(Failure::Input("--nodes must be at least 16".into()));
    }
    let (cx, map) = load_patch(patch)?;
    let params = GreenParams { nodes, ..Default::default() };
    let g = green_function(&map, &cx, &params)?;
    let lap = g.laplacian_residual(&map, &cx);
    emit(output, &g.to_csv(&map))?;
    let re: Vec<f64> = g.values.iter().map(|z| z.re).collect();
    maybe_plot(plot, &cx, &map, &re, "Re G")?;
    let summary = json!({
        "vertices": map.n_vertices(),
        "nodes": nodes,
        "laplacian_residual": lap,
        "refinement_gap": g.refinement_gap,
    });
    tol_fail(&summary, &[("laplacian residual", lap, 1e-6)])
}

#[allow(clippy::too_many_arguments)]
fn run_backlund(
    patch: &PatchArg,
    lambda: C64,
    u: C64,
    kind: Kind,
    base: Option<Base>,
    roundtrip: bool,
    output: &Option<PathBuf>,
    plot: &Option<PathBuf>,
) -> Out {
    let (cx, map) = load_patch(patch)?;
    let base = base.unwrap_or(match kind {
        Kind::Linear => Base::Z3,
        Kind::Quadratic => Base::Mobius,
    });
    let f = base_function(&map, &cx, base)?;
    let sheet = backlund(&cx, &f, lambda, u, kind.into())?;
    let rt = if roundtrip { Some(backlund_roundtrip(&cx, &f, lambda, u, kind.into())?) } else { None };
    emit(output, &table(&map, &[("f", &f), ("b", &sheet.values)]))?;
    let mods: Vec<f64> = sheet.values.iter().map(|z| z.norm()).collect();
    maybe_plot(plot, &cx, &map, &mods, &format!("|B(f)|, λ = {lambda}"))?;
    let summary = json!({
        "lambda": c2(lambda),
        "u": c2(u),
        "edge_residual": sheet.edge_residual,
        "roundtrip_error": rt,
    });
    tol_fail(&summary, &[("roundtrip error", rt.unwrap_or(0.0), 1e-10)])
}

fn hirota(patch: &PatchArg, base: Base, w0: C64, output: &Option<PathBuf>, plot: &Option<PathBuf>) -> Out {
    let (cx, map) = load_patch(patch)?;
    let f = base_function(&map, &cx, base)?;
    let w = hirota_from_function(&cx, &f, w0)?;
    let hr = hirota_residual(&cx, &w)?.into_iter().fold(0.0, f64::max);
    let g = hirota_integrate(&cx, &w)?;
    let cr = cross_ratio_residual(&cx, &g)?.max_cross_ratio();
    emit(output, &table(&map, &[("w", &w), ("f", &g)]))?;
    let args: Vec<f64> = w.iter().map(|z| z.arg()).collect();
    maybe_plot(plot, &cx, &map, &args, "arg w")?;
    let summary = json!({
        "vertices": map.n_vertices(),
        "hirota_residual": hr,
        "cross_ratio_residual": cr,
    });
    tol_fail(&summary, &[("hirota residual", hr, 1e-10), ("cross-ratio residual", cr, 1e-10)])
}

fn convergence(k: usize, from: u32, to: u32, output: &Option<PathBuf>) -> Out {
    if from >= to || k == 0 {
        return Err(Failure::Input("need k ≥ 1 and from < to".into()));
    }
    let levels: Vec<u32> = (from..=to).collect();
    let rows = monomial_convergence(k, &levels)?;
    let r = ratios(&rows);
    let mut s = String::from("level,delta,vertices,error,ratio\n");
    for (i, row) in rows.iter().enumerate() {
        let ratio = if i == 0 { String::new() } else { r[i - 1].to_string() };
        s.push_str(&format!("{},{},{},{},{}\n", levels[i], row.delta, row.vertices, row.error, ratio));
    }
    emit(output, &s)?;
    if output.is_some() {
        println!("{}", json!({ "k": k, "ratios": r }));
    }
    match r.iter().find(|x| !(3.0..=5.0).contains(*x)) {
        Some(x) => Err(Failure::Numerical(format!("error ratio {x:.3} outside [3, 5]"))),
        None => Ok(()),
    }
}

fn dispatch(cli: Cli) -> Out {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen { kind } => gen(kind),
        Command::Periods { input, output } => periods(&input, &output),
        Command::HarmonicBasis { input, output } => harmonic_basis(&input, &output),
        Command::Verify { input, suite, output } => run_verify(&input, &suite, &output, cli.seed),
        Command::Exp { patch, lambda, series, output, plot } => exp(&patch, lambda, series, &output, &plot),
        Command::Green { patch, nodes, output, plot } => green(&patch, nodes, &output, &plot),
        Command::Backlund { patch, lambda, u, kind, base, roundtrip, output, plot } => {
            run_backlund(&patch, lambda, u, kind, base, roundtrip, &output, &plot)
        }
        Command::Hirota { patch, base, w0, output, plot } => hirota(&patch, base, w0, &output, &plot),
        Command::Convergence { k, from, to, output } => convergence(k, from, to, &output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("tolerance failure: {m}");
            ExitCode::from(2)
        }
    }
}
