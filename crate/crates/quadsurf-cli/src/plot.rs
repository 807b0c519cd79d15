//! Static SVG of an embedded patch with one scalar per vertex.

use quadsurf::{QuadComplex, C64};
use std::fmt::Write;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 20.0;

/// Colour ramp from dark blue through green to yellow, `t` in [0, 1].
fn ramp(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let x = t * (STOPS.len() - 1) as f64;
    let i = (x.floor() as usize).min(STOPS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (STOPS[i], STOPS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Quads filled by the mean of their vertex values; non-finite values are skipped.
pub fn patch_svg(cx: &QuadComplex, z: &[C64], values: &[f64], title: &str) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in z {
        x0 = x0.min(p.re);
        x1 = x1.max(p.re);
        y0 = y0.min(p.im);
        y1 = y1.max(p.im);
    }
    let scale = (SIZE - 2.0 * MARGIN) / (x1 - x0).max(y1 - y0).max(1e-300);
    let px = |p: C64| (MARGIN + (p.re - x0) * scale, SIZE - MARGIN - (p.im - y0) * scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{h}" viewBox="0 0 {SIZE} {h}">"#,
        h = SIZE + 40.0
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    for q in 0..cx.n_faces() {
        let v = cx.quad(q);
        let m = v.iter().map(|&i| values[i]).sum::<f64>() / 4.0;
        let (r, g, b) = if m.is_finite() { ramp((m - lo) / span) } else { (200, 200, 200) };
        let pts: Vec<String> = v
            .iter()
            .map(|&i| {
                let (x, y) = px(z[i]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="#{r:02x}{g:02x}{b:02x}" stroke="#333" stroke-width="0.3"/>"##,
            pts.join(" ")
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{y}" font-family="sans-serif" font-size="13">{} [{lo:.4e}, {hi:.4e}]</text>"#,
        escape(title),
        y = SIZE + 25.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_ends() {
        assert_eq!(ramp(0.0), (68, 1, 84));
        assert_eq!(ramp(1.0), (253, 231, 37));
        assert_eq!(ramp(f64::NAN), (68, 1, 84));
    }
}
