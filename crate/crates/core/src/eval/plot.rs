use std::fmt::Write as _;

use super::roc::RocCurve;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Minimal SVG line plot of ROC curves (FAR on a log axis from 1e-4 to 1).
pub fn roc_svg(curves: &[(&str, &RocCurve)]) -> String {
    let (w, h, m) = (480.0, 360.0, 50.0);
    let x_of = |far: f64| {
        let lf = far.max(1e-4).log10();
        m + (lf + 4.0) / 4.0 * (w - 2.0 * m)
    };
    let y_of = |vr: f64| h - m - vr * (h - 2.0 * m);
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#).ok();
    writeln!(s, r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * m, h - 2.0 * m).ok();
    for e in 0..=4 {
        let x = x_of(10f64.powi(e - 4));
        writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{}</text>"#, h - m + 15.0, e - 4).ok();
    }
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1}</text>"#, m - 5.0, y_of(v) + 4.0).ok();
    }
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">FAR</text>"#, w / 2.0, h - 12.0).ok();
    writeln!(s, r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})" text-anchor="middle">VR</text>"#, h / 2.0, h / 2.0).ok();
    for (i, (name, c)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        let mut prev_vr = 0.0;
        for p in &c.points {
            // step: horizontal then vertical
            write!(pts, "{:.2},{:.2} {:.2},{:.2} ", x_of(p.far), y_of(prev_vr), x_of(p.far), y_of(p.vr)).ok();
            prev_vr = p.vr;
        }
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.trim_end()).ok();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" fill="{color}">{name}</text>"#, m + 10.0, m + 15.0 + 14.0 * i as f64).ok();
    }
    s.push_str("</svg>\n");
    s
}
