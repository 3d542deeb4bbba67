//! Minimal SVG line charts.

use std::fmt::Write as _;

use crate::sweep::Trend;

const W: f64 = 640.0;
const H: f64 = 420.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// `log10(median e_rec)` against `T`, one polyline per noise level.
pub fn trend_chart(trends: &[Trend]) -> String {
    let points: Vec<(f64, f64)> = trends
        .iter()
        .flat_map(|t| t.times.iter().zip(&t.median_e_rec).map(|(x, y)| (*x, *y)))
        .filter(|(_, y)| *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x, y.log10()))
        .collect();
    let (x0, x1) = bounds(points.iter().map(|p| p.0));
    let (y0, y1) = bounds(points.iter().map(|p| p.1));
    let y0 = y0.floor();
    let y1 = y1.ceil().max(y0 + 1.0);
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#, H - PAD, W - PAD).unwrap();
    let mut d = y0;
    while d <= y1 + 1e-9 {
        let y = sy(d);
        writeln!(s, r#"<text x="{}" y="{:.1}" font-size="12" text-anchor="end">1e{d}</text>"#, PAD - 6.0, y + 4.0)
            .unwrap();
        writeln!(s, r##"<path d="M{PAD} {y:.1} H{}" stroke="#ddd"/>"##, W - PAD).unwrap();
        d += 1.0;
    }
    if let Some(t) = trends.first() {
        for x in &t.times {
            writeln!(
                s,
                r#"<text x="{:.1}" y="{}" font-size="12" text-anchor="middle">{x}</text>"#,
                sx(*x),
                H - PAD + 18.0
            )
            .unwrap();
        }
    }
    writeln!(s, r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">T</text>"#, W / 2.0, H - 12.0).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" transform="rotate(-90 16 {})" text-anchor="middle">median e_rec</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();
    for (i, t) in trends.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = t
            .times
            .iter()
            .zip(&t.median_e_rec)
            .filter(|(_, y)| **y > 0.0 && y.is_finite())
            .map(|(x, y)| format!("{:.1},{:.1}", sx(*x), sy(y.log10())))
            .collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" ")).unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">sigma_rel = {}</text>"#,
            W - PAD - 120.0,
            PAD + 16.0 * (i as f64 + 1.0),
            t.sigma_rel
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_polyline_per_noise_level() {
        let trend = |s: f64| Trend {
            sigma_rel: s,
            times: vec![2.0, 4.0, 8.0],
            median_e_rec: vec![0.9, 0.3, f64::NAN],
            spearman: -1.0,
        };
        let svg = trend_chart(&[trend(1e-3), trend(1e-2)]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn empty_input_still_renders() {
        assert!(trend_chart(&[]).contains("</svg>"));
    }
}
