//! Static SVG line charts of accuracy curves.

use std::fmt::Write;

use super::AccuracyCurve;

pub struct PlotSeries<'a> {
    pub label: &'a str,
    pub curve: &'a AccuracyCurve,
    pub color: &'a str,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 50.0;

/// Accuracy against t_prior with the time axis running right-to-left toward
/// the action, a dashed chance line and an optional vertical marker.
pub fn render_svg(series: &[PlotSeries], chance: Option<f64>, marker: Option<(f64, &str)>, title: &str) -> String {
    let t_max = series.iter().filter_map(|s| s.curve.t_prior.last().copied()).fold(0.0f64, f64::max).max(1e-9);
    let x = |t: f64| W - M - (t / t_max) * (W - 2.0 * M);
    let y = |a: f64| H - M - a * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(s, r#"<line x1="{M}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, H - M, W - M, H - M);
    let _ = writeln!(s, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{}" stroke="black"/>"#, H - M);
    for k in 0..=4 {
        let a = k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{a:.2}</text>"#, M - 6.0, y(a) + 4.0);
        let _ = writeln!(s, r##"<line x1="{M}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="#ddd"/>"##, y(a), W - M, y(a));
    }
    let ticks = t_max.ceil() as usize;
    for k in 0..=ticks {
        let t = k as f64;
        if t <= t_max + 1e-9 {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{t:.0}</text>"#, x(t), H - M + 16.0);
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t_prior [s]</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">accuracy</text>"#, H / 2.0, H / 2.0);
    if let Some(c) = chance {
        let _ = writeln!(s, r#"<line x1="{M}" y1="{:.1}" x2="{}" y2="{:.1}" stroke="black" stroke-dasharray="6 4"/>"#, y(c), W - M, y(c));
    }
    if let Some((t, label)) = marker {
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{M}" x2="{:.1}" y2="{}" stroke="gray" stroke-dasharray="2 3"/>"#, x(t), x(t), H - M);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle" fill="gray">{}</text>"#, x(t), M - 6.0, escape(label));
    }
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<String> = ser.curve.t_prior.iter().zip(&ser.curve.accuracy).map(|(&t, &a)| format!("{:.2},{:.2}", x(t), y(a))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#, ser.color, pts.join(" "));
        let ly = M + 14.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="2"/>"#, M + 10.0, M + 30.0, ser.color);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, M + 36.0, ly + 4.0, escape(ser.label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
