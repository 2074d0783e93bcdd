//! Minimal SVG line plots with a log-scale y axis.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One polyline per curve with a shaded mean ± std band. Values that are not
/// positive are clamped to the smallest positive value on the plot.
pub(crate) fn render_log_plot(title: &str, curves: &[(&str, &[f64], &[f64])]) -> String {
    let positive = curves
        .iter()
        .flat_map(|(_, mean, std)| mean.iter().zip(*std).flat_map(|(m, s)| [*m, m + s, m - s]))
        .filter(|v| *v > 0.0 && v.is_finite());
    let (mut lo, mut hi) = positive.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        lo = 1e-3;
        hi = 1.0;
    }
    let (lo_dec, mut hi_dec) = (lo.log10().floor(), hi.log10().ceil());
    if hi_dec <= lo_dec {
        hi_dec = lo_dec + 1.0;
    }
    let n = curves
        .iter()
        .map(|(_, m, _)| m.len())
        .max()
        .unwrap_or(1)
        .max(2);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |t: usize| LEFT + plot_w * t as f64 / (n - 1) as f64;
    let py = |v: f64| {
        let v = if v > 0.0 && v.is_finite() { v } else { lo };
        TOP + plot_h * (hi_dec - v.log10()) / (hi_dec - lo_dec)
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#,
        LEFT + plot_w / 2.0
    );
    // decade grid lines
    let mut dec = lo_dec;
    while dec <= hi_dec {
        let y = py(10f64.powf(dec));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{dec}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
        dec += 1.0;
    }
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text><text x="{LEFT}" y="{:.2}" text-anchor="middle">0</text><text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        TOP + plot_h + 16.0,
        LEFT + plot_w,
        TOP + plot_h + 16.0,
        n - 1
    );

    for (i, (name, mean, std)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut band = String::new();
        for (t, (m, sd)) in mean.iter().zip(*std).enumerate() {
            let _ = write!(band, "{:.2},{:.2} ", px(t), py(m + sd));
        }
        for (t, (m, sd)) in mean.iter().zip(*std).enumerate().rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(t), py(m - sd));
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = mean
            .iter()
            .enumerate()
            .map(|(t, m)| format!("{:.2},{:.2}", px(t), py(*m)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{name}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
