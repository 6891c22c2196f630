//! Minimal SVG line plots and heatmaps.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
}

/// Line plot of each series against its index. With `log_y`, values are
/// plotted as `log10`; non-positive and non-finite points are skipped.
pub fn line_plot(title: &str, series: &[(String, Vec<f64>)], log_y: bool) -> String {
    let tf = |y: f64| if log_y { y.log10() } else { y };
    let pts = |ys: &[f64]| -> Vec<(f64, f64)> {
        ys.iter()
            .enumerate()
            .filter(|(_, y)| y.is_finite() && (!log_y || **y > 0.0))
            .map(|(i, y)| (i as f64, tf(*y)))
            .collect()
    };
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, ys)| pts(ys)).collect();
    let mut out = String::new();
    header(&mut out, title);
    if !all.is_empty() {
        let x_max = all.iter().map(|p| p.0).fold(1.0, f64::max);
        let y_min = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let mut y_max = all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        if y_max <= y_min {
            y_max = y_min + 1.0;
        }
        let sx = |x: f64| PAD + x / x_max * (W - 2.0 * PAD);
        let sy = |y: f64| H - PAD - (y - y_min) / (y_max - y_min) * (H - 2.0 * PAD);
        let _ = writeln!(
            out,
            r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let ylab = |v: f64| if log_y { format!("1e{v:.1}") } else { format!("{v:.3e}") };
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, PAD + 4.0, ylab(y_max));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, H - PAD, ylab(y_min));
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, W - PAD, H - PAD + 14.0, x_max);
        for (k, (name, ys)) in series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let path: Vec<String> = pts(ys).iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
            if !path.is_empty() {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
                W - PAD - 150.0,
                PAD + 14.0 * (k + 1) as f64,
                escape(name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

fn color_for(t: f64) -> String {
    // Dark blue (fast) to yellow (slow).
    let t = t.clamp(0.0, 1.0);
    let r = (30.0 + 225.0 * t) as u8;
    let g = (40.0 + 190.0 * t) as u8;
    let b = (120.0 - 90.0 * t) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heatmap with `rows` on the vertical axis and `cols` horizontally.
/// Cells above `clip` (including the divergence sentinel) are drawn grey.
pub fn heatmap(title: &str, rows: &[f64], cols: &[f64], values: &[Vec<f64>], clip: f64) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let finite: Vec<f64> = values.iter().flatten().copied().filter(|v| v.is_finite() && *v <= clip).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cw = (W - 2.0 * PAD) / cols.len().max(1) as f64;
    let ch = (H - 2.0 * PAD) / rows.len().max(1) as f64;
    for (i, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let fill = if v.is_finite() && *v <= clip {
                color_for((v - lo) / span)
            } else {
                "#bbbbbb".to_string()
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"><title>{}</title></rect>"#,
                PAD + j as f64 * cw,
                H - PAD - (i + 1) as f64 * ch,
                cw,
                ch,
                v
            );
        }
    }
    if let (Some(r0), Some(r1)) = (rows.first(), rows.last()) {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{r0:.3e}</text>"#, PAD - 4.0, H - PAD);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{r1:.3e}</text>"#, PAD - 4.0, PAD + 10.0);
    }
    if let (Some(c0), Some(c1)) = (cols.first(), cols.last()) {
        let _ = writeln!(out, r#"<text x="{PAD}" y="{}">{c0}</text>"#, H - PAD + 14.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{c1}</text>"#, W - PAD, H - PAD + 14.0);
    }
    if lo.is_finite() {
        let _ = writeln!(out, r#"<text x="{}" y="{}">min {lo:.4}  max {hi:.4}</text>"#, PAD, H - 12.0);
    }
    out.push_str("</svg>\n");
    out
}
