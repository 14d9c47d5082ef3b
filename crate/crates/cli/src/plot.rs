//! Static SVG: a 2x2 grid with one panel per op kind, throughput against load
//! factor, one polyline per policy.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use graveyard_core::Contender;

use crate::csv_io::read_csv;
use crate::workload::{BenchSample, OpKind};
use crate::BenchError;

const PANEL_W: f64 = 560.0;
const PANEL_H: f64 = 400.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;

const COLORS: [&str; 8] = [
    "#222222", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
];

pub fn emit_plot(csv_path: &Path, out_path: &Path) -> Result<(), BenchError> {
    let samples = read_csv(csv_path)?;
    std::fs::write(out_path, render_svg(&samples)).map_err(|source| BenchError::Io {
        path: out_path.to_path_buf(),
        source,
    })
}

/// Rounds a positive value up to 1, 2 or 5 times a power of ten.
fn nice_ceiling(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * mag)
}

/// Compact axis label: 1600000 -> "1.6M".
fn si(v: f64) -> String {
    let (scaled, suffix) = match v {
        v if v >= 1e9 => (v / 1e9, "G"),
        v if v >= 1e6 => (v / 1e6, "M"),
        v if v >= 1e3 => (v / 1e3, "k"),
        v => return format!("{v:.0}"),
    };
    let digits = format!("{scaled:.3}");
    format!(
        "{}{suffix}",
        digits.trim_end_matches('0').trim_end_matches('.')
    )
}

pub fn render_svg(samples: &[BenchSample]) -> String {
    let width = 2.0 * PANEL_W;
    let height = 2.0 * PANEL_H;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let mut policies: Vec<Contender> = samples.iter().map(|s| s.policy).collect();
    policies.sort();
    policies.dedup();
    let color = |c: Contender| {
        let i = policies.iter().position(|&p| p == c).unwrap_or(0);
        COLORS[i % COLORS.len()]
    };

    for (panel, kind) in OpKind::ALL.into_iter().enumerate() {
        let ox = (panel % 2) as f64 * PANEL_W;
        let oy = (panel / 2) as f64 * PANEL_H;
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
        let x0 = ox + MARGIN_L;
        let y0 = oy + MARGIN_T + plot_h;

        let mut series: BTreeMap<Contender, Vec<(f64, f64)>> = BTreeMap::new();
        for s in samples.iter().filter(|s| s.op_kind == kind) {
            series
                .entry(s.policy)
                .or_default()
                .push((s.load_factor, s.throughput_ops_s));
        }
        for pts in series.values_mut() {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let y_max = nice_ceiling(series.values().flatten().map(|p| p.1).fold(0.0, f64::max));
        let px = |x: f64| x0 + x.clamp(0.0, 1.0) * plot_w;
        let py = |y: f64| y0 - (y / y_max).clamp(0.0, 1.0) * plot_h;

        let _ = writeln!(
            svg,
            r#"<g class="panel" data-op="{kind}"><text x="{:.1}" y="{:.1}" font-size="15" font-weight="bold">{kind} throughput</text>"#,
            x0,
            oy + 22.0
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{x0:.1}" y="{:.1}" width="{plot_w:.1}" height="{plot_h:.1}" fill="none" stroke="#999"/>"##,
            oy + MARGIN_T
        );
        for i in 0..=5 {
            let fx = i as f64 / 5.0;
            let fy = y_max * i as f64 / 5.0;
            let _ = writeln!(
                svg,
                r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#eee"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle">{4:.1}</text>"##,
                px(fx),
                oy + MARGIN_T,
                y0,
                y0 + 16.0,
                fx
            );
            let _ = writeln!(
                svg,
                r##"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="#eee"/><text x="{3:.1}" y="{4:.1}" text-anchor="end">{5}</text>"##,
                x0,
                py(fy),
                x0 + plot_w,
                x0 - 6.0,
                py(fy) + 4.0,
                si(fy)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">load factor</text><text transform="translate({:.1},{:.1}) rotate(-90)" text-anchor="middle">ops/s</text>"#,
            x0 + plot_w / 2.0,
            y0 + 36.0,
            ox + 16.0,
            oy + MARGIN_T + plot_h / 2.0
        );
        if series.is_empty() {
            let _ = writeln!(
                svg,
                r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="#999">no data</text>"##,
                x0 + plot_w / 2.0,
                oy + MARGIN_T + plot_h / 2.0
            );
        }
        for (li, (policy, pts)) in series.iter().enumerate() {
            let c = color(*policy);
            let points: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline class="series" data-policy="{policy}" fill="none" stroke="{c}" stroke-width="1.8" points="{}"/>"#,
                points.join(" ")
            );
            for &(x, y) in pts {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{c}"/>"#,
                    px(x),
                    py(y)
                );
            }
            let ly = oy + MARGIN_T + 10.0 + li as f64 * 18.0;
            let lx = x0 + plot_w + 12.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{c}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{policy}</text>"#,
                lx + 18.0,
                lx + 24.0,
                ly + 4.0
            );
        }
        svg.push_str("</g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_drop_trailing_zeros() {
        assert_eq!(si(1.6e6), "1.6M");
        assert_eq!(si(2e6), "2M");
        assert_eq!(si(1250.0), "1.25k");
        assert_eq!(si(0.0), "0");
        assert_eq!(si(12.0), "12");
    }

    #[test]
    fn ceilings_are_round() {
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(3.2e6), 5e6);
        assert_eq!(nice_ceiling(1e6), 1e6);
        assert_eq!(nice_ceiling(7.0), 10.0);
    }
}
