//! Minimal SVG rendering for statistic traces and fault subgraphs.

use std::fmt::Write as _;

use crate::diagnosis::DiagnosisReport;
use crate::monitoring::StatisticTrace;

const WIDTH: f64 = 720.0;
const PANEL_H: f64 = 200.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const GAP: f64 = 40.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Two stacked log-scale panels (T² and SPE) with control-limit lines and
/// the fault onset, if labelled.
pub fn trace_svg(trace: &StatisticTrace, title: &str) -> String {
    let height = MARGIN_T + 2.0 * PANEL_H + GAP + 30.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" font-size="13">{}</text>"#, MARGIN_L, esc(title));
    let onset = trace
        .points
        .iter()
        .find(|p| p.label == Some(true))
        .map(|p| p.t);
    let t_max = trace.len().saturating_sub(1).max(1) as f64;
    let panels: [(&str, f64, Vec<(usize, f64)>); 2] = [
        (
            "T2",
            trace.alpha_t2,
            trace.points.iter().filter_map(|p| p.t2.map(|v| (p.t, v))).collect(),
        ),
        (
            "SPE",
            trace.alpha_spe,
            trace.points.iter().filter_map(|p| p.spe.map(|v| (p.t, v))).collect(),
        ),
    ];
    for (k, (name, limit, pts)) in panels.iter().enumerate() {
        let top = MARGIN_T + k as f64 * (PANEL_H + GAP);
        let floor = limit * 1e-3;
        let lo = pts
            .iter()
            .map(|p| p.1.max(floor))
            .fold(limit * 0.5, f64::min)
            .log10();
        let hi = pts.iter().map(|p| p.1).fold(limit * 2.0, f64::max).log10();
        let span = (hi - lo).max(1e-9);
        let plot_w = WIDTH - MARGIN_L - MARGIN_R;
        let x = |t: usize| MARGIN_L + t as f64 / t_max * plot_w;
        let y = |v: f64| top + PANEL_H - (v.max(floor).log10() - lo) / span * PANEL_H;
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN_L}" y="{top}" width="{plot_w}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            s,
            r#"<text x="8" y="{:.1}">{name}</text>"#,
            top + PANEL_H / 2.0
        );
        for (frac, label) in [(0.0, lo), (1.0, hi)] {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{:.1}</text>"#,
                MARGIN_L - 4.0,
                top + PANEL_H * (1.0 - frac) + 4.0,
                label
            );
        }
        if !pts.is_empty() {
            let mut d = String::new();
            for (i, (t, v)) in pts.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, x(*t), y(*v));
            }
            let _ = writeln!(
                s,
                r##"<path d="{}" fill="none" stroke="#1f5fa8" stroke-width="1"/>"##,
                d.trim_end()
            );
        }
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" x2="{:.2}" y1="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-dasharray="6,3"/>"##,
            WIDTH - MARGIN_R,
            y(*limit),
            y(*limit)
        );
        if let Some(o) = onset {
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" x2="{:.2}" y1="{top}" y2="{:.2}" stroke="#777" stroke-dasharray="2,3"/>"##,
                x(o),
                x(o),
                top + PANEL_H
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">sample</text>"#,
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        height - 8.0
    );
    s.push_str("</svg>\n");
    s
}

/// Circular layout of the fault subgraph; fault nodes shaded, the top
/// source outlined.
pub fn subgraph_svg(report: &DiagnosisReport, tags: &[String]) -> String {
    let size = 480.0;
    let c = size / 2.0;
    let r = size / 2.0 - 60.0;
    let nodes = &report.subgraph_nodes;
    let pos = |k: usize| {
        let a = std::f64::consts::TAU * k as f64 / nodes.len().max(1) as f64 - std::f64::consts::FRAC_PI_2;
        (c + r * a.cos(), c + r * a.sin())
    };
    let idx = |v: usize| nodes.iter().position(|&u| u == v);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="11">"#
    );
    s.push_str(r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="24" refY="5" markerWidth="6" markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#333"/></marker></defs>"##);
    s.push('\n');
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for &(i, j) in &report.subgraph_edges {
        if let (Some(a), Some(b)) = (idx(i), idx(j)) {
            let (x1, y1) = pos(a);
            let (x2, y2) = pos(b);
            let _ = writeln!(
                s,
                r##"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="#333" marker-end="url(#arrow)"/>"##
            );
        }
    }
    for (k, &v) in nodes.iter().enumerate() {
        let (x, y) = pos(k);
        let fill = if report.fault_variables.contains(&v) { "#f4b6b6" } else { "#e8e8e8" };
        let stroke = if report.ranked_sources.first() == Some(&v) { 3 } else { 1 };
        let _ = writeln!(
            s,
            r##"<circle cx="{x:.2}" cy="{y:.2}" r="16" fill="{fill}" stroke="#222" stroke-width="{stroke}"/>"##
        );
        let tag = tags.get(v).cloned().unwrap_or_else(|| format!("x{}", v + 1));
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y + 30.0,
            esc(&tag)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_plot_has_both_panels() {
        let stats: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.1, 1.0 + k as f64)).collect();
        let tr = StatisticTrace::from_statistics(3, &stats, 2.0, 10.0)
            .unwrap()
            .with_onset(20)
            .unwrap();
        let svg = trace_svg(&tr, "fault <1>");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray=\"6,3\"").count(), 2);
        assert!(svg.contains("fault &lt;1&gt;"));
    }
}
