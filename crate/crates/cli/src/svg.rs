//! Minimal SVG charts: axes, polylines, horizontal markers and bars.
//!
//! Output depends only on the data, so two renders of equal inputs are equal
//! byte for byte.

use std::fmt::Write;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"];

pub struct Line {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Marker {
    pub name: String,
    pub y: f64,
}

pub enum Panel {
    Lines { title: String, x_label: String, y_label: String, lines: Vec<Line>, markers: Vec<Marker> },
    Bars { title: String, y_label: String, bars: Vec<(String, f64)> },
}

/// Renders the panels side by side.
pub fn render(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
        w = num(width),
        h = num(PANEL_H)
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (i, p) in panels.iter().enumerate() {
        writeln!(out, r#"<g transform="translate({},0)">"#, num(i as f64 * PANEL_W)).unwrap();
        match p {
            Panel::Lines { title, x_label, y_label, lines, markers } => {
                lines_panel(&mut out, title, x_label, y_label, lines, markers)
            }
            Panel::Bars { title, y_label, bars } => bars_panel(&mut out, title, y_label, bars),
        }
        writeln!(out, "</g>").unwrap();
    }
    out.push_str("</svg>\n");
    out
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (PANEL_W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        PANEL_H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (PANEL_H - TOP - BOTTOM)
    }
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi - lo > 0.0 {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn lines_panel(out: &mut String, title: &str, x_label: &str, y_label: &str, lines: &[Line], markers: &[Marker]) {
    let xs = lines.iter().flat_map(|l| l.points.iter().map(|p| p.0));
    let ys = lines.iter().flat_map(|l| l.points.iter().map(|p| p.1)).chain(markers.iter().map(|m| m.y));
    let (x0, x1) = span(xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = span(ys.clone().fold(f64::INFINITY, f64::min).min(0.0), ys.fold(f64::NEG_INFINITY, f64::max));
    let f = Frame { x0, x1, y0, y1 };
    axes(out, &f, title, x_label, y_label);
    for (i, m) in markers.iter().enumerate() {
        let y = num(f.py(m.y));
        let colour = PALETTE[(i + lines.len()) % PALETTE.len()];
        writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{colour}" stroke-dasharray="5,3"/>"#,
            num(LEFT),
            num(PANEL_W - RIGHT)
        )
        .unwrap();
        writeln!(out, r#"<text x="{}" y="{}" fill="{colour}" text-anchor="end">{}</text>"#, num(PANEL_W - RIGHT - 2.0), num(f.py(m.y) - 3.0), escape(&m.name)).unwrap();
    }
    for (i, l) in lines.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = l.points.iter().map(|&(x, y)| format!("{},{}", num(f.px(x)), num(f.py(y)))).collect();
        writeln!(out, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, pts.join(" ")).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" fill="{colour}">{}</text>"#, num(LEFT + 8.0), num(TOP + 14.0 * (i as f64 + 1.0)), escape(&l.name)).unwrap();
    }
}

fn bars_panel(out: &mut String, title: &str, y_label: &str, bars: &[(String, f64)]) {
    let top = bars.iter().map(|b| b.1).fold(0.0, f64::max);
    let n = bars.len().max(1) as f64;
    let f = Frame { x0: 0.0, x1: n, y0: 0.0, y1: if top > 0.0 { top } else { 1.0 } };
    axes(out, &f, title, "", y_label);
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = f.px(i as f64 + 0.15);
        let w = f.px(i as f64 + 0.85) - x;
        let y = f.py(v.max(0.0));
        writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
            num(x),
            num(y),
            num(w),
            num(f.py(0.0) - y),
            PALETTE[i % PALETTE.len()]
        )
        .unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(x + w / 2.0), num(y - 4.0), num(*v)).unwrap();
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num(x + w / 2.0), num(PANEL_H - BOTTOM + 14.0), escape(label)).unwrap();
    }
}

fn axes(out: &mut String, f: &Frame, title: &str, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (LEFT, PANEL_W - RIGHT, TOP, PANEL_H - BOTTOM);
    writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, num(PANEL_W / 2.0), escape(title)).unwrap();
    writeln!(out, r#"<path d="M{} {} V{} H{}" fill="none" stroke="black"/>"#, num(l), num(t), num(b), num(r)).unwrap();
    for k in 0..=4 {
        let y = f.y0 + (f.y1 - f.y0) * k as f64 / 4.0;
        let py = num(f.py(y));
        writeln!(out, r#"<line x1="{}" y1="{py}" x2="{}" y2="{py}" stroke="black"/>"#, num(l - 4.0), num(l)).unwrap();
        writeln!(out, r#"<text x="{}" y="{py}" text-anchor="end" dy="4">{}</text>"#, num(l - 6.0), num(y)).unwrap();
    }
    if !x_label.is_empty() {
        for k in 0..=4 {
            let x = f.x0 + (f.x1 - f.x0) * k as f64 / 4.0;
            let px = num(f.px(x));
            writeln!(out, r#"<line x1="{px}" y1="{}" x2="{px}" y2="{}" stroke="black"/>"#, num(b), num(b + 4.0)).unwrap();
            writeln!(out, r#"<text x="{px}" y="{}" text-anchor="middle">{}</text>"#, num(b + 16.0), num(x)).unwrap();
        }
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, num((l + r) / 2.0), num(PANEL_H - 8.0), escape(x_label)).unwrap();
    }
    writeln!(
        out,
        r#"<text x="14" y="{y}" text-anchor="middle" transform="rotate(-90 14 {y})">{}</text>"#,
        escape(y_label),
        y = num((t + b) / 2.0)
    )
    .unwrap();
}

/// Fixed-precision number formatting shared by coordinates and labels.
fn num(v: f64) -> String {
    let a = v.abs();
    let s = if a != 0.0 && !(1e-3..1e5).contains(&a) { format!("{v:.2e}") } else { format!("{v:.3}") };
    if s.contains('e') {
        return s;
    }
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Panel> {
        vec![
            Panel::Bars { title: "shares".into(), y_label: "fraction".into(), bars: vec![("a".into(), 0.2), ("b".into(), 0.8)] },
            Panel::Lines {
                title: "curve".into(),
                x_label: "x".into(),
                y_label: "y".into(),
                lines: vec![Line { name: "f<1>".into(), points: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)] }],
                markers: vec![Marker { name: "edge".into(), y: 2.5 }],
            },
        ]
    }

    #[test]
    fn render_is_deterministic_and_well_formed() {
        let a = render(&sample());
        assert_eq!(a, render(&sample()));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<polyline").count(), 1);
        assert_eq!(a.matches("<rect").count(), 3);
        assert!(a.contains("f&lt;1&gt;"));
        assert!(!a.contains("NaN"));
    }

    #[test]
    fn flat_and_empty_data_do_not_divide_by_zero() {
        let flat = Panel::Lines {
            title: String::new(),
            x_label: "x".into(),
            y_label: String::new(),
            lines: vec![Line { name: String::new(), points: vec![(1.0, 0.0)] }],
            markers: vec![],
        };
        let empty = Panel::Bars { title: String::new(), y_label: String::new(), bars: vec![] };
        let s = render(&[flat, empty]);
        assert!(!s.contains("NaN") && !s.contains("inf"));
    }

    #[test]
    fn number_format() {
        assert_eq!(num(1.5), "1.5");
        assert_eq!(num(2.0), "2");
        assert_eq!(num(-0.0001), "-1.00e-4");
        assert_eq!(num(-0.0), "0");
    }
}
