use std::f64::consts::TAU;
use std::fmt::Write as _;

use super::{Edge, RenderedGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct SvgOptions {
    /// Width and height in pixels.
    pub size: f64,
    pub node_radius: f64,
    pub ring_width: f64,
    /// Stroke width of the strongest edge; others scale linearly.
    pub max_edge_width: f64,
    pub positive: String,
    pub negative: String,
    pub undefined: String,
    pub font_size: f64,
    /// Text placed in a `<metadata>` element.
    pub metadata: Option<String>,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            size: 600.0,
            node_radius: 22.0,
            ring_width: 5.0,
            max_edge_width: 8.0,
            positive: "#008000".into(),
            negative: "#d62728".into(),
            undefined: "#888888".into(),
            font_size: 10.0,
            metadata: None,
        }
    }
}

fn f(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

pub(crate) fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

fn marker_id(sign: i8) -> &'static str {
    match sign {
        1 => "arrow-pos",
        -1 => "arrow-neg",
        _ => "arrow-undef",
    }
}

fn point_on_circle(cx: f64, cy: f64, r: f64, angle: f64) -> (f64, f64) {
    (cx + r * angle.sin(), cy - r * angle.cos())
}

/// Path data for a clockwise arc from `start` to `start + sweep` radians,
/// measured clockwise from 12 o'clock.
fn arc_path(cx: f64, cy: f64, r: f64, start: f64, sweep: f64) -> String {
    let (x0, y0) = point_on_circle(cx, cy, r, start);
    if sweep >= TAU - 1e-12 {
        let (xh, yh) = point_on_circle(cx, cy, r, start + TAU / 2.0);
        return format!(
            "M {} {} A {} {} 0 0 1 {} {} A {} {} 0 0 1 {} {}",
            f(x0),
            f(y0),
            f(r),
            f(r),
            f(xh),
            f(yh),
            f(r),
            f(r),
            f(x0),
            f(y0)
        );
    }
    let (x1, y1) = point_on_circle(cx, cy, r, start + sweep);
    let large = u8::from(sweep > TAU / 2.0);
    format!(
        "M {} {} A {} {} 0 {large} 1 {} {}",
        f(x0),
        f(y0),
        f(r),
        f(r),
        f(x1),
        f(y1)
    )
}

/// SVG 1.1 document for `graph`.
pub fn render_svg(graph: &RenderedGraph, options: &SvgOptions) -> String {
    let o = options;
    let size = o.size;
    let centers: Vec<(f64, f64)> = graph
        .coordinates
        .iter()
        .map(|&(x, y)| (x * size, y * size))
        .collect();
    let w_max = graph.edges.iter().map(|e| e.weight).fold(0.0, f64::max);
    let width_of = |e: &Edge| {
        if w_max > 0.0 {
            o.max_edge_width * e.weight / w_max
        } else {
            0.0
        }
    };
    let color_of = |sign: i8| match sign {
        1 => o.positive.as_str(),
        -1 => o.negative.as_str(),
        _ => o.undefined.as_str(),
    };
    let outer = o.node_radius + o.ring_width;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        f(size)
    );
    if let Some(m) = &o.metadata {
        let _ = writeln!(s, "<metadata>{}</metadata>", escape_xml(m));
    }
    if graph.directed {
        let _ = writeln!(s, "<defs>");
        for sign in [1i8, -1, 0] {
            let _ = writeln!(
                s,
                r#"<marker id="{}" viewBox="0 0 10 10" refX="9" refY="5" markerUnits="strokeWidth" markerWidth="4" markerHeight="4" orient="auto"><path d="M 0 0 L 10 5 L 0 10 z" fill="{}"/></marker>"#,
                marker_id(sign),
                color_of(sign)
            );
        }
        let _ = writeln!(s, "</defs>");
    }
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let _ = writeln!(s, r#"<g class="edges">"#);
    for e in &graph.edges {
        let color = color_of(e.sign);
        let width = width_of(e);
        let (cx, cy) = centers[e.from];
        if e.self_loop {
            let r = o.node_radius * 0.6;
            let _ = writeln!(
                s,
                r#"<circle class="self-loop" cx="{}" cy="{}" r="{}" fill="none" stroke="{color}" stroke-width="{}"/>"#,
                f(cx),
                f(cy - outer - r),
                f(r),
                f(width)
            );
            continue;
        }
        let (tx, ty) = centers[e.to];
        let (dx, dy) = (tx - cx, ty - cy);
        let len = (dx * dx + dy * dy).sqrt();
        if len <= 2.0 * outer {
            continue;
        }
        let (ux, uy) = (dx / len, dy / len);
        // Opposite directed edges are drawn side by side.
        let reciprocal = e.directed
            && graph
                .edges
                .iter()
                .any(|r| r.from == e.to && r.to == e.from && r.lag == e.lag);
        let off = if reciprocal { 3.0 } else { 0.0 };
        let (ox, oy) = (-uy * off, ux * off);
        let _ = write!(
            s,
            r#"<line class="edge" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="{}""#,
            f(cx + ux * outer + ox),
            f(cy + uy * outer + oy),
            f(tx - ux * outer + ox),
            f(ty - uy * outer + oy),
            f(width)
        );
        if e.directed {
            let _ = write!(s, r#" marker-end="url(#{})""#, marker_id(e.sign));
        }
        let _ = writeln!(s, "/>");
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="nodes">"#);
    let ring_r = o.node_radius + o.ring_width / 2.0;
    for (i, &(cx, cy)) in centers.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<circle class="node" cx="{}" cy="{}" r="{}" fill="white" stroke="black" stroke-width="1"/>"#,
            f(cx),
            f(cy),
            f(o.node_radius)
        );
        let mut start = 0.0;
        for seg in &graph.rings[i] {
            let sweep = TAU * seg.fraction;
            if sweep > 0.0 {
                let _ = writeln!(
                    s,
                    r#"<path class="ring" data-node="{i}" d="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
                    arc_path(cx, cy, ring_r, start, sweep),
                    escape_xml(&seg.color),
                    f(o.ring_width)
                );
            }
            start += sweep;
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="{}" text-anchor="middle" dominant-baseline="central">{}</text>"#,
            f(cx),
            f(cy),
            f(o.font_size),
            escape_xml(&graph.labels[i])
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}
