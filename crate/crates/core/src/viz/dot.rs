use std::fmt::Write as _;

use super::RenderedGraph;

const KEYWORDS: [&str; 6] = ["graph", "digraph", "node", "edge", "strict", "subgraph"];

/// Bare identifier when DOT allows one, quoted string otherwise.
fn dot_id(s: &str) -> String {
    let mut chars = s.chars();
    let bare = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(s));
    if bare {
        s.to_string()
    } else {
        format!("\"{}\"", escape(s))
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn sign_text(sign: i8) -> &'static str {
    match sign {
        1 => "+",
        -1 => "-",
        _ => "0",
    }
}

fn color(sign: i8) -> &'static str {
    match sign {
        1 => "darkgreen",
        -1 => "red",
        _ => "gray",
    }
}

/// Graphviz document: `graph` with `--` edges for undirected networks,
/// `digraph` with `->` for directed ones.
pub fn export_dot(graph: &RenderedGraph) -> String {
    let (kind, arrow) = if graph.directed {
        ("digraph", "->")
    } else {
        ("graph", "--")
    };
    let ids: Vec<String> = graph.labels.iter().map(|l| dot_id(l)).collect();
    let w_max = graph.edges.iter().map(|e| e.weight).fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(s, "{kind} network {{");
    let _ = writeln!(s, "  node [shape=circle];");
    for (i, id) in ids.iter().enumerate() {
        let (x, y) = graph.coordinates[i];
        let _ = write!(s, "  {id} [pos=\"{x:.6},{:.6}\"", 1.0 - y);
        match &graph.measures[i] {
            Some(m) => {
                let _ = write!(
                    s,
                    ", label=\"{}\\n{} {:.2}\", predictability={}, measure={}",
                    escape(&graph.labels[i]),
                    escape(&m.name),
                    m.value,
                    m.value,
                    dot_id(&m.name)
                );
            }
            None => {
                let _ = write!(s, ", label={}", dot_id(&graph.labels[i]));
            }
        }
        let _ = writeln!(s, "];");
    }
    for e in &graph.edges {
        let pen = if w_max > 0.0 { 1.0 + 4.0 * e.weight / w_max } else { 1.0 };
        let _ = write!(
            s,
            "  {} {arrow} {} [weight={}, sign=\"{}\", color={}, penwidth={pen:.6}",
            ids[e.from],
            ids[e.to],
            e.weight,
            sign_text(e.sign),
            color(e.sign)
        );
        if let Some(lag) = e.lag {
            let _ = write!(s, ", lag={lag}");
        }
        let _ = writeln!(s, "];");
    }
    let _ = writeln!(s, "}}");
    s
}
