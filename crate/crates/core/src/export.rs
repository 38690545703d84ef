//! Graphviz DOT rendering of a cohort graph: fill color by community, node
//! width by PageRank.

use std::fmt::Write as _;

use crate::community::Partition;
use crate::graph::Graph;

/// Fixed 12-color qualitative palette; community ids wrap around.
pub const PALETTE: [&str; 12] = [
    "#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462",
    "#b3de69", "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f",
];

pub const MIN_WIDTH: f64 = 0.2;
pub const MAX_WIDTH: f64 = 2.0;
/// Width used for every node when no scores are available.
pub const UNIFORM_WIDTH: f64 = 0.6;

/// Double-quoted DOT identifier.
pub fn quote(id: &str) -> String {
    let mut out = String::with_capacity(id.len() + 2);
    out.push('"');
    for c in id.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Node widths scaled linearly from [`MIN_WIDTH`] (lowest score) to
/// [`MAX_WIDTH`] (highest). Equal scores all get the minimum width.
pub fn node_widths(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .map(|&s| {
            if hi > lo {
                MIN_WIDTH + (MAX_WIDTH - MIN_WIDTH) * (s - lo) / (hi - lo)
            } else {
                MIN_WIDTH
            }
        })
        .collect()
}

pub fn to_dot(g: &Graph, partition: Option<&Partition>, scores: Option<&[f64]>) -> String {
    let n = g.node_count();
    let widths = match scores {
        Some(s) => node_widths(s),
        None => vec![UNIFORM_WIDTH; n],
    };
    let mut out = String::from("graph cooccurrence {\n");
    out.push_str("  node [shape=circle, style=filled, fixedsize=true];\n");
    for i in 0..n {
        let _ = write!(out, "  {} [width={:.4}", quote(&g.labels()[i]), widths[i]);
        if let Some(p) = partition {
            let c = p.community_of(i);
            let _ = write!(out, ", fillcolor={}, community={c}", quote(PALETTE[c % PALETTE.len()]));
        }
        out.push_str("];\n");
    }
    for e in g.edges() {
        let _ = writeln!(
            out,
            "  {} -- {} [weight={}];",
            quote(&g.labels()[e.u]),
            quote(&g.labels()[e.v]),
            e.w
        );
    }
    out.push_str("}\n");
    out
}
