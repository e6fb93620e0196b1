//! Thresholded sentence-similarity networks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("threshold must lie in [0,1), got {0}")]
    InvalidThreshold(f64),
    #[error("edge ({0},{1}) references a node outside [0,{2})")]
    NodeOutOfRange(u32, u32, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(u32),
    #[error("duplicate edge ({0},{1})")]
    DuplicateEdge(u32, u32),
    #[error("edge ({0},{1}) weight {2} outside (0,1]")]
    WeightOutOfRange(u32, u32, f64),
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Undirected weighted graph over sentence ids. Edges are stored once with
/// `i < j`, sorted, each with weight in (0,1] at or above `threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceGraph {
    n_nodes: usize,
    threshold: f64,
    edges: Vec<(u32, u32, f64)>,
}

/// Structure report for one graph.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GraphStats {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_components: usize,
    pub n_isolated_nodes: usize,
    pub total_weight: f64,
}

impl SentenceGraph {
    /// Builds a graph from explicit edges (any endpoint order), validating
    /// range, weights, and uniqueness.
    pub fn from_edges(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (u32, u32, f64)>,
        threshold: f64,
    ) -> Result<Self, GraphError> {
        if !(0.0..1.0).contains(&threshold) {
            return Err(GraphError::InvalidThreshold(threshold));
        }
        let mut normalized = Vec::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j as usize >= n_nodes {
                return Err(GraphError::NodeOutOfRange(i, j, n_nodes));
            }
            if !(w > 0.0 && w <= 1.0) {
                return Err(GraphError::WeightOutOfRange(i, j, w));
            }
            normalized.push((i, j, w));
        }
        normalized.sort_unstable_by_key(|&(i, j, _)| (i, j));
        for window in normalized.windows(2) {
            if window[0].0 == window[1].0 && window[0].1 == window[1].1 {
                return Err(GraphError::DuplicateEdge(window[0].0, window[0].1));
            }
        }
        Ok(SentenceGraph {
            n_nodes,
            threshold,
            edges: normalized,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Edges as (i, j, weight) with i < j, sorted by (i, j).
    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    /// Neighbor lists (both directions of every edge).
    pub fn adjacency(&self) -> Vec<Vec<(u32, f64)>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(i, j, w) in &self.edges {
            adj[i as usize].push((j, w));
            adj[j as usize].push((i, w));
        }
        adj
    }

    /// Sum of edge weights (each undirected edge once).
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|&(_, _, w)| w).sum()
    }
}

/// Keeps every pair with weight ≥ threshold (and > 0); nodes that lose all
/// their edges stay in the graph as isolated nodes.
pub fn build_graph(
    pairs: &BTreeMap<(u32, u32), f64>,
    n_nodes: usize,
    threshold: f64,
) -> Result<SentenceGraph, GraphError> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(GraphError::InvalidThreshold(threshold));
    }
    let edges = pairs
        .iter()
        .filter(|&(_, &w)| w >= threshold && w > 0.0)
        .map(|(&(i, j), &w)| (i, j, w));
    SentenceGraph::from_edges(n_nodes, edges, threshold)
}

/// Exact structural counts; components found by iterative depth-first
/// traversal.
pub fn graph_stats(g: &SentenceGraph) -> GraphStats {
    let adj = g.adjacency();
    let mut seen = vec![false; g.n_nodes()];
    let mut n_components = 0;
    let mut stack = Vec::new();
    for start in 0..g.n_nodes() {
        if seen[start] {
            continue;
        }
        n_components += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(node) = stack.pop() {
            for &(next, _) in &adj[node] {
                if !seen[next as usize] {
                    seen[next as usize] = true;
                    stack.push(next as usize);
                }
            }
        }
    }
    GraphStats {
        n_nodes: g.n_nodes(),
        n_edges: g.edges().len(),
        n_components,
        n_isolated_nodes: adj.iter().filter(|n| n.is_empty()).count(),
        total_weight: g.total_weight(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    GraphMl,
    EdgeList,
}

/// Prints a weight with at least 9 significant digits, extending up to 17
/// until the text parses back to the identical f64 — lossless by
/// construction. Decimal places are significant digits plus the leading
/// zeros of sub-0.1 weights.
fn format_weight(w: f64) -> String {
    debug_assert!(w >= 0.0 && w.is_finite());
    if w == 0.0 {
        return format!("{w:.9}");
    }
    let leading_zeros = if w >= 1.0 {
        0
    } else {
        (-w.log10().floor() as usize).saturating_sub(1)
    };
    for significant in 9..=17 {
        let precision = leading_zeros + significant;
        let s = format!("{w:.precision$}");
        if s.parse::<f64>() == Ok(w) {
            return s;
        }
    }
    unreachable!("17 significant digits always round-trip an f64")
}

fn render_edge_list(g: &SentenceGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# nodes {} threshold {}",
        g.n_nodes(),
        format_weight(g.threshold())
    );
    for &(i, j, w) in g.edges() {
        let _ = writeln!(out, "{i} {j} {}", format_weight(w));
    }
    out
}

fn render_graphml(g: &SentenceGraph) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    out.push_str(
        "  <key id=\"threshold\" for=\"graph\" attr.name=\"threshold\" attr.type=\"double\"/>\n",
    );
    out.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    let _ = writeln!(
        out,
        "    <data key=\"threshold\">{}</data>",
        format_weight(g.threshold())
    );
    for node in 0..g.n_nodes() {
        let _ = writeln!(out, "    <node id=\"n{node}\"/>");
    }
    for &(i, j, w) in g.edges() {
        let _ = writeln!(
            out,
            "    <edge source=\"n{i}\" target=\"n{j}\"><data key=\"weight\">{}</data></edge>",
            format_weight(w)
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

pub fn export_graph(
    g: &SentenceGraph,
    path: impl AsRef<Path>,
    format: GraphFormat,
) -> Result<(), GraphError> {
    let text = match format {
        GraphFormat::GraphMl => render_graphml(g),
        GraphFormat::EdgeList => render_edge_list(g),
    };
    fs::write(path, text)?;
    Ok(())
}

fn parse_edge_list(text: &str) -> Result<SentenceGraph, GraphError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(GraphError::Parse {
        line: 1,
        reason: "empty file".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (n_nodes, threshold) = match fields.as_slice() {
        ["#", "nodes", n, "threshold", t] => (
            n.parse::<usize>().map_err(|e| GraphError::Parse {
                line: 1,
                reason: e.to_string(),
            })?,
            t.parse::<f64>().map_err(|e| GraphError::Parse {
                line: 1,
                reason: e.to_string(),
            })?,
        ),
        _ => {
            return Err(GraphError::Parse {
                line: 1,
                reason: "expected header `# nodes <n> threshold <t>`".into(),
            })
        }
    };
    let mut edges = Vec::new();
    for (index, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [i, j, w] = parts.as_slice() else {
            return Err(GraphError::Parse {
                line: index + 1,
                reason: "expected `i j w`".into(),
            });
        };
        let parse_err = |e: String| GraphError::Parse {
            line: index + 1,
            reason: e,
        };
        edges.push((
            i.parse::<u32>().map_err(|e| parse_err(e.to_string()))?,
            j.parse::<u32>().map_err(|e| parse_err(e.to_string()))?,
            w.parse::<f64>().map_err(|e| parse_err(e.to_string()))?,
        ));
    }
    SentenceGraph::from_edges(n_nodes, edges, threshold)
}

/// Pulls `name="..."` out of an XML-ish tag line.
fn attr<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    let key = format!("{name}=\"");
    let start = line.find(&key)? + key.len();
    let end = line[start..].find('"')? + start;
    Some(&line[start..end])
}

/// Reads the GraphML subset written by [`export_graph`]: one element per
/// line, `n<id>` node ids, a `weight` data key per edge.
fn parse_graphml(text: &str) -> Result<SentenceGraph, GraphError> {
    let mut n_nodes = 0usize;
    let mut threshold: Option<f64> = None;
    let mut edges = Vec::new();
    let node_id = |s: &str, line: usize| -> Result<u32, GraphError> {
        s.strip_prefix('n')
            .and_then(|rest| rest.parse::<u32>().ok())
            .ok_or_else(|| GraphError::Parse {
                line,
                reason: format!("bad node id {s:?}"),
            })
    };
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let line_no = index + 1;
        if line.starts_with("<node ") {
            n_nodes += 1;
        } else if line.starts_with("<edge ") {
            let source = attr(line, "source").ok_or(GraphError::Parse {
                line: line_no,
                reason: "edge without source".into(),
            })?;
            let target = attr(line, "target").ok_or(GraphError::Parse {
                line: line_no,
                reason: "edge without target".into(),
            })?;
            let open = line.find("\"weight\">").map(|p| p + "\"weight\">".len());
            let weight = open
                .and_then(|start| {
                    let end = line[start..].find('<')? + start;
                    line[start..end].parse::<f64>().ok()
                })
                .ok_or(GraphError::Parse {
                    line: line_no,
                    reason: "edge without weight data".into(),
                })?;
            edges.push((node_id(source, line_no)?, node_id(target, line_no)?, weight));
        } else if line.starts_with("<data key=\"threshold\">") {
            let start = "<data key=\"threshold\">".len();
            let end = line[start..].find('<').map(|p| p + start);
            threshold = end.and_then(|e| line[start..e].parse::<f64>().ok());
        }
    }
    let threshold = threshold.ok_or(GraphError::Parse {
        line: 1,
        reason: "missing graph threshold data".into(),
    })?;
    SentenceGraph::from_edges(n_nodes, edges, threshold)
}

pub fn import_graph(path: impl AsRef<Path>, format: GraphFormat) -> Result<SentenceGraph, GraphError> {
    let text = fs::read_to_string(path)?;
    match format {
        GraphFormat::GraphMl => parse_graphml(&text),
        GraphFormat::EdgeList => parse_edge_list(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairs(entries: &[((u32, u32), f64)]) -> BTreeMap<(u32, u32), f64> {
        entries.iter().copied().collect()
    }

    #[test]
    fn build_applies_threshold_rule() {
        let sims = pairs(&[((0, 1), 0.6), ((0, 2), 0.3), ((1, 2), 0.5)]);
        let g = build_graph(&sims, 3, 0.5).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 0.6), (1, 2, 0.5)]);
    }

    #[test]
    fn build_above_max_weight_keeps_isolated_nodes() {
        let sims = pairs(&[((0, 1), 0.4)]);
        let g = build_graph(&sims, 4, 0.9).unwrap();
        assert!(g.edges().is_empty());
        let stats = graph_stats(&g);
        assert_eq!(stats.n_components, 4);
        assert_eq!(stats.n_isolated_nodes, 4);
    }

    #[test]
    fn build_drops_zero_weights_even_at_zero_threshold() {
        let sims = pairs(&[((0, 1), 0.0), ((1, 2), 0.2)]);
        let g = build_graph(&sims, 3, 0.0).unwrap();
        assert_eq!(g.edges(), &[(1, 2, 0.2)]);
    }

    #[test]
    fn build_rejects_bad_threshold() {
        let sims = pairs(&[]);
        assert!(matches!(
            build_graph(&sims, 2, 1.0),
            Err(GraphError::InvalidThreshold(_))
        ));
        assert!(matches!(
            build_graph(&sims, 2, -0.1),
            Err(GraphError::InvalidThreshold(_))
        ));
    }

    #[test]
    fn from_edges_validates() {
        assert!(matches!(
            SentenceGraph::from_edges(3, [(1, 1, 0.5)], 0.0),
            Err(GraphError::SelfLoop(1))
        ));
        assert!(matches!(
            SentenceGraph::from_edges(3, [(0, 3, 0.5)], 0.0),
            Err(GraphError::NodeOutOfRange(0, 3, 3))
        ));
        assert!(matches!(
            SentenceGraph::from_edges(3, [(0, 1, 1.5)], 0.0),
            Err(GraphError::WeightOutOfRange(0, 1, _))
        ));
        assert!(matches!(
            SentenceGraph::from_edges(3, [(0, 1, 0.5), (1, 0, 0.4)], 0.0),
            Err(GraphError::DuplicateEdge(0, 1))
        ));
    }

    #[test]
    fn stats_on_two_triangles() {
        let g = SentenceGraph::from_edges(
            6,
            [
                (0, 1, 1.0),
                (1, 2, 1.0),
                (0, 2, 1.0),
                (3, 4, 1.0),
                (4, 5, 1.0),
                (3, 5, 1.0),
            ],
            0.0,
        )
        .unwrap();
        let stats = graph_stats(&g);
        assert_eq!(stats.n_components, 2);
        assert_eq!(stats.n_edges, 6);
        assert_eq!(stats.n_isolated_nodes, 0);
        assert!((stats.total_weight - 6.0).abs() < 1e-12);
    }

    #[test]
    fn stats_ignore_edge_input_order() {
        let forward = SentenceGraph::from_edges(4, [(0, 1, 0.5), (2, 3, 0.25)], 0.0).unwrap();
        let shuffled = SentenceGraph::from_edges(4, [(3, 2, 0.25), (1, 0, 0.5)], 0.0).unwrap();
        assert_eq!(forward, shuffled);
        assert_eq!(graph_stats(&forward), graph_stats(&shuffled));
    }

    #[test]
    fn edge_list_fixture_format() {
        let g = SentenceGraph::from_edges(3, [(0, 1, 0.6), (1, 2, 0.5)], 0.5).unwrap();
        let text = render_edge_list(&g);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines,
            [
                "# nodes 3 threshold 0.500000000",
                "0 1 0.600000000",
                "1 2 0.500000000",
            ]
        );
    }

    #[test]
    fn round_trip_both_formats() {
        let g = SentenceGraph::from_edges(
            5,
            [(0, 1, 0.123456789123), (2, 4, 1.0 / 3.0), (1, 3, 0.999999999999)],
            0.1,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        for format in [GraphFormat::EdgeList, GraphFormat::GraphMl] {
            let path = dir.path().join("graph.out");
            export_graph(&g, &path, format).unwrap();
            let back = import_graph(&path, format).unwrap();
            assert_eq!(back, g, "{format:?}");
        }
    }

    #[test]
    fn round_trip_empty_graph() {
        let g = SentenceGraph::from_edges(4, [], 0.7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for format in [GraphFormat::EdgeList, GraphFormat::GraphMl] {
            let path = dir.path().join("empty.out");
            export_graph(&g, &path, format).unwrap();
            let back = import_graph(&path, format).unwrap();
            assert_eq!(back, g, "{format:?}");
        }
    }

    fn arbitrary_pairs() -> impl Strategy<Value = BTreeMap<(u32, u32), f64>> {
        proptest::collection::vec((0u32..8, 0u32..8, 0.0f64..=1.0), 0..20).prop_map(|list| {
            let mut map = BTreeMap::new();
            for (a, b, w) in list {
                if a != b {
                    let key = (a.min(b), a.max(b));
                    map.insert(key, w);
                }
            }
            map
        })
    }

    proptest! {
        // Raising the threshold only removes edges.
        #[test]
        fn edges_shrink_with_threshold(
            sims in arbitrary_pairs(),
            t1 in 0.0f64..1.0,
            t2 in 0.0f64..1.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let g_lo = build_graph(&sims, 8, lo).unwrap();
            let g_hi = build_graph(&sims, 8, hi).unwrap();
            let lo_set: std::collections::BTreeSet<_> =
                g_lo.edges().iter().map(|&(i, j, _)| (i, j)).collect();
            for &(i, j, _) in g_hi.edges() {
                prop_assert!(lo_set.contains(&(i, j)));
            }
            // ... and components only split.
            prop_assert!(
                graph_stats(&g_hi).n_components >= graph_stats(&g_lo).n_components
            );
        }

        // Any built graph survives an edge-list round trip unchanged.
        #[test]
        fn random_round_trip(sims in arbitrary_pairs(), t in 0.0f64..1.0) {
            let g = build_graph(&sims, 8, t).unwrap();
            let parsed = parse_edge_list(&render_edge_list(&g)).unwrap();
            prop_assert_eq!(parsed, g);
        }
    }
}
