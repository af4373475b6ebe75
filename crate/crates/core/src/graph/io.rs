//! Plain-text edge lists and subgraph masks.
//!
//! Edge list:
//! ```text
//! n 3
//! # comment
//! 0 1 1.0
//! 1 2 2.5
//! ```
//! Subgraph mask, relative to a parent edge list:
//! ```text
//! v 0
//! v 1
//! e 0 1 1.5
//! ```

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use super::{make_subgraph, GraphError, PercolationSubgraph, WeightedGraph};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = body.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

fn field<T: FromStr>(line: usize, token: &str, what: &str) -> Result<T, GraphError> {
    token.parse().map_err(|_| GraphError::Parse {
        line,
        message: format!("invalid {what} `{token}`"),
    })
}

pub fn parse_edge_list(text: &str) -> Result<WeightedGraph, GraphError> {
    let mut lines = content_lines(text);
    let vertex_count = match lines.next() {
        Some((line, f)) if f.len() == 2 && f[0] == "n" => {
            field::<usize>(line, f[1], "vertex count")?
        }
        Some((line, _)) => {
            return Err(GraphError::Parse {
                line,
                message: "expected `n <count>` header".into(),
            })
        }
        None => {
            return Err(GraphError::Parse {
                line: 0,
                message: "empty edge list".into(),
            })
        }
    };
    let mut edges = Vec::new();
    for (line, f) in lines {
        if f.len() != 3 {
            return Err(GraphError::Parse {
                line,
                message: format!("expected `tail head weight`, found {} fields", f.len()),
            });
        }
        edges.push((
            field::<usize>(line, f[0], "tail")?,
            field::<usize>(line, f[1], "head")?,
            field::<f64>(line, f[2], "weight")?,
        ));
    }
    WeightedGraph::new(vertex_count, edges)
}

pub fn write_edge_list(graph: &WeightedGraph) -> String {
    let mut out = format!("n {}\n", graph.vertex_count());
    for e in graph.edges() {
        let _ = writeln!(out, "{} {} {}", e.tail, e.head, e.weight);
    }
    out
}

pub fn parse_subgraph_mask(
    parent: Arc<WeightedGraph>,
    text: &str,
) -> Result<PercolationSubgraph, GraphError> {
    let mut vertex_mask = vec![false; parent.vertex_count()];
    let mut edge_mask = vec![false; parent.edge_count()];
    let mut weights = vec![0.0; parent.edge_count()];
    for (line, f) in content_lines(text) {
        match (f[0], f.len()) {
            ("v", 2) => {
                let v: usize = field(line, f[1], "vertex")?;
                if v >= parent.vertex_count() {
                    return Err(GraphError::Parse {
                        line,
                        message: format!("vertex {v} outside the parent"),
                    });
                }
                vertex_mask[v] = true;
            }
            ("e", 4) => {
                let tail: usize = field(line, f[1], "tail")?;
                let head: usize = field(line, f[2], "head")?;
                let w: f64 = field(line, f[3], "weight")?;
                let id = parent
                    .edge_between(tail, head)
                    .ok_or(GraphError::UnknownEdge { tail, head })?;
                edge_mask[id] = true;
                weights[id] = w;
            }
            _ => {
                return Err(GraphError::Parse {
                    line,
                    message: "expected `v <id>` or `e <tail> <head> <weight>`".into(),
                })
            }
        }
    }
    make_subgraph(parent, vertex_mask, edge_mask, weights)
}

pub fn write_subgraph_mask(h: &PercolationSubgraph) -> String {
    let mut out = String::new();
    for (v, _) in h.vertex_mask().iter().enumerate().filter(|(_, &b)| b) {
        let _ = writeln!(out, "v {v}");
    }
    for (id, e) in h.parent().edges().iter().enumerate() {
        if let Some(w) = h.weight(id) {
            let _ = writeln!(out, "e {} {} {}", e.tail, e.head, w);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments() {
        let g = parse_edge_list("# path\nn 3\n0 1 1.0   # first\n\n2 1 2.5\n").unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.laplacian().diagonal(), &[1.0, 3.5, 2.5]);
    }

    #[test]
    fn reports_line_numbers() {
        assert_eq!(
            parse_edge_list("n 2\n0 x 1\n"),
            Err(GraphError::Parse {
                line: 2,
                message: "invalid head `x`".into()
            })
        );
        assert!(matches!(
            parse_edge_list("0 1 1\n"),
            Err(GraphError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_edge_list("n 2\n0 1 1\n1 0 1\n"),
            Err(GraphError::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let g = WeightedGraph::new(4, [(0, 1, 0.1), (3, 2, 7.25), (1, 3, 1.0 / 3.0)]).unwrap();
        assert_eq!(parse_edge_list(&write_edge_list(&g)).unwrap(), g);
    }

    #[test]
    fn mask_round_trip_and_errors() {
        let g = Arc::new(WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap());
        let h = parse_subgraph_mask(g.clone(), "v 0\nv 1\ne 1 0 1.5\n").unwrap();
        assert_eq!(h.weight(0), Some(1.5));
        assert_eq!(
            parse_subgraph_mask(g.clone(), &write_subgraph_mask(&h)).unwrap(),
            h
        );
        assert!(matches!(
            parse_subgraph_mask(g.clone(), "v 0\ne 0 2 1\n"),
            Err(GraphError::UnknownEdge { .. })
        ));
        assert!(matches!(
            parse_subgraph_mask(g, "v 0\ne 0 1 1\n"),
            Err(GraphError::DanglingEdge { .. })
        ));
    }
}
