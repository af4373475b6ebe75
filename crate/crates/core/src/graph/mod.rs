//! Weighted graphs, their Laplacians, and percolation subgraphs.
//!
//! A [`WeightedGraph`] is a finite simple graph whose edges carry strictly
//! positive rates. The continuous-time walk on it crosses edge `e` at rate
//! `w(e)`, so the walk leaves `x` at the total incident rate of `x`, which is
//! also the diagonal entry of the Laplacian at `x`.

mod io;
mod subgraph;
mod union_find;

use std::collections::BTreeMap;

use thiserror::Error;

pub use io::{parse_edge_list, parse_subgraph_mask, write_edge_list, write_subgraph_mask};
pub use subgraph::{make_subgraph, PercolationSubgraph, Restriction};
pub use union_find::DisjointSets;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("a graph needs at least one vertex")]
    NoVertices,
    #[error("edge #{index} ({tail}, {head}) references a vertex outside 0..{vertex_count}")]
    VertexOutOfRange {
        index: usize,
        tail: VertexId,
        head: VertexId,
        vertex_count: usize,
    },
    #[error("edge #{index} ({tail}, {head}) is a self-loop")]
    SelfLoop {
        index: usize,
        tail: VertexId,
        head: VertexId,
    },
    #[error("edge #{index} ({tail}, {head}) duplicates edge #{first}")]
    DuplicateEdge {
        index: usize,
        first: usize,
        tail: VertexId,
        head: VertexId,
    },
    #[error(
        "edge #{index} ({tail}, {head}) has weight {weight}, rates must be positive and finite"
    )]
    NonPositiveWeight {
        index: usize,
        tail: VertexId,
        head: VertexId,
        weight: f64,
    },
    #[error("{what} mask has length {found}, parent has {expected}")]
    MaskLength {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("retained edge #{edge} ({tail}, {head}) has an endpoint outside the vertex mask")]
    DanglingEdge {
        edge: EdgeId,
        tail: VertexId,
        head: VertexId,
    },
    #[error("retained edge #{edge} ({tail}, {head}) has weight {weight}, rates must be positive and finite")]
    BadSubgraphWeight {
        edge: EdgeId,
        tail: VertexId,
        head: VertexId,
        weight: f64,
    },
    #[error("edge ({tail}, {head}) is not an edge of the parent graph")]
    UnknownEdge { tail: VertexId, head: VertexId },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// An undirected edge stored with `tail < head`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub tail: VertexId,
    pub head: VertexId,
    pub weight: f64,
}

impl Edge {
    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.tail {
            self.head
        } else {
            self.tail
        }
    }
}

/// Immutable finite simple graph with positive edge rates.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(VertexId, EdgeId)>>,
    incident_weight: Vec<f64>,
}

impl WeightedGraph {
    /// Validates an edge list and builds the adjacency structure.
    ///
    /// Edges may be given in either orientation; they are stored with the
    /// smaller endpoint as tail.
    pub fn new(
        vertex_count: usize,
        edge_list: impl IntoIterator<Item = (VertexId, VertexId, f64)>,
    ) -> Result<Self, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::NoVertices);
        }
        let mut seen: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
        let mut edges = Vec::new();
        for (index, (tail, head, weight)) in edge_list.into_iter().enumerate() {
            if tail >= vertex_count || head >= vertex_count {
                return Err(GraphError::VertexOutOfRange {
                    index,
                    tail,
                    head,
                    vertex_count,
                });
            }
            if tail == head {
                return Err(GraphError::SelfLoop { index, tail, head });
            }
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(GraphError::NonPositiveWeight {
                    index,
                    tail,
                    head,
                    weight,
                });
            }
            let key = (tail.min(head), tail.max(head));
            if let Some(&first) = seen.get(&key) {
                return Err(GraphError::DuplicateEdge {
                    index,
                    first,
                    tail,
                    head,
                });
            }
            seen.insert(key, index);
            edges.push(Edge {
                tail: key.0,
                head: key.1,
                weight,
            });
        }
        Ok(Self::from_validated(vertex_count, edges))
    }

    /// Builds from edges already known to satisfy every invariant.
    pub(crate) fn from_validated(vertex_count: usize, edges: Vec<Edge>) -> Self {
        let mut adjacency = vec![Vec::new(); vertex_count];
        let mut incident_weight = vec![0.0; vertex_count];
        for (id, e) in edges.iter().enumerate() {
            adjacency[e.tail].push((e.head, id));
            adjacency[e.head].push((e.tail, id));
            incident_weight[e.tail] += e.weight;
            incident_weight[e.head] += e.weight;
        }
        Self {
            vertex_count,
            edges,
            adjacency,
            incident_weight,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    /// Neighbors of `v` paired with the connecting edge id.
    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, EdgeId)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v].len()
    }

    /// Total rate at which the walk leaves `v`; equals `Δ(v, v)`.
    pub fn incident_weight(&self, v: VertexId) -> f64 {
        self.incident_weight[v]
    }

    pub fn max_incident_weight(&self) -> f64 {
        self.incident_weight.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_edge_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(0.0, f64::max)
    }

    pub fn edge_between(&self, u: VertexId, v: VertexId) -> Option<EdgeId> {
        self.adjacency
            .get(u)?
            .iter()
            .find(|&&(n, _)| n == v)
            .map(|&(_, id)| id)
    }

    pub fn laplacian(&self) -> LaplacianView {
        LaplacianView::from_graph(self)
    }

    /// The same graph with every rate multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GraphError> {
        Self::new(
            self.vertex_count,
            self.edges
                .iter()
                .map(|e| (e.tail, e.head, e.weight * factor)),
        )
    }

    /// The same edge set with new rates, indexed by edge id.
    pub fn reweighted(&self, weights: &[f64]) -> Result<Self, GraphError> {
        if weights.len() != self.edges.len() {
            return Err(GraphError::MaskLength {
                what: "weight",
                expected: self.edges.len(),
                found: weights.len(),
            });
        }
        Self::new(
            self.vertex_count,
            self.edges
                .iter()
                .zip(weights)
                .map(|(e, &w)| (e.tail, e.head, w)),
        )
    }

    /// Removes every edge with an endpoint whose incident weight in `self`
    /// exceeds `level`. Surviving edges keep their weights.
    pub fn truncate_weights(&self, level: f64) -> Self {
        let kept = self
            .edges
            .iter()
            .filter(|e| {
                self.incident_weight[e.tail] <= level && self.incident_weight[e.head] <= level
            })
            .copied()
            .collect();
        Self::from_validated(self.vertex_count, kept)
    }

    /// `d f`: the weighted edge differences `sqrt(w(e)) (f(tail) - f(head))`.
    pub fn difference(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.vertex_count);
        self.edges
            .iter()
            .map(|e| e.weight.sqrt() * (f[e.tail] - f[e.head]))
            .collect()
    }

    /// Adjoint of [`difference`](Self::difference), mapping edge values back
    /// to vertices. `Δ = d* d`.
    pub fn difference_adjoint(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.edges.len());
        let mut out = vec![0.0; self.vertex_count];
        for (e, &ge) in self.edges.iter().zip(g) {
            let s = e.weight.sqrt() * ge;
            out[e.tail] += s;
            out[e.head] -= s;
        }
        out
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<VertexId>> {
        let mut sets = DisjointSets::new(self.vertex_count);
        for e in &self.edges {
            sets.union(e.tail, e.head);
        }
        sets.groups()
    }

    /// Induced subgraph on `vertices` (given in the order that defines the
    /// new labels).
    pub fn induced(&self, vertices: &[VertexId]) -> Restriction {
        let mut local = vec![None; self.vertex_count];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = Some(i);
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|e| match (local[e.tail], local[e.head]) {
                (Some(a), Some(b)) => Some(Edge {
                    tail: a.min(b),
                    head: a.max(b),
                    weight: e.weight,
                }),
                _ => None,
            })
            .collect();
        Restriction {
            graph: Self::from_validated(vertices.len(), edges),
            to_parent: vertices.to_vec(),
        }
    }
}

/// Sparse symmetric view of `Δ`: `Δ(x, y) = -w(x, y)` off the diagonal and
/// zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianView {
    diagonal: Vec<f64>,
    off_diagonal: BTreeMap<(VertexId, VertexId), f64>,
}

impl LaplacianView {
    fn from_graph(graph: &WeightedGraph) -> Self {
        let mut off_diagonal = BTreeMap::new();
        for e in graph.edges() {
            off_diagonal.insert((e.tail, e.head), -e.weight);
            off_diagonal.insert((e.head, e.tail), -e.weight);
        }
        Self {
            diagonal: graph.incident_weight.clone(),
            off_diagonal,
        }
    }

    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn get(&self, x: VertexId, y: VertexId) -> f64 {
        if x == y {
            self.diagonal[x]
        } else {
            self.off_diagonal.get(&(x, y)).copied().unwrap_or(0.0)
        }
    }

    /// Nonzero off-diagonal entries in row-major order.
    pub fn off_diagonal(&self) -> impl Iterator<Item = ((VertexId, VertexId), f64)> + '_ {
        self.off_diagonal.iter().map(|(&k, &v)| (k, v))
    }

    pub fn row_sum(&self, x: VertexId) -> f64 {
        self.diagonal[x]
            + self
                .off_diagonal
                .range((x, 0)..=(x, usize::MAX))
                .map(|(_, &v)| v)
                .sum::<f64>()
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.diagonal.iter().zip(f).map(|(d, x)| d * x).collect();
        for (&(x, y), &v) in &self.off_diagonal {
            out[x] += v * f[y];
        }
        out
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dimension();
        let mut m = vec![0.0; n * n];
        for (x, &d) in self.diagonal.iter().enumerate() {
            m[x * n + x] = d;
        }
        for (&(x, y), &v) in &self.off_diagonal {
            m[x * n + y] = v;
        }
        m
    }
}
