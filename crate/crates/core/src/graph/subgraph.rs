use std::sync::Arc;

use super::{DisjointSets, Edge, EdgeId, GraphError, VertexId, WeightedGraph};

/// A graph relabeled onto `0..k` together with the parent label of each
/// local vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Restriction {
    pub graph: WeightedGraph,
    pub to_parent: Vec<VertexId>,
}

/// A subgraph `H` of a parent graph with its own positive rates `w_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct PercolationSubgraph {
    parent: Arc<WeightedGraph>,
    vertex_mask: Vec<bool>,
    edge_mask: Vec<bool>,
    // Indexed by parent edge id; zero on dropped edges.
    weights: Vec<f64>,
}

/// Validates masks and rates against `parent`. `subgraph_weights` is indexed
/// by parent edge id and only read where `edge_mask` is set.
pub fn make_subgraph(
    parent: Arc<WeightedGraph>,
    vertex_mask: Vec<bool>,
    edge_mask: Vec<bool>,
    subgraph_weights: Vec<f64>,
) -> Result<PercolationSubgraph, GraphError> {
    if vertex_mask.len() != parent.vertex_count() {
        return Err(GraphError::MaskLength {
            what: "vertex",
            expected: parent.vertex_count(),
            found: vertex_mask.len(),
        });
    }
    for (what, found) in [
        ("edge", edge_mask.len()),
        ("weight", subgraph_weights.len()),
    ] {
        if found != parent.edge_count() {
            return Err(GraphError::MaskLength {
                what,
                expected: parent.edge_count(),
                found,
            });
        }
    }
    let mut weights = subgraph_weights;
    for (id, e) in parent.edges().iter().enumerate() {
        if !edge_mask[id] {
            weights[id] = 0.0;
            continue;
        }
        if !(vertex_mask[e.tail] && vertex_mask[e.head]) {
            return Err(GraphError::DanglingEdge {
                edge: id,
                tail: e.tail,
                head: e.head,
            });
        }
        let w = weights[id];
        if !(w > 0.0 && w.is_finite()) {
            return Err(GraphError::BadSubgraphWeight {
                edge: id,
                tail: e.tail,
                head: e.head,
                weight: w,
            });
        }
    }
    Ok(PercolationSubgraph {
        parent,
        vertex_mask,
        edge_mask,
        weights,
    })
}

impl PercolationSubgraph {
    /// `H = G` with the parent's own rates.
    pub fn identity(parent: Arc<WeightedGraph>) -> Self {
        let weights = parent.edges().iter().map(|e| e.weight).collect();
        Self {
            vertex_mask: vec![true; parent.vertex_count()],
            edge_mask: vec![true; parent.edge_count()],
            weights,
            parent,
        }
    }

    /// Induced subgraph on `vertex_mask` with every retained edge at rate
    /// `weight`.
    pub fn induced(
        parent: Arc<WeightedGraph>,
        vertex_mask: Vec<bool>,
        weight: f64,
    ) -> Result<Self, GraphError> {
        let edge_mask: Vec<bool> = parent
            .edges()
            .iter()
            .map(|e| {
                vertex_mask.get(e.tail) == Some(&true) && vertex_mask.get(e.head) == Some(&true)
            })
            .collect();
        let weights = vec![weight; parent.edge_count()];
        make_subgraph(parent, vertex_mask, edge_mask, weights)
    }

    pub fn parent(&self) -> &Arc<WeightedGraph> {
        &self.parent
    }

    pub fn vertex_mask(&self) -> &[bool] {
        &self.vertex_mask
    }

    pub fn edge_mask(&self) -> &[bool] {
        &self.edge_mask
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertex_mask[v]
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        self.edge_mask[e]
    }

    /// `w_H(e)` if `e` is retained.
    pub fn weight(&self, e: EdgeId) -> Option<f64> {
        self.edge_mask[e].then(|| self.weights[e])
    }

    pub fn retained_vertex_count(&self) -> usize {
        self.vertex_mask.iter().filter(|&&b| b).count()
    }

    pub fn retained_edge_count(&self) -> usize {
        self.edge_mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.vertex_mask.iter().any(|&b| b)
    }

    /// Number of retained edges at `v`.
    pub fn degree(&self, v: VertexId) -> usize {
        self.parent
            .neighbors(v)
            .iter()
            .filter(|&&(_, e)| self.edge_mask[e])
            .count()
    }

    /// `Δ_H(v, v)`.
    pub fn incident_weight(&self, v: VertexId) -> f64 {
        self.parent
            .neighbors(v)
            .iter()
            .filter(|&&(_, e)| self.edge_mask[e])
            .map(|&(_, e)| self.weights[e])
            .sum()
    }

    /// Same masks with every retained rate replaced by `weight`.
    pub fn with_uniform_weight(&self, weight: f64) -> Result<Self, GraphError> {
        make_subgraph(
            self.parent.clone(),
            self.vertex_mask.clone(),
            self.edge_mask.clone(),
            vec![weight; self.parent.edge_count()],
        )
    }

    /// Keeps only the vertices in `keep` (and retained edges between them).
    pub fn restricted_to(&self, keep: &[bool]) -> Self {
        assert_eq!(keep.len(), self.vertex_mask.len());
        let vertex_mask: Vec<bool> = self
            .vertex_mask
            .iter()
            .zip(keep)
            .map(|(&a, &b)| a && b)
            .collect();
        let edge_mask: Vec<bool> = self
            .parent
            .edges()
            .iter()
            .enumerate()
            .map(|(id, e)| self.edge_mask[id] && vertex_mask[e.tail] && vertex_mask[e.head])
            .collect();
        let weights = self
            .weights
            .iter()
            .zip(&edge_mask)
            .map(|(&w, &m)| if m { w } else { 0.0 })
            .collect();
        Self {
            parent: self.parent.clone(),
            vertex_mask,
            edge_mask,
            weights,
        }
    }

    /// Connected components of `H` in parent labels, ordered by smallest
    /// vertex.
    pub fn components(&self) -> Vec<Vec<VertexId>> {
        let mut sets = DisjointSets::new(self.parent.vertex_count());
        for (id, e) in self.parent.edges().iter().enumerate() {
            if self.edge_mask[id] {
                sets.union(e.tail, e.head);
            }
        }
        sets.groups()
            .into_iter()
            .filter(|g| self.vertex_mask[g[0]])
            .collect()
    }

    /// `H` as a standalone graph on its retained vertices, in increasing
    /// parent order. `None` when `H` is empty.
    pub fn restrict(&self) -> Option<Restriction> {
        let vertices: Vec<VertexId> = (0..self.vertex_mask.len())
            .filter(|&v| self.vertex_mask[v])
            .collect();
        self.restrict_onto(&vertices)
    }

    /// Each connected component of `H` as a standalone graph.
    pub fn component_restrictions(&self) -> Vec<Restriction> {
        self.components()
            .iter()
            .filter_map(|c| self.restrict_onto(c))
            .collect()
    }

    fn restrict_onto(&self, vertices: &[VertexId]) -> Option<Restriction> {
        if vertices.is_empty() {
            return None;
        }
        let mut local = vec![usize::MAX; self.parent.vertex_count()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let edges = self
            .parent
            .edges()
            .iter()
            .enumerate()
            .filter(|&(id, e)| {
                self.edge_mask[id] && local[e.tail] != usize::MAX && local[e.head] != usize::MAX
            })
            .map(|(id, e)| {
                let (a, b) = (local[e.tail], local[e.head]);
                Edge {
                    tail: a.min(b),
                    head: a.max(b),
                    weight: self.weights[id],
                }
            })
            .collect();
        Some(Restriction {
            graph: WeightedGraph::from_validated(vertices.len(), edges),
            to_parent: vertices.to_vec(),
        })
    }
}
