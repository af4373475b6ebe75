//! Parent graphs, percolation samplers and the ensembles built from them.
//!
//! An [`Ensemble`] is a finite parent graph with a root law and a law for the
//! subgraph `H`. Finite vertex-transitive tori with a uniform root stand in
//! for the infinite lattices; on a finite graph the uniform root is the
//! stationary law of the walk.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::graph::{GraphError, PercolationSubgraph, VertexId, WeightedGraph};
use crate::rng::{derive_seed, substream};
use crate::stats::{mean_standard_error, ratio_standard_error};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("{name} = {value}: {reason}")]
    BadParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("subgraph has no vertices")]
    EmptySubgraph,
    #[error("degenerate conditioning: {0}")]
    Degenerate(String),
    #[error("invalid ensemble: {0}")]
    Invalid(String),
}

fn positive(name: &'static str, value: f64) -> Result<f64, EnvError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(EnvError::BadParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn probability(name: &'static str, value: f64) -> Result<f64, EnvError> {
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(EnvError::BadParameter {
            name,
            value,
            reason: "must lie in (0, 1]",
        })
    }
}

/// Path a–b–c (vertices 0, 1, 2) with rates 1 on (a, b) and `w` on (b, c).
pub fn three_path(w: f64) -> Result<WeightedGraph, EnvError> {
    positive("w", w)?;
    Ok(WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, w)])?)
}

/// Coordinates on `(Z/nZ)^d`, axis 0 varying fastest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusShape {
    pub dimension: usize,
    pub side: usize,
}

impl TorusShape {
    pub fn vertex_count(&self) -> usize {
        self.side.pow(self.dimension as u32)
    }

    pub fn index(&self, coords: &[usize]) -> VertexId {
        coords
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.side + c % self.side)
    }

    pub fn coords(&self, mut v: VertexId) -> Vec<usize> {
        (0..self.dimension)
            .map(|_| {
                let c = v % self.side;
                v /= self.side;
                c
            })
            .collect()
    }
}

/// Nearest-neighbor torus `(Z/nZ)^d` with every rate `w`.
pub fn torus(d: usize, n: usize, w: f64) -> Result<WeightedGraph, EnvError> {
    if d == 0 {
        return Err(EnvError::BadParameter {
            name: "d",
            value: 0.0,
            reason: "dimension must be at least 1",
        });
    }
    if n < 3 {
        return Err(EnvError::BadParameter {
            name: "n",
            value: n as f64,
            reason: "side must be at least 3 to keep the torus simple",
        });
    }
    positive("w", w)?;
    let shape = TorusShape {
        dimension: d,
        side: n,
    };
    let mut edges = Vec::with_capacity(d * shape.vertex_count());
    for v in 0..shape.vertex_count() {
        let coords = shape.coords(v);
        for axis in 0..d {
            let mut next = coords.clone();
            next[axis] = (next[axis] + 1) % n;
            edges.push((v, shape.index(&next), w));
        }
    }
    Ok(WeightedGraph::new(shape.vertex_count(), edges)?)
}

/// Root law over parent vertices.
#[derive(Debug, Clone, PartialEq)]
pub enum RootDistribution {
    Uniform,
    Weighted(Vec<f64>),
}

impl RootDistribution {
    /// Probabilities for each of `n` vertices.
    pub fn probabilities(&self, n: usize) -> Vec<f64> {
        match self {
            RootDistribution::Uniform => vec![1.0 / n as f64; n],
            RootDistribution::Weighted(w) => w.clone(),
        }
    }
}

/// Which cluster(s) of a bond configuration form `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterRule {
    All,
    Largest,
    AtLeast(usize),
}

/// Random subgraph laws drawn from a seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Site {
        alpha: f64,
        weight: f64,
    },
    Bond {
        p: f64,
        weight: f64,
        clusters: ClusterRule,
    },
}

impl Sampler {
    pub fn sample(
        &self,
        parent: &Arc<WeightedGraph>,
        seed: u64,
    ) -> Result<PercolationSubgraph, EnvError> {
        match *self {
            Sampler::Site { alpha, weight } => bernoulli_site(parent, alpha, weight, seed),
            Sampler::Bond {
                p,
                weight,
                clusters,
            } => {
                let h = bernoulli_bond(parent, p, weight, seed)?;
                match clusters {
                    ClusterRule::All => Ok(h),
                    ClusterRule::Largest => largest_cluster(&h),
                    ClusterRule::AtLeast(k) => Ok(clusters_at_least(&h, k)),
                }
            }
        }
    }

    fn with_weight(self, w: f64) -> Self {
        match self {
            Sampler::Site { alpha, .. } => Sampler::Site { alpha, weight: w },
            Sampler::Bond { p, clusters, .. } => Sampler::Bond {
                p,
                weight: w,
                clusters,
            },
        }
    }
}

/// Site percolation: each vertex kept with probability `alpha`, `H` is the
/// induced subgraph with rate `w_h` on every edge.
pub fn bernoulli_site(
    parent: &Arc<WeightedGraph>,
    alpha: f64,
    w_h: f64,
    seed: u64,
) -> Result<PercolationSubgraph, EnvError> {
    probability("alpha", alpha)?;
    positive("w_h", w_h)?;
    let mut rng = substream(seed, 0);
    let mask = (0..parent.vertex_count())
        .map(|_| rng.random::<f64>() < alpha)
        .collect();
    Ok(PercolationSubgraph::induced(parent.clone(), mask, w_h)?)
}

/// Bond percolation: each edge kept with probability `p` at rate `w_h`.
/// Every parent vertex stays in `V(H)`; clusters are selected separately.
pub fn bernoulli_bond(
    parent: &Arc<WeightedGraph>,
    p: f64,
    w_h: f64,
    seed: u64,
) -> Result<PercolationSubgraph, EnvError> {
    probability("p", p)?;
    positive("w_h", w_h)?;
    let mut rng = substream(seed, 0);
    let edge_mask = (0..parent.edge_count())
        .map(|_| rng.random::<f64>() < p)
        .collect();
    Ok(crate::graph::make_subgraph(
        parent.clone(),
        vec![true; parent.vertex_count()],
        edge_mask,
        vec![w_h; parent.edge_count()],
    )?)
}

/// Restriction to the largest connected component; ties go to the
/// component with the smallest vertex id.
pub fn largest_cluster(h: &PercolationSubgraph) -> Result<PercolationSubgraph, EnvError> {
    let components = h.components();
    let mut best: Option<&Vec<VertexId>> = None;
    for c in &components {
        if best.is_none_or(|b| c.len() > b.len()) {
            best = Some(c);
        }
    }
    let best = best.ok_or(EnvError::EmptySubgraph)?;
    let mut keep = vec![false; h.parent().vertex_count()];
    for &v in best {
        keep[v] = true;
    }
    Ok(h.restricted_to(&keep))
}

/// Restriction to every component with at least `min_size` vertices.
pub fn clusters_at_least(h: &PercolationSubgraph, min_size: usize) -> PercolationSubgraph {
    let mut keep = vec![false; h.parent().vertex_count()];
    for c in h.components().iter().filter(|c| c.len() >= min_size) {
        for &v in c {
            keep[v] = true;
        }
    }
    h.restricted_to(&keep)
}

/// How root-incident edges are grouped when checking the rate condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncidenceClasses {
    /// All (root, incident edge) pairs are equivalent under automorphisms.
    Single,
    /// Every (root, incident edge) pair is its own class.
    PerPair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub subgraph: PercolationSubgraph,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubgraphLaw {
    /// Finitely supported law, handled exactly.
    Members(Vec<Member>),
    Sampled(Sampler),
}

/// A parent graph, a root law and a law for the subgraph `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    parent: Arc<WeightedGraph>,
    roots: RootDistribution,
    law: SubgraphLaw,
    vertex_transitive: bool,
    incidence: IncidenceClasses,
}

impl Ensemble {
    pub fn deterministic(
        parent: Arc<WeightedGraph>,
        members: Vec<(PercolationSubgraph, f64)>,
    ) -> Result<Self, EnvError> {
        if members.is_empty() {
            return Err(EnvError::Invalid("no members".into()));
        }
        let total: f64 = members.iter().map(|(_, p)| p).sum();
        if members.iter().any(|(_, p)| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(EnvError::Invalid(format!(
                "member probabilities must be nonnegative and sum to 1 (sum {total})"
            )));
        }
        if members.iter().any(|(h, _)| **h.parent() != *parent) {
            return Err(EnvError::Invalid(
                "member built on a different parent".into(),
            ));
        }
        Ok(Self {
            parent,
            roots: RootDistribution::Uniform,
            law: SubgraphLaw::Members(
                members
                    .into_iter()
                    .map(|(subgraph, probability)| Member {
                        subgraph,
                        probability,
                    })
                    .collect(),
            ),
            vertex_transitive: false,
            incidence: IncidenceClasses::PerPair,
        })
    }

    pub fn sampled(parent: Arc<WeightedGraph>, sampler: Sampler) -> Self {
        Self {
            parent,
            roots: RootDistribution::Uniform,
            law: SubgraphLaw::Sampled(sampler),
            vertex_transitive: false,
            incidence: IncidenceClasses::PerPair,
        }
    }

    /// `H = G` with the parent's own rates.
    pub fn identity(parent: Arc<WeightedGraph>) -> Self {
        let h = PercolationSubgraph::identity(parent.clone());
        Self::deterministic(parent, vec![(h, 1.0)]).expect("single member of mass 1")
    }

    /// Declares the parent vertex-transitive and the law invariant, so one
    /// root and one incidence class represent all of them.
    pub fn transitive(mut self) -> Self {
        self.vertex_transitive = true;
        self.incidence = IncidenceClasses::Single;
        self
    }

    pub fn with_root_distribution(mut self, weights: Vec<f64>) -> Result<Self, EnvError> {
        let total: f64 = weights.iter().sum();
        if weights.len() != self.parent.vertex_count()
            || weights.iter().any(|w| !(*w >= 0.0))
            || (total - 1.0).abs() > 1e-12
        {
            return Err(EnvError::Invalid(
                "root distribution needs one nonnegative weight per vertex summing to 1".into(),
            ));
        }
        self.roots = RootDistribution::Weighted(weights);
        Ok(self)
    }

    pub fn with_incidence_classes(mut self, classes: IncidenceClasses) -> Self {
        self.incidence = classes;
        self
    }

    /// Same law with every retained rate of `H` set to `w`.
    pub fn with_subgraph_weight(&self, w: f64) -> Result<Self, EnvError> {
        positive("w_h", w)?;
        let law = match &self.law {
            SubgraphLaw::Members(ms) => SubgraphLaw::Members(
                ms.iter()
                    .map(|m| {
                        Ok(Member {
                            subgraph: m.subgraph.with_uniform_weight(w)?,
                            probability: m.probability,
                        })
                    })
                    .collect::<Result<_, GraphError>>()?,
            ),
            SubgraphLaw::Sampled(s) => SubgraphLaw::Sampled(s.with_weight(w)),
        };
        Ok(Self {
            law,
            ..self.clone()
        })
    }

    pub fn parent(&self) -> &Arc<WeightedGraph> {
        &self.parent
    }

    pub fn law(&self) -> &SubgraphLaw {
        &self.law
    }

    pub fn root_distribution(&self) -> &RootDistribution {
        &self.roots
    }

    pub fn root_probabilities(&self) -> Vec<f64> {
        self.roots.probabilities(self.parent.vertex_count())
    }

    pub fn is_vertex_transitive(&self) -> bool {
        self.vertex_transitive
    }

    /// Transitive parent with a uniform root: vertex 0 represents all roots.
    pub fn single_root_suffices(&self) -> bool {
        self.vertex_transitive && self.roots == RootDistribution::Uniform
    }

    pub fn incidence_classes(&self) -> IncidenceClasses {
        self.incidence
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.law, SubgraphLaw::Members(_))
    }

    /// Number of realizations used for averages: the members of an exact
    /// law, otherwise `sample_count` draws.
    pub fn realization_count(&self, sample_count: usize) -> usize {
        match &self.law {
            SubgraphLaw::Members(ms) => ms.len(),
            SubgraphLaw::Sampled(_) => sample_count,
        }
    }

    /// Realization `index` and its weight (member probability, or 1 for a
    /// draw). Draw `index` uses its own stream derived from `seed`.
    pub fn realization(
        &self,
        index: usize,
        seed: u64,
    ) -> Result<(PercolationSubgraph, f64), EnvError> {
        match &self.law {
            SubgraphLaw::Members(ms) => {
                let m = &ms[index];
                Ok((m.subgraph.clone(), m.probability))
            }
            SubgraphLaw::Sampled(s) => Ok((
                s.sample(&self.parent, derive_seed(seed, index as u64))?,
                1.0,
            )),
        }
    }

    /// Flat (root, incident edge) pairs in CSR order with their class ids.
    pub fn incidence_pairs(&self) -> Vec<IncidencePair> {
        let mut out = Vec::with_capacity(2 * self.parent.edge_count());
        for root in 0..self.parent.vertex_count() {
            for &(neighbor, edge) in self.parent.neighbors(root) {
                let class = match self.incidence {
                    IncidenceClasses::Single => 0,
                    IncidenceClasses::PerPair => out.len(),
                };
                out.push(IncidencePair {
                    root,
                    neighbor,
                    edge,
                    class,
                });
            }
        }
        out
    }

    pub fn class_labels(&self, pairs: &[IncidencePair]) -> Vec<String> {
        match self.incidence {
            IncidenceClasses::Single => vec!["all".into()],
            IncidenceClasses::PerPair => pairs
                .iter()
                .map(|p| format!("{}>{}", p.root, p.neighbor))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncidencePair {
    pub root: VertexId,
    pub neighbor: VertexId,
    pub edge: usize,
    pub class: usize,
}

/// The four translates of `Z² \ {both coordinates odd}` on the `n × n`
/// unit torus, each with probability 1/4 and rate `w_h` on its edges.
/// Member `(a, b)` deletes vertices with `x ≡ 1 + a`, `y ≡ 1 + b` (mod 2);
/// member 0 is the odd–odd deletion itself.
pub fn z2_odd_deleted_ensemble(n: usize, w_h: f64) -> Result<Ensemble, EnvError> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(EnvError::BadParameter {
            name: "n",
            value: n as f64,
            reason: "side must be even and at least 4",
        });
    }
    positive("w_h", w_h)?;
    let parent = Arc::new(torus(2, n, 1.0)?);
    let shape = TorusShape {
        dimension: 2,
        side: n,
    };
    let mut members = Vec::with_capacity(4);
    for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        let mask = (0..parent.vertex_count())
            .map(|v| {
                let c = shape.coords(v);
                !(c[0] % 2 == (1 + a) % 2 && c[1] % 2 == (1 + b) % 2)
            })
            .collect();
        members.push((
            PercolationSubgraph::induced(parent.clone(), mask, w_h)?,
            0.25,
        ));
    }
    Ok(Ensemble::deterministic(parent, members)?.transitive())
}

/// Site percolation on the unit-free torus `(Z/nZ)^d` with rate `w`.
pub fn site_percolation_ensemble(
    d: usize,
    n: usize,
    w: f64,
    alpha: f64,
    w_h: f64,
) -> Result<Ensemble, EnvError> {
    probability("alpha", alpha)?;
    positive("w_h", w_h)?;
    let parent = Arc::new(torus(d, n, w)?);
    Ok(Ensemble::sampled(parent, Sampler::Site { alpha, weight: w_h }).transitive())
}

/// Bond percolation on the torus with the given cluster selection.
pub fn bond_percolation_ensemble(
    d: usize,
    n: usize,
    w: f64,
    p: f64,
    w_h: f64,
    clusters: ClusterRule,
) -> Result<Ensemble, EnvError> {
    probability("p", p)?;
    positive("w_h", w_h)?;
    let parent = Arc::new(torus(d, n, w)?);
    Ok(Ensemble::sampled(
        parent,
        Sampler::Bond {
            p,
            weight: w_h,
            clusters,
        },
    )
    .transitive())
}

/// Occupation of one incidence class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassOccupation {
    pub label: String,
    /// `P[e ∈ E(H) | o ∈ V(H)]`.
    pub edge_probability: f64,
    /// `E[w_H(e) | e ∈ E(H)]`; zero when the edge was never retained.
    pub mean_weight: f64,
    /// Product of the two, `E[w_H(e); e ∈ E(H)] / P[o ∈ V(H)]`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// Root-weighted mean of `w_G(e)` over the class.
    pub parent_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// `P[o ∈ V(H)]`.
    pub alpha_hat: f64,
    pub alpha_se: f64,
    /// `E[deg_H(o) / deg_G(o) | o ∈ V(H)]`, which is `δ` on tori.
    pub delta_hat: f64,
    pub delta_se: f64,
    pub classes: Vec<ClassOccupation>,
    pub sample_count: usize,
    pub exact: bool,
}

/// Per-realization sums feeding [`EnsembleStats`].
struct Tally {
    weight: f64,
    retained: f64,
    degree_ratio: f64,
    class_weight: Vec<f64>,
    class_edges: Vec<f64>,
    class_roots: Vec<f64>,
}

fn tally(
    h: &PercolationSubgraph,
    weight: f64,
    pi: &[f64],
    pairs: &[IncidencePair],
    class_count: usize,
) -> Tally {
    let parent = h.parent();
    let mut t = Tally {
        weight,
        retained: 0.0,
        degree_ratio: 0.0,
        class_weight: vec![0.0; class_count],
        class_edges: vec![0.0; class_count],
        class_roots: vec![0.0; class_count],
    };
    for (v, &p) in pi.iter().enumerate() {
        if p == 0.0 || !h.contains_vertex(v) {
            continue;
        }
        t.retained += p;
        let deg_g = parent.degree(v);
        let ratio = if deg_g == 0 {
            1.0
        } else {
            h.degree(v) as f64 / deg_g as f64
        };
        t.degree_ratio += p * ratio;
    }
    for pair in pairs {
        let p = pi[pair.root];
        if p == 0.0 || !h.contains_vertex(pair.root) {
            continue;
        }
        t.class_roots[pair.class] += p;
        if let Some(w) = h.weight(pair.edge) {
            t.class_edges[pair.class] += p;
            t.class_weight[pair.class] += p * w;
        }
    }
    t
}

/// Estimates `α`, `δ` and per-class edge occupation. Exact laws are
/// enumerated; sampled laws use `sample_count` draws with batch-means
/// standard errors.
pub fn estimate_stats(
    ensemble: &Ensemble,
    sample_count: usize,
    seed: u64,
) -> Result<EnsembleStats, EnvError> {
    use rayon::prelude::*;

    if sample_count == 0 && !ensemble.is_exact() {
        return Err(EnvError::Invalid("sample_count must be at least 1".into()));
    }
    let pi = ensemble.root_probabilities();
    let pairs = ensemble.incidence_pairs();
    let labels = ensemble.class_labels(&pairs);
    let class_count = labels.len();
    let count = ensemble.realization_count(sample_count);
    let tallies: Vec<Tally> = (0..count)
        .into_par_iter()
        .map(|i| {
            let (h, w) = ensemble.realization(i, seed)?;
            Ok(tally(&h, w, &pi, &pairs, class_count))
        })
        .collect::<Result<_, EnvError>>()?;

    let exact = ensemble.is_exact();
    let total_weight: f64 = tallies.iter().map(|t| t.weight).sum();
    let weighted = |f: &dyn Fn(&Tally) -> f64| -> Vec<f64> {
        tallies.iter().map(|t| t.weight * f(t)).collect()
    };
    let retained = weighted(&|t| t.retained);
    let retained_sum: f64 = retained.iter().sum();
    if !(retained_sum > 0.0) {
        return Err(EnvError::Degenerate(
            "no realization contains a root with positive probability".into(),
        ));
    }
    let se = |num: &[f64], den: &[f64]| {
        if exact {
            0.0
        } else {
            ratio_standard_error(num, den)
        }
    };

    let alpha_hat = retained_sum / total_weight;
    let alpha_se = if exact {
        0.0
    } else {
        mean_standard_error(&retained)
    };
    let degree_ratio = weighted(&|t| t.degree_ratio);
    let delta_hat = degree_ratio.iter().sum::<f64>() / retained_sum;
    let delta_se = se(&degree_ratio, &retained);

    let mut parent_weight = vec![0.0; class_count];
    let mut parent_mass = vec![0.0; class_count];
    for pair in &pairs {
        let p = pi[pair.root];
        parent_weight[pair.class] += p * ensemble.parent().edge(pair.edge).weight;
        parent_mass[pair.class] += p;
    }

    let classes = labels
        .into_iter()
        .enumerate()
        .map(|(c, label)| {
            let w = weighted(&|t| t.class_weight[c]);
            let e = weighted(&|t| t.class_edges[c]);
            let r = weighted(&|t| t.class_roots[c]);
            let (ws, es, rs): (f64, f64, f64) = (w.iter().sum(), e.iter().sum(), r.iter().sum());
            let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::NAN };
            ClassOccupation {
                label,
                edge_probability: ratio(es, rs),
                mean_weight: if es > 0.0 { ws / es } else { 0.0 },
                lhs: ratio(ws, rs),
                lhs_se: if rs > 0.0 { se(&w, &r) } else { f64::INFINITY },
                parent_weight: ratio(parent_weight[c], parent_mass[c]),
            }
        })
        .collect();

    Ok(EnsembleStats {
        alpha_hat,
        alpha_se,
        delta_hat,
        delta_se,
        classes,
        sample_count: count,
        exact,
    })
}
