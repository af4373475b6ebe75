//! Uniformization: with `λ ≥ max_x Δ(x, x)` and `P = I - Δ/λ` (a symmetric
//! stochastic matrix),
//!
//! ```text
//! exp(-tΔ) = Σ_k e^{-λt} (λt)^k / k! · P^k
//! ```
//!
//! The series is cut once the Poisson tail mass is provably below `eps`.
//! Since `0 ≤ (P^k)(x, x) ≤ 1`, the dropped terms change the return
//! probability by at most that tail mass.

use super::{check_root, CurveMethod, HeatKernelError, ReturnCurve, TimeGrid};
use crate::graph::{VertexId, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformizedValue {
    pub value: f64,
    /// Upper bound on `|value - p_t(root)|`.
    pub tail_bound: f64,
    /// Number of series terms summed.
    pub terms: usize,
}

/// Poisson(mean) probabilities for `k = 0..=K` and a bound on the mass
/// beyond `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonTruncation {
    pub weights: Vec<f64>,
    pub tail_bound: f64,
}

/// Default cap on the truncation order: `10·mean + 200`.
pub fn default_term_cap(mean: f64) -> usize {
    (10.0 * mean).ceil() as usize + 200
}

/// Smallest `K` whose Poisson tail is certified below `eps`.
///
/// For `k + 2 > mean` the ratio of consecutive probabilities beyond `K` is
/// at most `mean / (K + 2)`, so the tail is bounded by a geometric series
/// starting at `pmf(K + 1)`. Everything is carried in log space.
pub fn poisson_truncation(
    mean: f64,
    eps: f64,
    cap: Option<usize>,
) -> Result<PoissonTruncation, HeatKernelError> {
    if !(eps > 0.0) {
        return Err(HeatKernelError::BadTolerance { eps });
    }
    if !(mean >= 0.0 && mean.is_finite()) {
        return Err(HeatKernelError::BadTime { t: mean });
    }
    if mean == 0.0 {
        return Ok(PoissonTruncation {
            weights: vec![1.0],
            tail_bound: 0.0,
        });
    }
    let cap = cap.unwrap_or_else(|| default_term_cap(mean));
    let log_mean = mean.ln();
    let log_eps = eps.ln();
    let mut log_pmf = -mean;
    let mut weights = Vec::new();
    for k in 0..=cap {
        weights.push(log_pmf.exp());
        let log_next = log_pmf + log_mean - ((k + 1) as f64).ln();
        let ratio = mean / (k + 2) as f64;
        if ratio < 1.0 {
            let log_tail = log_next - (1.0 - ratio).ln();
            if log_tail <= log_eps {
                return Ok(PoissonTruncation {
                    weights,
                    tail_bound: log_tail.exp(),
                });
            }
        }
        log_pmf = log_next;
    }
    Err(HeatKernelError::IterationCap { mean, eps, cap })
}

/// `P = I - Δ/λ` in compressed rows.
struct UniformizedChain {
    rate: f64,
    stay: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
}

impl UniformizedChain {
    fn new(graph: &WeightedGraph) -> Self {
        let rate = graph.max_incident_weight();
        let n = graph.vertex_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        let mut stay = Vec::with_capacity(n);
        offsets.push(0);
        for x in 0..n {
            stay.push((1.0 - graph.incident_weight(x) / rate).max(0.0));
            for &(y, e) in graph.neighbors(x) {
                targets.push(y);
                probs.push(graph.edge(e).weight / rate);
            }
            offsets.push(targets.len());
        }
        Self {
            rate,
            stay,
            offsets,
            targets,
            probs,
        }
    }

    fn step(&self, v: &[f64], out: &mut [f64]) {
        for x in 0..v.len() {
            let mut acc = self.stay[x] * v[x];
            for i in self.offsets[x]..self.offsets[x + 1] {
                acc += self.probs[i] * v[self.targets[i]];
            }
            out[x] = acc;
        }
    }

    /// `(P^k)(root, root)` for `k < len`, using `(P^{2j})_{rr} = |P^j e_r|²`
    /// and `(P^{2j+1})_{rr} = <P^j e_r, P^{j+1} e_r>`.
    fn diagonal_sequence(&self, root: VertexId, len: usize) -> Vec<f64> {
        let n = self.stay.len();
        let mut current = vec![0.0; n];
        current[root] = 1.0;
        let mut next = vec![0.0; n];
        let mut out = Vec::with_capacity(len + 1);
        while out.len() < len {
            out.push(dot(&current, &current));
            self.step(&current, &mut next);
            if out.len() < len {
                out.push(dot(&current, &next));
            }
            std::mem::swap(&mut current, &mut next);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate(times: &[f64], eps: f64) -> Result<(), HeatKernelError> {
    if !(eps > 0.0) {
        return Err(HeatKernelError::BadTolerance { eps });
    }
    if let Some(&t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(HeatKernelError::BadTime { t });
    }
    Ok(())
}

/// Values and tail bounds of `p_t(root)` at each time. Shares the sequence
/// `(P^k)(root, root)` across times.
fn uniformized_values(
    graph: &WeightedGraph,
    chain: &UniformizedChain,
    root: VertexId,
    times: &[f64],
    eps: f64,
) -> Result<Vec<UniformizedValue>, HeatKernelError> {
    if graph.incident_weight(root) == 0.0 {
        return Ok(times
            .iter()
            .map(|_| UniformizedValue {
                value: 1.0,
                tail_bound: 0.0,
                terms: 1,
            })
            .collect());
    }
    let truncations = times
        .iter()
        .map(|&t| poisson_truncation(chain.rate * t, eps, None))
        .collect::<Result<Vec<_>, _>>()?;
    let len = truncations
        .iter()
        .map(|p| p.weights.len())
        .max()
        .unwrap_or(0);
    let diagonal = chain.diagonal_sequence(root, len);
    Ok(truncations
        .into_iter()
        .map(|p| {
            let value: f64 = p.weights.iter().zip(&diagonal).map(|(w, d)| w * d).sum();
            UniformizedValue {
                value: value.clamp(0.0, 1.0),
                tail_bound: p.tail_bound,
                terms: p.weights.len(),
            }
        })
        .collect())
}

pub fn return_probability_uniformized(
    graph: &WeightedGraph,
    root: VertexId,
    t: f64,
    eps: f64,
) -> Result<UniformizedValue, HeatKernelError> {
    check_root(graph, root)?;
    validate(&[t], eps)?;
    let chain = UniformizedChain::new(graph);
    Ok(uniformized_values(graph, &chain, root, &[t], eps)?[0])
}

/// Return curve with per-time tail bounds as error bounds.
pub fn uniformized_curve(
    graph: &WeightedGraph,
    root: VertexId,
    times: &TimeGrid,
    eps: f64,
) -> Result<ReturnCurve, HeatKernelError> {
    check_root(graph, root)?;
    validate(times.times(), eps)?;
    let chain = UniformizedChain::new(graph);
    let values = uniformized_values(graph, &chain, root, times.times(), eps)?;
    ReturnCurve::new(
        times.clone(),
        values.iter().map(|v| v.value).collect(),
        Some(values.iter().map(|v| v.tail_bound).collect()),
        CurveMethod::Uniformized,
    )
}

/// `Σ_x π(x) p_t(x)` and the matching error bound `Σ_x π(x) tail_x(t)`,
/// working one connected component at a time.
pub fn averaged_uniformized(
    graph: &WeightedGraph,
    root_weights: &[f64],
    times: &[f64],
    eps: f64,
) -> Result<(Vec<f64>, Vec<f64>), HeatKernelError> {
    validate(times, eps)?;
    if root_weights.len() != graph.vertex_count() {
        return Err(HeatKernelError::BadRootWeights(format!(
            "{} weights for {} vertices",
            root_weights.len(),
            graph.vertex_count()
        )));
    }
    let mut values = vec![0.0; times.len()];
    let mut bounds = vec![0.0; times.len()];
    for members in graph.components() {
        if members.iter().all(|&v| root_weights[v] == 0.0) {
            continue;
        }
        let local = graph.induced(&members);
        let chain = UniformizedChain::new(&local.graph);
        for (i, &v) in members.iter().enumerate() {
            let w = root_weights[v];
            if w == 0.0 {
                continue;
            }
            for (j, u) in uniformized_values(&local.graph, &chain, i, times, eps)?
                .into_iter()
                .enumerate()
            {
                values[j] += w * u.value;
                bounds[j] += w * u.tail_bound;
            }
        }
    }
    Ok((values, bounds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_weights_and_tail() {
        let p = poisson_truncation(3.0, 1e-12, None).unwrap();
        let head: f64 = p.weights.iter().sum();
        assert!(p.tail_bound <= 1e-12);
        // The certified bound dominates the true tail 1 - head.
        assert!(1.0 - head <= p.tail_bound + 1e-15);
        assert!((p.weights[3] - (-3.0f64).exp() * 27.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_large_mean_stays_finite() {
        let p = poisson_truncation(2000.0, 1e-10, None).unwrap();
        let head: f64 = p.weights.iter().sum();
        assert!((head - 1.0).abs() < 1e-9);
        assert!(p.weights.len() > 2000);
    }

    #[test]
    fn iteration_cap_and_bad_inputs() {
        assert!(matches!(
            poisson_truncation(50.0, 1e-12, Some(10)),
            Err(HeatKernelError::IterationCap { cap: 10, .. })
        ));
        assert!(matches!(
            poisson_truncation(1.0, 0.0, None),
            Err(HeatKernelError::BadTolerance { .. })
        ));
    }

    #[test]
    fn single_vertex_is_exactly_one() {
        let g = WeightedGraph::new(1, []).unwrap();
        let u = return_probability_uniformized(&g, 0, 7.0, 1e-10).unwrap();
        assert_eq!(u.value, 1.0);
        assert_eq!(u.tail_bound, 0.0);
    }

    #[test]
    fn closed_form_examples() {
        let pair = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let u = return_probability_uniformized(&pair, 0, 1.0, 1e-10).unwrap();
        assert!(u.tail_bound <= 1e-10);
        assert!((u.value - 0.567_667_641_618_306_3).abs() <= 1e-10);

        let path = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let u = return_probability_uniformized(&path, 1, 1.0, 1e-12).unwrap();
        assert!((u.value - 0.366_524_712_245_242_6).abs() <= 1e-12 + 1e-15);
    }

    #[test]
    fn diagonal_sequence_matches_direct_powers() {
        let g =
            WeightedGraph::new(4, [(0, 1, 1.0), (1, 2, 3.0), (2, 3, 0.5), (0, 2, 2.0)]).unwrap();
        let chain = UniformizedChain::new(&g);
        let seq = chain.diagonal_sequence(2, 9);
        let mut v = vec![0.0; 4];
        v[2] = 1.0;
        let mut next = vec![0.0; 4];
        for d in seq {
            assert!((d - v[2]).abs() < 1e-14);
            chain.step(&v, &mut next);
            std::mem::swap(&mut v, &mut next);
        }
    }
}
