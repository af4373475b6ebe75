//! Dense symmetric eigendecomposition of `Δ`, one connected component at a
//! time.
//!
//! `p_t(x) = Σ_k U(x, k)² exp(-λ_k t)`. Averages of `p_t` over a root law
//! with constant weight on a component only need that component's
//! eigenvalues, because every column of `U` has unit norm.

use faer::{Mat, Side};

use super::{check_root, CurveMethod, HeatKernelError, ReturnCurve, TimeGrid};
use crate::graph::{VertexId, WeightedGraph};

/// Largest connected component the dense route accepts.
pub const DENSE_VERTEX_CAP: usize = 5000;

// Eigenvalues this far below zero (relative to the largest rate) are rounding.
const CLAMP_TOLERANCE: f64 = 1e-10;

/// Finite spectral measure of `Δ` at a root: atoms `λ_k` with masses
/// `U(root, k)²`, restricted to the root's connected component.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub root_overlaps: Vec<f64>,
}

impl SpectralData {
    pub fn return_probability(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 1.0;
        }
        heat_sum(&self.eigenvalues, &self.root_overlaps, t)
    }
}

/// Spectral measure with arbitrary nonnegative root weights:
/// `Σ_x π(x) p_t(x) = Σ_k mass_k exp(-λ_k t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    pub eigenvalues: Vec<f64>,
    pub masses: Vec<f64>,
    /// `Σ_x π(x)`, the exact value at `t = 0`.
    pub total_mass: f64,
}

impl SpectralMeasure {
    pub fn evaluate(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.total_mass;
        }
        heat_sum(&self.eigenvalues, &self.masses, t)
    }

    /// `-d/dt` at zero: `Σ_k mass_k λ_k`.
    pub fn first_moment(&self) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.masses)
            .map(|(l, m)| l * m)
            .sum()
    }
}

fn heat_sum(eigenvalues: &[f64], masses: &[f64], t: f64) -> f64 {
    eigenvalues
        .iter()
        .zip(masses)
        .map(|(&l, &m)| m * (-l * t).exp())
        .sum()
}

fn dense_laplacian(graph: &WeightedGraph) -> Result<Mat<f64>, HeatKernelError> {
    let n = graph.vertex_count();
    if n > DENSE_VERTEX_CAP {
        return Err(HeatKernelError::TooLargeForDense {
            size: n,
            cap: DENSE_VERTEX_CAP,
        });
    }
    let mut m = Mat::<f64>::zeros(n, n);
    for x in 0..n {
        m[(x, x)] = graph.incident_weight(x);
    }
    for e in graph.edges() {
        m[(e.tail, e.head)] = -e.weight;
        m[(e.head, e.tail)] = -e.weight;
    }
    Ok(m)
}

fn clamp_eigenvalue(value: f64, scale: f64) -> Result<f64, HeatKernelError> {
    if value >= 0.0 {
        Ok(value)
    } else if value >= -CLAMP_TOLERANCE * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(HeatKernelError::NegativeEigenvalue { value })
    }
}

/// Eigenvalues of `Δ` in ascending order, clamped at zero.
pub fn laplacian_eigenvalues(graph: &WeightedGraph) -> Result<Vec<f64>, HeatKernelError> {
    if graph.vertex_count() == 1 {
        return Ok(vec![0.0]);
    }
    let m = dense_laplacian(graph)?;
    let scale = graph.max_incident_weight();
    let mut values = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| HeatKernelError::NoConvergence)?;
    for v in values.iter_mut() {
        *v = clamp_eigenvalue(*v, scale)?;
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenvalues (ascending, clamped) and the matching eigenvector matrix.
fn eigen(graph: &WeightedGraph) -> Result<(Vec<f64>, Mat<f64>), HeatKernelError> {
    let n = graph.vertex_count();
    let m = dense_laplacian(graph)?;
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| HeatKernelError::NoConvergence)?;
    let scale = graph.max_incident_weight();
    let s = evd.S().column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let values = order
        .iter()
        .map(|&k| clamp_eigenvalue(s[k], scale))
        .collect::<Result<Vec<_>, _>>()?;
    let u = evd.U();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok((values, vectors))
}

/// Spectral measure of `Δ` at `root`.
pub fn spectral_decompose(
    graph: &WeightedGraph,
    root: VertexId,
) -> Result<SpectralData, HeatKernelError> {
    Ok(spectral_decompose_roots(graph, &[root])?.remove(0))
}

/// Spectral measures at several roots, sharing one eigendecomposition per
/// connected component.
pub fn spectral_decompose_roots(
    graph: &WeightedGraph,
    roots: &[VertexId],
) -> Result<Vec<SpectralData>, HeatKernelError> {
    for &r in roots {
        check_root(graph, r)?;
    }
    let components = graph.components();
    let mut component_of = vec![0; graph.vertex_count()];
    for (c, members) in components.iter().enumerate() {
        for &v in members {
            component_of[v] = c;
        }
    }
    let mut out: Vec<Option<SpectralData>> = vec![None; roots.len()];
    for (c, members) in components.iter().enumerate() {
        let wanted: Vec<usize> = (0..roots.len())
            .filter(|&i| component_of[roots[i]] == c)
            .collect();
        if wanted.is_empty() {
            continue;
        }
        if members.len() == 1 {
            for &i in &wanted {
                out[i] = Some(SpectralData {
                    eigenvalues: vec![0.0],
                    root_overlaps: vec![1.0],
                });
            }
            continue;
        }
        let local = graph.induced(members);
        let (values, vectors) = eigen(&local.graph)?;
        for &i in &wanted {
            let row = members
                .binary_search(&roots[i])
                .expect("root in its component");
            out[i] = Some(SpectralData {
                eigenvalues: values.clone(),
                root_overlaps: (0..values.len())
                    .map(|k| vectors[(row, k)].powi(2))
                    .collect(),
            });
        }
    }
    Ok(out
        .into_iter()
        .map(|d| d.expect("every root assigned"))
        .collect())
}

/// Spectral measure of `Σ_x π(x) p_t(x)` for nonnegative weights `π`
/// (not necessarily normalized).
pub fn averaged_spectral_measure(
    graph: &WeightedGraph,
    root_weights: &[f64],
) -> Result<SpectralMeasure, HeatKernelError> {
    if root_weights.len() != graph.vertex_count() {
        return Err(HeatKernelError::BadRootWeights(format!(
            "{} weights for {} vertices",
            root_weights.len(),
            graph.vertex_count()
        )));
    }
    if root_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(HeatKernelError::BadRootWeights(
            "weights must be nonnegative and finite".into(),
        ));
    }
    let mut eigenvalues = Vec::new();
    let mut masses = Vec::new();
    for members in graph.components() {
        let weights: Vec<f64> = members.iter().map(|&v| root_weights[v]).collect();
        if weights.iter().all(|&w| w == 0.0) {
            continue;
        }
        if members.len() == 1 {
            eigenvalues.push(0.0);
            masses.push(weights[0]);
            continue;
        }
        let local = graph.induced(&members);
        if weights.iter().all(|&w| w == weights[0]) {
            let values = laplacian_eigenvalues(&local.graph)?;
            masses.extend(std::iter::repeat_n(weights[0], values.len()));
            eigenvalues.extend(values);
        } else {
            let (values, vectors) = eigen(&local.graph)?;
            for (k, &l) in values.iter().enumerate() {
                eigenvalues.push(l);
                masses.push(
                    weights
                        .iter()
                        .enumerate()
                        .map(|(row, &w)| w * vectors[(row, k)].powi(2))
                        .sum(),
                );
            }
        }
    }
    Ok(SpectralMeasure {
        eigenvalues,
        masses,
        total_mass: root_weights.iter().sum(),
    })
}

/// `p_t(root)` on `times` from the spectral measure at `root`.
pub fn return_probability_dense(
    graph: &WeightedGraph,
    root: VertexId,
    times: &TimeGrid,
) -> Result<ReturnCurve, HeatKernelError> {
    let data = spectral_decompose(graph, root)?;
    let values = times
        .times()
        .iter()
        .map(|&t| data.return_probability(t))
        .collect();
    ReturnCurve::new(times.clone(), values, None, CurveMethod::Dense)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn single_vertex_spectrum() {
        let g = WeightedGraph::new(1, []).unwrap();
        let d = spectral_decompose(&g, 0).unwrap();
        assert_eq!(d.eigenvalues, vec![0.0]);
        assert_eq!(d.root_overlaps, vec![1.0]);
        let curve =
            return_probability_dense(&g, 0, &TimeGrid::new(vec![0.0, 3.0]).unwrap()).unwrap();
        assert_eq!(curve.values(), &[1.0, 1.0]);
    }

    #[test]
    fn two_vertex_spectrum() {
        // Δ = [[1, -1], [-1, 1]]: eigenvectors (1, 1)/√2 and (1, -1)/√2.
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let d = spectral_decompose(&g, 0).unwrap();
        assert!(close(&d.eigenvalues, &[0.0, 2.0], 1e-12));
        assert!(close(&d.root_overlaps, &[0.5, 0.5], 1e-12));
        assert!((d.return_probability(1.0) - 0.567_667_641_618_306_3).abs() < 1e-12);
    }

    #[test]
    fn unit_three_path_middle_root() {
        // Eigenvectors (1,1,1)/√3, (1,0,-1)/√2, (1,-2,1)/√6 for 0, 1, 3.
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let d = spectral_decompose(&g, 1).unwrap();
        assert!(close(&d.eigenvalues, &[0.0, 1.0, 3.0], 1e-12));
        assert!(close(&d.root_overlaps, &[1.0 / 3.0, 0.0, 2.0 / 3.0], 1e-12));
        assert!((d.return_probability(1.0) - 0.366_524_712_245_242_6).abs() < 1e-12);
    }

    #[test]
    fn disconnected_root_sees_only_its_component() {
        let g = WeightedGraph::new(5, [(0, 1, 1.0), (2, 3, 1.0), (3, 4, 1.0)]).unwrap();
        let [a, b, c] =
            <[SpectralData; 3]>::try_from(spectral_decompose_roots(&g, &[0, 3, 2]).unwrap())
                .unwrap();
        assert_eq!(a.eigenvalues.len(), 2);
        assert!(close(&b.root_overlaps, &[1.0 / 3.0, 0.0, 2.0 / 3.0], 1e-12));
        assert!(close(&c.root_overlaps, &[1.0 / 3.0, 0.5, 1.0 / 6.0], 1e-12));
    }

    #[test]
    fn uniform_average_uses_trace() {
        let g = WeightedGraph::new(4, [(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
        let uniform = averaged_spectral_measure(&g, &[0.25; 4]).unwrap();
        let pi = [0.1, 0.2, 0.3, 0.4];
        let skewed = averaged_spectral_measure(&g, &pi).unwrap();
        let roots = spectral_decompose_roots(&g, &[0, 1, 2, 3]).unwrap();
        for t in [0.0, 0.1, 1.0, 4.0] {
            let direct: f64 = roots.iter().map(|d| 0.25 * d.return_probability(t)).sum();
            let weighted: f64 = roots
                .iter()
                .zip(pi)
                .map(|(d, w)| w * d.return_probability(t))
                .sum();
            assert!((uniform.evaluate(t) - direct).abs() < 1e-13);
            assert!((skewed.evaluate(t) - weighted).abs() < 1e-13);
        }
        assert!((uniform.first_moment() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_oversized_components() {
        let n = DENSE_VERTEX_CAP + 1;
        let g = WeightedGraph::new(n, (0..n - 1).map(|i| (i, i + 1, 1.0))).unwrap();
        assert!(matches!(
            spectral_decompose(&g, 0),
            Err(HeatKernelError::TooLargeForDense { .. })
        ));
        assert!(matches!(
            spectral_decompose(&g, n),
            Err(HeatKernelError::RootOutOfRange { .. })
        ));
    }
}
