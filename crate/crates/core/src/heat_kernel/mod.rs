//! Return probabilities `p_t(x; G)`, the diagonal of `exp(-t Δ_G)`.
//!
//! Two independent routes are provided: a dense symmetric eigendecomposition
//! ([`spectral`]) and uniformization with a rigorous Poisson tail bound
//! ([`uniformization`]). The dense route is the oracle of record for graphs
//! whose connected components fit under [`DENSE_VERTEX_CAP`].

mod curve;
pub mod spectral;
pub mod uniformization;

use thiserror::Error;

use crate::graph::{VertexId, WeightedGraph};

pub use curve::{CurveMethod, ReturnCurve, TimeGrid};
pub use spectral::{
    averaged_spectral_measure, laplacian_eigenvalues, return_probability_dense, spectral_decompose,
    spectral_decompose_roots, SpectralData, SpectralMeasure, DENSE_VERTEX_CAP,
};
pub use uniformization::{
    poisson_truncation, return_probability_uniformized, uniformized_curve, UniformizedValue,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeatKernelError {
    #[error("vertex {root} outside 0..{vertex_count}")]
    RootOutOfRange { root: VertexId, vertex_count: usize },
    #[error("component with {size} vertices exceeds the dense cap of {cap}; use uniformization")]
    TooLargeForDense { size: usize, cap: usize },
    #[error("symmetric eigensolver did not converge")]
    NoConvergence,
    #[error("Laplacian eigenvalue {value} is negative beyond rounding")]
    NegativeEigenvalue { value: f64 },
    #[error("truncation tolerance {eps} must be positive")]
    BadTolerance { eps: f64 },
    #[error("time {t} must be finite and nonnegative")]
    BadTime { t: f64 },
    #[error("Poisson truncation at mean {mean} needs more than {cap} terms for eps = {eps}")]
    IterationCap { mean: f64, eps: f64, cap: usize },
    #[error("rate factor {factor} must be positive and finite")]
    BadScale { factor: f64 },
    #[error("time grid: {0}")]
    BadGrid(String),
    #[error("return probability {value} at t = {t} is outside [0, 1]")]
    ValueOutOfRange { t: f64, value: f64 },
    #[error("root weights: {0}")]
    BadRootWeights(String),
}

pub(crate) fn check_root(graph: &WeightedGraph, root: VertexId) -> Result<(), HeatKernelError> {
    if root < graph.vertex_count() {
        Ok(())
    } else {
        Err(HeatKernelError::RootOutOfRange {
            root,
            vertex_count: graph.vertex_count(),
        })
    }
}

/// `d/dt p_t(root)` at `t = 0`, which is `-Δ(root, root)`.
pub fn derivative_at_zero(graph: &WeightedGraph, root: VertexId) -> f64 {
    -graph.incident_weight(root)
}

/// Return curve for the graph with every rate multiplied by `factor`,
/// obtained from the unscaled spectrum through `p_t(c w) = p_{ct}(w)`.
pub fn rate_scaled_curve(
    graph: &WeightedGraph,
    root: VertexId,
    factor: f64,
    times: &TimeGrid,
) -> Result<ReturnCurve, HeatKernelError> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(HeatKernelError::BadScale { factor });
    }
    let spectrum = spectral_decompose(graph, root)?;
    let values = times
        .times()
        .iter()
        .map(|&t| spectrum.return_probability(factor * t))
        .collect();
    ReturnCurve::new(times.clone(), values, None, CurveMethod::Dense)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_examples() {
        let single = WeightedGraph::new(1, []).unwrap();
        assert_eq!(derivative_at_zero(&single, 0), 0.0);
        let path = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 2.5)]).unwrap();
        assert_eq!(derivative_at_zero(&path, 1), -3.5);
        let pair = WeightedGraph::new(2, [(0, 1, 3.0)]).unwrap();
        assert_eq!(derivative_at_zero(&pair, 0), -3.0);
    }

    #[test]
    fn rate_scaling_matches_closed_form() {
        let pair = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
        let scaled = rate_scaled_curve(&pair, 0, 2.0, &grid).unwrap();
        assert_eq!(scaled.values()[0], 1.0);
        assert!((scaled.values()[1] - (1.0 + (-4.0f64).exp()) / 2.0).abs() < 1e-14);
        let same = rate_scaled_curve(&pair, 0, 1.0, &grid).unwrap();
        assert_eq!(same, return_probability_dense(&pair, 0, &grid).unwrap());
        assert!(matches!(
            rate_scaled_curve(&pair, 0, 0.0, &grid),
            Err(HeatKernelError::BadScale { .. })
        ));
    }
}
