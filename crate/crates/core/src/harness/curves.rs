use rayon::prelude::*;

use super::{HarnessError, Method};
use crate::environments::Ensemble;
use crate::graph::WeightedGraph;
use crate::heat_kernel::uniformization::averaged_uniformized;
use crate::heat_kernel::{averaged_spectral_measure, CurveMethod, ReturnCurve, TimeGrid};
use crate::rng::derive_seed;
use crate::sim::{estimate_average_return, SimConfig};
use crate::stats::ratio_standard_error;

/// Salt separating walk streams from subgraph-sampling streams.
const WALK_SALT: u64 = 0x5741_4c4b;

/// What the error column of an [`AveragedCurve`] means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// No error: the values are exact up to rounding.
    Exact,
    /// Deterministic truncation bound.
    Bound,
    /// One standard error.
    StandardError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedCurve {
    pub curve: ReturnCurve,
    pub error_kind: ErrorKind,
    pub realizations: usize,
    /// `|V(H)| / |V(G)|` for each realization; empty on the G side.
    pub retained_fractions: Vec<f64>,
    /// Root-law probability that the root is retained (1 on the G side).
    pub alpha_hat: f64,
    pub warnings: Vec<String>,
}

impl AveragedCurve {
    pub fn values(&self) -> &[f64] {
        self.curve.values()
    }

    pub fn errors(&self) -> Vec<f64> {
        (0..self.curve.times().len())
            .map(|i| self.curve.error_at(i))
            .collect()
    }
}

fn curve_method(method: Method) -> CurveMethod {
    match method {
        Method::Dense => CurveMethod::Dense,
        Method::Uniformized { .. } => CurveMethod::Uniformized,
        Method::MonteCarlo { .. } => CurveMethod::MonteCarlo,
    }
}

/// Unnormalized `Σ_x π(x) p_t(x)` at each time with an absolute error per
/// time (bound or standard error, by method).
struct Evaluation {
    values: Vec<f64>,
    errors: Vec<f64>,
    warning: Option<String>,
}

fn evaluate(
    graph: &WeightedGraph,
    weights: &[f64],
    times: &[f64],
    method: Method,
    seed: u64,
) -> Result<Evaluation, HarnessError> {
    match method {
        Method::Dense => {
            let measure = averaged_spectral_measure(graph, weights)?;
            Ok(Evaluation {
                values: times.iter().map(|&t| measure.evaluate(t)).collect(),
                errors: vec![0.0; times.len()],
                warning: None,
            })
        }
        Method::Uniformized { eps } => {
            let (values, errors) = averaged_uniformized(graph, weights, times, eps)?;
            Ok(Evaluation {
                values,
                errors,
                warning: None,
            })
        }
        Method::MonteCarlo {
            walk_count,
            max_jumps,
        } => {
            let total: f64 = weights.iter().sum();
            let config = SimConfig {
                walk_count,
                seed,
                max_jumps,
            };
            let grid = TimeGrid::new(times.to_vec())?;
            let est = estimate_average_return(graph, weights, &grid, &config)?;
            Ok(Evaluation {
                values: est.estimates.iter().map(|v| total * v).collect(),
                errors: est.standard_errors.iter().map(|s| total * s).collect(),
                warning: est.warning,
            })
        }
    }
}

fn root_weights(ensemble: &Ensemble, method: Method) -> Vec<f64> {
    // Uniformization costs one sparse power sequence per root, so a
    // transitive ensemble is evaluated at vertex 0 only.
    if ensemble.single_root_suffices() && matches!(method, Method::Uniformized { .. }) {
        let mut w = vec![0.0; ensemble.parent().vertex_count()];
        w[0] = 1.0;
        w
    } else {
        ensemble.root_probabilities()
    }
}

/// `E[p_t(o; G)]` over the ensemble's root law.
pub fn averaged_curve_g(
    ensemble: &Ensemble,
    times: &TimeGrid,
    method: Method,
    seed: u64,
) -> Result<AveragedCurve, HarnessError> {
    let weights = root_weights(ensemble, method);
    let eval = evaluate(
        ensemble.parent(),
        &weights,
        times.times(),
        method,
        derive_seed(seed, WALK_SALT),
    )?;
    let total: f64 = weights.iter().sum();
    let (values, errors) = times
        .times()
        .iter()
        .zip(eval.values.iter().zip(&eval.errors))
        .map(|(&t, (v, e))| {
            if t == 0.0 {
                (1.0, 0.0)
            } else {
                (v / total, e / total)
            }
        })
        .unzip();
    let error_kind = match method {
        Method::Dense => ErrorKind::Exact,
        Method::Uniformized { .. } => ErrorKind::Bound,
        Method::MonteCarlo { .. } => ErrorKind::StandardError,
    };
    Ok(AveragedCurve {
        curve: ReturnCurve::new(
            times.clone(),
            values,
            (error_kind != ErrorKind::Exact).then_some(errors),
            curve_method(method),
        )?,
        error_kind,
        realizations: 1,
        retained_fractions: Vec::new(),
        alpha_hat: 1.0,
        warnings: eval.warning.into_iter().collect(),
    })
}

struct RealizationTerms {
    weight: f64,
    retained: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    fraction: f64,
    warning: Option<String>,
}

/// `E[p_{βt}(o; H) | o ∈ V(H)]` with `β = time_scale`, as a ratio of
/// realization sums `Σ q_i Σ_{x∈V(H_i)} π(x) p(x; H_i)` over `Σ q_i π(V(H_i))`.
/// Exact laws are enumerated; sampled laws use `sample_count` draws and a
/// batch-means standard error. Isolated retained roots contribute 1.
pub fn averaged_curve_h(
    ensemble: &Ensemble,
    times: &TimeGrid,
    sample_count: usize,
    method: Method,
    seed: u64,
    time_scale: f64,
) -> Result<AveragedCurve, HarnessError> {
    if !(time_scale > 0.0 && time_scale.is_finite()) {
        return Err(HarnessError::BadParameter(format!(
            "time scale {time_scale} must be positive"
        )));
    }
    if sample_count == 0 && !ensemble.is_exact() {
        return Err(HarnessError::BadParameter(
            "sample_count must be at least 1".into(),
        ));
    }
    let weights = root_weights(ensemble, method);
    let scaled: Vec<f64> = times.times().iter().map(|t| t * time_scale).collect();
    let n = ensemble.parent().vertex_count() as f64;
    let walk_seed = derive_seed(seed, WALK_SALT);
    let count = ensemble.realization_count(sample_count);

    let terms: Vec<RealizationTerms> = (0..count)
        .into_par_iter()
        .map(|i| -> Result<RealizationTerms, HarnessError> {
            let (h, q) = ensemble.realization(i, seed)?;
            let fraction = h.retained_vertex_count() as f64 / n;
            let zero = |warning| RealizationTerms {
                weight: q,
                retained: 0.0,
                values: vec![0.0; scaled.len()],
                errors: vec![0.0; scaled.len()],
                fraction,
                warning,
            };
            let Some(local) = h.restrict() else {
                return Ok(zero(None));
            };
            let local_weights: Vec<f64> = local.to_parent.iter().map(|&v| weights[v]).collect();
            let retained: f64 = local_weights.iter().sum();
            if retained == 0.0 {
                return Ok(zero(None));
            }
            let eval = evaluate(
                &local.graph,
                &local_weights,
                &scaled,
                method,
                derive_seed(walk_seed, i as u64),
            )?;
            Ok(RealizationTerms {
                weight: q,
                retained,
                values: eval.values,
                errors: eval.errors,
                fraction,
                warning: eval.warning,
            })
        })
        .collect::<Result<_, _>>()?;

    let den: f64 = terms.iter().map(|r| r.weight * r.retained).sum();
    if !(den > 0.0) {
        return Err(HarnessError::Degenerate(
            "no realization retains a root with positive probability".into(),
        ));
    }
    let total_weight: f64 = terms.iter().map(|r| r.weight).sum();
    let exact_law = ensemble.is_exact();
    let dens: Vec<f64> = terms.iter().map(|r| r.weight * r.retained).collect();

    let mut values = Vec::with_capacity(scaled.len());
    let mut errors = Vec::with_capacity(scaled.len());
    for (j, &t) in times.times().iter().enumerate() {
        if t == 0.0 {
            values.push(1.0);
            errors.push(0.0);
            continue;
        }
        let nums: Vec<f64> = terms.iter().map(|r| r.weight * r.values[j]).collect();
        values.push(nums.iter().sum::<f64>() / den);
        let method_error = match method {
            Method::Dense => 0.0,
            Method::Uniformized { .. } => {
                terms.iter().map(|r| r.weight * r.errors[j]).sum::<f64>() / den
            }
            Method::MonteCarlo { .. } => {
                terms
                    .iter()
                    .map(|r| (r.weight * r.errors[j]).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / den
            }
        };
        errors.push(if exact_law {
            method_error
        } else {
            let sampling = ratio_standard_error(&nums, &dens);
            match method {
                // Walk noise is already inside the batch-to-batch spread.
                Method::MonteCarlo { .. } => sampling,
                _ => sampling + method_error,
            }
        });
    }

    let error_kind = match (exact_law, method) {
        (true, Method::Dense) => ErrorKind::Exact,
        (true, Method::Uniformized { .. }) => ErrorKind::Bound,
        _ => ErrorKind::StandardError,
    };
    let mut warnings: Vec<String> = terms.iter().filter_map(|r| r.warning.clone()).collect();
    warnings.dedup();
    Ok(AveragedCurve {
        curve: ReturnCurve::new(
            times.clone(),
            values,
            (error_kind != ErrorKind::Exact).then_some(errors),
            curve_method(method),
        )?,
        error_kind,
        realizations: count,
        retained_fractions: terms.iter().map(|r| r.fraction).collect(),
        alpha_hat: den / total_weight,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::environments::{three_path, torus, z2_odd_deleted_ensemble, Ensemble};
    use crate::graph::PercolationSubgraph;

    fn grid(times: &[f64]) -> TimeGrid {
        TimeGrid::new(times.to_vec()).unwrap()
    }

    #[test]
    fn single_vertex_parent_is_constant_one() {
        let e = Ensemble::identity(Arc::new(WeightedGraph::new(1, []).unwrap()));
        let c = averaged_curve_g(&e, &grid(&[0.0, 1.0, 10.0]), Method::Dense, 0).unwrap();
        assert_eq!(c.values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn unit_three_path_uniform_average() {
        let e = Ensemble::identity(Arc::new(three_path(1.0).unwrap()));
        let c = averaged_curve_g(&e, &grid(&[1.0]), Method::Dense, 0).unwrap();
        assert!((c.values()[0] - 0.472_555_503_2).abs() < 1e-9);
        let u = averaged_curve_g(&e, &grid(&[1.0]), Method::Uniformized { eps: 1e-12 }, 0).unwrap();
        assert!((u.values()[0] - c.values()[0]).abs() < 1e-11);
    }

    #[test]
    fn identity_h_matches_g() {
        let e = Ensemble::identity(Arc::new(three_path(2.5).unwrap()));
        let times = grid(&[0.0, 0.3, 1.0, 4.0]);
        let g = averaged_curve_g(&e, &times, Method::Dense, 0).unwrap();
        let h = averaged_curve_h(&e, &times, 1, Method::Dense, 0, 1.0).unwrap();
        for (a, b) in g.values().iter().zip(h.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(h.alpha_hat, 1.0);
    }

    #[test]
    fn z2_mixture_identity() {
        // With w_H = 3/2 the H side is the mixture of the degree-4 and
        // degree-2 roots of the unit-weight H, each at time 3t/2.
        let e = z2_odd_deleted_ensemble(8, 1.5).unwrap();
        let unit = z2_odd_deleted_ensemble(8, 1.0).unwrap();
        let times = grid(&[0.0, 0.2, 1.0, 2.5]);
        let h = averaged_curve_h(&e, &times, 1, Method::Dense, 0, 1.0).unwrap();
        let (member, _) = unit.realization(0, 0).unwrap();
        let local = member.restrict().unwrap();
        // Vertex (0, 0) has degree 4 in member 0, vertex (1, 0) degree 2.
        let deg4 = local.to_parent.iter().position(|&v| v == 0).unwrap();
        let deg2 = local.to_parent.iter().position(|&v| v == 1).unwrap();
        assert_eq!(local.graph.degree(deg4), 4);
        assert_eq!(local.graph.degree(deg2), 2);
        let scaled = grid(&times.times().iter().map(|t| 1.5 * t).collect::<Vec<_>>());
        let p4 = crate::heat_kernel::return_probability_dense(&local.graph, deg4, &scaled).unwrap();
        let p2 = crate::heat_kernel::return_probability_dense(&local.graph, deg2, &scaled).unwrap();
        for i in 0..times.len() {
            let mixture = p4.values()[i] / 3.0 + 2.0 * p2.values()[i] / 3.0;
            assert!((h.values()[i] - mixture).abs() < 1e-12, "t index {i}");
        }
        assert_eq!(h.alpha_hat, 0.75);
    }

    #[test]
    fn isolated_retained_roots_give_one() {
        let parent = Arc::new(torus(1, 5, 1.0).unwrap());
        let mask = vec![true, false, true, false, false];
        let h = PercolationSubgraph::induced(parent.clone(), mask, 1.0).unwrap();
        let e = Ensemble::deterministic(parent, vec![(h, 1.0)]).unwrap();
        let times = grid(&[0.0, 1.0, 7.0]);
        for method in [
            Method::Dense,
            Method::Uniformized { eps: 1e-10 },
            Method::MonteCarlo {
                walk_count: 100,
                max_jumps: 10,
            },
        ] {
            let c = averaged_curve_h(&e, &times, 1, method, 3, 1.0).unwrap();
            assert_eq!(c.values(), &[1.0, 1.0, 1.0], "{method:?}");
        }
    }

    #[test]
    fn time_scale_matches_scaled_weights() {
        let e = z2_odd_deleted_ensemble(6, 1.0).unwrap();
        let fast = e.with_subgraph_weight(1.6).unwrap();
        let times = grid(&[0.1, 0.7, 2.0]);
        let a = averaged_curve_h(&e, &times, 1, Method::Dense, 0, 1.6).unwrap();
        let b = averaged_curve_h(&fast, &times, 1, Method::Dense, 0, 1.0).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
