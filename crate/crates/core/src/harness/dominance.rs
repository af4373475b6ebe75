use rand::Rng;
use rayon::prelude::*;

use super::HarnessError;
use crate::environments::three_path;
use crate::graph::WeightedGraph;
use crate::heat_kernel::{averaged_spectral_measure, TimeGrid};
use crate::rng::substream;

/// Flag threshold for `min_t (rhs - lhs)`.
const CANDIDATE_THRESHOLD: f64 = -1e-10;

/// One atom of a finitely supported coupling: rates `w1 ≥ w2` per parent
/// edge, with probability `probability`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledWeights {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub times: TimeGrid,
    /// `E_1[p_t(o; G)]` under the `w1` marginal, uniform root.
    pub lhs: Vec<f64>,
    /// `E_2[p_t(o; G)]` under the `w2` marginal.
    pub rhs: Vec<f64>,
    pub min_difference: f64,
    pub argmin_time: f64,
    pub candidate: bool,
    /// The coupling that produced this report.
    pub law: Vec<CoupledWeights>,
}

fn check_law(parent: &WeightedGraph, law: &[CoupledWeights]) -> Result<(), HarnessError> {
    let m = parent.edge_count();
    if law.is_empty() {
        return Err(HarnessError::Dominance("empty law".into()));
    }
    let total: f64 = law.iter().map(|a| a.probability).sum();
    if law.iter().any(|a| !(a.probability >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(HarnessError::Dominance(format!(
            "probabilities must be nonnegative and sum to 1 (sum {total})"
        )));
    }
    for (k, atom) in law.iter().enumerate() {
        if atom.w1.len() != m || atom.w2.len() != m {
            return Err(HarnessError::Dominance(format!(
                "atom {k}: need {m} weights per side"
            )));
        }
        if let Some(e) = (0..m).find(|&e| !(atom.w1[e] >= atom.w2[e] && atom.w2[e] > 0.0)) {
            return Err(HarnessError::Dominance(format!(
                "atom {k}, edge {e}: need w1 >= w2 > 0, got {} and {}",
                atom.w1[e], atom.w2[e]
            )));
        }
    }
    Ok(())
}

fn averaged(
    parent: &WeightedGraph,
    weights: &[f64],
    times: &TimeGrid,
) -> Result<Vec<f64>, HarnessError> {
    let g = parent.reweighted(weights)?;
    let n = g.vertex_count() as f64;
    let measure = averaged_spectral_measure(&g, &vec![1.0 / n; g.vertex_count()])?;
    Ok(times.times().iter().map(|&t| measure.evaluate(t)).collect())
}

/// Dense uniform-root averages of both marginals of a coupled weight law
/// on `parent`'s edges; flags `min_t (rhs - lhs) < -1e-10`.
pub fn dominance_probe(
    parent: &WeightedGraph,
    law: &[CoupledWeights],
    times: &TimeGrid,
) -> Result<DominanceReport, HarnessError> {
    check_law(parent, law)?;
    let mut lhs = vec![0.0; times.len()];
    let mut rhs = vec![0.0; times.len()];
    for atom in law {
        for (acc, v) in lhs.iter_mut().zip(averaged(parent, &atom.w1, times)?) {
            *acc += atom.probability * v;
        }
        for (acc, v) in rhs.iter_mut().zip(averaged(parent, &atom.w2, times)?) {
            *acc += atom.probability * v;
        }
    }
    // Both sides are 1 at t = 0, so only positive times say anything.
    let (mut min_difference, mut argmin_time) = (f64::INFINITY, f64::NAN);
    for (i, &t) in times.times().iter().enumerate().filter(|(_, &t)| t > 0.0) {
        let d = rhs[i] - lhs[i];
        if d < min_difference {
            min_difference = d;
            argmin_time = t;
        }
    }
    Ok(DominanceReport {
        times: times.clone(),
        lhs,
        rhs,
        min_difference,
        argmin_time,
        candidate: min_difference < CANDIDATE_THRESHOLD,
        law: law.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub trials: usize,
    /// Trial with the smallest `min_difference`.
    pub worst: DominanceReport,
    pub worst_trial: usize,
    pub candidates: Vec<(usize, DominanceReport)>,
}

/// Random couplings on the 3-path: one to three atoms, `w1` log-uniform on
/// `[0.1, 10]` per edge and `w2 = u·w1` with `u` uniform on `[0.05, 1]`.
pub fn random_three_path_search(
    trials: usize,
    times: &TimeGrid,
    seed: u64,
) -> Result<SearchReport, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::BadParameter(
            "trials must be at least 1".into(),
        ));
    }
    let parent = three_path(1.0)?;
    let reports: Vec<DominanceReport> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = substream(seed, trial as u64);
            let atoms = rng.random_range(1..=3);
            let raw: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut law: Vec<CoupledWeights> = raw
                .iter()
                .map(|p| {
                    let w1: Vec<f64> = (0..2)
                        .map(|_| 10f64.powf(rng.random_range(-1.0..=1.0)))
                        .collect();
                    let w2 = w1
                        .iter()
                        .map(|w| w * rng.random_range(0.05..=1.0))
                        .collect();
                    CoupledWeights {
                        w1,
                        w2,
                        probability: p / total,
                    }
                })
                .collect();
            // Make the probabilities sum to 1 exactly.
            let head: f64 = law[..atoms - 1].iter().map(|a| a.probability).sum();
            law[atoms - 1].probability = 1.0 - head;
            dominance_probe(&parent, &law, times)
        })
        .collect::<Result<_, _>>()?;
    let worst_trial = (0..trials)
        .min_by(|&a, &b| {
            reports[a]
                .min_difference
                .total_cmp(&reports[b].min_difference)
        })
        .expect("at least one trial");
    let candidates = reports
        .iter()
        .enumerate()
        .filter(|(_, r)| r.candidate)
        .map(|(i, r)| (i, r.clone()))
        .collect();
    Ok(SearchReport {
        trials,
        worst: reports[worst_trial].clone(),
        worst_trial,
        candidates,
    })
}
