//! Monte Carlo simulation of the continuous-time walk.
//!
//! At `x` the walk holds for an Exponential(`Δ(x, x)`) time and then moves
//! to neighbor `y` with probability `w(x, y) / Δ(x, x)`. Walk `i` draws
//! from stream `i` of the configured seed, so estimates are reproducible
//! regardless of how walks are batched across threads.

use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{VertexId, WeightedGraph};
use crate::heat_kernel::{CurveMethod, HeatKernelError, ReturnCurve, TimeGrid};
use crate::rng::substream;

/// Truncated-walk fraction above which an estimate carries a warning.
pub const TRUNCATION_WARNING_FRACTION: f64 = 0.01;

const BATCH: u64 = 2048;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("walk_count must be at least 1")]
    NoWalks,
    #[error("max_jumps must be at least 1")]
    NoJumps,
    #[error("root {root} outside 0..{vertex_count}")]
    RootOutOfRange { root: VertexId, vertex_count: usize },
    #[error("root weights: {0}")]
    BadRootWeights(String),
    #[error(transparent)]
    Curve(#[from] HeatKernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub walk_count: u64,
    pub seed: u64,
    pub max_jumps: u64,
}

impl SimConfig {
    pub const DEFAULT_MAX_JUMPS: u64 = 1_000_000;

    pub fn new(walk_count: u64, seed: u64) -> Self {
        Self {
            walk_count,
            seed,
            max_jumps: Self::DEFAULT_MAX_JUMPS,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.walk_count == 0 {
            return Err(SimError::NoWalks);
        }
        if self.max_jumps == 0 {
            return Err(SimError::NoJumps);
        }
        Ok(())
    }
}

/// Walk positions sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// State after the last jump at or before each grid time; `None` once
    /// the jump cap has been hit.
    pub positions: Vec<Option<VertexId>>,
    pub jumps: u64,
    pub truncated: bool,
    /// End of the first holding period, `None` at an isolated start.
    pub first_jump_time: Option<f64>,
}

/// Holding rates and cumulative jump weights in compressed rows.
#[derive(Debug, Clone)]
pub struct JumpChain {
    rates: Vec<f64>,
    offsets: Vec<usize>,
    targets: Vec<VertexId>,
    cumulative: Vec<f64>,
}

impl JumpChain {
    pub fn new(graph: &WeightedGraph) -> Self {
        let n = graph.vertex_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        let mut cumulative = Vec::new();
        offsets.push(0);
        for x in 0..n {
            let mut acc = 0.0;
            for &(y, e) in graph.neighbors(x) {
                acc += graph.edge(e).weight;
                targets.push(y);
                cumulative.push(acc);
            }
            offsets.push(targets.len());
        }
        Self {
            rates: (0..n).map(|x| graph.incident_weight(x)).collect(),
            offsets,
            targets,
            cumulative,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.rates.len()
    }

    fn hold<R: Rng>(&self, x: VertexId, rng: &mut R) -> f64 {
        let rate = self.rates[x];
        if rate > 0.0 {
            let u: f64 = rng.sample(Open01);
            -u.ln() / rate
        } else {
            f64::INFINITY
        }
    }

    fn jump<R: Rng>(&self, x: VertexId, rng: &mut R) -> VertexId {
        let row = &self.cumulative[self.offsets[x]..self.offsets[x + 1]];
        let u = rng.random::<f64>() * row[row.len() - 1];
        let i = row.partition_point(|&c| c <= u).min(row.len() - 1);
        self.targets[self.offsets[x] + i]
    }

    /// One walk from `root`, sampled at the increasing `times`.
    pub fn simulate<R: Rng>(
        &self,
        root: VertexId,
        times: &[f64],
        max_jumps: u64,
        rng: &mut R,
    ) -> Trajectory {
        let mut positions = vec![None; times.len()];
        let mut position = root;
        let mut jumps = 0;
        let mut next_jump = self.hold(position, rng);
        let first_jump_time = next_jump.is_finite().then_some(next_jump);
        for (slot, &t) in positions.iter_mut().zip(times) {
            while next_jump <= t {
                if jumps == max_jumps {
                    return Trajectory {
                        positions,
                        jumps,
                        truncated: true,
                        first_jump_time,
                    };
                }
                position = self.jump(position, rng);
                jumps += 1;
                next_jump += self.hold(position, rng);
            }
            *slot = Some(position);
        }
        Trajectory {
            positions,
            jumps,
            truncated: false,
            first_jump_time,
        }
    }
}

/// Simulates one walk from `root` on `graph`.
pub fn simulate_walk<R: Rng>(
    graph: &WeightedGraph,
    root: VertexId,
    times: &TimeGrid,
    max_jumps: u64,
    rng: &mut R,
) -> Trajectory {
    JumpChain::new(graph).simulate(root, times.times(), max_jumps, rng)
}

/// Empirical return frequencies with Bernoulli standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateCurve {
    pub times: TimeGrid,
    pub estimates: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub walk_count: u64,
    pub truncated_fraction: f64,
    pub warning: Option<String>,
}

impl EstimateCurve {
    fn from_hits(times: &TimeGrid, hits: &[u64], truncated: u64, walk_count: u64) -> Self {
        let n = walk_count as f64;
        let estimates: Vec<f64> = hits.iter().map(|&h| h as f64 / n).collect();
        let standard_errors = estimates
            .iter()
            .map(|&p| (p * (1.0 - p) / n).sqrt())
            .collect();
        let truncated_fraction = truncated as f64 / n;
        let warning = (truncated_fraction > TRUNCATION_WARNING_FRACTION).then(|| {
            format!(
                "{:.2}% of walks hit the jump cap; later grid times are biased low",
                100.0 * truncated_fraction
            )
        });
        Self {
            times: times.clone(),
            estimates,
            standard_errors,
            walk_count,
            truncated_fraction,
            warning,
        }
    }

    pub fn to_curve(&self) -> ReturnCurve {
        ReturnCurve::new(
            self.times.clone(),
            self.estimates.clone(),
            Some(self.standard_errors.clone()),
            CurveMethod::MonteCarlo,
        )
        .expect("frequencies lie in [0, 1]")
    }
}

/// Sums per-time return counts over all walks, batch by batch. `start_of`
/// picks each walk's starting vertex from its own stream.
fn count_returns<F>(
    chain: &JumpChain,
    times: &[f64],
    config: &SimConfig,
    start_of: F,
) -> (Vec<u64>, u64)
where
    F: Fn(&mut crate::rng::StreamRng) -> VertexId + Sync,
{
    let batches = config.walk_count.div_ceil(BATCH);
    let partial: Vec<(Vec<u64>, u64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut hits = vec![0u64; times.len()];
            let mut truncated = 0;
            let end = ((b + 1) * BATCH).min(config.walk_count);
            for walk in b * BATCH..end {
                let mut rng = substream(config.seed, walk);
                let root = start_of(&mut rng);
                let path = chain.simulate(root, times, config.max_jumps, &mut rng);
                truncated += u64::from(path.truncated);
                for (h, p) in hits.iter_mut().zip(&path.positions) {
                    *h += u64::from(*p == Some(root));
                }
            }
            (hits, truncated)
        })
        .collect();
    partial.into_iter().fold(
        (vec![0u64; times.len()], 0),
        |(mut hits, truncated), (h, t)| {
            for (a, b) in hits.iter_mut().zip(h) {
                *a += b;
            }
            (hits, truncated + t)
        },
    )
}

/// Fraction of `walk_count` walks found at `root` at each time. Truncated
/// walks count as absent from the truncation time on.
pub fn estimate_return_probability(
    graph: &WeightedGraph,
    root: VertexId,
    times: &TimeGrid,
    config: &SimConfig,
) -> Result<EstimateCurve, SimError> {
    config.validate()?;
    if root >= graph.vertex_count() {
        return Err(SimError::RootOutOfRange {
            root,
            vertex_count: graph.vertex_count(),
        });
    }
    let chain = JumpChain::new(graph);
    let (hits, truncated) = count_returns(&chain, times.times(), config, |_| root);
    Ok(EstimateCurve::from_hits(
        times,
        &hits,
        truncated,
        config.walk_count,
    ))
}

/// Like [`estimate_return_probability`], but each walk starts from a root
/// drawn from `root_weights` (normalized internally).
pub fn estimate_average_return(
    graph: &WeightedGraph,
    root_weights: &[f64],
    times: &TimeGrid,
    config: &SimConfig,
) -> Result<EstimateCurve, SimError> {
    config.validate()?;
    if root_weights.len() != graph.vertex_count()
        || root_weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
    {
        return Err(SimError::BadRootWeights(
            "need one nonnegative finite weight per vertex".into(),
        ));
    }
    let mut cumulative = Vec::with_capacity(root_weights.len());
    let mut acc = 0.0;
    for &w in root_weights {
        acc += w;
        cumulative.push(acc);
    }
    if !(acc > 0.0) {
        return Err(SimError::BadRootWeights("weights sum to zero".into()));
    }
    let chain = JumpChain::new(graph);
    let (hits, truncated) = count_returns(&chain, times.times(), config, |rng| {
        let u = rng.random::<f64>() * acc;
        cumulative
            .partition_point(|&c| c <= u)
            .min(cumulative.len() - 1)
    });
    Ok(EstimateCurve::from_hits(
        times,
        &hits,
        truncated,
        config.walk_count,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn grid(times: &[f64]) -> TimeGrid {
        TimeGrid::new(times.to_vec()).unwrap()
    }

    #[test]
    fn isolated_roots_never_move() {
        let single = WeightedGraph::new(1, []).unwrap();
        let path = simulate_walk(&single, 0, &grid(&[0.0, 5.0]), 10, &mut substream(1, 0));
        assert_eq!(path.positions, vec![Some(0), Some(0)]);
        assert_eq!(path.jumps, 0);
        assert_eq!(path.first_jump_time, None);

        let g = WeightedGraph::new(3, [(0, 1, 1.0)]).unwrap();
        let path = simulate_walk(&g, 2, &grid(&[1.0, 100.0]), 10, &mut substream(1, 0));
        assert_eq!(path.positions, vec![Some(2), Some(2)]);
        let est =
            estimate_return_probability(&g, 2, &grid(&[3.0]), &SimConfig::new(100, 3)).unwrap();
        assert_eq!(est.estimates, vec![1.0]);
        assert_eq!(est.standard_errors, vec![0.0]);
    }

    #[test]
    fn first_holding_time_is_exponential() {
        // Rate 1 at either end of a unit edge: mean holding time 1, sd 1.
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let chain = JumpChain::new(&g);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|i| {
                chain
                    .simulate(0, &[0.0], 10, &mut substream(11, i))
                    .first_jump_time
                    .unwrap()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean holding time {mean}");
    }

    #[test]
    fn cadlag_sampling_and_truncation() {
        let g = WeightedGraph::new(2, [(0, 1, 50.0)]).unwrap();
        let times = [0.0, 0.01, 1.0, 2.0];
        let capped = JumpChain::new(&g).simulate(0, &times, 3, &mut substream(5, 0));
        assert!(capped.truncated);
        assert_eq!(capped.jumps, 3);
        assert_eq!(capped.positions[3], None);
        assert_eq!(capped.positions[0], Some(0));
        // Holding times are a.s. positive, so nothing moves by t = 0.
        let free = JumpChain::new(&g).simulate(0, &times, 1_000_000, &mut substream(5, 0));
        assert!(!free.truncated);
        assert!(free.positions.iter().all(Option::is_some));
    }

    #[test]
    fn truncation_fraction_triggers_warning() {
        let g = WeightedGraph::new(2, [(0, 1, 10.0)]).unwrap();
        let config = SimConfig {
            walk_count: 500,
            seed: 9,
            max_jumps: 2,
        };
        let est = estimate_return_probability(&g, 0, &grid(&[0.0, 5.0]), &config).unwrap();
        assert_eq!(est.truncated_fraction, 1.0);
        assert!(est.warning.is_some());
        assert_eq!(est.estimates, vec![1.0, 0.0]);
    }

    #[test]
    fn two_vertex_estimate_matches_closed_form() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let config = SimConfig::new(100_000, 2024);
        let times = grid(&[1.0]);
        let est = estimate_return_probability(&g, 0, &times, &config).unwrap();
        let exact = 0.567_667_641_618_306_3;
        assert!((est.estimates[0] - exact).abs() <= 3.0 * est.standard_errors[0]);
        assert!(est.standard_errors[0] <= 0.5 / (100_000f64).sqrt() + 1e-15);
        let again = estimate_return_probability(&g, 0, &times, &config).unwrap();
        assert_eq!(est, again);
    }

    #[test]
    fn config_and_root_validation() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let times = grid(&[1.0]);
        assert_eq!(
            estimate_return_probability(&g, 0, &times, &SimConfig::new(0, 1)),
            Err(SimError::NoWalks)
        );
        assert!(matches!(
            estimate_return_probability(&g, 2, &times, &SimConfig::new(1, 1)),
            Err(SimError::RootOutOfRange { .. })
        ));
        assert!(estimate_average_return(&g, &[0.0, 0.0], &times, &SimConfig::new(1, 1)).is_err());
    }
}
