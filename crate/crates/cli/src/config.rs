//! Experiment files: flat TOML with an `[ensemble]`, `[times]` and
//! kind-specific sections.

use std::path::PathBuf;
use std::sync::Arc;

use hklab_core::environments::{
    bond_percolation_ensemble, site_percolation_ensemble, three_path, torus,
    z2_odd_deleted_ensemble, ClusterRule, Ensemble,
};
use hklab_core::harness::{corollary_scaling, Method, ScalingKind};
use hklab_core::sim::SimConfig;
use hklab_core::{PercolationSubgraph, TimeGrid};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Curve,
    Verify,
    Sharpness,
    Probe,
    Figure1,
    Figure23,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Curve => "curve",
            Kind::Verify => "verify",
            Kind::Sharpness => "sharpness",
            Kind::Probe => "probe",
            Kind::Figure1 => "figure1",
            Kind::Figure23 => "figure23",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Dense,
    Uniformized,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ThreePath,
    Torus,
    Z2OddDeleted,
    BernoulliSite,
    BernoulliBond,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::ThreePath => "three_path",
            Family::Torus => "torus",
            Family::Z2OddDeleted => "z2_odd_deleted",
            Family::BernoulliSite => "bernoulli_site",
            Family::BernoulliBond => "bernoulli_bond",
        }
    }

    fn is_torus(self) -> bool {
        self != Family::ThreePath
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterName {
    #[default]
    All,
    Largest,
    AtLeast,
}

/// `w_H` as a number or as one of the sharp scalings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Value(f64),
    Rule(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub family: Family,
    pub d: Option<usize>,
    pub n: Option<usize>,
    pub w: Option<f64>,
    pub alpha: Option<f64>,
    pub p: Option<f64>,
    pub cluster: Option<ClusterName>,
    pub min_cluster_size: Option<usize>,
    pub w_h: Option<WeightSpec>,
    /// Draws used to estimate `δ` for `w_h = "inverse_delta"`.
    pub stats_samples: Option<usize>,
    /// Subgraph sampling seed; defaults to the experiment seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridName {
    #[default]
    Geometric,
    Linear,
    List,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesConfig {
    #[serde(default)]
    pub grid: GridName,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub include_zero: Option<bool>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    /// Random 3-path couplings to try.
    pub trials: Option<usize>,
    /// Explicit coupling on the ensemble's parent graph.
    #[serde(default)]
    pub atoms: Vec<AtomConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure1Config {
    pub w_min: Option<f64>,
    pub w_max: Option<f64>,
    pub points: Option<usize>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub method: MethodName,
    #[serde(default)]
    pub seed: u64,
    pub sample_count: Option<usize>,
    pub walk_count: Option<u64>,
    pub max_jumps: Option<u64>,
    pub eps: Option<f64>,
    /// Multiplier `β` on the time at which `H` is evaluated.
    pub h_time_scale: Option<f64>,
    pub output: Option<PathBuf>,
    pub ensemble: Option<EnsembleConfig>,
    pub times: Option<TimesConfig>,
    pub probe: Option<ProbeConfig>,
    pub figure1: Option<Figure1Config>,
}

pub const DEFAULT_SAMPLE_COUNT: usize = 100;
pub const DEFAULT_WALK_COUNT: u64 = 100_000;
pub const DEFAULT_EPS: f64 = 1e-10;
pub const DEFAULT_STATS_SAMPLES: usize = 500;

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
    }

    pub fn method(&self) -> Result<Method, CliError> {
        Ok(match self.method {
            MethodName::Dense => Method::Dense,
            MethodName::Uniformized => {
                let eps = self.eps.unwrap_or(DEFAULT_EPS);
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(invalid(format!("eps = {eps} must lie in (0, 1)")));
                }
                Method::Uniformized { eps }
            }
            MethodName::MonteCarlo => {
                let walk_count = self.walk_count.unwrap_or(DEFAULT_WALK_COUNT);
                let max_jumps = self.max_jumps.unwrap_or(SimConfig::DEFAULT_MAX_JUMPS);
                if walk_count == 0 || max_jumps == 0 {
                    return Err(invalid("walk_count and max_jumps must be positive"));
                }
                Method::MonteCarlo {
                    walk_count,
                    max_jumps,
                }
            }
        })
    }

    pub fn sample_count(&self) -> Result<usize, CliError> {
        match self.sample_count {
            Some(0) => Err(invalid("sample_count must be at least 1")),
            Some(m) => Ok(m),
            None => Ok(DEFAULT_SAMPLE_COUNT),
        }
    }

    pub fn h_time_scale(&self) -> Result<f64, CliError> {
        let beta = self.h_time_scale.unwrap_or(1.0);
        if beta > 0.0 && beta.is_finite() {
            Ok(beta)
        } else {
            Err(invalid(format!("h_time_scale = {beta} must be positive")))
        }
    }

    pub fn ensemble_config(&self) -> Result<&EnsembleConfig, CliError> {
        self.ensemble.as_ref().ok_or_else(|| {
            invalid(format!(
                "kind {} needs an [ensemble] section",
                self.kind.as_str()
            ))
        })
    }

    /// The configured grid; the comparison default when `[times]` is absent.
    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        let Some(t) = &self.times else {
            return Ok(TimeGrid::comparison_default());
        };
        let grid = match t.grid {
            GridName::Geometric => {
                let start = t.start.unwrap_or(1e-3);
                let stop = t.stop.unwrap_or(5.0);
                let points = t.points.unwrap_or(60);
                TimeGrid::geometric(start, stop, points, t.include_zero.unwrap_or(true))
            }
            GridName::Linear => TimeGrid::linear(
                t.start.unwrap_or(0.0),
                t.stop.unwrap_or(5.0),
                t.points.unwrap_or(61),
            ),
            GridName::List => TimeGrid::new(
                t.values
                    .clone()
                    .ok_or_else(|| invalid("grid = \"list\" needs values"))?,
            ),
        };
        grid.map_err(|e| invalid(e.to_string()))
    }

    /// Fails unless kind-specific sections and parameters are usable.
    pub fn validate(&self, allow_wrap: bool) -> Result<(), CliError> {
        self.method()?;
        self.sample_count()?;
        self.h_time_scale()?;
        let grid = self.time_grid()?;
        match self.kind {
            Kind::Curve | Kind::Verify | Kind::Sharpness => {
                let e = self.ensemble_config()?;
                e.check()?;
                if !allow_wrap {
                    e.check_wrap(grid.max(), self.h_time_scale()?, None)?;
                }
            }
            Kind::Figure23 => {
                let e = self.ensemble_config()?;
                if e.family != Family::Z2OddDeleted {
                    return Err(invalid("figure23 needs family = \"z2_odd_deleted\""));
                }
                e.check()?;
                if !allow_wrap {
                    // The mixture is read at 3t/2 on unit-rate H.
                    e.check_wrap(1.5 * grid.max(), 1.0, Some(1.0))?;
                }
            }
            Kind::Probe => {
                let p = self
                    .probe
                    .as_ref()
                    .ok_or_else(|| invalid("kind probe needs a [probe] section"))?;
                match (p.trials, p.atoms.is_empty()) {
                    (Some(0), _) => return Err(invalid("trials must be at least 1")),
                    (Some(_), true) => {}
                    (None, false) => {
                        self.ensemble_config()?.check()?;
                    }
                    _ => {
                        return Err(invalid(
                            "[probe] needs exactly one of trials or [[probe.atoms]]",
                        ))
                    }
                }
            }
            Kind::Figure1 => {
                self.figure1_params()?;
            }
        }
        Ok(())
    }

    /// `(w_min, w_max, points, t)` for the 3-path sweep.
    pub fn figure1_params(&self) -> Result<(f64, f64, usize, f64), CliError> {
        let f = self.figure1.clone().unwrap_or(Figure1Config {
            w_min: None,
            w_max: None,
            points: None,
            t: None,
        });
        let (lo, hi) = (f.w_min.unwrap_or(0.05), f.w_max.unwrap_or(10.0));
        let points = f.points.unwrap_or(200);
        let t = f.t.unwrap_or(1.0);
        if !(lo > 0.0 && hi > lo && hi.is_finite()) || points < 2 {
            return Err(invalid("figure1 needs 0 < w_min < w_max and points >= 2"));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!("figure1 t = {t} must be positive")));
        }
        Ok((lo, hi, points, t))
    }
}

pub(crate) fn invalid(message: impl Into<String>) -> CliError {
    CliError::Invalid(message.into())
}

fn require<T: Copy>(value: Option<T>, family: Family, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| invalid(format!("family {} needs {name}", family.as_str())))
}

/// Recipe for `w_H` once the ensemble is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubgraphWeight {
    Fixed(f64),
    /// Sharp weight `w/δ̂` from an `estimate_stats` pass.
    InverseDelta,
}

impl EnsembleConfig {
    pub fn parent_weight(&self) -> f64 {
        self.w.unwrap_or(1.0)
    }

    pub fn sampling_seed(&self, experiment_seed: u64) -> u64 {
        self.seed.unwrap_or(experiment_seed)
    }

    pub fn stats_samples(&self) -> usize {
        self.stats_samples.unwrap_or(DEFAULT_STATS_SAMPLES)
    }

    pub fn subgraph_weight(&self) -> Result<SubgraphWeight, CliError> {
        let w = self.parent_weight();
        match &self.w_h {
            None => Ok(SubgraphWeight::Fixed(match self.family {
                Family::Z2OddDeleted => 1.5,
                _ => w,
            })),
            Some(WeightSpec::Value(v)) if *v > 0.0 && v.is_finite() => {
                Ok(SubgraphWeight::Fixed(*v))
            }
            Some(WeightSpec::Value(v)) => Err(invalid(format!("w_h = {v} must be positive"))),
            Some(WeightSpec::Rule(rule)) => match (rule.as_str(), self.family) {
                ("inverse_alpha", Family::BernoulliSite) => {
                    let alpha = require(self.alpha, self.family, "alpha")?;
                    let scale = corollary_scaling(ScalingKind::Site { alpha })
                        .map_err(|e| invalid(e.to_string()))?;
                    Ok(SubgraphWeight::Fixed(w * scale))
                }
                ("inverse_delta", Family::BernoulliBond | Family::BernoulliSite) => {
                    Ok(SubgraphWeight::InverseDelta)
                }
                (rule, family) => Err(invalid(format!(
                    "w_h = \"{rule}\" is not available for family {}",
                    family.as_str()
                ))),
            },
        }
    }

    fn cluster_rule(&self) -> Result<ClusterRule, CliError> {
        Ok(match self.cluster.unwrap_or_default() {
            ClusterName::All => ClusterRule::All,
            ClusterName::Largest => ClusterRule::Largest,
            ClusterName::AtLeast => ClusterRule::AtLeast(require(
                self.min_cluster_size,
                self.family,
                "min_cluster_size",
            )?),
        })
    }

    /// Builds the ensemble with subgraph weight `w_h`.
    pub fn build(&self, w_h: f64) -> Result<Ensemble, CliError> {
        let w = self.parent_weight();
        let env = |e: hklab_core::environments::EnvError| invalid(e.to_string());
        let dims = || -> Result<(usize, usize), CliError> {
            Ok((self.d.unwrap_or(2), require(self.n, self.family, "n")?))
        };
        match self.family {
            Family::ThreePath => {
                let parent = Arc::new(three_path(w).map_err(env)?);
                with_weight(Ensemble::identity(parent), w_h, w)
            }
            Family::Torus => {
                let (d, n) = dims()?;
                let parent = Arc::new(torus(d, n, w).map_err(env)?);
                with_weight(Ensemble::identity(parent).transitive(), w_h, w)
            }
            Family::Z2OddDeleted => {
                if self.w.is_some_and(|x| x != 1.0) || self.d.is_some_and(|d| d != 2) {
                    return Err(invalid("z2_odd_deleted uses the unit-rate 2-torus"));
                }
                z2_odd_deleted_ensemble(require(self.n, self.family, "n")?, w_h).map_err(env)
            }
            Family::BernoulliSite => {
                let (d, n) = dims()?;
                let alpha = require(self.alpha, self.family, "alpha")?;
                site_percolation_ensemble(d, n, w, alpha, w_h).map_err(env)
            }
            Family::BernoulliBond => {
                let (d, n) = dims()?;
                let p = require(self.p, self.family, "p")?;
                bond_percolation_ensemble(d, n, w, p, w_h, self.cluster_rule()?).map_err(env)
            }
        }
    }

    /// Parameter checks; building a parent graph is cheap next to any run.
    pub fn check(&self) -> Result<(), CliError> {
        if self.stats_samples == Some(0) {
            return Err(invalid("stats_samples must be at least 1"));
        }
        let w_h = match self.subgraph_weight()? {
            SubgraphWeight::Fixed(v) => v,
            SubgraphWeight::InverseDelta => 1.0,
        };
        self.build(w_h).map(|_| ())
    }

    /// Wrap-safety rule for tori: `2·r·T + 6·sqrt(r·T) < n/2` with `r` the
    /// largest edge rate seen by either walk and `T` the last time it is
    /// evaluated at. `w_h` overrides the configured subgraph weight.
    pub fn check_wrap(
        &self,
        t_max: f64,
        h_time_scale: f64,
        w_h: Option<f64>,
    ) -> Result<(), CliError> {
        if !self.family.is_torus() {
            return Ok(());
        }
        let n = require(self.n, self.family, "n")? as f64;
        let h_rate = match (w_h, self.subgraph_weight()?) {
            (Some(v), _) | (None, SubgraphWeight::Fixed(v)) => v,
            // Checked again once δ̂ is known.
            (None, SubgraphWeight::InverseDelta) => 0.0,
        };
        let rate = self.parent_weight().max(h_rate * h_time_scale);
        let reach = 2.0 * rate * t_max + 6.0 * (rate * t_max).sqrt();
        if reach < n / 2.0 {
            Ok(())
        } else {
            Err(invalid(format!(
                "torus side {n} is too small for rate {rate} up to t = {t_max} \
                 (needs 2rT + 6sqrt(rT) = {reach:.3} < n/2); pass --allow-wrap to run anyway"
            )))
        }
    }
}

fn with_weight(e: Ensemble, w_h: f64, w: f64) -> Result<Ensemble, CliError> {
    if w_h == w {
        Ok(e)
    } else {
        e.with_subgraph_weight(w_h)
            .map_err(|err| invalid(err.to_string()))
    }
}

/// Member 0 of the odd-deleted family at unit rates.
pub fn unit_odd_deleted_member(n: usize) -> Result<PercolationSubgraph, CliError> {
    let e = z2_odd_deleted_ensemble(n, 1.0).map_err(|e| invalid(e.to_string()))?;
    Ok(e.realization(0, 0).map_err(|e| invalid(e.to_string()))?.0)
}
