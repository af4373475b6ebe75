//! Both sides of the averaged return-probability inequality
//!
//! ```text
//! E[p_t(o; G)]  ≤  E[p_t(o; H) | o ∈ V(H)]
//! ```
//!
//! together with its rate hypothesis, the small-time sharpness regime and
//! a probe for coupled-weights dominance.

mod compare;
mod condition;
mod curves;
mod dominance;

use thiserror::Error;

use crate::environments::EnvError;
use crate::heat_kernel::HeatKernelError;
use crate::sim::SimError;

pub use compare::{
    compare_theorem, sharpness_probe, ComparisonReport, SharpnessReport, TimeVerdict, SLOPE_STEP,
    SLOPE_TOLERANCE,
};
pub use condition::{check_condition, ConditionReport, ConditionRow, ConditionVerdict};
pub use curves::{averaged_curve_g, averaged_curve_h, AveragedCurve, ErrorKind};
pub use dominance::{
    dominance_probe, random_three_path_search, CoupledWeights, DominanceReport, SearchReport,
};

/// Absolute slack for comparisons that are exact up to rounding.
pub const EXACT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Environment(#[from] EnvError),
    #[error(transparent)]
    HeatKernel(#[from] HeatKernelError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("degenerate conditioning: {0}")]
    Degenerate(String),
    #[error(
        "reversed rate condition does not hold (H side {lhs}, G side {rhs}); probe inapplicable"
    )]
    SharpnessInapplicable { lhs: f64, rhs: f64 },
    #[error("dominance precondition violated: {0}")]
    Dominance(String),
    #[error("{0}")]
    BadParameter(String),
}

impl From<crate::graph::GraphError> for HarnessError {
    fn from(e: crate::graph::GraphError) -> Self {
        HarnessError::Environment(EnvError::Graph(e))
    }
}

/// How a return curve is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Dense,
    Uniformized { eps: f64 },
    MonteCarlo { walk_count: u64, max_jumps: u64 },
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dense => "dense",
            Method::Uniformized { .. } => "uniformized",
            Method::MonteCarlo { .. } => "monte_carlo",
        }
    }
}

/// Ensemble kinds with a known sharp constant weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingKind {
    Site { alpha: f64 },
    Cluster { delta: f64 },
}

/// Constant `w_H` that makes the rate condition an equality on a unit-rate
/// transitive parent: `1/α` for site percolation, `1/δ` for clusters.
pub fn corollary_scaling(kind: ScalingKind) -> Result<f64, HarnessError> {
    let (name, value) = match kind {
        ScalingKind::Site { alpha } => ("alpha", alpha),
        ScalingKind::Cluster { delta } => ("delta", delta),
    };
    if value > 0.0 && value.is_finite() {
        Ok(1.0 / value)
    } else {
        Err(HarnessError::BadParameter(format!(
            "{name} = {value} must be positive"
        )))
    }
}
