use super::HarnessError;
use crate::environments::{estimate_stats, Ensemble, EnsembleStats, IncidenceClasses};

/// Slack for margins that are exact up to rounding.
const CONDITION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionVerdict {
    Holds,
    Fails,
    Inconclusive,
}

impl ConditionVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionVerdict::Holds => "holds",
            ConditionVerdict::Fails => "fails",
            ConditionVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// One incidence class: `lhs = E[w_H(e); e ∈ E(H)] / P[o ∈ V(H)]` against
/// `rhs = w_G(e)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub rows: Vec<ConditionRow>,
    pub verdict: ConditionVerdict,
    pub exact: bool,
    pub alpha_hat: f64,
    pub alpha_se: f64,
    pub delta_hat: f64,
    pub delta_se: f64,
    pub realizations: usize,
}

impl ConditionReport {
    pub fn worst_margin(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// The report for `H` with every rate multiplied by `factor`, which is
    /// what evaluating the `H` side at `factor·t` amounts to.
    pub fn with_rate_factor(&self, factor: f64) -> Self {
        let rows: Vec<ConditionRow> = self
            .rows
            .iter()
            .map(|r| {
                let lhs = r.lhs * factor;
                ConditionRow {
                    label: r.label.clone(),
                    lhs,
                    rhs: r.rhs,
                    margin: r.rhs - lhs,
                    stderr: r.stderr * factor,
                }
            })
            .collect();
        Self {
            verdict: verdict(&rows, self.exact),
            rows,
            ..self.clone()
        }
    }
}

fn verdict(rows: &[ConditionRow], exact: bool) -> ConditionVerdict {
    if exact {
        return if rows.iter().all(|r| r.margin >= -CONDITION_TOLERANCE) {
            ConditionVerdict::Holds
        } else {
            ConditionVerdict::Fails
        };
    }
    let fails = rows
        .iter()
        .any(|r| r.stderr.is_finite() && r.margin < -3.0 * r.stderr - CONDITION_TOLERANCE);
    if fails {
        ConditionVerdict::Fails
    } else if rows.iter().all(|r| r.stderr.is_finite()) {
        ConditionVerdict::Holds
    } else {
        ConditionVerdict::Inconclusive
    }
}

/// Both sides of the rate hypothesis for every incidence class. Exact laws
/// are evaluated pair by pair and each declared class reports its worst
/// pair; sampled laws report pooled class estimates with standard errors.
/// Pairs whose root is never retained are vacuous and skipped.
pub fn check_condition(
    ensemble: &Ensemble,
    sample_count: usize,
    seed: u64,
) -> Result<ConditionReport, HarnessError> {
    let stats = estimate_stats(ensemble, sample_count, seed)?;
    let rows = if ensemble.is_exact() {
        exact_rows(ensemble, &stats, seed)?
    } else {
        stats
            .classes
            .iter()
            .filter(|c| c.lhs.is_finite())
            .map(|c| ConditionRow {
                label: c.label.clone(),
                lhs: c.lhs,
                rhs: c.parent_weight,
                margin: c.parent_weight - c.lhs,
                stderr: c.lhs_se,
            })
            .collect()
    };
    if rows.is_empty() || stats.classes.iter().all(|c| !(c.edge_probability > 0.0)) {
        return Err(HarnessError::Degenerate(
            "no retained incident edge was ever observed".into(),
        ));
    }
    Ok(ConditionReport {
        verdict: verdict(&rows, stats.exact),
        rows,
        exact: stats.exact,
        alpha_hat: stats.alpha_hat,
        alpha_se: stats.alpha_se,
        delta_hat: stats.delta_hat,
        delta_se: stats.delta_se,
        realizations: stats.sample_count,
    })
}

fn exact_rows(
    ensemble: &Ensemble,
    stats: &EnsembleStats,
    seed: u64,
) -> Result<Vec<ConditionRow>, HarnessError> {
    let per_pair = match ensemble.incidence_classes() {
        IncidenceClasses::PerPair => stats.clone(),
        IncidenceClasses::Single => estimate_stats(
            &ensemble
                .clone()
                .with_incidence_classes(IncidenceClasses::PerPair),
            1,
            seed,
        )?,
    };
    let pairs = ensemble.incidence_pairs();
    let labels = ensemble.class_labels(&pairs);
    let mut worst: Vec<Option<ConditionRow>> = vec![None; labels.len()];
    for (pair, occ) in pairs.iter().zip(&per_pair.classes) {
        if !occ.lhs.is_finite() {
            continue;
        }
        let margin = occ.parent_weight - occ.lhs;
        let slot = &mut worst[pair.class];
        if slot.as_ref().is_none_or(|r| margin < r.margin) {
            *slot = Some(ConditionRow {
                label: labels[pair.class].clone(),
                lhs: occ.lhs,
                rhs: occ.parent_weight,
                margin,
                stderr: 0.0,
            });
        }
    }
    Ok(worst.into_iter().flatten().collect())
}
