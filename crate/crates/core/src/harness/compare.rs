use rayon::prelude::*;

use super::{
    averaged_curve_g, averaged_curve_h, check_condition, AveragedCurve, ConditionReport, ErrorKind,
    HarnessError, Method, EXACT_TOLERANCE,
};
use crate::environments::Ensemble;
use crate::heat_kernel::TimeGrid;
use crate::stats::ratio_standard_error;

/// Step for the finite-difference slopes at `t = 0`.
pub const SLOPE_STEP: f64 = 1e-3;
/// Relative tolerance for those slopes.
pub const SLOPE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeVerdict {
    Holds,
    Violated,
    Inconclusive,
}

impl TimeVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeVerdict::Holds => "holds",
            TimeVerdict::Violated => "violated",
            TimeVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// `lhs(t) = E[p_t(o; G)]` against `rhs(t) = E[p_{βt}(o; H) | o ∈ V(H)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub times: TimeGrid,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub lhs_err: Vec<f64>,
    pub rhs_err: Vec<f64>,
    /// `rhs - lhs`.
    pub margins: Vec<f64>,
    pub verdicts: Vec<TimeVerdict>,
    pub first_violation: Option<f64>,
    /// Rate hypothesis for `H` with rates multiplied by `time_scale`.
    pub condition: ConditionReport,
    pub time_scale: f64,
    pub method: Method,
    pub h_alpha_hat: f64,
    pub retained_fractions: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ComparisonReport {
    pub fn worst_margin(&self) -> Option<f64> {
        self.margins.iter().copied().reduce(f64::min)
    }

    pub fn violated(&self) -> bool {
        self.first_violation.is_some()
    }
}

/// Half-width of the noise band at one time: three combined standard
/// errors plus any deterministic bounds.
fn band(g: &AveragedCurve, h: &AveragedCurve, ge: f64, he: f64) -> f64 {
    let mut var = 0.0;
    let mut bound = 0.0;
    for (kind, e) in [(g.error_kind, ge), (h.error_kind, he)] {
        match kind {
            ErrorKind::Exact => {}
            ErrorKind::Bound => bound += e,
            ErrorKind::StandardError => var += e * e,
        }
    }
    3.0 * var.sqrt() + bound
}

/// Pairs the two averaged curves on `times`. A time is a violation only
/// when `lhs` exceeds `rhs` by more than the noise band plus `1e-9`.
pub fn compare_theorem(
    ensemble: &Ensemble,
    times: &TimeGrid,
    sample_count: usize,
    method: Method,
    seed: u64,
    time_scale: f64,
) -> Result<ComparisonReport, HarnessError> {
    let condition = check_condition(ensemble, sample_count, seed)?.with_rate_factor(time_scale);
    let g = averaged_curve_g(ensemble, times, method, seed)?;
    let h = averaged_curve_h(ensemble, times, sample_count, method, seed, time_scale)?;
    let (lhs_err, rhs_err) = (g.errors(), h.errors());
    let mut margins = Vec::with_capacity(times.len());
    let mut verdicts = Vec::with_capacity(times.len());
    let mut first_violation = None;
    for (i, &t) in times.times().iter().enumerate() {
        let margin = h.values()[i] - g.values()[i];
        let verdict = if margin >= -EXACT_TOLERANCE {
            TimeVerdict::Holds
        } else if margin < -(band(&g, &h, lhs_err[i], rhs_err[i]) + EXACT_TOLERANCE) {
            TimeVerdict::Violated
        } else {
            TimeVerdict::Inconclusive
        };
        if verdict == TimeVerdict::Violated && first_violation.is_none() {
            first_violation = Some(t);
        }
        margins.push(margin);
        verdicts.push(verdict);
    }
    let mut warnings = g.warnings.clone();
    warnings.extend(h.warnings.iter().cloned());
    Ok(ComparisonReport {
        times: times.clone(),
        lhs: g.values().to_vec(),
        rhs: h.values().to_vec(),
        lhs_err,
        rhs_err,
        margins,
        verdicts,
        first_violation,
        condition,
        time_scale,
        method,
        h_alpha_hat: h.alpha_hat,
        retained_fractions: h.retained_fractions,
        warnings,
    })
}

/// Reversed rate condition and the small-time crossing it forces.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessReport {
    /// `E[Δ_H(o, o) | o ∈ V(H)]`.
    pub reversed_lhs: f64,
    pub reversed_lhs_se: f64,
    /// `E[Δ_G(o, o)]`.
    pub reversed_rhs: f64,
    /// First grid time with a strict violation.
    pub crossing_time: Option<f64>,
    /// `(1 - lhs(h)) / h` and `(1 - rhs(h)) / h` at `h = SLOPE_STEP`.
    pub slope_g: f64,
    pub slope_h: f64,
    pub slope_g_ok: bool,
    pub slope_h_ok: bool,
    pub comparison: ComparisonReport,
}

fn rate_sides(
    ensemble: &Ensemble,
    sample_count: usize,
    seed: u64,
) -> Result<(f64, f64, f64), HarnessError> {
    let parent = ensemble.parent();
    let pi = ensemble.root_probabilities();
    let rhs: f64 = pi
        .iter()
        .enumerate()
        .map(|(o, p)| p * parent.incident_weight(o))
        .sum();
    let parts: Vec<(f64, f64)> = (0..ensemble.realization_count(sample_count))
        .into_par_iter()
        .map(|i| -> Result<(f64, f64), HarnessError> {
            let (h, q) = ensemble.realization(i, seed)?;
            let (mut num, mut den) = (0.0, 0.0);
            for (o, &p) in pi.iter().enumerate() {
                if p > 0.0 && h.contains_vertex(o) {
                    num += p * h.incident_weight(o);
                    den += p;
                }
            }
            Ok((q * num, q * den))
        })
        .collect::<Result<_, _>>()?;
    let (nums, dens): (Vec<f64>, Vec<f64>) = parts.into_iter().unzip();
    let den: f64 = dens.iter().sum();
    if !(den > 0.0) {
        return Err(HarnessError::Degenerate(
            "no realization retains a root with positive probability".into(),
        ));
    }
    let lhs = nums.iter().sum::<f64>() / den;
    let se = if ensemble.is_exact() {
        0.0
    } else {
        ratio_standard_error(&nums, &dens)
    };
    Ok((lhs, se, rhs))
}

/// When `E[Δ_H(o, o) | o ∈ V(H)] > E[Δ_G(o, o)]`, the averaged inequality
/// must fail for small `t`. Locates the first violating time on
/// `small_times` (extended by `0` and `SLOPE_STEP`) and checks both curves'
/// slopes at zero against the two rate sides.
pub fn sharpness_probe(
    ensemble: &Ensemble,
    small_times: &TimeGrid,
    sample_count: usize,
    method: Method,
    seed: u64,
) -> Result<SharpnessReport, HarnessError> {
    let (lhs, se, rhs) = rate_sides(ensemble, sample_count, seed)?;
    if !(lhs > rhs + 3.0 * se + 1e-12) {
        return Err(HarnessError::SharpnessInapplicable { lhs, rhs });
    }
    let mut times = small_times.times().to_vec();
    times.extend([0.0, SLOPE_STEP]);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let grid = TimeGrid::new(times)?;
    let comparison = compare_theorem(ensemble, &grid, sample_count, method, seed, 1.0)?;
    let at_step = grid
        .times()
        .iter()
        .position(|&t| t == SLOPE_STEP)
        .expect("step inserted");
    let slope_g = (1.0 - comparison.lhs[at_step]) / SLOPE_STEP;
    let slope_h = (1.0 - comparison.rhs[at_step]) / SLOPE_STEP;
    let within = |slope: f64, target: f64| (slope - target).abs() <= SLOPE_TOLERANCE * target.abs();
    Ok(SharpnessReport {
        reversed_lhs: lhs,
        reversed_lhs_se: se,
        reversed_rhs: rhs,
        crossing_time: comparison.first_violation,
        slope_g,
        slope_h,
        slope_g_ok: within(slope_g, rhs),
        slope_h_ok: within(slope_h, lhs),
        comparison,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::environments::{three_path, z2_odd_deleted_ensemble};

    #[test]
    fn identity_never_violates() {
        let e = Ensemble::identity(Arc::new(three_path(0.4).unwrap()));
        let times = TimeGrid::comparison_default();
        let r = compare_theorem(&e, &times, 1, Method::Dense, 0, 1.0).unwrap();
        assert!(r.margins.iter().all(|m| m.abs() < 1e-14));
        assert!(!r.violated());
        assert_eq!((r.lhs[0], r.rhs[0]), (1.0, 1.0));
    }

    #[test]
    fn z2_small_torus_holds_then_breaks_with_faster_clock() {
        let e = z2_odd_deleted_ensemble(8, 1.5).unwrap();
        let times = TimeGrid::geometric(1e-3, 3.0, 30, true).unwrap();
        let r = compare_theorem(&e, &times, 1, Method::Dense, 0, 1.0).unwrap();
        assert!(r.margins.iter().all(|&m| m >= -1e-9));
        let unit = z2_odd_deleted_ensemble(8, 1.0).unwrap();
        let fast = compare_theorem(&unit, &times, 1, Method::Dense, 0, 1.6).unwrap();
        assert!(fast.violated());
    }

    #[test]
    fn sharpness_on_small_torus() {
        let e = z2_odd_deleted_ensemble(8, 2.0).unwrap();
        let times = TimeGrid::geometric(1e-4, 0.5, 20, false).unwrap();
        let r = sharpness_probe(&e, &times, 1, Method::Dense, 0).unwrap();
        assert!((r.reversed_lhs - 16.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.reversed_rhs, 4.0);
        assert!(r.crossing_time.is_some());
        assert!(r.slope_g_ok && r.slope_h_ok, "{} {}", r.slope_g, r.slope_h);
    }

    #[test]
    fn sharpness_inapplicable_for_identity() {
        let e = Ensemble::identity(Arc::new(three_path(1.0).unwrap()));
        let times = TimeGrid::geometric(1e-4, 0.5, 10, false).unwrap();
        assert!(matches!(
            sharpness_probe(&e, &times, 1, Method::Dense, 0),
            Err(HarnessError::SharpnessInapplicable { .. })
        ));
    }
}
