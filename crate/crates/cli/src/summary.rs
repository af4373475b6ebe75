//! Fixed-width text summaries printed after a run.

use std::fmt::Write;

use hklab_core::harness::{ComparisonReport, ConditionReport, SharpnessReport};

use crate::format::format_sig;

const WIDTH: usize = 14;

fn short(x: f64) -> String {
    format_sig(x, 6)
}

fn cells(out: &mut String, fields: &[String]) {
    for f in fields {
        let _ = write!(out, "{f:>WIDTH$}");
    }
    out.push('\n');
}

/// One row per grid time with both sides, the margin and the verdict.
pub fn comparison_table(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let header = ["t", "lhs", "rhs", "margin", "verdict"].map(String::from);
    cells(&mut out, &header);
    for (i, &t) in report.times.times().iter().enumerate() {
        cells(
            &mut out,
            &[
                short(t),
                short(report.lhs[i]),
                short(report.rhs[i]),
                short(report.margins[i]),
                report.verdicts[i].as_str().to_string(),
            ],
        );
    }
    out
}

pub fn condition_block(c: &ConditionReport) -> String {
    let mut out = String::new();
    let pm = |v: f64, se: f64| {
        if c.exact {
            format!("{} (exact)", short(v))
        } else {
            format!("{} +- {}", short(v), short(se))
        }
    };
    let _ = writeln!(out, "{:<18}{}", "alpha_hat", pm(c.alpha_hat, c.alpha_se));
    let _ = writeln!(out, "{:<18}{}", "delta_hat", pm(c.delta_hat, c.delta_se));
    let _ = writeln!(
        out,
        "{:<18}{} (worst margin {}, {} classes)",
        "rate condition",
        c.verdict.as_str(),
        short(c.worst_margin()),
        c.rows.len()
    );
    out
}

pub fn verify_summary(title: &str, report: &ComparisonReport) -> String {
    let mut out = format!("{title}\n");
    out.push_str(&condition_block(&report.condition));
    out.push_str(&comparison_table(report));
    let worst = report
        .worst_margin()
        .map_or_else(|| "none".to_string(), short);
    let _ = writeln!(out, "{:<18}{worst}", "worst margin");
    let first = report
        .first_violation
        .map_or_else(|| "none".to_string(), short);
    let _ = writeln!(out, "{:<18}{first}", "first violation");
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn sharpness_summary(title: &str, report: &SharpnessReport) -> String {
    let mut out = format!("{title}\n");
    let _ = writeln!(
        out,
        "{:<18}H side {} vs G side {}",
        "reversed rates",
        short(report.reversed_lhs),
        short(report.reversed_rhs)
    );
    let crossing = report
        .crossing_time
        .map_or_else(|| "none".to_string(), |t| format_sig(t, 3));
    let _ = writeln!(out, "{:<18}{crossing}", "crossing time");
    let ok = |b: bool| if b { "ok" } else { "off" };
    let _ = writeln!(
        out,
        "{:<18}G {} (want {}, {}), H {} (want {}, {})",
        "slopes at 0",
        short(report.slope_g),
        short(report.reversed_rhs),
        ok(report.slope_g_ok),
        short(report.slope_h),
        short(report.reversed_lhs),
        ok(report.slope_h_ok)
    );
    out.push_str(&comparison_table(&report.comparison));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use hklab_core::environments::z2_odd_deleted_ensemble;
    use hklab_core::harness::{compare_theorem, sharpness_probe, Method};
    use hklab_core::TimeGrid;

    #[test]
    fn empty_grid_prints_header_only() {
        let e = z2_odd_deleted_ensemble(4, 1.5).unwrap();
        let grid = TimeGrid::new(vec![]).unwrap();
        let r = compare_theorem(&e, &grid, 1, Method::Dense, 0, 1.0).unwrap();
        assert_eq!(comparison_table(&r).lines().count(), 1);
    }

    #[test]
    fn one_row_per_time() {
        let e = z2_odd_deleted_ensemble(4, 1.5).unwrap();
        let grid = TimeGrid::geometric(0.01, 2.0, 9, true).unwrap();
        let r = compare_theorem(&e, &grid, 1, Method::Dense, 0, 1.0).unwrap();
        assert_eq!(comparison_table(&r).lines().count(), 1 + grid.len());
        let text = verify_summary("verify", &r);
        assert!(text.contains("first violation   none"));
    }

    #[test]
    fn crossing_printed_to_three_digits() {
        let e = z2_odd_deleted_ensemble(8, 2.0).unwrap();
        let grid = TimeGrid::geometric(1e-4, 0.5, 15, false).unwrap();
        let r = sharpness_probe(&e, &grid, 1, Method::Dense, 0).unwrap();
        let t = r.crossing_time.unwrap();
        let text = sharpness_summary("sharpness", &r);
        assert!(text.contains(&format!("crossing time     {}", format_sig(t, 3))));
        let printed = format_sig(t, 3);
        let digits = printed.trim_start_matches("0.").trim_start_matches('0');
        assert!(digits.split('e').next().unwrap().replace('.', "").len() <= 3);
    }
}
