use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hklab_core::environments::{estimate_stats, Ensemble};
use hklab_core::environments::{three_path, torus};
use hklab_core::harness::{
    averaged_curve_g, averaged_curve_h, compare_theorem, corollary_scaling, dominance_probe,
    random_three_path_search, sharpness_probe, AveragedCurve, ComparisonReport, CoupledWeights,
    DominanceReport, HarnessError, ScalingKind, SharpnessReport,
};
use hklab_core::heat_kernel::{averaged_spectral_measure, spectral_decompose_roots};
use hklab_core::rng::derive_seed;
use hklab_core::TimeGrid;

use crate::config::{
    invalid, unit_odd_deleted_member, EnsembleConfig, ExperimentConfig, Kind, SubgraphWeight,
};
use crate::format::{num, CsvWriter};
use crate::summary::{sharpness_summary, verify_summary};
use crate::CliError;

/// Salt for the `δ̂` pass so it does not reuse the comparison draws.
const STATS_SALT: u64 = 0xde17a;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 3;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub allow_wrap: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub artifacts: Vec<Artifact>,
    pub summary: String,
}

impl Outcome {
    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts
            .iter()
            .find(|a| a.name == name)
            .map(|a| a.contents.as_str())
    }
}

fn runtime(e: HarnessError) -> CliError {
    CliError::Runtime(e.to_string())
}

fn artifact(name: &str, contents: String) -> Artifact {
    Artifact {
        name: name.to_string(),
        contents,
    }
}

/// Parses, validates and runs the experiment in `path`, then writes its
/// CSV files to `--out`, the config's `output`, or `hklab-out`.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<(Outcome, Vec<PathBuf>), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let config = ExperimentConfig::parse(&text)?;
    let outcome = execute(&config, opts)?;
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("hklab-out"));
    let written = write_artifacts(&dir, &outcome)?;
    Ok((outcome, written))
}

pub fn write_artifacts(dir: &Path, outcome: &Outcome) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    outcome
        .artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            fs::write(&path, &a.contents)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            Ok(path)
        })
        .collect()
}

/// Validates and runs `config` without touching the file system.
pub fn execute(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    config.validate(opts.allow_wrap)?;
    match config.kind {
        Kind::Curve => run_curve(&config, opts),
        Kind::Verify => run_verify(&config, opts),
        Kind::Sharpness => run_sharpness(&config, opts),
        Kind::Probe => run_probe(&config),
        Kind::Figure1 => run_figure1(&config),
        Kind::Figure23 => run_figure23(&config),
    }
}

/// The configured ensemble with `w_H` resolved, plus a note on how.
fn resolve_ensemble(
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<(Ensemble, String), CliError> {
    let e = config.ensemble_config()?;
    match e.subgraph_weight()? {
        SubgraphWeight::Fixed(w_h) => Ok((e.build(w_h)?, format!("w_h {}", num(w_h)))),
        SubgraphWeight::InverseDelta => {
            let base = e.build(e.parent_weight())?;
            let seed = derive_seed(e.sampling_seed(config.seed), STATS_SALT);
            let stats = estimate_stats(&base, e.stats_samples(), seed)
                .map_err(|err| CliError::Runtime(err.to_string()))?;
            let scale = corollary_scaling(ScalingKind::Cluster {
                delta: stats.delta_hat,
            })
            .map_err(runtime)?;
            let w_h = e.parent_weight() * scale;
            if !opts.allow_wrap {
                e.check_wrap(config.time_grid()?.max(), config.h_time_scale()?, Some(w_h))?;
            }
            let ensemble = base
                .with_subgraph_weight(w_h)
                .map_err(|err| invalid(err.to_string()))?;
            let note = format!(
                "w_h {} = w / delta_hat, delta_hat {} +- {} from {} draws",
                num(w_h),
                num(stats.delta_hat),
                num(stats.delta_se),
                stats.sample_count
            );
            Ok((ensemble, note))
        }
    }
}

fn title(config: &ExperimentConfig, e: &EnsembleConfig, note: &str) -> String {
    format!(
        "{} | {} | method {} | seed {} | {}",
        config.kind.as_str(),
        e.family.as_str(),
        config.method().map(|m| m.as_str()).unwrap_or("?"),
        config.seed,
        note
    )
}

fn curve_csv(c: &AveragedCurve) -> String {
    let mut w = CsvWriter::new(&["t", "value", "stderr"]);
    for (i, &t) in c.curve.times().iter().enumerate() {
        w.line([num(t), num(c.values()[i]), num(c.curve.error_at(i))]);
    }
    w.finish()
}

fn samples_csv(fractions: &[f64]) -> String {
    let mut w = CsvWriter::new(&["sample", "retained_fraction"]);
    for (i, f) in fractions.iter().enumerate() {
        w.line([i.to_string(), num(*f)]);
    }
    w.finish()
}

pub fn comparison_csv(r: &ComparisonReport) -> String {
    let mut w = CsvWriter::new(&["t", "lhs", "rhs", "lhs_err", "rhs_err", "margin", "verdict"]);
    for (i, &t) in r.times.times().iter().enumerate() {
        w.line([
            num(t),
            num(r.lhs[i]),
            num(r.rhs[i]),
            num(r.lhs_err[i]),
            num(r.rhs_err[i]),
            num(r.margins[i]),
            r.verdicts[i].as_str().to_string(),
        ]);
    }
    w.finish()
}

pub fn condition_csv(r: &ComparisonReport) -> String {
    let mut w = CsvWriter::new(&["edge_class", "lhs", "rhs", "margin", "stderr"]);
    for row in &r.condition.rows {
        w.line([
            row.label.clone(),
            num(row.lhs),
            num(row.rhs),
            num(row.margin),
            num(row.stderr),
        ]);
    }
    w.finish()
}

fn run_curve(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let (ensemble, note) = resolve_ensemble(config, opts)?;
    let e = config.ensemble_config()?;
    let grid = config.time_grid()?;
    let method = config.method()?;
    let g = averaged_curve_g(&ensemble, &grid, method, config.seed).map_err(runtime)?;
    let h = averaged_curve_h(
        &ensemble,
        &grid,
        config.sample_count()?,
        method,
        e.sampling_seed(config.seed),
        config.h_time_scale()?,
    )
    .map_err(runtime)?;
    let mut summary = format!("{}\n", title(config, e, &note));
    let _ = writeln!(summary, "{:>14}{:>14}{:>14}", "t", "G", "H");
    for (i, &t) in grid.times().iter().enumerate() {
        let _ = writeln!(
            summary,
            "{:>14}{:>14}{:>14}",
            crate::format::format_sig(t, 6),
            crate::format::format_sig(g.values()[i], 6),
            crate::format::format_sig(h.values()[i], 6)
        );
    }
    let mut artifacts = vec![
        artifact("curve_g.csv", curve_csv(&g)),
        artifact("curve_h.csv", curve_csv(&h)),
    ];
    if !ensemble.is_exact() {
        artifacts.push(artifact("samples.csv", samples_csv(&h.retained_fractions)));
    }
    Ok(Outcome {
        exit_code: EXIT_OK,
        artifacts,
        summary,
    })
}

/// Runs the comparison for the configured ensemble; shared with the tests.
pub fn comparison_for(
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<(ComparisonReport, String, Ensemble), CliError> {
    let (ensemble, note) = resolve_ensemble(config, opts)?;
    let e = config.ensemble_config()?;
    let report = compare_theorem(
        &ensemble,
        &config.time_grid()?,
        config.sample_count()?,
        config.method()?,
        e.sampling_seed(config.seed),
        config.h_time_scale()?,
    )
    .map_err(runtime)?;
    Ok((report, title(config, e, &note), ensemble))
}

fn run_verify(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let (report, title, ensemble) = comparison_for(config, opts)?;
    let mut artifacts = vec![
        artifact("comparison.csv", comparison_csv(&report)),
        artifact("condition.csv", condition_csv(&report)),
    ];
    if !ensemble.is_exact() {
        artifacts.push(artifact(
            "samples.csv",
            samples_csv(&report.retained_fractions),
        ));
    }
    Ok(Outcome {
        exit_code: if report.violated() {
            EXIT_VIOLATION
        } else {
            EXIT_OK
        },
        summary: verify_summary(&title, &report),
        artifacts,
    })
}

fn sharpness_csv(r: Option<&SharpnessReport>, inapplicable: Option<(f64, f64)>) -> String {
    let mut w = CsvWriter::new(&[
        "reversed_lhs",
        "reversed_lhs_se",
        "reversed_rhs",
        "applicable",
        "crossing_time",
        "slope_g",
        "slope_h",
        "slope_g_ok",
        "slope_h_ok",
    ]);
    match (r, inapplicable) {
        (Some(r), _) => w.line([
            num(r.reversed_lhs),
            num(r.reversed_lhs_se),
            num(r.reversed_rhs),
            "true".into(),
            r.crossing_time.map(num).unwrap_or_default(),
            num(r.slope_g),
            num(r.slope_h),
            r.slope_g_ok.to_string(),
            r.slope_h_ok.to_string(),
        ]),
        (None, Some((lhs, rhs))) => w.line([
            num(lhs),
            String::new(),
            num(rhs),
            "false".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ]),
        (None, None) => {}
    }
    w.finish()
}

fn run_sharpness(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    if config.h_time_scale()? != 1.0 {
        return Err(invalid(
            "sharpness runs compare at equal times; drop h_time_scale",
        ));
    }
    let (ensemble, note) = resolve_ensemble(config, opts)?;
    let e = config.ensemble_config()?;
    let title = title(config, e, &note);
    let result = sharpness_probe(
        &ensemble,
        &config.time_grid()?,
        config.sample_count()?,
        config.method()?,
        e.sampling_seed(config.seed),
    );
    match result {
        Ok(report) => Ok(Outcome {
            exit_code: EXIT_OK,
            summary: sharpness_summary(&title, &report),
            artifacts: vec![
                artifact("sharpness.csv", sharpness_csv(Some(&report), None)),
                artifact("comparison.csv", comparison_csv(&report.comparison)),
            ],
        }),
        Err(HarnessError::SharpnessInapplicable { lhs, rhs }) => Ok(Outcome {
            exit_code: EXIT_OK,
            summary: format!(
                "{title}\nprobe inapplicable: reversed rate condition fails \
                 (H side {}, G side {})\n",
                num(lhs),
                num(rhs)
            ),
            artifacts: vec![artifact(
                "sharpness.csv",
                sharpness_csv(None, Some((lhs, rhs))),
            )],
        }),
        Err(other) => Err(runtime(other)),
    }
}

fn probe_csv(r: &DominanceReport) -> String {
    let mut w = CsvWriter::new(&["t", "lhs", "rhs", "difference"]);
    for (i, &t) in r.times.times().iter().enumerate() {
        w.line([
            num(t),
            num(r.lhs[i]),
            num(r.rhs[i]),
            num(r.rhs[i] - r.lhs[i]),
        ]);
    }
    w.finish()
}

fn provenance(trial: Option<usize>, r: &DominanceReport) -> String {
    let mut out = String::new();
    if let Some(t) = trial {
        let _ = writeln!(out, "trial {t}");
    }
    let _ = writeln!(
        out,
        "min difference {} at t = {}",
        num(r.min_difference),
        num(r.argmin_time)
    );
    for (k, atom) in r.law.iter().enumerate() {
        let list = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ");
        let _ = writeln!(
            out,
            "atom {k} probability {} w1 [{}] w2 [{}]",
            num(atom.probability),
            list(&atom.w1),
            list(&atom.w2)
        );
    }
    out
}

fn run_probe(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let probe = config.probe.as_ref().expect("validated");
    let grid = config.time_grid()?;
    let (report, candidates, header) = if let Some(trials) = probe.trials {
        let search = random_three_path_search(trials, &grid, config.seed).map_err(runtime)?;
        let header = format!(
            "probe | random 3-path couplings | {} trials | seed {}\nworst trial {}",
            trials, config.seed, search.worst_trial
        );
        let candidates: Vec<String> = search
            .candidates
            .iter()
            .map(|(i, r)| provenance(Some(*i), r))
            .collect();
        (search.worst, candidates, header)
    } else {
        let e = config.ensemble_config()?;
        let parent = e.build(e.parent_weight())?.parent().clone();
        let law: Vec<CoupledWeights> = probe
            .atoms
            .iter()
            .map(|a| CoupledWeights {
                w1: a.w1.clone(),
                w2: a.w2.clone(),
                probability: a.probability,
            })
            .collect();
        let report = dominance_probe(&parent, &law, &grid).map_err(|err| match err {
            HarnessError::Dominance(m) => invalid(m),
            other => runtime(other),
        })?;
        let candidates = if report.candidate {
            vec![provenance(None, &report)]
        } else {
            Vec::new()
        };
        let header = format!("probe | {} | {} atoms", e.family.as_str(), law.len());
        (report, candidates, header)
    };
    let mut summary = format!("{header}\n");
    let _ = writeln!(
        summary,
        "{:<18}{} at t = {}",
        "min rhs - lhs",
        crate::format::format_sig(report.min_difference, 6),
        crate::format::format_sig(report.argmin_time, 6)
    );
    let _ = writeln!(summary, "{:<18}{}", "candidates", candidates.len());
    let mut artifacts = vec![artifact("probe.csv", probe_csv(&report))];
    if !candidates.is_empty() {
        artifacts.push(artifact("probe_candidates.txt", candidates.concat()));
    }
    Ok(Outcome {
        exit_code: if candidates.is_empty() {
            EXIT_OK
        } else {
            EXIT_VIOLATION
        },
        artifacts,
        summary,
    })
}

/// `p_t` at the three path vertices for each `w` on a geometric grid.
pub fn figure1_rows(
    w_min: f64,
    w_max: f64,
    points: usize,
    t: f64,
) -> Result<Vec<[f64; 4]>, CliError> {
    let ws =
        TimeGrid::geometric(w_min, w_max, points, false).map_err(|e| invalid(e.to_string()))?;
    ws.times()
        .iter()
        .map(|&w| {
            let g = three_path(w).map_err(|e| invalid(e.to_string()))?;
            let spectra = spectral_decompose_roots(&g, &[0, 1, 2])
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok([
                w,
                spectra[0].return_probability(t),
                spectra[1].return_probability(t),
                spectra[2].return_probability(t),
            ])
        })
        .collect()
}

fn run_figure1(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (lo, hi, points, t) = config.figure1_params()?;
    let rows = figure1_rows(lo, hi, points, t)?;
    let mut w = CsvWriter::new(&["w", "p1_a", "p1_b", "p1_c"]);
    for r in &rows {
        w.line(r.iter().map(|x| num(*x)));
    }
    let mut summary = format!("figure1 | 3-path a-b-c, rates 1 and w | t = {}\n", num(t));
    for (col, name) in ["a", "b", "c"].iter().enumerate() {
        let values: Vec<f64> = rows.iter().map(|r| r[col + 1]).collect();
        let (imin, imax) = extremes(&values);
        let _ = writeln!(
            summary,
            "vertex {name}: min {} at w = {}, max {} at w = {}",
            crate::format::format_sig(values[imin], 6),
            crate::format::format_sig(rows[imin][0], 4),
            crate::format::format_sig(values[imax], 6),
            crate::format::format_sig(rows[imax][0], 4)
        );
    }
    Ok(Outcome {
        exit_code: EXIT_OK,
        artifacts: vec![artifact("figure1.csv", w.finish())],
        summary,
    })
}

fn extremes(values: &[f64]) -> (usize, usize) {
    let mut imin = 0;
    let mut imax = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[imin] {
            imin = i;
        }
        if *v > values[imax] {
            imax = i;
        }
    }
    (imin, imax)
}

/// Columns `t, p_t(Z²), p_t(deg-4 root; H), p_t(deg-2 root; H)` and the
/// mixture `(1/3) p_{3t/2}(deg 4) + (2/3) p_{3t/2}(deg 2)`, all at unit
/// rates on the `n × n` torus.
pub fn figure23_rows(n: usize, grid: &TimeGrid) -> Result<Vec<[f64; 5]>, CliError> {
    let rt = |e: hklab_core::heat_kernel::HeatKernelError| CliError::Runtime(e.to_string());
    let g = torus(2, n, 1.0).map_err(|e| invalid(e.to_string()))?;
    let uniform = vec![1.0 / g.vertex_count() as f64; g.vertex_count()];
    let lattice = averaged_spectral_measure(&g, &uniform).map_err(rt)?;
    let member = unit_odd_deleted_member(n)?;
    let local = member.restrict().expect("member is nonempty");
    let index = |v: usize| local.to_parent.binary_search(&v).expect("vertex retained");
    // (0, 0) keeps all four neighbors; (1, 0) keeps two.
    let (deg4, deg2) = (index(0), index(1));
    debug_assert_eq!(local.graph.degree(deg4), 4);
    debug_assert_eq!(local.graph.degree(deg2), 2);
    let spectra = spectral_decompose_roots(&local.graph, &[deg4, deg2]).map_err(rt)?;
    Ok(grid
        .times()
        .iter()
        .map(|&t| {
            let s = 1.5 * t;
            [
                t,
                lattice.evaluate(t),
                spectra[0].return_probability(t),
                spectra[1].return_probability(t),
                spectra[0].return_probability(s) / 3.0
                    + 2.0 * spectra[1].return_probability(s) / 3.0,
            ]
        })
        .collect())
}

fn run_figure23(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let e = config.ensemble_config()?;
    let n = e.n.expect("validated");
    let grid = config.time_grid()?;
    let rows = figure23_rows(n, &grid)?;
    let mut w = CsvWriter::new(&["t", "p_t_Z2", "p_t_H_deg4", "p_t_H_deg2", "mixture_at_3t_2"]);
    let mut out_of_order = 0;
    for r in &rows {
        if r[1] > r[4] + 1e-9 {
            out_of_order += 1;
        }
        w.line(r.iter().map(|x| num(*x)));
    }
    let summary = format!(
        "figure23 | {n}x{n} torus and its odd-deleted subgraph | {} times\n\
         {:<18}{}\n",
        rows.len(),
        "lattice > mixture",
        out_of_order
    );
    Ok(Outcome {
        exit_code: if out_of_order == 0 {
            EXIT_OK
        } else {
            EXIT_VIOLATION
        },
        artifacts: vec![artifact("figure23.csv", w.finish())],
        summary,
    })
}
