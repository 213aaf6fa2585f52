//! Stage bodies. Each returns its artifacts in memory; the pipeline writes
//! them out and caches them.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use warpcone::fibred::{
    build_charts, build_rlocal_action, build_section, check_cnd, cnd_kernel, verify_requirement_1,
    verify_requirement_2, Cocycle, ExcludedChart, RLocalReport, Requirement1Report, Requirement2Report,
};
use warpcone::scalar::Scalar;
use warpcone::space::{build_profinite_model, build_su2_model, default_generators, SpaceModel};
use warpcone::spectra::{
    distortion_report, gap_trend, spectral_gap, AveragingOperator, MetricMatrix, OptimizerConfig, SpectralGap,
};
use warpcone::warp::{check_axioms, free_orbit_scan, FreeOrbitLevel};
use warpcone::Error;

use crate::config::{ExperimentConfig, Format, Instance, Value};
use crate::error::CliError;
use crate::instance::{run_seed, tower, ConfigScalar, Levels};

/// Float models are compared up to this plus their snapping defect.
const FLOAT_SLACK: f64 = 1e-6;

/// CND forms are nonpositive up to this.
const CND_TOL: f64 = 1e-9;

/// Largest deviation from the cycle closed form accepted in gap series.
const CLOSED_FORM_TOL: f64 = 1e-8;

#[derive(Debug, Default)]
pub struct StageOutput {
    /// Paths relative to the output directory, with contents.
    pub files: Vec<(String, Vec<u8>)>,
    pub violations: Vec<String>,
}

impl StageOutput {
    fn json(&mut self, path: String, value: &impl Serialize) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        bytes.push(b'\n');
        self.files.push((path, bytes));
        Ok(())
    }

    fn text(&mut self, path: String, text: String) {
        self.files.push((path, text.into_bytes()));
    }
}

fn tolerance<S: Scalar>(model: &SpaceModel<S>) -> f64 {
    if S::EXACT {
        0.0
    } else {
        FLOAT_SLACK + model.max_snapping()
    }
}

/// Level and radius label used in file names.
fn tag(level: &str, r: &Value) -> String {
    format!("{level}_R{}", r.label())
}

pub fn towers<S: ConfigScalar>(config: &ExperimentConfig, levels: &Levels<S>) -> Result<StageOutput, CliError> {
    let tower = match &config.instance {
        Instance::Profinite {
            rank,
            depth,
            moduli,
            scales,
        } => Some(tower(*rank, *depth, moduli.as_deref(), scales.as_deref())?),
        _ => None,
    };
    let ts: Vec<S> = levels.models.iter().map(SpaceModel::level).collect();
    let build = |t: S| {
        let i = ts
            .iter()
            .position(|&u| u == t)
            .expect("scan runs over configured levels");
        Ok(levels.models[i].clone())
    };

    #[derive(Serialize)]
    struct Scan {
        #[serde(rename = "R")]
        radius: String,
        /// Word radius checked: all `|γ| < R`.
        ball: usize,
        levels: Vec<FreeOrbitLevel>,
        /// First configured level from which every later level satisfies the free-orbit law.
        threshold: Option<String>,
    }
    let mut scans = Vec::new();
    for r in &config.radii {
        let ball = (r.to_f64()?.ceil() as usize).saturating_sub(1);
        let rows = free_orbit_scan(build, &ts, ball)?;
        let first_stable = rows.iter().rposition(|l| !l.holds).map_or(0, |i| i + 1);
        scans.push(Scan {
            radius: r.label(),
            ball,
            threshold: rows.get(first_stable).map(|l| l.level.clone()),
            levels: rows,
        });
    }
    let mut out = StageOutput::default();
    out.json(
        "towers/tower.json".into(),
        &json!({ "instance": config.instance, "tower": tower, "scans": scans }),
    )?;
    Ok(out)
}

pub fn warp<S: ConfigScalar>(config: &ExperimentConfig, levels: &mut Levels<S>) -> Result<StageOutput, CliError> {
    levels.ensure_warped()?;
    let levels = &*levels;
    let warped = levels.warped();
    let reports: Vec<_> = levels
        .models
        .par_iter()
        .zip(warped)
        .map(|(m, w)| check_axioms(m, w))
        .collect();
    let mut out = StageOutput::default();
    for ((label, w), axioms) in levels.labels.iter().zip(warped).zip(reports) {
        if !axioms.passed() {
            out.violations
                .push(format!("warped metric axioms fail at level {label}"));
        }
        let summary = w.summary(axioms.violations.clone());
        match config.format {
            Format::Csv => {
                out.text(format!("warp/{label}.csv"), w.to_csv());
                out.json(
                    format!("warp/{label}.json"),
                    &json!({ "summary": summary, "axioms": axioms }),
                )?;
            }
            Format::Json => {
                let rows: Vec<Vec<String>> = (0..w.n)
                    .map(|i| w.row(i).iter().map(|v| v.render()).collect())
                    .collect();
                out.json(
                    format!("warp/{label}.json"),
                    &json!({ "summary": summary, "axioms": axioms, "matrix": rows }),
                )?;
            }
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct EmbedReport {
    level: String,
    #[serde(rename = "R")]
    radius: String,
    /// `pass`, `fail`, or `rejected` when the level is below the threshold for `R`.
    status: &'static str,
    reason: Option<String>,
    tolerance: f64,
    charts: usize,
    excluded: Vec<ExcludedChart>,
    ambiguous: usize,
    requirement_1: Option<Requirement1Report>,
    requirement_2: Option<Requirement2Report>,
}

pub fn embed_check<S: ConfigScalar>(
    config: &ExperimentConfig,
    levels: &mut Levels<S>,
) -> Result<StageOutput, CliError> {
    levels.ensure_warped()?;
    let levels = &*levels;
    let warped = levels.warped();
    let tasks: Vec<(usize, &Value)> = (0..levels.models.len())
        .flat_map(|i| config.radii.iter().map(move |r| (i, r)))
        .collect();
    let reports = tasks
        .par_iter()
        .map(|&(i, r)| {
            let model = &levels.models[i];
            let cocycle = Cocycle::for_group(model.group())?;
            let section = build_section(model, &cocycle)?;
            let tol = tolerance(model);
            let mut report = EmbedReport {
                level: levels.labels[i].clone(),
                radius: r.label(),
                status: "rejected",
                reason: None,
                tolerance: tol,
                charts: 0,
                excluded: Vec::new(),
                ambiguous: 0,
                requirement_1: None,
                requirement_2: None,
            };
            match build_charts(model, &warped[i], &section.labels, S::from_value(r)?) {
                Err(Error::LevelBelowThreshold(why)) => report.reason = Some(why),
                Err(e) => return Err(e.into()),
                Ok(atlas) => {
                    let r1 = verify_requirement_1(model, &cocycle, &section, &atlas, &warped[i], config.p);
                    let r2 = verify_requirement_2(model, &section.labels, &atlas);
                    let tol = if S::EXACT { 0.0 } else { FLOAT_SLACK + r1.snapping };
                    let exact_ok = !S::EXACT || r1.decomposition_exact;
                    report.status = if r1.holds(tol) && exact_ok && r2.holds() {
                        "pass"
                    } else {
                        "fail"
                    };
                    report.tolerance = tol;
                    report.charts = atlas.charts.len();
                    report.excluded = atlas.excluded;
                    report.ambiguous = atlas.ambiguous;
                    report.requirement_1 = Some(r1);
                    report.requirement_2 = Some(r2);
                }
            }
            Ok(report)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut out = StageOutput::default();
    let mut summary = Vec::new();
    for report in &reports {
        if report.status == "fail" {
            out.violations.push(format!(
                "fibred embedding requirements fail at level {} R={}",
                report.level, report.radius
            ));
        }
        summary.push(json!({ "level": report.level, "R": report.radius, "status": report.status }));
    }
    for (report, &(_, r)) in reports.iter().zip(&tasks) {
        out.json(format!("embed-check/{}.json", tag(&report.level, r)), report)?;
    }
    out.json("embed-check/summary.json".into(), &summary)?;
    Ok(out)
}

#[derive(Serialize)]
struct RLocalEntry {
    level: String,
    #[serde(rename = "R")]
    radius: String,
    status: &'static str,
    reason: Option<String>,
    tolerance: f64,
    report: Option<RLocalReport>,
}

pub fn rlocal<S: ConfigScalar>(config: &ExperimentConfig, levels: &mut Levels<S>) -> Result<StageOutput, CliError> {
    levels.ensure_warped()?;
    let levels = &*levels;
    let warped = levels.warped();
    let seed = run_seed(config);
    let tasks: Vec<(usize, &Value)> = (0..levels.models.len())
        .flat_map(|i| config.radii.iter().map(move |r| (i, r)))
        .collect();
    let entries = tasks
        .par_iter()
        .map(|&(i, r)| {
            let model = &levels.models[i];
            let cocycle = Cocycle::for_group(model.group())?;
            let section = build_section(model, &cocycle)?;
            let tol = tolerance(model);
            let mut entry = RLocalEntry {
                level: levels.labels[i].clone(),
                radius: r.label(),
                status: "rejected",
                reason: None,
                tolerance: tol,
                report: None,
            };
            match build_rlocal_action(model, &section, &warped[i], S::from_value(r)?, config.p) {
                Err(Error::LevelBelowThreshold(why)) => entry.reason = Some(why),
                Err(e) => return Err(e.into()),
                Ok(action) => {
                    let report = action.verify(seed)?;
                    entry.status = if report.holds(tol) { "pass" } else { "fail" };
                    entry.report = Some(report);
                }
            }
            Ok(entry)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut out = StageOutput::default();
    for (entry, &(_, r)) in entries.iter().zip(&tasks) {
        if entry.status == "fail" {
            out.violations.push(format!(
                "R-local action claims fail at level {} R={}",
                entry.level, entry.radius
            ));
        }
        out.json(format!("rlocal/{}.json", tag(&entry.level, r)), entry)?;
    }
    Ok(out)
}

pub fn cnd<S: ConfigScalar>(config: &ExperimentConfig, levels: &mut Levels<S>) -> Result<StageOutput, CliError> {
    levels.ensure_warped()?;
    let levels = &*levels;
    let warped = levels.warped();
    let settings = &config.cnd;
    let seed = run_seed(config);
    let results = (0..levels.models.len())
        .into_par_iter()
        .map(|i| {
            let model = &levels.models[i];
            let cocycle = Cocycle::for_group(model.group())?;
            let section = build_section(model, &cocycle)?;
            let table = cnd_kernel(model, &cocycle, &section, &warped[i], settings.radius)?;
            let report = check_cnd(&table, model, settings.tuple_radius, settings.weightings, seed)?;
            Ok((table, report))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut out = StageOutput::default();
    for (label, (table, report)) in levels.labels.iter().zip(results) {
        if !report.holds(CND_TOL) {
            out.violations.push(format!(
                "kernel is not conditionally negative definite at level {label}"
            ));
        }
        match config.format {
            Format::Csv => out.text(format!("cnd/{label}.csv"), table.to_csv()),
            Format::Json => {
                let rows: Vec<_> = table
                    .rows()
                    .map(|(element, length, value)| json!({ "element": element, "length": length, "value": value }))
                    .collect();
                out.json(format!("cnd/{label}.json"), &rows)?;
            }
        }
        out.json(format!("cnd/{label}_report.json"), &report)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct GapRow {
    label: String,
    seed: Option<u64>,
    #[serde(flatten)]
    gap: SpectralGap,
    /// `1 − cos(2π/m)` for cyclic quotients.
    closed_form: Option<f64>,
}

pub fn gap<S: ConfigScalar>(config: &ExperimentConfig, levels: &Levels<S>) -> Result<StageOutput, CliError> {
    let rows: Vec<GapRow> = match &config.instance {
        Instance::Profinite {
            rank,
            depth,
            moduli,
            scales,
        } => {
            let depths = if config.gap.depths.is_empty() {
                vec![*depth]
            } else {
                config.gap.depths.clone()
            };
            let deepest = depths.iter().copied().max().unwrap_or(*depth).max(*depth);
            // scales only matter for the metric, not for the averaging operator
            let tower = match (moduli, scales) {
                (None, _) => tower(*rank, deepest, None, None)?,
                (Some(m), s) => tower(*rank, *depth, Some(m), s.as_deref())?,
            };
            depths
                .par_iter()
                .map(|&d| {
                    if d == 0 || d > tower.depth() {
                        return Err(CliError::Config(format!("gap depth {d} outside 1..={}", tower.depth())));
                    }
                    let model = build_profinite_model(&tower, d, 1.into(), config.caps.points)?;
                    let m = tower.moduli()[d - 1];
                    let label = if *rank == 1 {
                        format!("Z/{m}")
                    } else {
                        format!("(Z/{m})^{rank}")
                    };
                    Ok(GapRow {
                        label,
                        seed: None,
                        gap: spectral_gap(&AveragingOperator::from_model(&model))?,
                        closed_form: (*rank == 1).then(|| 1.0 - (2.0 * PI / m as f64).cos()),
                    })
                })
                .collect::<Result<_, CliError>>()?
        }
        Instance::Su2 { n, generators } => {
            let gens = generators.clone().unwrap_or_else(default_generators);
            let sizes = if config.gap.sizes.is_empty() {
                vec![*n]
            } else {
                config.gap.sizes.clone()
            };
            let tasks: Vec<(usize, u64)> = sizes
                .iter()
                .flat_map(|&s| config.seeds.iter().map(move |&seed| (s, seed)))
                .collect();
            tasks
                .par_iter()
                .map(|&(size, seed)| {
                    if size > config.caps.points {
                        return Err(CliError::Config(format!("SU(2) size {size} exceeds the point cap")));
                    }
                    let model = build_su2_model(&gens, 1.0, size, seed)?;
                    Ok(GapRow {
                        label: format!("n={size}"),
                        seed: Some(seed),
                        gap: spectral_gap(&AveragingOperator::from_model(&model))?,
                        closed_form: None,
                    })
                })
                .collect::<Result<_, CliError>>()?
        }
        Instance::Circle { .. } => levels
            .models
            .par_iter()
            .zip(&levels.labels)
            .map(|(model, label)| {
                Ok(GapRow {
                    label: format!("t={label}"),
                    seed: None,
                    gap: spectral_gap(&AveragingOperator::from_model(model))?,
                    closed_form: None,
                })
            })
            .collect::<Result<_, CliError>>()?,
    };

    let mut out = StageOutput::default();
    for row in &rows {
        if let Some(c) = row.closed_form {
            let dev = (row.gap.gap - c).abs();
            if dev > CLOSED_FORM_TOL {
                out.violations.push(format!(
                    "gap of {} is {} but the cycle closed form is {c} (deviation {dev:e})",
                    row.label, row.gap.gap
                ));
            }
        }
    }
    match config.format {
        Format::Csv => {
            let mut csv =
                String::from("label,seed,n,second_eigenvalue,gap,lazy_gap,iterations,residual,snapping,closed_form\n");
            for r in &rows {
                let g = &r.gap;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{:e},{},{}",
                    r.label,
                    r.seed.map_or(String::new(), |s| s.to_string()),
                    g.n,
                    g.second_eigenvalue,
                    g.gap,
                    g.lazy_gap,
                    g.iterations,
                    g.residual,
                    g.snapping,
                    r.closed_form.map_or(String::new(), |c| c.to_string())
                );
            }
            out.text("gap/series.csv".into(), csv);
        }
        Format::Json => out.json("gap/series.json".into(), &rows)?,
    }
    // one trend per seed; unseeded families form a single trend
    let mut trends = Vec::new();
    let mut seeds: Vec<Option<u64>> = rows.iter().map(|r| r.seed).collect();
    seeds.dedup();
    seeds.sort();
    seeds.dedup();
    for seed in seeds {
        let chosen: Vec<&GapRow> = rows.iter().filter(|r| r.seed == seed).collect();
        let labels: Vec<String> = chosen.iter().map(|r| r.label.clone()).collect();
        let gaps: Vec<f64> = chosen.iter().map(|r| r.gap.gap).collect();
        let trend = match gap_trend(&labels, &gaps) {
            Ok(t) => json!({ "seed": seed, "trend": t }),
            Err(Error::Validation(why)) => json!({ "seed": seed, "trend": null, "reason": why }),
            Err(e) => return Err(e.into()),
        };
        trends.push(trend);
    }
    out.json("gap/trend.json".into(), &trends)?;
    Ok(out)
}

pub fn distort<S: ConfigScalar>(config: &ExperimentConfig, levels: &mut Levels<S>) -> Result<StageOutput, CliError> {
    let settings = &config.distort;
    let optimizer = OptimizerConfig {
        dim: settings.dim,
        p: config.p,
        starts: settings.starts,
        seed: run_seed(config),
        iterations: settings.iterations,
        ..Default::default()
    };
    levels.ensure_warped()?;
    let levels = &*levels;
    let warped = levels.warped();
    let mut out = StageOutput::default();
    let mut skipped = Vec::new();
    for ((label, model), w) in levels.labels.iter().zip(&levels.models).zip(warped) {
        if model.len() > settings.max_points {
            skipped.push(json!({ "level": label, "points": model.len(), "max_points": settings.max_points }));
            continue;
        }
        let report = distortion_report(
            &format!("level {label}"),
            &MetricMatrix::from_warped(w),
            &AveragingOperator::from_model(model),
            &optimizer,
        )?;
        if !report.certified {
            out.violations.push(format!(
                "distortion lower bound exceeds the upper bound at level {label}"
            ));
        }
        out.json(format!("distort/{label}.json"), &report)?;
    }
    if !skipped.is_empty() {
        out.json("distort/skipped.json".into(), &skipped)?;
    }
    Ok(out)
}
