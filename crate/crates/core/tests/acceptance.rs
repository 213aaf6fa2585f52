//! Acceptance suite: one line per criterion, nonzero exit on any failure
//! that is not a documented, measured limitation.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use warpcone::fibred::{
    build_charts, build_rlocal_action, build_section, check_cnd, cnd_kernel, verify_requirement_1,
    verify_requirement_2, Cocycle,
};
use warpcone::group::{Group, QuotientTower, DEFAULT_BALL_CAP};
use warpcone::scalar::{Rational, Scalar};
use warpcone::space::{
    build_circle_model, build_profinite_model, build_su2_model, default_generators, golden_alpha, SpaceModel,
};
use warpcone::spectra::{distortion_report, gap_trend, spectral_gap, AveragingOperator, MetricMatrix, OptimizerConfig};
use warpcone::warp::{
    check_axioms, greatest_metric_check, level_shift_check, random_admissible, warped_chain, warped_closed_form,
    WarpedDistanceMatrix,
};
use warpcone::Result;

const SU2_SEED: u64 = 1;

struct Outcome {
    pass: bool,
    detail: String,
    /// Set when a failing part is a measured limitation of the instance.
    limitation: Option<String>,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
            limitation: None,
        }
    }
}

fn rat(n: i128) -> Rational {
    Rational::from_integer(n)
}

fn zmod(depth: usize, t: Rational) -> Result<SpaceModel<Rational>> {
    let tower = QuotientTower::dyadic(1, depth)?;
    build_profinite_model(&tower, depth, t, 1 << 12)
}

fn su2(n: usize, t: f64) -> Result<SpaceModel<f64>> {
    build_su2_model(&default_generators(), t, n, SU2_SEED)
}

fn within(limit: Duration, elapsed: Duration) -> (bool, String) {
    (
        elapsed <= limit,
        format!("{:.2}s of {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64()),
    )
}

fn engine_equivalence() -> Result<Outcome> {
    let start = Instant::now();
    let mut compared = 0;
    for depth in 1..=6 {
        for t in [2, 4, 8, 16] {
            let model = zmod(depth, rat(t))?;
            let chain = warped_chain(&model)?;
            let closed = warped_closed_form(&model)?;
            if chain.values != closed.values {
                let dev = chain.max_deviation(&closed)?;
                return Ok(Outcome::new(
                    false,
                    format!("ℤ/{} at t = {t}: deviation {dev}", 1 << depth),
                ));
            }
            compared += 1;
        }
    }
    let (fast, time) = within(Duration::from_secs(10), start.elapsed());
    Ok(Outcome::new(
        fast,
        format!("{compared} level sets equal exactly; {time}"),
    ))
}

/// Minimum over chains `x → q₁ ↦ γ₁q₁ → … → x'` with at most `hops` group
/// moves, `|γ| ≤ 4`, metric steps of cost `d` and moves of cost `|γ|`.
fn chain_oracle(model: &SpaceModel<Rational>, x: usize, target: usize, hops: usize) -> Rational {
    let ball = model.group().closed_ball(4, 100).expect("small ball");
    let n = model.len();
    fn walk(
        model: &SpaceModel<Rational>,
        ball: &[warpcone::group::GroupElement],
        p: usize,
        target: usize,
        left: usize,
        n: usize,
    ) -> Rational {
        let mut best = model.distance(p, target);
        if left == 0 {
            return best;
        }
        for q in 0..n {
            for g in ball {
                let cost = model.distance(p, q) + Rational::from_integer(g.len() as i128);
                if cost >= best {
                    continue;
                }
                let rest = walk(model, ball, model.act_element(g, q), target, left - 1, n);
                best = best.min(cost + rest);
            }
        }
        best
    }
    walk(model, &ball, x, target, hops, n)
}

fn chain_oracle_equivalence() -> Result<Outcome> {
    let start = Instant::now();
    let mut checked = 0;
    for t in [1, 2, 4, 8, 16] {
        let model = zmod(3, rat(t))?;
        let chain = warped_chain(&model)?;
        for x in 0..model.len() {
            for y in 0..model.len() {
                let oracle = chain_oracle(&model, x, y, 3);
                if oracle != chain.get(x, y) {
                    return Ok(Outcome::new(
                        false,
                        format!("t = {t}, ({x}, {y}): chain {} vs oracle {oracle}", chain.get(x, y)),
                    ));
                }
                checked += 1;
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(5), start.elapsed());
    Ok(Outcome::new(
        fast,
        format!("{checked} pairs on ℤ/8 equal exactly; {time}"),
    ))
}

fn axioms_and_dominance<S: Scalar>(
    name: &str,
    model: &SpaceModel<S>,
    warped: &WarpedDistanceMatrix<S>,
) -> std::result::Result<(), String> {
    let report = check_axioms(model, warped);
    if !report.passed() {
        return Err(format!("{name}: axioms fail, first {:?}", report.violations.first()));
    }
    for seed in 0..20 {
        let candidate = random_admissible(model, warped, seed);
        let outcome = greatest_metric_check(model, warped, &candidate);
        if !outcome.holds() {
            return Err(format!("{name}: candidate {seed} gives {outcome:?}"));
        }
    }
    Ok(())
}

fn metric_axioms() -> Result<Outcome> {
    let mut names = Vec::new();
    let mut check = |name: String, r: std::result::Result<(), String>| -> Option<Outcome> {
        match r {
            Ok(()) => {
                names.push(name);
                None
            }
            Err(e) => Some(Outcome::new(false, e)),
        }
    };
    for t in [2, 4, 8, 16, 576] {
        let model = zmod(5, rat(t))?;
        let warped = warped_closed_form(&model)?;
        if let Some(o) = check(format!("ℤ/32 t={t}"), axioms_and_dominance("ℤ/32", &model, &warped)) {
            return Ok(o);
        }
    }
    for t in [5.0, 10.0, 20.0] {
        let model = build_circle_model(golden_alpha(), t, 0.5, 10_000)?;
        let warped = warped_chain(&model)?;
        if let Some(o) = check(format!("circle t={t}"), axioms_and_dominance("circle", &model, &warped)) {
            return Ok(o);
        }
    }
    for t in [4.0, 8.0, 16.0] {
        let model = su2(400, t)?;
        let warped = warped_chain(&model)?;
        if let Some(o) = check(
            format!("SU(2) n=400 t={t}"),
            axioms_and_dominance("SU(2)", &model, &warped),
        ) {
            return Ok(o);
        }
    }
    Ok(Outcome::new(
        true,
        format!("{} instances, 20 admissible candidates each dominated", names.len()),
    ))
}

fn level_shift() -> Result<Outcome> {
    let mut lines = Vec::new();
    for (t, s) in [(2, rat(1)), (4, rat(3)), (8, Rational::new(1, 2)), (16, rat(4))] {
        let report = level_shift_check(&zmod(5, rat(t))?, s)?;
        if !report.holds() {
            return Ok(Outcome::new(
                false,
                format!("ℤ/32 t={t} s={s}: deviation {}", report.max_deviation),
            ));
        }
    }
    lines.push("ℤ/32 exact at 4 (t, s)".to_string());
    for (t, s) in [(10.0, 2.0), (20.0, 5.0)] {
        let report = level_shift_check(&build_circle_model(golden_alpha(), t, 0.5, 10_000)?, s)?;
        if !report.holds() {
            return Ok(Outcome::new(
                false,
                format!(
                    "circle t={t} s={s}: deviation {} > bound {}",
                    report.max_deviation, report.bound
                ),
            ));
        }
        lines.push(format!(
            "circle t={t} s={s}: {:.2e} ≤ {:.2e}",
            report.max_deviation, report.bound
        ));
    }
    Ok(Outcome::new(true, lines.join("; ")))
}

fn cocycle_laws() -> Result<Outcome> {
    let start = Instant::now();
    for group in [Group::free(2)?, Group::integers()] {
        let cocycle = Cocycle::for_group(&group)?;
        let small = group.closed_ball(4, DEFAULT_BALL_CAP)?;
        for g in &small {
            let bg = cocycle.value(g);
            for h in &small {
                let lhs = cocycle.value(&group.mul(g, h));
                let rhs = cocycle.act(g, &cocycle.value(h)).plus(&bg);
                if lhs != rhs {
                    return Ok(Outcome::new(
                        false,
                        format!(
                            "{}: identity fails at ({}, {})",
                            group.name(),
                            group.format(g),
                            group.format(h)
                        ),
                    ));
                }
            }
        }
        for g in group.closed_ball(10, DEFAULT_BALL_CAP)? {
            if cocycle.value(&g).norm_sq() != g.len() as i64 {
                return Ok(Outcome::new(
                    false,
                    format!("{}: ‖b‖² ≠ |γ| at {}", group.name(), group.format(&g)),
                ));
            }
        }
    }
    let (fast, time) = within(Duration::from_secs(5), start.elapsed());
    Ok(Outcome::new(fast, format!("tree and shift cocycles exact; {time}")))
}

fn fibred_construction() -> Result<Outcome> {
    let mut detail = Vec::new();
    let mut profinite_ok = true;
    let tower_levels = [2, 576, 1024];
    for t in tower_levels {
        let model = zmod(5, rat(t))?;
        let warped = warped_closed_form(&model)?;
        let cocycle = Cocycle::for_group(model.group())?;
        let section = build_section(&model, &cocycle)?;
        match build_charts(&model, &warped, &section.labels, rat(3)) {
            Err(e) => detail.push(format!("ℤ/32 t={t} rejected ({e})")),
            Ok(atlas) => {
                let r1 = verify_requirement_1(&model, &cocycle, &section, &atlas, &warped, 2.0);
                let r2 = verify_requirement_2(&model, &section.labels, &atlas);
                let ok = r1.identity_deviation == 0.0 && r1.decomposition_exact && r2.holds();
                profinite_ok &= ok;
                detail.push(format!(
                    "ℤ/32 t={t}: {} charts ({} at the label seam excluded), identity dev {}, decomposition exact {}, \
                     {}/{} transitions agree",
                    atlas.charts.len(),
                    atlas.excluded.len(),
                    r1.identity_deviation,
                    r1.decomposition_exact,
                    r2.agreeing_pairs,
                    r2.overlapping_pairs
                ));
            }
        }
    }
    // the lowest level must be rejected and at least one level validated
    profinite_ok &= detail[0].contains("rejected") && detail.len() == tower_levels.len();

    let mut su2_ok = false;
    let mut rejections = Vec::new();
    for t in [4.0, 8.0, 16.0, 32.0, 64.0] {
        let model = su2(400, t)?;
        let warped = warped_chain(&model)?;
        let cocycle = Cocycle::for_group(model.group())?;
        let section = build_section(&model, &cocycle)?;
        match build_charts(&model, &warped, &section.labels, 1.0) {
            Err(e) => rejections.push(format!("t={t}: {e}")),
            Ok(atlas) => {
                let r1 = verify_requirement_1(&model, &cocycle, &section, &atlas, &warped, 2.0);
                let r2 = verify_requirement_2(&model, &section.labels, &atlas);
                let tol = 1e-6 + r1.snapping;
                su2_ok = r1.identity_deviation <= tol && r1.decomposition_deviation <= tol && r2.holds();
                detail.push(format!(
                    "SU(2) n=400 t={t}: identity dev {:.2e}, decomposition dev {:.2e}, snapping {:.2e}",
                    r1.identity_deviation, r1.decomposition_deviation, r1.snapping
                ));
                break;
            }
        }
    }
    let mut outcome = Outcome::new(profinite_ok && su2_ok, detail.join("; "));
    if profinite_ok && !su2_ok {
        outcome.limitation = Some(format!(
            "SU(2) n=400 (seed {SU2_SEED}), R=1: every level rejected because snapped orbits collide within |γ| ≤ 3 \
             [{}]",
            rejections.first().cloned().unwrap_or_default()
        ));
    }
    Ok(outcome)
}

fn rlocal_construction() -> Result<Outcome> {
    let start = Instant::now();
    let model = zmod(5, rat(576))?;
    let warped = warped_closed_form(&model)?;
    let cocycle = Cocycle::for_group(model.group())?;
    let section = build_section(&model, &cocycle)?;
    let action = build_rlocal_action(&model, &section, &warped, rat(3), 2.0)?;
    let report = action.verify(11)?;
    let (fast, time) = within(Duration::from_secs(60), start.elapsed());
    Ok(Outcome::new(
        report.holds(0.0) && fast,
        format!(
            "ℤ/32 t=576 R=3: {} cells; claim 1 {}/{} exact, claim 2 {} checks exact, u-cocycle {} triples, \
             (**) {}/{} bounds; {time}",
            report.cells,
            report.claim1.checked - report.claim1.exact_failures,
            report.claim1.checked,
            report.claim2.checked,
            report.transition_cocycle.checked,
            report.bounds.iter().filter(|b| b.holds).count(),
            report.bounds.len()
        ),
    ))
}

fn cnd_on<S: Scalar>(name: &str, model: &SpaceModel<S>, warped: &WarpedDistanceMatrix<S>) -> Result<(bool, String)> {
    let cocycle = Cocycle::for_group(model.group())?;
    let section = build_section(model, &cocycle)?;
    let table = cnd_kernel(model, &cocycle, &section, warped, 4)?;
    let report = check_cnd(&table, model, 2, 100, 5)?;
    Ok((
        report.h_identity == 0.0 && report.holds(1e-9),
        format!(
            "{name}: h(e) = {}, max form {:.2e}, max projected eigenvalue {:.2e}",
            report.h_identity, report.max_quadratic_form, report.max_projected_eigenvalue
        ),
    ))
}

fn cnd() -> Result<Outcome> {
    let zm = zmod(5, rat(576))?;
    let a = cnd_on("ℤ/32 t=576", &zm, &warped_closed_form(&zm)?)?;
    let sm = su2(400, 4.0)?;
    let b = cnd_on("SU(2) n=400 t=4", &sm, &warped_chain(&sm)?)?;
    Ok(Outcome::new(a.0 && b.0, format!("{}; {}", a.1, b.1)))
}

fn spectral() -> Result<Outcome> {
    let mut gaps = Vec::new();
    let mut worst: f64 = 0.0;
    for n in 3..=7 {
        let model = zmod(n, rat(1))?;
        let gap = spectral_gap(&AveragingOperator::from_model(&model))?;
        let expected = 1.0 - (2.0 * PI / (1u64 << n) as f64).cos();
        worst = worst.max((gap.gap - expected).abs());
        gaps.push(gap.gap);
    }
    let labels: Vec<String> = (3..=7).map(|n| format!("ℤ/{}", 1 << n)).collect();
    let trend = gap_trend(&labels, &gaps)?;
    let mut series = Vec::new();
    for n in [200, 400, 800] {
        let gap = spectral_gap(&AveragingOperator::from_model(&su2(n, 1.0)?))?;
        series.push(format!("n={n} seed={SU2_SEED} gap={:.6}", gap.gap));
    }
    Ok(Outcome::new(
        worst <= 1e-8 && trend.decreasing,
        format!(
            "ℤ/2ⁿ max deviation {worst:.1e}, decreasing {}; SU(2): {}",
            trend.decreasing,
            series.join(", ")
        ),
    ))
}

/// Least distortion of C₄ over planar configurations `p₀ = (0,0)`,
/// `p₁ = (1,0)`, `p₂`, `p₃` on a grid, refined around the best cell.
fn c4_oracle() -> f64 {
    let d = |i: usize, j: usize| {
        let k = i.abs_diff(j);
        k.min(4 - k) as f64
    };
    let distortion = |p: &[(f64, f64); 4]| {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..4 {
            for j in i + 1..4 {
                let r = ((p[i].0 - p[j].0).powi(2) + (p[i].1 - p[j].1).powi(2)).sqrt() / d(i, j);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    };
    let mut best = (f64::INFINITY, [(0.0, 0.0); 4]);
    let (mut centre, mut span, steps) = ([(0.0, 0.0); 2], 2.0, 40);
    for _ in 0..6 {
        let grid = |c: f64, k: usize| c - span + 2.0 * span * k as f64 / steps as f64;
        for a in 0..=steps {
            for b in 0..=steps {
                for c in 0..=steps {
                    for e in 0..=steps {
                        let p = [
                            (0.0, 0.0),
                            (1.0, 0.0),
                            (grid(centre[0].0, a), grid(centre[0].1, b)),
                            (grid(centre[1].0, c), grid(centre[1].1, e)),
                        ];
                        let v = distortion(&p);
                        if v < best.0 {
                            best = (v, p);
                        }
                    }
                }
            }
        }
        centre = [best.1[2], best.1[3]];
        span *= 0.15;
    }
    best.0
}

fn distortion() -> Result<Outcome> {
    let c4 = MetricMatrix::from_fn(4, |i, j| {
        let k = i.abs_diff(j);
        k.min(4 - k) as f64
    })?;
    let op = AveragingOperator::from_tables(4, vec![vec![1, 2, 3, 0]])?;
    let config = OptimizerConfig {
        dim: Some(2),
        ..Default::default()
    };
    let report = distortion_report("C4", &c4, &op, &config)?;
    let oracle = c4_oracle();
    let lower = report.lower.value().unwrap_or(1.0);
    let root2 = 2f64.sqrt();
    let mut ok = (report.upper - root2).abs() <= 1e-3
        && (oracle - root2).abs() <= 1e-3
        && report.upper >= oracle - 1e-3
        && lower <= root2
        && lower <= oracle
        && report.certified;
    let mut lines = vec![format!(
        "C₄: lower {lower:.4} ≤ upper {:.6} (oracle {oracle:.6})",
        report.upper
    )];

    let quick = OptimizerConfig {
        iterations: 600,
        starts: 2,
        ..Default::default()
    };
    let zm = zmod(4, rat(8))?;
    let sm = su2(120, 4.0)?;
    let instances = [
        (
            "ℤ/16 t=8",
            MetricMatrix::from_warped(&warped_closed_form(&zm)?),
            AveragingOperator::from_model(&zm),
        ),
        (
            "SU(2) n=120 t=4",
            MetricMatrix::from_warped(&warped_chain(&sm)?),
            AveragingOperator::from_model(&sm),
        ),
    ];
    for (name, metric, op) in instances {
        let r = distortion_report(name, &metric, &op, &quick)?;
        ok &= r.certified;
        lines.push(format!(
            "{name}: lower {} ≤ upper {:.3}",
            r.lower.value().map_or("n/a".into(), |v| format!("{v:.3}")),
            r.upper
        ));
    }
    Ok(Outcome::new(ok, lines.join("; ")))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("engine equivalence", engine_equivalence),
        ("chain oracle", chain_oracle_equivalence),
        ("warped metric axioms", metric_axioms),
        ("level shift", level_shift),
        ("cocycle laws", cocycle_laws),
        ("fibred construction", fibred_construction),
        ("R-local construction", rlocal_construction),
        ("CND kernel", cnd),
        ("spectral closed form", spectral),
        ("distortion certification", distortion),
    ];
    let mut unexpected = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {status} [{:.2}s] {name}: {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
        match (&outcome.limitation, outcome.pass) {
            (_, true) => {}
            (Some(why), false) => println!("             known limitation: {why}"),
            (None, false) => unexpected += 1,
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
