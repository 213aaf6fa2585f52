//! Chart trivializations of the fibred embedding and the checks of its two
//! defining requirements.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cocycle::Cocycle;
use super::embed::{apply_pair, Envelope, FibredVector, Section};
use crate::error::{Error, Result};
use crate::group::{GroupElement, DEFAULT_BALL_CAP};
use crate::scalar::Scalar;
use crate::space::SpaceModel;
use crate::warp::WarpedDistanceMatrix;

/// `x = g · z` with `z` near the chart base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub x: usize,
    pub z: usize,
    pub g: GroupElement,
}

/// A cell `{y : δ(c, y) < R/2}` around its base point `c = z_C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FibredChart {
    pub centre: usize,
    pub points: Vec<ChartPoint>,
}

impl FibredChart {
    pub fn get(&self, x: usize) -> Option<&ChartPoint> {
        self.points.iter().find(|p| p.x == x)
    }
}

/// A chart whose geometric decomposition disagrees with the orbit labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedChart {
    pub centre: usize,
    pub witness: usize,
    pub geometric: String,
    pub from_labels: String,
}

#[derive(Clone, Debug)]
pub struct ChartAtlas<S> {
    pub radius: S,
    pub level: S,
    /// `⌊3R⌋`, the word radius of the translated balls.
    pub ball_radius: usize,
    pub charts: Vec<FibredChart>,
    pub excluded: Vec<ExcludedChart>,
    /// Points with more than one admissible decomposition (first one kept).
    pub ambiguous: usize,
}

pub(crate) fn floor_u64<S: Scalar>(s: S) -> u64 {
    let k = s.ceil_u64();
    if k > 0 && S::from_int(k as i64) > s {
        k - 1
    } else {
        k
    }
}

/// Greedy cover by warped cells of radius `R/2` in index order.
pub(crate) fn greedy_centres<S: Scalar>(warped: &WarpedDistanceMatrix<S>, half: S) -> Vec<usize> {
    let mut covered = vec![false; warped.n];
    let mut centres = Vec::new();
    for c in 0..warped.n {
        if covered[c] {
            continue;
        }
        centres.push(c);
        for (y, &d) in warped.row(c).iter().enumerate() {
            if d < half {
                covered[y] = true;
            }
        }
    }
    centres
}

enum Built {
    Chart(FibredChart, usize),
    Excluded(ExcludedChart),
}

/// Charts over a greedy cover of one level. Rejects the level when two
/// translates `g · Ball(z_C, 3R)`, `|g| ≤ 3R`, share a net point.
pub fn build_charts<S: Scalar>(
    model: &SpaceModel<S>,
    warped: &WarpedDistanceMatrix<S>,
    labels: &[GroupElement],
    radius: S,
) -> Result<ChartAtlas<S>> {
    let n = model.len();
    if warped.n != n || labels.len() != n {
        return Err(Error::Contract("model, warped matrix and labels differ in size".into()));
    }
    if radius <= S::zero() {
        return Err(Error::Validation(format!(
            "chart scale {} is not positive",
            radius.render()
        )));
    }
    let group = model.group();
    let three = radius * S::from_int(3);
    let ball_radius = floor_u64(three) as usize;
    let ball = group.closed_ball(ball_radius, DEFAULT_BALL_CAP)?;
    let inverses: Vec<GroupElement> = ball.iter().map(|g| group.inverse(g)).collect();
    let centres = greedy_centres(warped, radius * S::from_ratio(1, 2));

    let built: Vec<Built> = centres
        .par_iter()
        .map(|&c| {
            let images: Vec<usize> = ball.iter().map(|g| model.act_element(g, c)).collect();
            let mut owner: Vec<Option<usize>> = vec![None; n];
            for (i, &y) in images.iter().enumerate() {
                for (w, slot) in owner.iter_mut().enumerate() {
                    if model.distance(w, y) < three {
                        if let Some(j) = *slot {
                            return Err(Error::LevelBelowThreshold(format!(
                                "at t = {}, the 3R-balls around {} and {} (base point {c}) share point {w}",
                                model.level().render(),
                                group.format(&ball[j]),
                                group.format(&ball[i]),
                            )));
                        }
                        *slot = Some(i);
                    }
                }
            }
            let mut points = Vec::new();
            let mut ambiguous = 0;
            for (x, &d) in warped.row(c).iter().enumerate() {
                if d >= radius * S::from_ratio(1, 2) {
                    continue;
                }
                let mut hits = (0..ball.len()).filter_map(|i| {
                    let z = model.act_element(&inverses[i], x);
                    (model.distance(z, c) < three).then_some((i, z))
                });
                let Some((i, z)) = hits.next() else {
                    return Err(Error::LevelBelowThreshold(format!(
                        "point {x} of the chart at {c} has no decomposition with |g| <= {ball_radius}"
                    )));
                };
                if hits.next().is_some() {
                    ambiguous += 1;
                }
                let g = ball[i].clone();
                let from_labels = group.mul(&labels[x], &group.inverse(&labels[z]));
                if from_labels != g {
                    return Ok(Built::Excluded(ExcludedChart {
                        centre: c,
                        witness: x,
                        geometric: group.format(&g),
                        from_labels: group.format(&from_labels),
                    }));
                }
                points.push(ChartPoint { x, z, g });
            }
            Ok(Built::Chart(FibredChart { centre: c, points }, ambiguous))
        })
        .collect::<Result<_>>()?;

    let mut atlas = ChartAtlas {
        radius,
        level: model.level(),
        ball_radius,
        charts: Vec::new(),
        excluded: Vec::new(),
        ambiguous: 0,
    };
    for b in built {
        match b {
            Built::Chart(chart, amb) => {
                atlas.ambiguous += amb;
                atlas.charts.push(chart);
            }
            Built::Excluded(e) => atlas.excluded.push(e),
        }
    }
    Ok(atlas)
}

/// Group elements `(A, B)` of `t_C(x) = (α_A, U_B)`:
/// `A = γ_{z_C}⁻¹ γ_z`, `B = γ_z γ_x⁻¹`.
pub fn trivialization(
    group: &crate::group::Group,
    labels: &[GroupElement],
    chart: &FibredChart,
    p: &ChartPoint,
) -> (GroupElement, GroupElement) {
    let a = group.mul(&group.inverse(&labels[chart.centre]), &labels[p.z]);
    let b = group.mul(&labels[p.z], &group.inverse(&labels[p.x]));
    (a, b)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Requirement1Report {
    pub charts: usize,
    pub pairs: usize,
    /// Largest `|‖t_C(x)s(x) − t_C(x′)s(x′)‖ − (‖b_{g⁻¹} − b_{g′⁻¹}‖^p + ‖z − z′‖^p)^{1/p}|`.
    pub identity_deviation: f64,
    pub identity_witness: Option<(usize, usize)>,
    /// Largest `|δ(x, x′) − |g g′⁻¹| − d_t(z, z′)|`.
    pub decomposition_deviation: f64,
    pub decomposition_exact: bool,
    pub decomposition_witness: Option<(usize, usize)>,
    /// Largest `‖U_B x − z‖` in ambient coordinates.
    pub snapping: f64,
    pub envelope: Envelope,
}

impl Requirement1Report {
    pub fn holds(&self, tol: f64) -> bool {
        self.identity_deviation <= tol && self.decomposition_deviation <= tol
    }
}

struct ChartCheck {
    pairs: usize,
    identity: (f64, Option<(usize, usize)>),
    decomposition: (f64, bool, Option<(usize, usize)>),
    snapping: f64,
    samples: Vec<(f64, f64)>,
}

fn h_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
}

/// Checks the trivialized section on every chart: the norm identity, the
/// decomposition law of the warped metric and the distance envelope.
pub fn verify_requirement_1<S: Scalar>(
    model: &SpaceModel<S>,
    cocycle: &Cocycle,
    section: &Section,
    atlas: &ChartAtlas<S>,
    warped: &WarpedDistanceMatrix<S>,
    p: f64,
) -> Requirement1Report {
    let group = model.group();
    let labels = &section.labels;
    let checks: Vec<ChartCheck> = atlas
        .charts
        .par_iter()
        .map(|chart| {
            let trivialized: Vec<FibredVector> = chart
                .points
                .iter()
                .map(|pt| {
                    let (a, b) = trivialization(group, labels, chart, pt);
                    apply_pair(model, cocycle, &a, &b, &section.values[pt.x])
                })
                .collect();
            let coords: Vec<Vec<f64>> = chart.points.iter().map(|pt| model.coordinates(pt.z)).collect();
            let cocycle_parts: Vec<_> = chart
                .points
                .iter()
                .map(|pt| cocycle.value(&group.inverse(&pt.g)))
                .collect();
            let snapping = trivialized
                .iter()
                .zip(&coords)
                .map(|(v, z)| h_dist(&v.h, z))
                .fold(0.0, f64::max);
            let mut check = ChartCheck {
                pairs: 0,
                identity: (0.0, None),
                decomposition: (0.0, true, None),
                snapping,
                samples: Vec::new(),
            };
            for i in 0..chart.points.len() {
                for j in i..chart.points.len() {
                    let (pi, pj) = (&chart.points[i], &chart.points[j]);
                    let lhs = trivialized[i].minus(&trivialized[j]).norm(p);
                    let rhs = (cocycle_parts[i].minus(&cocycle_parts[j]).norm_pow(p)
                        + h_dist(&coords[i], &coords[j]).powf(p))
                    .powf(1.0 / p);
                    let dev = (lhs - rhs).abs();
                    if dev > check.identity.0 {
                        check.identity = (dev, Some((pi.x, pj.x)));
                    }
                    let delta = warped.get(pi.x, pj.x);
                    let word = group.distance(&pi.g, &pj.g) as i64;
                    let law = S::from_int(word) + model.distance(pi.z, pj.z);
                    let dev = (delta - law).abs().to_f64();
                    if !delta.eq_tol(law) {
                        check.decomposition.1 = false;
                    }
                    if dev > check.decomposition.0 {
                        check.decomposition.0 = dev;
                        check.decomposition.2 = Some((pi.x, pj.x));
                    }
                    check.samples.push((delta.to_f64(), lhs));
                    check.pairs += 1;
                }
            }
            check
        })
        .collect();

    let mut report = Requirement1Report {
        charts: atlas.charts.len(),
        decomposition_exact: true,
        ..Default::default()
    };
    let mut samples = Vec::new();
    for c in checks {
        report.pairs += c.pairs;
        if c.identity.0 > report.identity_deviation || report.identity_witness.is_none() {
            if c.identity.0 > report.identity_deviation {
                report.identity_deviation = c.identity.0;
            }
            report.identity_witness = report.identity_witness.or(c.identity.1);
        }
        if c.decomposition.0 > report.decomposition_deviation {
            report.decomposition_deviation = c.decomposition.0;
            report.decomposition_witness = c.decomposition.2;
        }
        report.decomposition_exact &= c.decomposition.1;
        report.snapping = report.snapping.max(c.snapping);
        samples.extend(c.samples);
    }
    report.envelope = Envelope::from_samples(&samples);
    report
}

/// `t_{C₁}(x) ∘ t_{C₂}(x)⁻¹` as the element pair acting on the cocycle and
/// space slots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionIsometry {
    pub first: usize,
    pub second: usize,
    pub shared: usize,
    pub cocycle_slot: String,
    pub space_slot: String,
    #[serde(skip)]
    pub elements: Option<(GroupElement, GroupElement)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionViolation {
    pub first: usize,
    pub second: usize,
    pub point: usize,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Requirement2Report {
    pub overlapping_pairs: usize,
    pub agreeing_pairs: usize,
    pub transitions: Vec<TransitionIsometry>,
    pub violations: Vec<TransitionViolation>,
}

impl Requirement2Report {
    pub fn holds(&self) -> bool {
        self.violations.is_empty() && self.agreeing_pairs == self.overlapping_pairs
    }
}

/// Transition between charts `first` and `second` of the atlas, checked at
/// every shared point: the pair `(A₁A₂⁻¹, B₁B₂⁻¹)` must not depend on the
/// point, its space slot must be `g₁⁻¹g₂`, and its cocycle slot must be
/// `γ_{z_{C₁}}⁻¹ · (space slot) · γ_{z_{C₂}}`.
pub fn chart_transition<S: Scalar>(
    model: &SpaceModel<S>,
    labels: &[GroupElement],
    atlas: &ChartAtlas<S>,
    first: usize,
    second: usize,
) -> std::result::Result<TransitionIsometry, Vec<TransitionViolation>> {
    let group = model.group();
    let (c1, c2) = (&atlas.charts[first], &atlas.charts[second]);
    let violation = |point: usize, detail: String| TransitionViolation {
        first,
        second,
        point,
        detail,
    };
    let mut common: Option<(GroupElement, GroupElement)> = None;
    let mut shared = 0;
    let mut violations = Vec::new();
    for p1 in &c1.points {
        let Some(p2) = c2.get(p1.x) else { continue };
        shared += 1;
        let (a1, b1) = trivialization(group, labels, c1, p1);
        let (a2, b2) = trivialization(group, labels, c2, p2);
        let t = (group.mul(&a1, &group.inverse(&a2)), group.mul(&b1, &group.inverse(&b2)));
        let expected_space = group.mul(&group.inverse(&p1.g), &p2.g);
        if t.1 != expected_space {
            violations.push(violation(
                p1.x,
                format!(
                    "space slot {} differs from g1^-1 g2 = {}",
                    group.format(&t.1),
                    group.format(&expected_space)
                ),
            ));
        }
        let expected_cocycle = group.mul(&group.mul(&group.inverse(&labels[c1.centre]), &t.1), &labels[c2.centre]);
        if t.0 != expected_cocycle {
            violations.push(violation(
                p1.x,
                format!(
                    "cocycle slot {} differs from {}",
                    group.format(&t.0),
                    group.format(&expected_cocycle)
                ),
            ));
        }
        match &common {
            None => common = Some(t),
            Some(c) if *c != t => violations.push(violation(
                p1.x,
                format!(
                    "transition ({}, {}) differs from ({}, {}) found earlier",
                    group.format(&t.0),
                    group.format(&t.1),
                    group.format(&c.0),
                    group.format(&c.1)
                ),
            )),
            Some(_) => {}
        }
    }
    match common {
        Some((a, b)) if violations.is_empty() => Ok(TransitionIsometry {
            first,
            second,
            shared,
            cocycle_slot: group.format(&a),
            space_slot: group.format(&b),
            elements: Some((a, b)),
        }),
        None => Err(vec![violation(usize::MAX, "charts do not intersect".into())]),
        Some(_) => Err(violations),
    }
}

/// Transitions of every pair of intersecting charts.
pub fn verify_requirement_2<S: Scalar>(
    model: &SpaceModel<S>,
    labels: &[GroupElement],
    atlas: &ChartAtlas<S>,
) -> Requirement2Report {
    let mut membership: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, chart) in atlas.charts.iter().enumerate() {
        for p in &chart.points {
            membership.entry(p.x).or_default().push(i);
        }
    }
    let mut pairs = BTreeSet::new();
    for list in membership.values() {
        for (k, &i) in list.iter().enumerate() {
            for &j in &list[k + 1..] {
                pairs.insert((i, j));
            }
        }
    }
    let results: Vec<_> = pairs
        .par_iter()
        .map(|&(i, j)| chart_transition(model, labels, atlas, i, j))
        .collect();
    let mut report = Requirement2Report {
        overlapping_pairs: pairs.len(),
        ..Default::default()
    };
    for r in results {
        match r {
            Ok(t) => {
                report.agreeing_pairs += 1;
                report.transitions.push(t);
            }
            Err(v) => report.violations.extend(v),
        }
    }
    report
}
