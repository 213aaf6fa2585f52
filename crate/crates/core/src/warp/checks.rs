use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cmp_scalar, warped_chain, Engine, WarpedDistanceMatrix};
use crate::error::Result;
use crate::group::DEFAULT_BALL_CAP;
use crate::scalar::Scalar;
use crate::space::SpaceModel;

/// Full triangle check up to this many nodes; beyond it a fixed stride of
/// sources is used.
const TRIANGLE_FULL_LIMIT: usize = 600;
const TRIANGLE_SAMPLED_SOURCES: usize = 64;
const MAX_REPORTED: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: String,
    pub pair: (usize, usize),
    pub via: Option<usize>,
    pub amount: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AxiomReport {
    pub zero_diagonal: bool,
    pub symmetric: bool,
    pub below_base: bool,
    pub generator_bound: bool,
    pub triangle: bool,
    /// Sources whose triangle inequalities were all checked.
    pub triangle_sources: usize,
    pub violations: Vec<Violation>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.zero_diagonal && self.symmetric && self.below_base && self.generator_bound && self.triangle
    }
}

fn push(out: &mut Vec<Violation>, kind: &str, pair: (usize, usize), via: Option<usize>, amount: f64) {
    if out.len() < MAX_REPORTED {
        out.push(Violation {
            kind: kind.into(),
            pair,
            via,
            amount,
        });
    }
}

fn triangle_failures<S: Scalar>(m: &WarpedDistanceMatrix<S>, sources: &[usize]) -> Vec<Violation> {
    sources
        .par_iter()
        .flat_map_iter(|&i| {
            let mut found = Vec::new();
            for j in 0..m.n {
                let dij = m.get(i, j);
                for k in 0..m.n {
                    let lhs = m.get(i, k);
                    let rhs = dij + m.get(j, k);
                    if !lhs.le_tol(rhs) {
                        push(&mut found, "triangle", (i, k), Some(j), (lhs - rhs).to_f64());
                    }
                }
            }
            found
        })
        .collect()
}

/// Zero diagonal, symmetry, `δ ≤ d`, `δ(x, sx) ≤ 1` and the triangle inequality.
pub fn check_axioms<S: Scalar>(model: &SpaceModel<S>, m: &WarpedDistanceMatrix<S>) -> AxiomReport {
    let n = m.n;
    let one = S::from_int(1);
    let mut violations = Vec::new();
    let (mut zero_diagonal, mut symmetric, mut below_base, mut generator_bound) = (true, true, true, true);
    for i in 0..n {
        if !m.get(i, i).eq_tol(S::zero()) {
            zero_diagonal = false;
            push(&mut violations, "diagonal", (i, i), None, m.get(i, i).to_f64());
        }
        for j in 0..n {
            if !m.get(i, j).eq_tol(m.get(j, i)) {
                symmetric = false;
                push(
                    &mut violations,
                    "symmetry",
                    (i, j),
                    None,
                    (m.get(i, j) - m.get(j, i)).to_f64(),
                );
            }
            if !m.get(i, j).le_tol(model.distance(i, j)) {
                below_base = false;
                push(
                    &mut violations,
                    "above-base",
                    (i, j),
                    None,
                    (m.get(i, j) - model.distance(i, j)).to_f64(),
                );
            }
        }
        for table in model.action_tables() {
            let v = m.get(i, table[i]);
            if !v.le_tol(one) {
                generator_bound = false;
                push(&mut violations, "generator", (i, table[i]), None, (v - one).to_f64());
            }
        }
    }
    let sources: Vec<usize> = if n <= TRIANGLE_FULL_LIMIT {
        (0..n).collect()
    } else {
        let stride = n.div_ceil(TRIANGLE_SAMPLED_SOURCES);
        (0..n).step_by(stride).collect()
    };
    let tri = triangle_failures(m, &sources);
    let triangle = tri.is_empty();
    for v in tri {
        push(&mut violations, &v.kind, v.pair, v.via, v.amount);
    }
    AxiomReport {
        zero_diagonal,
        symmetric,
        below_base,
        generator_bound,
        triangle,
        triangle_sources: sources.len(),
        violations,
    }
}

/// Outcome of comparing a candidate metric with δ_Γ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum GreatestMetric {
    Dominated,
    NotDominated {
        pair: (usize, usize),
        candidate: f64,
        warped: f64,
    },
    /// The candidate violates an admissibility condition.
    Inadmissible {
        violations: Vec<Violation>,
    },
}

impl GreatestMetric {
    pub fn holds(&self) -> bool {
        matches!(self, GreatestMetric::Dominated)
    }
}

/// Validates the candidate's admissibility, then checks `candidate ≤ δ_Γ`.
pub fn greatest_metric_check<S: Scalar>(
    model: &SpaceModel<S>,
    warped: &WarpedDistanceMatrix<S>,
    candidate: &WarpedDistanceMatrix<S>,
) -> GreatestMetric {
    let report = check_axioms(model, candidate);
    if !report.passed() {
        return GreatestMetric::Inadmissible {
            violations: report.violations,
        };
    }
    for i in 0..warped.n {
        for j in 0..warped.n {
            if !candidate.get(i, j).le_tol(warped.get(i, j)) {
                return GreatestMetric::NotDominated {
                    pair: (i, j),
                    candidate: candidate.get(i, j).to_f64(),
                    warped: warped.get(i, j).to_f64(),
                };
            }
        }
    }
    GreatestMetric::Dominated
}

fn dense_closure<S: Scalar>(n: usize, weights: &[S]) -> Vec<S> {
    let rows: Vec<Vec<S>> = (0..n)
        .into_par_iter()
        .map(|src| {
            let mut dist: Vec<Option<S>> = vec![None; n];
            let mut done = vec![false; n];
            dist[src] = Some(S::zero());
            for _ in 0..n {
                let u = (0..n)
                    .filter(|&v| !done[v] && dist[v].is_some())
                    .min_by(|&a, &b| cmp_scalar(dist[a].unwrap(), dist[b].unwrap()).then(a.cmp(&b)));
                let Some(u) = u else { break };
                done[u] = true;
                let du = dist[u].expect("set");
                for v in 0..n {
                    let cand = du + weights[u * n + v];
                    if !done[v] && dist[v].is_none_or(|d| cand < d) {
                        dist[v] = Some(cand);
                    }
                }
            }
            dist.into_iter().map(|d| d.expect("complete")).collect()
        })
        .collect();
    rows.concat()
}

/// A random admissible metric: the path metric of the warped graph with every
/// edge weight scaled by an independent factor in `[3/10, 1]`, or for odd
/// seeds a truncation `min(c δ_Γ, c')`.
pub fn random_admissible<S: Scalar>(
    model: &SpaceModel<S>,
    warped: &WarpedDistanceMatrix<S>,
    seed: u64,
) -> WarpedDistanceMatrix<S> {
    let n = model.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor = |rng: &mut ChaCha8Rng| S::from_ratio(rng.random_range(3..=10), 10);
    let values = if seed % 2 == 1 {
        let c = factor(&mut rng);
        let cap = S::from_ratio(rng.random_range(1..=40), 4);
        warped.values.iter().map(|&d| (c * d).min_of(cap)).collect()
    } else {
        let mut weights = vec![S::zero(); n * n];
        for i in 0..n {
            for j in 0..i {
                let w = factor(&mut rng) * model.distance(i, j);
                weights[i * n + j] = w;
                weights[j * n + i] = w;
            }
        }
        for table in model.action_tables() {
            for (x, &y) in table.iter().enumerate() {
                if x != y {
                    let w = factor(&mut rng);
                    let slot = weights[x * n + y].min_of(w);
                    weights[x * n + y] = slot;
                    weights[y * n + x] = slot;
                }
            }
        }
        dense_closure(n, &weights)
    };
    WarpedDistanceMatrix {
        level: model.level(),
        n,
        values,
        engine: Engine::Chain,
        truncation: None,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelShiftReport {
    pub t: String,
    pub s: String,
    pub levels: Vec<String>,
    pub max_deviation: f64,
    /// Net resolution ε at level `t`; float models compare against it.
    pub bound: f64,
    pub exact: bool,
    pub worst_pair: Option<(usize, usize)>,
}

impl LevelShiftReport {
    pub fn holds(&self) -> bool {
        if self.exact {
            self.max_deviation == 0.0
        } else {
            self.max_deviation <= self.bound
        }
    }
}

/// Compares warped cone distances from level `t` to level `t + s` with
/// `s + δ_t`, on a cone graph over the levels `{1, t/2, t, t + s/2, t + s}`.
pub fn level_shift_check<S: Scalar>(model: &SpaceModel<S>, s: S) -> Result<LevelShiftReport> {
    let t = model.level();
    let half = S::from_ratio(1, 2);
    let one = S::from_int(1);
    let mut levels: Vec<S> = vec![one, t * half, t, t + s * half, t + s]
        .into_iter()
        .filter(|&u| u >= one)
        .collect();
    levels.sort_by(|a, b| cmp_scalar(*a, *b));
    levels.dedup_by(|a, b| a.eq_tol(*b));
    let li = levels.iter().position(|&u| u.eq_tol(t)).expect("t is a level");
    let lt = levels.iter().position(|&u| u.eq_tol(t + s)).expect("t + s is a level");
    let n = model.len();
    let within_t = warped_chain(model)?;
    let rows: Vec<(f64, usize)> = (0..n)
        .into_par_iter()
        .map(|y| {
            let dist = cone_dijkstra(model, &levels, li * n + y);
            (0..n)
                .map(|y2| {
                    let lhs = dist[lt * n + y2];
                    let rhs = s + within_t.get(y, y2);
                    ((lhs - rhs).abs().to_f64(), y2)
                })
                .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
        })
        .collect();
    let (worst, pair) = rows.iter().enumerate().fold(
        (0.0, None),
        |acc, (y, &(d, y2))| if d > acc.0 { (d, Some((y, y2))) } else { acc },
    );
    Ok(LevelShiftReport {
        t: t.render(),
        s: s.render(),
        levels: levels.iter().map(|u| u.render()).collect(),
        max_deviation: worst,
        bound: if S::EXACT { 0.0 } else { model.epsilon() },
        exact: S::EXACT,
        worst_pair: pair,
    })
}

fn cone_dijkstra<S: Scalar>(model: &SpaceModel<S>, levels: &[S], source: usize) -> Vec<S> {
    let n = model.len();
    let total = n * levels.len();
    let one = S::from_int(1);
    let mut dist: Vec<Option<S>> = vec![None; total];
    let mut heap = BinaryHeap::new();
    dist[source] = Some(S::zero());
    heap.push(Reverse(HeapKey(S::zero(), source)));
    while let Some(Reverse(HeapKey(du, node))) = heap.pop() {
        if dist[node].is_some_and(|d| d < du) {
            continue;
        }
        let (l, u) = (node / n, node % n);
        let mut relax = |v: usize, w: S| {
            let cand = du + w;
            if dist[v].is_none_or(|d| cand < d) {
                dist[v] = Some(cand);
                heap.push(Reverse(HeapKey(cand, v)));
            }
        };
        for v in 0..n {
            if v != u {
                relax(l * n + v, levels[l] * model.unit_distance(u, v));
            }
        }
        for table in model.action_tables() {
            relax(l * n + table[u], one);
        }
        if l > 0 {
            relax((l - 1) * n + u, levels[l] - levels[l - 1]);
        }
        if l + 1 < levels.len() {
            relax((l + 1) * n + u, levels[l + 1] - levels[l]);
        }
    }
    dist.into_iter().map(|d| d.expect("cone graph is connected")).collect()
}

#[derive(PartialEq)]
struct HeapKey<S>(S, usize);

impl<S: Scalar> Eq for HeapKey<S> {}

impl<S: Scalar> PartialOrd for HeapKey<S> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Scalar> Ord for HeapKey<S> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        cmp_scalar(self.0, other.0).then(self.1.cmp(&other.1))
    }
}

/// One level of a free-orbit scan.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeOrbitLevel {
    pub level: String,
    /// `δ(x, γx) = |γ|` for all points and all `|γ| < R`.
    pub holds: bool,
    /// Largest `|γ| − δ(x, γx)`.
    pub worst_gap: f64,
    pub witness: Option<(usize, String)>,
}

/// Checks the free-orbit distance law at each level, in order.
pub fn free_orbit_scan<S, F>(build: F, levels: &[S], radius: usize) -> Result<Vec<FreeOrbitLevel>>
where
    S: Scalar,
    F: Fn(S) -> Result<SpaceModel<S>>,
{
    let mut out = Vec::new();
    for &t in levels {
        let model = build(t)?;
        let warped = warped_chain(&model)?;
        let ball = model.group().enumerate_ball(radius, DEFAULT_BALL_CAP)?;
        let mut worst = (0.0f64, None);
        let mut holds = true;
        for g in &ball {
            let len = S::from_int(g.len() as i64);
            for x in 0..model.len() {
                let d = warped.get(x, model.act_element(g, x));
                if !d.eq_tol(len) {
                    holds = false;
                    let gap = (len - d).to_f64();
                    if gap > worst.0 || worst.1.is_none() {
                        worst = (gap, Some((x, model.group().format(g))));
                    }
                }
            }
        }
        out.push(FreeOrbitLevel {
            level: t.render(),
            holds,
            worst_gap: worst.0,
            witness: worst.1,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::QuotientTower;
    use crate::scalar::Rational;
    use crate::space::{build_circle_model, build_profinite_model, golden_alpha};

    fn z8(t: i128) -> SpaceModel<Rational> {
        let tower = QuotientTower::dyadic(1, 3).unwrap();
        build_profinite_model(&tower, 3, Rational::from_integer(t), 100).unwrap()
    }

    #[test]
    fn axioms_hold_for_chain_output() {
        let m = z8(4);
        let w = warped_chain(&m).unwrap();
        assert!(check_axioms(&m, &w).passed());
    }

    #[test]
    fn greatest_metric_examples() {
        let m = z8(16);
        let w = warped_chain(&m).unwrap();
        assert!(greatest_metric_check(&m, &w, &w).holds());
        let zero = WarpedDistanceMatrix {
            values: vec![Rational::from_integer(0); w.values.len()],
            ..w.clone()
        };
        assert!(greatest_metric_check(&m, &w, &zero).holds());
        let base = WarpedDistanceMatrix {
            values: m.base_matrix(),
            ..w.clone()
        };
        match greatest_metric_check(&m, &w, &base) {
            GreatestMetric::Inadmissible { violations } => {
                assert!(violations.iter().any(|v| v.kind == "generator"));
            }
            other => panic!("base metric should be inadmissible, got {other:?}"),
        }
        for seed in 0..20 {
            let c = random_admissible(&m, &w, seed);
            assert!(greatest_metric_check(&m, &w, &c).holds(), "seed {seed}");
        }
    }

    #[test]
    fn level_shift_exact_on_profinite() {
        let report = level_shift_check(&z8(4), Rational::from_integer(2)).unwrap();
        assert_eq!(report.max_deviation, 0.0);
        let zero = level_shift_check(&z8(4), Rational::from_integer(0)).unwrap();
        assert!(zero.holds());
    }

    #[test]
    fn level_shift_on_circle_within_bound() {
        let m = build_circle_model(golden_alpha(), 20.0, 0.5, 10_000).unwrap();
        let report = level_shift_check(&m, 5.0).unwrap();
        assert!(report.holds(), "{report:?}");
    }

    #[test]
    fn free_orbit_law_eventually_holds() {
        let scan = free_orbit_scan(
            |t| Ok(z8(t.to_integer())),
            &[1, 4, 16, 64].map(Rational::from_integer),
            3,
        )
        .unwrap();
        assert!(!scan[0].holds);
        assert!(scan.last().unwrap().holds);
    }
}
