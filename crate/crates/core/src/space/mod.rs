//! Finite models of compact metric spaces with group actions, and the open
//! cone over them.
//!
//! A [`SpaceModel`] is one level set: a finite net of points, the base metric
//! `d_Y` (stored unscaled), the level `t`, and for every generator symbol a
//! permutation of point indices. Level distances are `t · d_Y`.

mod circle;
mod profinite;
mod su2;

pub use circle::{build_circle_model, golden_alpha};
pub use profinite::build_profinite_model;
pub use su2::{build_su2_model, default_generators, quat_mul, su2_distance, Quaternion};

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Group, GroupElement, Letter, QuotientTower};
use crate::scalar::Scalar;

/// Default cap on the number of net points.
pub const DEFAULT_POINT_CAP: usize = 20_000;

/// Concrete coordinates of the net points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Points {
    /// Angles in `[0, 2π)` on the unit circle.
    Angles(Vec<f64>),
    /// Unit quaternions `(w, x, y, z)`.
    Quaternions(Vec<Quaternion>),
    /// Residue vectors of the deepest quotient `Γ/Γ_N`.
    Residues(Vec<Vec<i64>>),
}

/// How the model's concrete instance was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Circle {
        alpha: f64,
        /// The rotation is snapped to `shift` net steps.
        shift: usize,
    },
    Su2 {
        generators: Vec<Quaternion>,
        pool_size: usize,
    },
    Profinite {
        tower: QuotientTower,
        depth: usize,
    },
}

/// Whether generator maps preserve the base metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Isometry {
    Exact,
    /// Isometric up to the recorded defect (unscaled `d_Y` units).
    Approximate {
        defect: f64,
    },
}

/// A point `(y, t)` of the open cone.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConePoint<S> {
    pub base: usize,
    pub t: S,
}

impl<S: Scalar> ConePoint<S> {
    pub fn new(base: usize, t: S) -> Result<Self> {
        if t < S::from_int(1) {
            return Err(Error::Validation(format!("cone level {} < 1", t.render())));
        }
        Ok(Self { base, t })
    }
}

/// One level set of a warped cone.
#[derive(Clone, Debug)]
pub struct SpaceModel<S: Scalar> {
    kind: ModelKind,
    group: Group,
    points: Points,
    unit: Vec<S>,
    level: S,
    epsilon: f64,
    actions: Vec<Vec<usize>>,
    snapping: Vec<f64>,
    isometry: Isometry,
    seed: Option<u64>,
}

impl<S: Scalar> SpaceModel<S> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        kind: ModelKind,
        group: Group,
        points: Points,
        unit: Vec<S>,
        level: S,
        epsilon: f64,
        actions: Vec<Vec<usize>>,
        snapping: Vec<f64>,
        isometry: Isometry,
        seed: Option<u64>,
    ) -> Result<Self> {
        let n = (unit.len() as f64).sqrt() as usize;
        if n * n != unit.len() || n == 0 {
            return Err(Error::Validation("distance table is not square".into()));
        }
        if actions.len() != group.generators().len() {
            return Err(Error::Validation(
                "one action table per generator symbol required".into(),
            ));
        }
        let model = Self {
            kind,
            group,
            points,
            unit,
            level,
            epsilon,
            actions,
            snapping,
            isometry,
            seed,
        };
        model.check_actions()?;
        Ok(model)
    }

    fn check_actions(&self) -> Result<()> {
        let n = self.len();
        for (l, table) in self.actions.iter().enumerate() {
            if table.len() != n {
                return Err(Error::Validation(format!("action table {l} has wrong length")));
            }
            let mut hit = vec![false; n];
            for &j in table {
                if j >= n || std::mem::replace(&mut hit[j], true) {
                    return Err(Error::Validation(format!(
                        "action of `{}` is not a bijection",
                        self.group.generators().symbol(l as Letter)
                    )));
                }
            }
            let inv = &self.actions[self.group.generators().inverse_of(l as Letter) as usize];
            if (0..n).any(|i| inv[table[i]] != i) {
                return Err(Error::Validation(format!(
                    "action of `{}` does not invert its inverse symbol",
                    self.group.generators().symbol(l as Letter)
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.actions.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn level(&self) -> S {
        self.level
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn isometry(&self) -> Isometry {
        self.isometry
    }

    /// Same net and action at another level `t`.
    pub fn at_level(&self, t: S) -> Result<Self> {
        if t < S::from_int(1) {
            return Err(Error::Validation(format!("level {} < 1", t.render())));
        }
        let mut out = self.clone();
        out.epsilon = self.epsilon * t.to_f64() / self.level.to_f64();
        out.level = t;
        Ok(out)
    }

    /// Unscaled base distance `d_Y(x, y)`.
    pub fn unit_distance(&self, i: usize, j: usize) -> S {
        self.unit[i * self.len() + j]
    }

    /// Level distance `t · d_Y(x, y)`.
    pub fn distance(&self, i: usize, j: usize) -> S {
        self.level * self.unit_distance(i, j)
    }

    /// Row-major `n × n` level distance matrix.
    pub fn base_matrix(&self) -> Vec<S> {
        self.unit.iter().map(|&d| self.level * d).collect()
    }

    pub fn unit_matrix(&self) -> &[S] {
        &self.unit
    }

    pub fn action_table(&self, l: Letter) -> &[usize] {
        &self.actions[l as usize]
    }

    pub fn action_tables(&self) -> &[Vec<usize>] {
        &self.actions
    }

    pub fn act(&self, l: Letter, i: usize) -> usize {
        self.actions[l as usize][i]
    }

    /// `γ · x`, applying the rightmost letter first.
    pub fn act_element(&self, g: &GroupElement, i: usize) -> usize {
        g.letters().iter().rev().fold(i, |x, &l| self.act(l, x))
    }

    /// Per-symbol maximal snapping displacement (unscaled).
    pub fn snapping(&self) -> &[f64] {
        &self.snapping
    }

    pub fn max_snapping(&self) -> f64 {
        self.snapping.iter().copied().fold(0.0, f64::max)
    }

    /// Maximal `|d(sx, sy) − d(x, y)|` over all symbols and pairs (unscaled).
    pub fn isometry_defect(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for table in &self.actions {
            for i in 0..n {
                for j in 0..n {
                    let a = self.unit_distance(table[i], table[j]).to_f64();
                    let b = self.unit_distance(i, j).to_f64();
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Open-cone distance `|t − t'| + min(t, t') · d_Y(y, y')`.
    pub fn cone_metric(&self, p: &ConePoint<S>, q: &ConePoint<S>) -> S {
        let dt = if p.t > q.t { p.t - q.t } else { q.t - p.t };
        dt + p.t.min_of(q.t) * self.unit_distance(p.base, q.base)
    }

    /// Ambient coordinates of a net point at this level (the cone embedded in
    /// its linearization space).
    pub fn coordinates(&self, i: usize) -> Vec<f64> {
        let t = self.level.to_f64();
        match &self.points {
            Points::Angles(a) => vec![t * a[i].cos(), t * a[i].sin()],
            Points::Quaternions(q) => q[i].iter().map(|c| t * c).collect(),
            Points::Residues(_) => {
                let n = self.len();
                let scale = t / (n as f64).sqrt();
                (0..n).map(|j| scale * self.unit_distance(i, j).to_f64()).collect()
            }
        }
    }

    /// The linear isometry `U_γ` of the ambient space.
    pub fn apply_linear(&self, g: &GroupElement, v: &[f64]) -> Vec<f64> {
        match (&self.kind, &self.points) {
            (ModelKind::Circle { shift, .. }, Points::Angles(a)) => {
                let n = a.len() as f64;
                let steps: i64 = self.group.residues(g)[0];
                let angle = 2.0 * std::f64::consts::PI * (*shift as f64) * steps as f64 / n;
                let (s, c) = angle.sin_cos();
                vec![c * v[0] - s * v[1], s * v[0] + c * v[1]]
            }
            (ModelKind::Su2 { generators, .. }, _) => {
                let mut q = [1.0, 0.0, 0.0, 0.0];
                for &l in g.letters() {
                    let gen = generators[l as usize / 2];
                    let gen = if l % 2 == 0 { gen } else { su2::conj(gen) };
                    q = quat_mul(q, gen);
                }
                let out = quat_mul(q, [v[0], v[1], v[2], v[3]]);
                out.to_vec()
            }
            _ => {
                // permutation of distance-profile coordinates: (U v)_y = v_{γ⁻¹ y}
                let inv = self.group.inverse(g);
                (0..v.len()).map(|y| v[self.act_element(&inv, y)]).collect()
            }
        }
    }

    /// Orbit labels `γ_x` with `x = γ_x · P₀`, `P₀` = index 0: the shortlex
    /// least shortest word, found by breadth-first search in the Schreier graph.
    pub fn orbit_labels(&self) -> Result<Vec<GroupElement>> {
        let n = self.len();
        let gens = self.group.generators().len();
        let mut label: Vec<Option<GroupElement>> = vec![None; n];
        label[0] = Some(self.group.identity());
        let mut layer = vec![0usize];
        while !layer.is_empty() {
            let mut next = Vec::new();
            for l in 0..gens as Letter {
                for &x in &layer {
                    let y = self.act(l, x);
                    if label[y].is_none() {
                        let parent = label[x].as_ref().expect("labelled");
                        let mut letters = vec![l];
                        letters.extend_from_slice(parent.letters());
                        label[y] = Some(self.group.reduce_letters(&letters));
                        next.push(y);
                    }
                }
            }
            // keep shortlex order of labels within the next layer
            next.sort_by(|a, b| label[*a].cmp(&label[*b]));
            layer = next;
        }
        let labels: Vec<GroupElement> = label
            .into_iter()
            .enumerate()
            .map(|(i, l)| l.ok_or_else(|| Error::Validation(format!("point {i} is not in the orbit of P₀"))))
            .collect::<Result<_>>()?;
        let mut seen = std::collections::HashMap::new();
        for (i, g) in labels.iter().enumerate() {
            if let Some(&j) = seen.get(g) {
                return Err(Error::LabelCollision {
                    first: j,
                    second: i,
                    label: self.group.format(g),
                });
            }
            seen.insert(g.clone(), i);
        }
        Ok(labels)
    }

    /// Largest `L` such that `γ ↦ γ · P₀` is injective on `{|γ| ≤ L}`, capped.
    pub fn injectivity_horizon(&self, max_radius: usize, cap: usize) -> Result<usize> {
        let mut owner: Vec<Option<GroupElement>> = vec![None; self.len()];
        let ball = self.group.closed_ball(max_radius, cap)?;
        let mut horizon = max_radius;
        for g in ball {
            if g.len() > horizon {
                break;
            }
            let x = self.act_element(&g, 0);
            match &owner[x] {
                Some(h) if *h != g => {
                    horizon = g.len() - 1;
                }
                Some(_) => {}
                None => owner[x] = Some(g),
            }
        }
        Ok(horizon)
    }

    /// Connected components of the Schreier graph (point indices of each).
    pub fn orbits(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut queue = VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for table in &self.actions {
                    let y = table[x];
                    if comp[y] == usize::MAX {
                        comp[y] = id;
                        members.push(y);
                        queue.push_back(y);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

/// Sampled net-quality statistics at the model's level.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetReport {
    pub samples: usize,
    pub covering_estimate: f64,
    pub min_separation: f64,
    pub epsilon: f64,
    /// Sampled covering radius ≤ ε and separation ≥ ε/2.
    pub ok: bool,
}

/// Checks the net property by sampling uniform points of the underlying space.
pub fn validate_net(model: &SpaceModel<f64>, samples: usize, seed: u64) -> NetReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = model.level();
    let n = model.len();
    let covering = match model.points() {
        Points::Angles(a) => (0..samples)
            .map(|_| {
                let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                a.iter().map(|&b| circle::arc(theta, b)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max),
        Points::Quaternions(q) => (0..samples)
            .map(|_| {
                let p = su2::random_unit(&mut rng);
                q.iter().map(|&b| su2_distance(p, b)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max),
        Points::Residues(_) => 0.0,
    } * t;
    let mut separation = f64::INFINITY;
    for i in 0..n {
        for j in 0..i {
            separation = separation.min(model.distance(i, j));
        }
    }
    let epsilon = model.epsilon();
    NetReport {
        samples,
        covering_estimate: covering,
        min_separation: separation,
        epsilon,
        ok: covering <= epsilon * (1.0 + 1e-12) && separation >= epsilon / 2.0 * (1.0 - 1e-12),
    }
}
