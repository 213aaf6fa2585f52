//! R-local affine isometric actions on `L_p(M, μ; E ⊕ H)` assembled from
//! chart data over a Voronoi partition of one level.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cocycle::{Key, SparseVector};
use super::embed::{sorted_sum, Envelope, FibredVector, Section};
use crate::error::{Error, Result};
use crate::group::{GroupElement, DEFAULT_BALL_CAP};
use crate::scalar::Scalar;
use crate::space::SpaceModel;
use crate::warp::WarpedDistanceMatrix;

/// Voronoi cells of the warped metric around a greedy maximal
/// `R/2`-separated set; ties go to the smaller centre index.
#[derive(Clone, Debug)]
pub struct Partition<S> {
    pub centres: Vec<usize>,
    pub cell_of: Vec<usize>,
    pub cells: Vec<Vec<usize>>,
    pub max_diameter: S,
}

pub fn voronoi_partition<S: Scalar>(warped: &WarpedDistanceMatrix<S>, radius: S) -> Partition<S> {
    let half = radius * S::from_ratio(1, 2);
    let mut centres: Vec<usize> = Vec::new();
    for x in 0..warped.n {
        if centres.iter().all(|&c| warped.get(c, x) >= half) {
            centres.push(x);
        }
    }
    let cell_of: Vec<usize> = (0..warped.n)
        .map(|x| {
            let mut best = 0;
            for (k, &c) in centres.iter().enumerate().skip(1) {
                if warped.get(c, x) < warped.get(centres[best], x) {
                    best = k;
                }
            }
            best
        })
        .collect();
    let mut cells = vec![Vec::new(); centres.len()];
    for (x, &k) in cell_of.iter().enumerate() {
        cells[k].push(x);
    }
    let mut max_diameter = S::zero();
    for cell in &cells {
        for &a in cell {
            for &b in cell {
                max_diameter = max_diameter.max_of(warped.get(a, b));
            }
        }
    }
    Partition {
        centres,
        cell_of,
        cells,
        max_diameter,
    }
}

/// The assembled representation `π^R` and cocycle `b^R` on one level.
pub struct RLocalAction<'a, S: Scalar> {
    model: &'a SpaceModel<S>,
    section: &'a Section,
    pub radius: S,
    pub p: f64,
    pub partition: Partition<S>,
    /// `N_{10R}(C)` for each cell.
    pub neighbourhoods: Vec<Vec<usize>>,
    /// `|γ| < R`, shortlex.
    pub ball: Vec<GroupElement>,
    inverse_tables: Vec<Vec<usize>>,
    warped: Vec<f64>,
}

/// Validates the free-orbit law `δ(x, γx) = |γ|` for `|γ| < R` and assembles
/// the action.
pub fn build_rlocal_action<'a, S: Scalar>(
    model: &'a SpaceModel<S>,
    section: &'a Section,
    warped: &WarpedDistanceMatrix<S>,
    radius: S,
    p: f64,
) -> Result<RLocalAction<'a, S>> {
    if !(p >= 1.0) {
        return Err(Error::Validation(format!("exponent p = {p} < 1")));
    }
    if radius <= S::zero() {
        return Err(Error::Validation(format!("scale {} is not positive", radius.render())));
    }
    let group = model.group();
    let ball = group.enumerate_ball(radius.ceil_u64() as usize, DEFAULT_BALL_CAP)?;
    for g in &ball {
        let len = S::from_int(g.len() as i64);
        for x in 0..model.len() {
            let d = warped.get(x, model.act_element(g, x));
            if !d.eq_tol(len) {
                return Err(Error::LevelBelowThreshold(format!(
                    "at t = {}, δ(x, γx) = {} < |γ| = {} for x = {x}, γ = {}",
                    model.level().render(),
                    d.render(),
                    g.len(),
                    group.format(g)
                )));
            }
        }
    }
    let partition = voronoi_partition(warped, radius);
    let ten = radius * S::from_int(10);
    let neighbourhoods = partition
        .cells
        .iter()
        .map(|cell| {
            (0..model.len())
                .filter(|&x| cell.iter().any(|&c| warped.get(x, c) < ten))
                .collect()
        })
        .collect();
    let inverse_tables = ball
        .iter()
        .map(|g| {
            let inv = group.inverse(g);
            (0..model.len()).map(|x| model.act_element(&inv, x)).collect()
        })
        .collect();
    Ok(RLocalAction {
        model,
        section,
        radius,
        p,
        partition,
        neighbourhoods,
        ball,
        inverse_tables,
        warped: warped.values.iter().map(|v| v.to_f64()).collect(),
    })
}

/// Outcome of one family of identities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClaimStatus {
    pub checked: usize,
    /// Failures of the exact (group element or integer coordinate) part.
    pub exact_failures: usize,
    /// Largest deviation in the floating coordinates.
    pub max_deviation: f64,
    pub witness: Option<String>,
}

impl ClaimStatus {
    pub fn holds(&self, tol: f64) -> bool {
        self.exact_failures == 0 && self.max_deviation <= tol
    }

    fn record(&mut self, exact_ok: bool, deviation: f64, witness: impl FnOnce() -> String) {
        self.checked += 1;
        let worse = deviation > self.max_deviation;
        if !exact_ok {
            self.exact_failures += 1;
        }
        if worse {
            self.max_deviation = deviation;
        }
        if (!exact_ok && self.exact_failures == 1) || (worse && self.exact_failures == 0) {
            self.witness = Some(witness());
        }
    }
}

/// The two-sided bound on `‖b^R_γ‖_p` from the pointwise envelope.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocycleBound {
    pub element: String,
    pub word_length: usize,
    /// `n · ρ₁(min_x δ(x, γ⁻¹x))^p`
    pub lower: f64,
    /// `Σ_x ‖b^R_γ(x)‖^p`
    pub sum: f64,
    /// `n · ρ₂(max_x δ(x, γ⁻¹x))^p`
    pub upper: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RLocalReport {
    pub radius: String,
    pub level: String,
    pub cells: usize,
    pub max_cell_diameter: f64,
    pub ball: usize,
    pub identity_is_trivial: bool,
    pub claim1: ClaimStatus,
    pub isometry: ClaimStatus,
    pub claim2: ClaimStatus,
    pub transition_cocycle: ClaimStatus,
    pub bounds: Vec<CocycleBound>,
    pub envelope: Envelope,
}

impl RLocalReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.identity_is_trivial
            && self.claim1.holds(tol)
            && self.isometry.holds(tol)
            && self.claim2.holds(tol)
            && self.transition_cocycle.holds(tol)
            && self.bounds.iter().all(|b| b.holds)
    }
}

fn field_deviation(a: &[FibredVector], b: &[FibredVector]) -> (bool, f64) {
    a.iter().zip(b).fold((true, 0.0), |(ok, dev), (u, v)| {
        let (e, h) = u.deviation(v);
        (ok && e, dev.max(h))
    })
}

impl<S: Scalar> RLocalAction<'_, S> {
    fn index(&self, g: &GroupElement) -> Option<usize> {
        self.ball.iter().position(|h| h == g)
    }

    /// Space-slot element of `u_{C′,C}`: `γ_{z_{C′}} γ_{z_C}⁻¹`.
    pub fn transition(&self, to: usize, from: usize) -> GroupElement {
        let group = self.model.group();
        let labels = &self.section.labels;
        group.mul(
            &labels[self.partition.centres[to]],
            &group.inverse(&labels[self.partition.centres[from]]),
        )
    }

    /// `e_C(w) = (b_{γ_w⁻¹}, U_{γ_{z_C} γ_w⁻¹} w)`.
    pub fn chart_embedding(&self, cell: usize, w: usize) -> FibredVector {
        let group = self.model.group();
        let labels = &self.section.labels;
        let b = group.mul(&labels[self.partition.centres[cell]], &group.inverse(&labels[w]));
        FibredVector {
            e: self.section.values[w].e.clone(),
            h: self.model.apply_linear(&b, &self.section.values[w].h),
        }
    }

    fn table(&self, g: &GroupElement) -> Result<&[usize]> {
        self.index(g)
            .map(|i| self.inverse_tables[i].as_slice())
            .ok_or_else(|| Error::Contract(format!("{} is outside B(R)", self.model.group().format(g))))
    }

    /// `(π^R_γ ξ)(x) = u_{C(x), C(γ⁻¹x)} ξ(γ⁻¹x)`.
    pub fn pi(&self, g: &GroupElement, xi: &[FibredVector]) -> Result<Vec<FibredVector>> {
        let inv = self.table(g)?;
        let cell = &self.partition.cell_of;
        Ok((0..xi.len())
            .map(|x| {
                let y = inv[x];
                let u = self.transition(cell[x], cell[y]);
                FibredVector {
                    e: xi[y].e.clone(),
                    h: self.model.apply_linear(&u, &xi[y].h),
                }
            })
            .collect())
    }

    /// `b^R_γ(x) = e_C(x) − e_C(γ⁻¹x)` for `x ∈ C`.
    pub fn b(&self, g: &GroupElement) -> Result<Vec<FibredVector>> {
        let inv = self.table(g)?;
        let cell = &self.partition.cell_of;
        Ok((0..self.model.len())
            .map(|x| {
                self.chart_embedding(cell[x], x)
                    .minus(&self.chart_embedding(cell[x], inv[x]))
            })
            .collect())
    }

    /// `‖ξ‖_p^p` for the uniform probability measure on net points.
    pub fn norm_pow(&self, xi: &[FibredVector]) -> f64 {
        sorted_sum(xi.iter().map(|v| v.norm_pow(self.p))) / xi.len() as f64
    }

    fn random_field(&self, rng: &mut ChaCha8Rng) -> Vec<FibredVector> {
        let dim = self.section.values.first().map_or(0, |v| v.h.len());
        (0..self.model.len())
            .map(|_| {
                let mut e = SparseVector::new();
                for _ in 0..3 {
                    e.add_at(
                        Key::Site {
                            axis: 0,
                            pos: rng.random_range(-8..8),
                        },
                        rng.random_range(-3..=3),
                    );
                }
                FibredVector {
                    e,
                    h: (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
                }
            })
            .collect()
    }

    /// Pairs `(γ₁, γ₂)` of `B(R)` whose product stays in `B(R)`.
    fn pairs(&self) -> Vec<(usize, usize, usize)> {
        let group = self.model.group();
        let mut out = Vec::new();
        for i in 0..self.ball.len() {
            for j in 0..self.ball.len() {
                if let Some(k) = self.index(&group.mul(&self.ball[i], &self.ball[j])) {
                    out.push((i, j, k));
                }
            }
        }
        out
    }

    /// Claims 1 and 2, the transition cocycle and the bound on `‖b^R_γ‖`.
    pub fn verify(&self, seed: u64) -> Result<RLocalReport> {
        let group = self.model.group();
        let n = self.model.len();
        let cell = &self.partition.cell_of;
        let pairs = self.pairs();
        let bs: Vec<Vec<FibredVector>> = self.ball.par_iter().map(|g| self.b(g)).collect::<Result<_>>()?;
        let fmt = |i: usize| group.format(&self.ball[i]);

        let mut identity_is_trivial = true;
        if let Some(e) = self.index(&group.identity()) {
            identity_is_trivial = bs[e].iter().all(|v| v.e.is_zero() && v.h.iter().all(|&c| c == 0.0));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xi = self.random_field(&mut rng);
            identity_is_trivial &= self.pi(&self.ball[e], &xi)? == xi;
        }

        let mut claim1 = ClaimStatus::default();
        let mut claim2 = ClaimStatus::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for &(i, j, k) in &pairs {
            let (t1, t2, t12) = (
                &self.inverse_tables[i],
                &self.inverse_tables[j],
                &self.inverse_tables[k],
            );
            for x in 0..n {
                let y1 = t1[x];
                let y2 = t2[y1];
                let composed = group.mul(
                    &self.transition(cell[x], cell[y1]),
                    &self.transition(cell[y1], cell[y2]),
                );
                let direct = self.transition(cell[x], cell[t12[x]]);
                claim1.record(t12[x] == y2 && composed == direct, 0.0, || {
                    format!("(γ₂, γ₁, cell) = ({}, {}, {})", fmt(j), fmt(i), cell[x])
                });
            }
            let xi = self.random_field(&mut rng);
            let lhs = self.pi(&self.ball[k], &xi)?;
            let rhs = self.pi(&self.ball[i], &self.pi(&self.ball[j], &xi)?)?;
            let (ok, dev) = field_deviation(&lhs, &rhs);
            claim1.record(ok, dev, || {
                format!("(γ₂, γ₁) = ({}, {}) on a random field", fmt(j), fmt(i))
            });

            let rhs = self.pi(&self.ball[i], &bs[j])?;
            for x in 0..n {
                let sum = rhs[x].plus(&bs[i][x]);
                let (ok, dev) = sum.deviation(&bs[k][x]);
                claim2.record(ok, dev, || {
                    format!("(γ₂, γ₁, cell) = ({}, {}, {})", fmt(j), fmt(i), cell[x])
                });
            }
        }

        let mut isometry = ClaimStatus::default();
        for (i, g) in self.ball.iter().enumerate() {
            for _ in 0..50 {
                let xi = self.random_field(&mut rng);
                let a = self.norm_pow(&self.pi(g, &xi)?);
                let b = self.norm_pow(&xi);
                isometry.record(true, (a - b).abs() / b.max(1.0), || format!("γ = {}", fmt(i)));
            }
        }

        let transition_cocycle = self.check_transition_cocycle();

        let mut samples = Vec::new();
        for (i, b) in bs.iter().enumerate() {
            for x in 0..n {
                let y = self.inverse_tables[i][x];
                samples.push((self.warped_between(x, y), b[x].norm(self.p)));
            }
        }
        let envelope = Envelope::from_samples(&samples);
        let bounds = bs
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let reach: Vec<f64> = (0..n)
                    .map(|x| self.warped_between(x, self.inverse_tables[i][x]))
                    .collect();
                let near = reach.iter().copied().fold(f64::INFINITY, f64::min);
                let far = reach.iter().copied().fold(0.0, f64::max);
                let rho1 = envelope.lower_at(near).unwrap_or(0.0);
                let rho2 = envelope.upper_at(far).unwrap_or(f64::INFINITY);
                let lower = n as f64 * rho1.powf(self.p);
                let upper = n as f64 * rho2.powf(self.p);
                let sum: f64 = b.iter().map(|v| v.norm_pow(self.p)).sum();
                CocycleBound {
                    element: fmt(i),
                    word_length: self.ball[i].len(),
                    lower,
                    sum,
                    upper,
                    holds: lower <= sum && sum <= upper,
                }
            })
            .collect();

        Ok(RLocalReport {
            radius: self.radius.render(),
            level: self.model.level().render(),
            cells: self.partition.cells.len(),
            max_cell_diameter: self.partition.max_diameter.to_f64(),
            ball: self.ball.len(),
            identity_is_trivial,
            claim1,
            isometry,
            claim2,
            transition_cocycle,
            bounds,
            envelope,
        })
    }

    fn warped_between(&self, x: usize, y: usize) -> f64 {
        self.warped[x * self.model.len() + y]
    }

    /// `u_{C″,C} = u_{C″,C′} u_{C′,C}` on every triple of cells whose
    /// neighbourhoods share a point.
    fn check_transition_cocycle(&self) -> ClaimStatus {
        let group = self.model.group();
        let mut around: Vec<Vec<usize>> = vec![Vec::new(); self.model.len()];
        for (c, nb) in self.neighbourhoods.iter().enumerate() {
            for &x in nb {
                around[x].push(c);
            }
        }
        let mut triples = HashSet::new();
        for list in &around {
            for &a in list {
                for &b in list {
                    for &c in list {
                        triples.insert((a, b, c));
                    }
                }
            }
        }
        let mut memo: HashMap<(usize, usize), GroupElement> = HashMap::new();
        let mut u = |to: usize, from: usize| {
            memo.entry((to, from))
                .or_insert_with(|| self.transition(to, from))
                .clone()
        };
        let mut status = ClaimStatus::default();
        let mut sorted: Vec<_> = triples.into_iter().collect();
        sorted.sort_unstable();
        for (c, c1, c2) in sorted {
            let ok = u(c2, c) == group.mul(&u(c2, c1), &u(c1, c));
            status.record(ok, 0.0, || format!("cells ({c}, {c1}, {c2})"));
        }
        status
    }
}
