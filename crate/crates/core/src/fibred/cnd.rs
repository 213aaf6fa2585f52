//! The R-local conditionally negative definite function obtained from the
//! chart-independent kernel `K(x, y) = ‖F(x) − F(y)‖²`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cocycle::Cocycle;
use super::embed::{Envelope, FibredVector, Section};
use crate::error::{Error, Result};
use crate::group::{GroupElement, DEFAULT_BALL_CAP};
use crate::scalar::Scalar;
use crate::space::SpaceModel;
use crate::warp::WarpedDistanceMatrix;

/// `h^R(γ) = Σ_x μ(x) K(x, γx)` on the closed ball `|γ| ≤ R`.
#[derive(Clone, Debug)]
pub struct CndTable {
    pub radius: usize,
    pub level: String,
    pub elements: Vec<GroupElement>,
    pub values: Vec<f64>,
    /// `(δ(x, γx), K(x, γx)^{1/2})` over all evaluated pairs.
    pub envelope: Envelope,
    /// `h(γ) ≥ ρ₁(min_x δ(x, γx))²` for every tabulated `γ`.
    pub envelope_bound_holds: bool,
    pub envelope_witness: Option<String>,
    formatted: Vec<String>,
}

impl CndTable {
    pub fn get(&self, g: &GroupElement) -> Option<f64> {
        self.elements.iter().position(|h| h == g).map(|i| self.values[i])
    }

    /// `(word, length, h)` in shortlex order.
    pub fn rows(&self) -> impl Iterator<Item = (&str, usize, f64)> {
        self.elements
            .iter()
            .zip(&self.formatted)
            .zip(&self.values)
            .map(|((g, name), &v)| (name.as_str(), g.len(), v))
    }

    /// CSV rows `element,length,value`, shortlex.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("element,length,value\n");
        for (name, len, v) in self.rows() {
            let _ = writeln!(out, "{name},{len},{v:e}");
        }
        out
    }
}

/// `F(w) = (b_{γ_w⁻¹}, U_{γ_w}⁻¹ w)`, the trivialized section read in the
/// frame of the base point.
fn frame(model: &SpaceModel<impl Scalar>, section: &Section, w: usize) -> FibredVector {
    let inv = model.group().inverse(&section.labels[w]);
    FibredVector {
        e: section.values[w].e.clone(),
        h: model.apply_linear(&inv, &section.values[w].h),
    }
}

pub fn cnd_kernel<S: Scalar>(
    model: &SpaceModel<S>,
    cocycle: &Cocycle,
    section: &Section,
    warped: &WarpedDistanceMatrix<S>,
    radius: usize,
) -> Result<CndTable> {
    if cocycle.group() != model.group() || section.labels.len() != model.len() || warped.n != model.len() {
        return Err(Error::Contract(
            "cocycle, section and warped matrix must come from the model".into(),
        ));
    }
    let group = model.group();
    let n = model.len();
    let frames: Vec<FibredVector> = (0..n).into_par_iter().map(|w| frame(model, section, w)).collect();
    let elements = group.closed_ball(radius, DEFAULT_BALL_CAP)?;
    let rows: Vec<(f64, Vec<(f64, f64)>)> = elements
        .par_iter()
        .map(|g| {
            let samples: Vec<(f64, f64)> = (0..n)
                .map(|x| {
                    let y = model.act_element(g, x);
                    (
                        warped.get(x, y).to_f64(),
                        frames[x].minus(&frames[y]).norm_pow(2.0).sqrt(),
                    )
                })
                .collect();
            let mean = samples.iter().map(|s| s.1 * s.1).sum::<f64>() / n as f64;
            (mean, samples)
        })
        .collect();
    let envelope = Envelope::from_samples(&rows.iter().flat_map(|r| r.1.iter().copied()).collect::<Vec<_>>());
    let formatted: Vec<String> = elements.iter().map(|g| group.format(g)).collect();
    let mut envelope_witness = None;
    for (i, (h, samples)) in rows.iter().enumerate() {
        let near = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let rho = envelope.lower_at(near).unwrap_or(0.0);
        if *h < rho * rho * (1.0 - 1e-12) && envelope_witness.is_none() {
            envelope_witness = Some(format!("h({}) = {h} < ρ₁({near})² = {}", formatted[i], rho * rho));
        }
    }
    Ok(CndTable {
        radius,
        level: model.level().render(),
        values: rows.iter().map(|r| r.0).collect(),
        elements,
        envelope,
        envelope_bound_holds: envelope_witness.is_none(),
        envelope_witness,
        formatted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CndReport {
    pub radius: usize,
    pub level: String,
    pub h_identity: f64,
    pub tuple_radius: usize,
    pub tuple_size: usize,
    pub weightings: usize,
    pub seed: u64,
    /// Largest `Σ c_i c_j h(γ_i γ_j⁻¹)` over the random mean-zero unit weightings.
    pub max_quadratic_form: f64,
    /// Largest eigenvalue of `h` restricted to mean-zero weightings.
    pub max_projected_eigenvalue: f64,
    pub envelope_bound_holds: bool,
    pub envelope_witness: Option<String>,
}

impl CndReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.h_identity.abs() <= tol && self.max_quadratic_form <= tol && self.max_projected_eigenvalue <= tol
    }
}

/// The negative-type test on tuples from `B(tuple_radius)`; requires
/// `2 · tuple_radius ≤ R`.
pub fn check_cnd(
    table: &CndTable,
    model: &SpaceModel<impl Scalar>,
    tuple_radius: usize,
    weightings: usize,
    seed: u64,
) -> Result<CndReport> {
    if 2 * tuple_radius > table.radius {
        return Err(Error::Contract(format!(
            "tuples from B({tuple_radius}) need h on B({}), table has B({})",
            2 * tuple_radius,
            table.radius
        )));
    }
    let group = model.group();
    let tuple = group.closed_ball(tuple_radius, DEFAULT_BALL_CAP)?;
    let m = tuple.len();
    let mut h = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let g = group.mul(&tuple[i], &group.inverse(&tuple[j]));
            h[(i, j)] = table.get(&g).expect("product lies in the table");
        }
    }
    let h_identity = table.get(&group.identity()).unwrap_or(0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_form = f64::NEG_INFINITY;
    for _ in 0..weightings {
        let mut c: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = c.iter().sum::<f64>() / m as f64;
        c.iter_mut().for_each(|v| *v -= mean);
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        c.iter_mut().for_each(|v| *v /= norm);
        let c = nalgebra::DVector::from_vec(c);
        max_form = max_form.max(c.dot(&(&h * &c)));
    }

    let proj = DMatrix::<f64>::identity(m, m) - DMatrix::<f64>::from_element(m, m, 1.0 / m as f64);
    let sym = &proj * &h * &proj;
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max_eig = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    Ok(CndReport {
        radius: table.radius,
        level: table.level.clone(),
        h_identity,
        tuple_radius,
        tuple_size: m,
        weightings,
        seed,
        max_quadratic_form: if weightings == 0 { 0.0 } else { max_form },
        max_projected_eigenvalue: max_eig,
        envelope_bound_holds: table.envelope_bound_holds,
        envelope_witness: table.envelope_witness.clone(),
    })
}
