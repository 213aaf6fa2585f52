//! Vectors of `E ⊕_p H`, the product embedding, sections and distance
//! envelopes.

use serde::{Deserialize, Serialize};

use super::cocycle::{Cocycle, SparseVector};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::scalar::{Scalar, FLOAT_TOL};
use crate::space::SpaceModel;

/// A vector `(ξ, η)` of `E ⊕_p H`: sparse cocycle coordinates and ambient
/// coordinates of the linearization.
#[derive(Clone, Debug, PartialEq)]
pub struct FibredVector {
    pub e: SparseVector,
    pub h: Vec<f64>,
}

impl FibredVector {
    pub fn minus(&self, other: &Self) -> Self {
        Self {
            e: self.e.minus(&other.e),
            h: self.h.iter().zip(&other.h).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Self {
            e: self.e.plus(&other.e),
            h: self.h.iter().zip(&other.h).map(|(a, b)| a + b).collect(),
        }
    }

    /// Summed in sorted order, so permuted coordinates give the same value.
    pub fn h_norm(&self) -> f64 {
        sorted_sum(self.h.iter().map(|v| v * v)).sqrt()
    }

    /// `‖ξ‖_p^p + ‖η‖_H^p`
    pub fn norm_pow(&self, p: f64) -> f64 {
        self.e.norm_pow(p) + self.h_norm().powf(p)
    }

    pub fn norm(&self, p: f64) -> f64 {
        self.norm_pow(p).powf(1.0 / p)
    }

    /// Entrywise comparison: exact in `E`, absolute `tol` in `H`.
    pub fn deviation(&self, other: &Self) -> (bool, f64) {
        let h = self
            .h
            .iter()
            .zip(&other.h)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (self.e == other.e, h)
    }
}

pub(crate) fn sorted_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// `(γ, x) ↦ (b_{γ⁻¹}, x)` with `x` in ambient coordinates.
pub fn product_embedding<S: Scalar>(
    model: &SpaceModel<S>,
    cocycle: &Cocycle,
    g: &GroupElement,
    x: usize,
) -> FibredVector {
    FibredVector {
        e: cocycle.value(&model.group().inverse(g)),
        h: model.coordinates(x),
    }
}

/// The pair `(α_a, U_b)` applied to `v`.
pub fn apply_pair<S: Scalar>(
    model: &SpaceModel<S>,
    cocycle: &Cocycle,
    a: &GroupElement,
    b: &GroupElement,
    v: &FibredVector,
) -> FibredVector {
    FibredVector {
        e: cocycle.affine(a, &v.e),
        h: model.apply_linear(b, &v.h),
    }
}

/// The linear part `(π_a, U_b)` applied to `v`.
pub fn apply_linear_pair<S: Scalar>(
    model: &SpaceModel<S>,
    cocycle: &Cocycle,
    a: &GroupElement,
    b: &GroupElement,
    v: &FibredVector,
) -> FibredVector {
    FibredVector {
        e: cocycle.act(a, &v.e),
        h: model.apply_linear(b, &v.h),
    }
}

/// Orbit labels and `s(x) = (b_{γ_x⁻¹}, x)` for every net point.
#[derive(Clone, Debug)]
pub struct Section {
    pub labels: Vec<GroupElement>,
    pub values: Vec<FibredVector>,
}

pub fn build_section<S: Scalar>(model: &SpaceModel<S>, cocycle: &Cocycle) -> Result<Section> {
    if cocycle.group() != model.group() {
        return Err(Error::Contract(format!(
            "cocycle is for {}, model is acted on by {}",
            cocycle.group().name(),
            model.group().name()
        )));
    }
    let labels = model.orbit_labels()?;
    let values = labels
        .iter()
        .enumerate()
        .map(|(x, g)| product_embedding(model, cocycle, g, x))
        .collect();
    Ok(Section { labels, values })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub r: f64,
    /// Least embedded distance among samples with input `≥ r`.
    pub lower: f64,
    /// Largest embedded distance among samples with input `≤ r`.
    pub upper: f64,
}

/// Empirical control functions from `(input distance, embedded distance)`
/// samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub samples: usize,
    pub points: Vec<EnvelopePoint>,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= FLOAT_TOL * a.abs().max(b.abs()).max(1.0)
}

impl Envelope {
    pub fn from_samples(samples: &[(f64, f64)]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        let mut groups: Vec<(f64, f64, f64)> = Vec::new();
        for &(r, v) in &sorted {
            match groups.last_mut() {
                Some(g) if same(g.0, r) => {
                    g.1 = g.1.min(v);
                    g.2 = g.2.max(v);
                }
                _ => groups.push((r, v, v)),
            }
        }
        let mut points: Vec<EnvelopePoint> = groups
            .iter()
            .map(|&(r, lo, hi)| EnvelopePoint {
                r,
                lower: lo,
                upper: hi,
            })
            .collect();
        for i in (0..points.len().saturating_sub(1)).rev() {
            points[i].lower = points[i].lower.min(points[i + 1].lower);
        }
        for i in 1..points.len() {
            points[i].upper = points[i].upper.max(points[i - 1].upper);
        }
        Self {
            samples: samples.len(),
            points,
        }
    }

    /// `ρ₁(r)`; `None` when no sample has input `≥ r`.
    pub fn lower_at(&self, r: f64) -> Option<f64> {
        self.points.iter().find(|p| p.r >= r || same(p.r, r)).map(|p| p.lower)
    }

    /// `ρ₂(r)`; `None` when no sample has input `≤ r`.
    pub fn upper_at(&self, r: f64) -> Option<f64> {
        self.points
            .iter()
            .rev()
            .find(|p| p.r <= r || same(p.r, r))
            .map(|p| p.upper)
    }

    pub fn lower_nondecreasing(&self) -> bool {
        self.points.windows(2).all(|w| w[0].lower <= w[1].lower)
    }

    /// `ρ₁` at the largest tested input minus `ρ₁` at the smallest.
    pub fn lower_growth(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => b.lower - a.lower,
            _ => 0.0,
        }
    }

    /// At most `bins` points, evenly spaced in index, always keeping the last.
    pub fn coarsened(&self, bins: usize) -> Self {
        if self.points.len() <= bins || bins < 2 {
            return self.clone();
        }
        let step = (self.points.len() - 1) as f64 / (bins - 1) as f64;
        let points = (0..bins)
            .map(|i| self.points[((i as f64 * step).round() as usize).min(self.points.len() - 1)].clone())
            .collect();
        Self {
            samples: self.samples,
            points,
        }
    }
}
