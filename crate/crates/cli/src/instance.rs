//! Concrete models for a configured instance, one per level.

use rayon::prelude::*;
use warpcone::group::QuotientTower;
use warpcone::scalar::{Rational, Scalar};
use warpcone::space::{
    build_circle_model, build_profinite_model, build_su2_model, default_generators, golden_alpha, SpaceModel,
};
use warpcone::warp::{warped_chain, warped_closed_form, WarpedDistanceMatrix};

use crate::config::{ExperimentConfig, Instance, Value};
use crate::error::CliError;

/// Scalars that config values convert into.
pub trait ConfigScalar: Scalar {
    fn from_value(v: &Value) -> Result<Self, CliError>;
}

impl ConfigScalar for Rational {
    fn from_value(v: &Value) -> Result<Self, CliError> {
        v.to_rational()
    }
}

impl ConfigScalar for f64 {
    fn from_value(v: &Value) -> Result<Self, CliError> {
        v.to_f64()
    }
}

pub fn tower(
    rank: usize,
    depth: usize,
    moduli: Option<&[u64]>,
    scales: Option<&[Value]>,
) -> Result<QuotientTower, CliError> {
    let tower = match (moduli, scales) {
        (None, None) => QuotientTower::dyadic(rank, depth)?,
        (Some(m), None) => QuotientTower::new(rank, m)?,
        (m, Some(s)) => {
            let dyadic: Vec<u64>;
            let m = match m {
                Some(m) => m,
                None => {
                    dyadic = (1..=depth).map(|n| 1u64 << n).collect();
                    &dyadic
                }
            };
            let s = s.iter().map(Value::to_rational).collect::<Result<Vec<_>, _>>()?;
            QuotientTower::with_scales(rank, m, s)?
        }
    };
    if depth > tower.depth() {
        return Err(CliError::Config(format!(
            "depth {depth} exceeds the {} listed moduli",
            tower.depth()
        )));
    }
    Ok(tower)
}

/// Models and (on demand) warped matrices for every configured level.
pub struct Levels<S: Scalar> {
    pub labels: Vec<String>,
    pub models: Vec<SpaceModel<S>>,
    warped: Option<Vec<WarpedDistanceMatrix<S>>>,
}

impl<S: Scalar> Levels<S> {
    /// Computes the warped matrices once.
    pub fn ensure_warped(&mut self) -> Result<(), CliError> {
        if self.warped.is_none() {
            let out = self.models.par_iter().map(warp).collect::<Result<Vec<_>, _>>()?;
            self.warped = Some(out);
        }
        Ok(())
    }

    /// Warped matrices; empty before [`Levels::ensure_warped`].
    pub fn warped(&self) -> &[WarpedDistanceMatrix<S>] {
        self.warped.as_deref().unwrap_or_default()
    }
}

/// Closed form where the action is exactly isometric, chain engine otherwise.
pub fn warp<S: Scalar>(model: &SpaceModel<S>) -> Result<WarpedDistanceMatrix<S>, warpcone::Error> {
    match model.isometry() {
        warpcone::space::Isometry::Exact => warped_closed_form(model),
        warpcone::space::Isometry::Approximate { .. } => warped_chain(model),
    }
}

pub enum Prepared {
    Exact(Levels<Rational>),
    Float(Levels<f64>),
}

/// Runs `$body` with `$levels` bound to the typed level set.
#[macro_export]
macro_rules! with_levels {
    ($prepared:expr, $levels:ident => $body:expr) => {
        match $prepared {
            $crate::instance::Prepared::Exact($levels) => $body,
            $crate::instance::Prepared::Float($levels) => $body,
        }
    };
}

pub fn run_seed(config: &ExperimentConfig) -> u64 {
    config.seeds[0]
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared, CliError> {
    let labels: Vec<String> = config.levels.iter().map(Value::label).collect();
    let cap = config.caps.points;
    match &config.instance {
        Instance::Profinite {
            rank,
            depth,
            moduli,
            scales,
        } => {
            let tower = tower(*rank, *depth, moduli.as_deref(), scales.as_deref())?;
            let levels = config
                .levels
                .iter()
                .map(Value::to_rational)
                .collect::<Result<Vec<_>, _>>()?;
            let models = levels
                .par_iter()
                .map(|&t| build_profinite_model(&tower, *depth, t, cap))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Prepared::Exact(Levels {
                labels,
                models,
                warped: None,
            }))
        }
        Instance::Circle { alpha, epsilon } => {
            let alpha = alpha.unwrap_or_else(golden_alpha);
            let models = float_levels(config)?
                .par_iter()
                .map(|&t| build_circle_model(alpha, t, *epsilon, cap))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Prepared::Float(Levels {
                labels,
                models,
                warped: None,
            }))
        }
        Instance::Su2 { n, generators } => {
            let gens = generators.clone().unwrap_or_else(default_generators);
            if *n > cap {
                return Err(warpcone::Error::CapExceeded {
                    what: "SU(2) net",
                    needed: *n,
                    cap,
                }
                .into());
            }
            let seed = run_seed(config);
            let models = float_levels(config)?
                .par_iter()
                .map(|&t| build_su2_model(&gens, t, *n, seed))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Prepared::Float(Levels {
                labels,
                models,
                warped: None,
            }))
        }
    }
}

fn float_levels(config: &ExperimentConfig) -> Result<Vec<f64>, CliError> {
    config.levels.iter().map(Value::to_f64).collect()
}
