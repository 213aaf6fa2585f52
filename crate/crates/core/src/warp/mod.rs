//! Warped metrics on level sets: the chain infimum realized as shortest
//! paths, and the closed form for isometric actions.

mod chain;
mod checks;
mod closed_form;

pub use chain::{warped_chain, MetricEdges, WarpedGraph, COMPLETE_EDGE_LIMIT};
pub use checks::{
    check_axioms, free_orbit_scan, greatest_metric_check, level_shift_check, random_admissible, AxiomReport,
    FreeOrbitLevel, GreatestMetric, LevelShiftReport, Violation,
};
pub use closed_form::{closed_form_witness, warped_closed_form};

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Chain,
    ClosedForm,
}

impl Engine {
    pub fn tag(self) -> &'static str {
        match self {
            Engine::Chain => "chain",
            Engine::ClosedForm => "closed-form",
        }
    }
}

/// Square matrix of warped distances at one level.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpedDistanceMatrix<S> {
    pub level: S,
    pub n: usize,
    pub values: Vec<S>,
    pub engine: Engine,
    /// Largest word length searched by the closed form.
    pub truncation: Option<u64>,
}

impl<S: Scalar> WarpedDistanceMatrix<S> {
    pub fn get(&self, i: usize, j: usize) -> S {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Largest entrywise difference to another matrix of the same size.
    pub fn max_deviation(&self, other: &Self) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::Validation(format!(
                "matrix sizes {} and {} differ",
                self.n, other.n
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs().to_f64())
            .fold(0.0, f64::max))
    }

    /// Exact (rational) or tolerance (float) entrywise equality.
    pub fn agrees_with(&self, other: &Self) -> bool {
        self.n == other.n && self.values.iter().zip(&other.values).all(|(&a, &b)| a.eq_tol(b))
    }

    /// CSV with a header row of column indices; rationals print as `p/q`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        for j in 0..self.n {
            let _ = write!(out, ",{j}");
        }
        out.push('\n');
        for i in 0..self.n {
            let _ = write!(out, "{i}");
            for v in self.row(i) {
                let _ = write!(out, ",{}", v.render());
            }
            out.push('\n');
        }
        out
    }

    pub fn summary(&self, violations: Vec<Violation>) -> MatrixSummary {
        let off: Vec<f64> = (0..self.n)
            .flat_map(|i| (0..self.n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).to_f64())
            .collect();
        let (min, max, mean) = if off.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            (
                off.iter().copied().fold(f64::INFINITY, f64::min),
                off.iter().copied().fold(0.0, f64::max),
                off.iter().sum::<f64>() / off.len() as f64,
            )
        };
        MatrixSummary {
            n: self.n,
            level: self.level.render(),
            engine: self.engine,
            truncation: self.truncation,
            min_offdiag: min,
            max,
            mean_offdiag: mean,
            violations,
        }
    }
}

/// JSON summary of a distance matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixSummary {
    pub n: usize,
    pub level: String,
    pub engine: Engine,
    pub truncation: Option<u64>,
    pub min_offdiag: f64,
    pub max: f64,
    pub mean_offdiag: f64,
    pub violations: Vec<Violation>,
}

pub(crate) fn cmp_scalar<S: Scalar>(a: S, b: S) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}
