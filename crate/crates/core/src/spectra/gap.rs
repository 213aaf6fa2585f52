//! Averaging operators of level sets and their spectral gaps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::SpaceModel;

pub const ITERATION_CAP: usize = 100_000;
pub const RESIDUAL_TOL: f64 = 1e-10;

/// `A[x, s·x] += 1/|S ∪ S⁻¹|` over the permutation tables of all generators
/// and their inverses.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragingOperator {
    n: usize,
    tables: Vec<Vec<usize>>,
    snapping: f64,
}

impl AveragingOperator {
    pub fn from_model<S: Scalar>(model: &SpaceModel<S>) -> Self {
        Self {
            n: model.len(),
            tables: model.action_tables().to_vec(),
            snapping: model.max_snapping(),
        }
    }

    /// Tables must be permutations of `0..n`; the set is closed under inverses
    /// by adding any inverse that is missing.
    pub fn from_tables(n: usize, tables: Vec<Vec<usize>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Validation(format!("averaging operator needs n >= 2, got {n}")));
        }
        if tables.is_empty() {
            return Err(Error::InvalidGenerators("no permutation tables".into()));
        }
        let mut all = Vec::new();
        for (i, t) in tables.iter().enumerate() {
            let mut seen = vec![false; n];
            if t.len() != n || t.iter().any(|&y| y >= n || std::mem::replace(&mut seen[y], true)) {
                return Err(Error::Validation(format!("table {i} is not a permutation of 0..{n}")));
            }
            all.push(t.clone());
        }
        for t in &tables {
            let mut inv = vec![0; n];
            for (x, &y) in t.iter().enumerate() {
                inv[y] = x;
            }
            if !all.contains(&inv) {
                all.push(inv);
            }
        }
        Ok(Self {
            n,
            tables: all,
            snapping: 0.0,
        })
    }

    /// Two disjoint copies of the same operator.
    pub fn doubled(&self) -> Self {
        let n = self.n;
        let tables = self
            .tables
            .iter()
            .map(|t| t.iter().copied().chain(t.iter().map(|&y| y + n)).collect())
            .collect();
        Self {
            n: 2 * n,
            tables,
            snapping: self.snapping,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn tables(&self) -> &[Vec<usize>] {
        &self.tables
    }

    pub fn snapping(&self) -> f64 {
        self.snapping
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let w = 1.0 / self.tables.len() as f64;
        (0..self.n)
            .map(|x| w * self.tables.iter().map(|t| v[t[x]]).sum::<f64>())
            .collect()
    }

    /// Dense matrix, row `x` holding the weights of `x`'s neighbours.
    pub fn dense(&self) -> nalgebra::DMatrix<f64> {
        let w = 1.0 / self.tables.len() as f64;
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for t in &self.tables {
            for (x, &y) in t.iter().enumerate() {
                m[(x, y)] += w;
            }
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub n: usize,
    /// Largest eigenvalue of `A` on mean-zero functions.
    pub second_eigenvalue: f64,
    /// `1 − λ₂(A)`.
    pub gap: f64,
    /// `1 − λ₂((I + A)/2)`, half of `gap`.
    pub lazy_gap: f64,
    pub iterations: usize,
    pub residual: f64,
    pub snapping: f64,
}

fn project_mean_zero(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Power iteration for `(I + A)/2` on the complement of the constants, with
/// Rayleigh quotients; converged when `‖Mv − μv‖ ≤ 10⁻¹⁰`.
pub fn spectral_gap(op: &AveragingOperator) -> Result<SpectralGap> {
    let n = op.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a9);
    let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    project_mean_zero(&mut v);
    normalize(&mut v);
    let mut residual = f64::INFINITY;
    for it in 1..=ITERATION_CAP {
        let av = op.apply(&v);
        let mut mv: Vec<f64> = v.iter().zip(&av).map(|(a, b)| 0.5 * (a + b)).collect();
        project_mean_zero(&mut mv);
        let mu = v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>();
        residual = v.iter().zip(&mv).map(|(a, b)| (b - mu * a).powi(2)).sum::<f64>().sqrt();
        if residual <= RESIDUAL_TOL {
            let lambda = (2.0 * mu - 1.0).clamp(-1.0, 1.0);
            return Ok(SpectralGap {
                n,
                second_eigenvalue: lambda,
                gap: 1.0 - lambda,
                lazy_gap: 1.0 - mu.clamp(0.0, 1.0),
                iterations: it,
                residual,
                snapping: op.snapping(),
            });
        }
        if normalize(&mut mv) == 0.0 {
            // v lies in the kernel of (I + A)/2, so λ₂ = −1
            return Ok(SpectralGap {
                n,
                second_eigenvalue: -1.0,
                gap: 2.0,
                lazy_gap: 1.0,
                iterations: it,
                residual: 0.0,
                snapping: op.snapping(),
            });
        }
        v = mv;
    }
    Err(Error::NoConvergence {
        iterations: ITERATION_CAP,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapTrend {
    pub labels: Vec<String>,
    pub gaps: Vec<f64>,
    /// Every step strictly decreases.
    pub decreasing: bool,
    /// Every step is within `10⁻¹²` of the previous value.
    pub constant: bool,
    /// Least-squares slope of `gap` against the step index.
    pub slope: f64,
    pub min_gap: f64,
    pub max_gap: f64,
}

/// Gap series over at least three levels of a family.
pub fn gap_trend(labels: &[String], gaps: &[f64]) -> Result<GapTrend> {
    if gaps.len() < 3 || labels.len() != gaps.len() {
        return Err(Error::Validation(format!(
            "gap trend needs at least 3 labelled levels, got {} gaps and {} labels",
            gaps.len(),
            labels.len()
        )));
    }
    let m = gaps.len() as f64;
    let xbar = (m - 1.0) / 2.0;
    let ybar = gaps.iter().sum::<f64>() / m;
    let (num, den) = gaps.iter().enumerate().fold((0.0, 0.0), |(num, den), (i, &g)| {
        let dx = i as f64 - xbar;
        (num + dx * (g - ybar), den + dx * dx)
    });
    Ok(GapTrend {
        labels: labels.to_vec(),
        gaps: gaps.to_vec(),
        decreasing: gaps.windows(2).all(|w| w[1] < w[0]),
        constant: gaps.windows(2).all(|w| (w[1] - w[0]).abs() <= 1e-12),
        slope: num / den,
        min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn cycle(n: usize) -> AveragingOperator {
        AveragingOperator::from_tables(n, vec![(0..n).map(|x| (x + 1) % n).collect()]).unwrap()
    }

    #[test]
    fn swap_of_two_points() {
        let op = AveragingOperator::from_tables(2, vec![vec![1, 0]]).unwrap();
        let g = spectral_gap(&op).unwrap();
        assert!((g.second_eigenvalue + 1.0).abs() < 1e-12);
        assert!((g.lazy_gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_of_eight_matches_dense_eigensolve() {
        let op = cycle(8);
        let dense = SymmetricEigen::new(op.dense());
        let mut eig: Vec<f64> = dense.eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let g = spectral_gap(&op).unwrap();
        assert!((g.second_eigenvalue - eig[1]).abs() < 1e-9);
        assert!((g.gap - (1.0 - 0.5f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn disjoint_union_has_no_gap() {
        let g = spectral_gap(&cycle(6).doubled()).unwrap();
        assert!(g.gap.abs() < 1e-9);
    }

    #[test]
    fn relabelling_leaves_the_gap_unchanged() {
        let n = 12;
        let perm: Vec<usize> = (0..n).map(|x| (5 * x + 3) % n).collect();
        let base: Vec<usize> = (0..n).map(|x| (x + 1) % n).collect();
        let mut relabelled = vec![0; n];
        for x in 0..n {
            relabelled[perm[x]] = perm[base[x]];
        }
        let a = spectral_gap(&AveragingOperator::from_tables(n, vec![base]).unwrap()).unwrap();
        let b = spectral_gap(&AveragingOperator::from_tables(n, vec![relabelled]).unwrap()).unwrap();
        assert!((a.gap - b.gap).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_permutation() {
        assert!(AveragingOperator::from_tables(3, vec![vec![0, 0, 1]]).is_err());
    }

    #[test]
    fn trend_statistics() {
        let labels: Vec<String> = (0..3).map(|i| i.to_string()).collect();
        let t = gap_trend(&labels, &[0.5, 0.3, 0.1]).unwrap();
        assert!(t.decreasing && !t.constant);
        assert!((t.slope + 0.2).abs() < 1e-12);
        let c = gap_trend(&labels, &[0.2; 3]).unwrap();
        assert!(c.constant && !c.decreasing);
        assert!(gap_trend(&labels[..2], &[0.1, 0.2]).is_err());
    }
}
