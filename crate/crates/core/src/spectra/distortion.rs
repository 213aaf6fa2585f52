//! Certified lower bounds and optimized upper bounds for the distortion of
//! embeddings of finite metrics into `ℓ_p`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gap::{spectral_gap, AveragingOperator};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::warp::WarpedDistanceMatrix;

/// Finite (pseudo)metric as a symmetric row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricMatrix {
    n: usize,
    values: Vec<f64>,
}

impl MetricMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Validation(format!("{} entries for {n} points", values.len())));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::Validation(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let (a, b) = (values[i * n + j], values[j * n + i]);
                if !(a >= 0.0) || !a.is_finite() || (a - b).abs() > 1e-12 * a.max(1.0) {
                    return Err(Error::Validation(format!("entry ({i}, {j}) is negative or asymmetric")));
                }
            }
        }
        Ok(Self { n, values })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(n, (0..n * n).map(|k| f(k / n, k % n)).collect())
    }

    pub fn from_warped<S: Scalar>(w: &WarpedDistanceMatrix<S>) -> Self {
        Self {
            n: w.n,
            values: w.values.iter().map(|v| v.to_f64()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    fn positive_pairs(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let d = self.get(i, j);
                (d > 0.0).then_some((i, j, d))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum LowerBound {
    Certified {
        value: f64,
        gap: f64,
        /// Mean of `d(x, y)²` over all ordered pairs.
        pair_mean_sq: f64,
        /// Mean of `d(x, s·x)²` over points and generator tables.
        edge_mean_sq: f64,
    },
    Uninformative {
        reason: String,
    },
}

impl LowerBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            LowerBound::Certified { value, .. } => Some(*value),
            LowerBound::Uninformative { .. } => None,
        }
    }
}

/// Poincaré bound for embeddings into Hilbert space.
///
/// For `f` with `d ≤ ‖f(x) − f(y)‖ ≤ D·d`, the variance form of the gap
/// `λ` of the averaging operator gives
/// `mean_{x,y} ‖f(x) − f(y)‖² ≤ λ⁻¹ mean_{x,s} ‖f(x) − f(sx)‖²`,
/// hence `D² ≥ λ · mean_{x,y} d² / mean_{x,s} d(x, sx)²`.
pub fn distortion_lower_bound(metric: &MetricMatrix, op: &AveragingOperator, p: f64) -> Result<LowerBound> {
    if op.len() != metric.len() {
        return Err(Error::Contract(format!(
            "operator on {} points, metric on {}",
            op.len(),
            metric.len()
        )));
    }
    if p != 2.0 {
        return Ok(LowerBound::Uninformative {
            reason: format!("the spectral bound is only derived for p = 2, not {p}"),
        });
    }
    let n = metric.len();
    let pair_mean_sq = metric.values.iter().map(|d| d * d).sum::<f64>() / (n * n) as f64;
    let edge_mean_sq = op
        .tables()
        .iter()
        .flat_map(|t| t.iter().enumerate().map(|(x, &y)| metric.get(x, y).powi(2)))
        .sum::<f64>()
        / (n * op.tables().len()) as f64;
    let gap = spectral_gap(op)?.gap;
    // margin for the eigensolver residual
    let certified_gap = gap - 1e-9;
    if pair_mean_sq == 0.0 {
        return Ok(LowerBound::Certified {
            value: 1.0,
            gap,
            pair_mean_sq,
            edge_mean_sq,
        });
    }
    if certified_gap <= 0.0 {
        return Ok(LowerBound::Uninformative {
            reason: format!("spectral gap {gap:e} is not positive"),
        });
    }
    if edge_mean_sq == 0.0 {
        return Ok(LowerBound::Uninformative {
            reason: "every generator edge has length 0".into(),
        });
    }
    Ok(LowerBound::Certified {
        value: (certified_gap * pair_mean_sq / edge_mean_sq).sqrt().max(1.0),
        gap,
        pair_mean_sq,
        edge_mean_sq,
    })
}

fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `max ratio / min ratio` of embedded over metric distances, over pairs at
/// positive distance; 1 when there are none.
pub fn distortion_of(metric: &MetricMatrix, coords: &[Vec<f64>], p: f64) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut diff = vec![0.0; coords.first().map_or(0, Vec::len)];
    for (i, j, d) in metric.positive_pairs() {
        for (k, slot) in diff.iter_mut().enumerate() {
            *slot = coords[i][k] - coords[j][k];
        }
        let r = lp_norm(&diff, p) / d;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if hi == 0.0 && lo.is_infinite() {
        1.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Classical multidimensional scaling into `dim` coordinates.
pub fn classical_mds(metric: &MetricMatrix, dim: usize) -> Vec<Vec<f64>> {
    let n = metric.len();
    let sq = DMatrix::from_fn(n, n, |i, j| metric.get(i, j).powi(2));
    let row: Vec<f64> = (0..n).map(|i| sq.row(i).mean()).collect();
    let all = sq.mean();
    let b = DMatrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row[i] - row[j] + all));
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    (0..n)
        .map(|i| {
            (0..dim)
                .map(|k| match order.get(k) {
                    Some(&c) if eig.eigenvalues[c] > 0.0 => eig.eigenvectors[(i, c)] * eig.eigenvalues[c].sqrt(),
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Embedding dimension; `min(n − 1, 16)` when absent.
    pub dim: Option<usize>,
    pub p: f64,
    pub starts: usize,
    pub seed: u64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub initial_temperature: f64,
    pub final_temperature: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            dim: None,
            p: 2.0,
            starts: 4,
            seed: 0,
            iterations: 3000,
            learning_rate: 0.02,
            initial_temperature: 0.3,
            final_temperature: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub dim: usize,
    pub seed: u64,
    pub distortion: f64,
    pub coords: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    pub best: Embedding,
    /// `(seed, distortion)` of every start.
    pub starts: Vec<(u64, f64)>,
}

/// Smooth-max of `|log(‖f(x) − f(y)‖_p / d(x, y))|` spread, minimized by Adam
/// from a classical-scaling start (perturbed for every start after the
/// first) while the temperature anneals geometrically. The reported
/// distortion is exact for the best iterate seen.
pub fn distortion_upper_bound(metric: &MetricMatrix, config: &OptimizerConfig) -> Result<UpperBound> {
    let n = metric.len();
    if n == 0 {
        return Err(Error::Validation("empty metric".into()));
    }
    if !(config.p >= 1.0) {
        return Err(Error::Validation(format!("exponent p = {} < 1", config.p)));
    }
    let dim = config.dim.unwrap_or_else(|| n.saturating_sub(1).clamp(1, 16));
    if dim == 0 {
        return Err(Error::Validation("embedding dimension must be at least 1".into()));
    }
    let pairs = metric.positive_pairs();
    let scale = if pairs.is_empty() {
        1.0
    } else {
        pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64
    };
    // drop the low mantissa bits so that rescaled inputs give bitwise equal
    // unit metrics and hence identical optimizer runs
    let unit = MetricMatrix {
        n,
        values: metric
            .values
            .iter()
            .map(|v| f64::from_bits((v / scale).to_bits() & !0xfff))
            .collect(),
    };
    let start = classical_mds(&unit, dim);
    let seeds: Vec<u64> = (0..config.starts.max(1) as u64)
        .map(|k| config.seed.wrapping_add(k))
        .collect();
    let results: Vec<Embedding> = seeds
        .par_iter()
        .enumerate()
        .map(|(k, &seed)| {
            let mut coords = start.clone();
            if k > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for row in &mut coords {
                    for c in row.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *c += 0.3 * z;
                    }
                }
            }
            let coords = optimize(&unit, coords, config);
            let distortion = distortion_of(&unit, &coords, config.p);
            Embedding {
                dim,
                seed,
                distortion,
                coords: coords
                    .into_iter()
                    .map(|r| r.into_iter().map(|c| c * scale).collect())
                    .collect(),
            }
        })
        .collect();
    let starts = results.iter().map(|e| (e.seed, e.distortion)).collect();
    let best = results
        .into_iter()
        .min_by(|a, b| a.distortion.total_cmp(&b.distortion).then(a.seed.cmp(&b.seed)))
        .expect("at least one start");
    Ok(UpperBound { best, starts })
}

fn optimize(metric: &MetricMatrix, start: Vec<Vec<f64>>, config: &OptimizerConfig) -> Vec<Vec<f64>> {
    let pairs = metric.positive_pairs();
    let mut best = start.clone();
    let mut best_value = distortion_of(metric, &start, config.p);
    if pairs.is_empty() || best_value <= 1.0 + 1e-12 {
        return best;
    }
    let n = start.len();
    let dim = start[0].len();
    let p = config.p;
    let mut x = start;
    let mut m = vec![vec![0.0; dim]; n];
    let mut v = vec![vec![0.0; dim]; n];
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-12);
    let iters = config.iterations.max(1);
    let decay = (config.final_temperature / config.initial_temperature).powf(1.0 / iters as f64);
    let mut temp = config.initial_temperature;
    let mut logs = vec![0.0; pairs.len()];
    let mut diff = vec![0.0; dim];
    for it in 1..=iters {
        for (slot, &(i, j, d)) in logs.iter_mut().zip(&pairs) {
            for k in 0..dim {
                diff[k] = x[i][k] - x[j][k];
            }
            *slot = (lp_norm(&diff, p).max(1e-300) / d).ln();
        }
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let wp: Vec<f64> = logs.iter().map(|l| ((l - hi) / temp).exp()).collect();
        let wm: Vec<f64> = logs.iter().map(|l| ((lo - l) / temp).exp()).collect();
        let (sp, sm) = (wp.iter().sum::<f64>(), wm.iter().sum::<f64>());
        let mut grad = vec![vec![0.0; dim]; n];
        for (idx, &(i, j, _)) in pairs.iter().enumerate() {
            let w = wp[idx] / sp - wm[idx] / sm;
            if w == 0.0 {
                continue;
            }
            for k in 0..dim {
                diff[k] = x[i][k] - x[j][k];
            }
            let norm = lp_norm(&diff, p).max(1e-300);
            for k in 0..dim {
                // ∂ log‖v‖_p / ∂v_k
                let g = diff[k].signum() * (diff[k].abs() / norm).powf(p - 1.0) / norm;
                grad[i][k] += w * g;
                grad[j][k] -= w * g;
            }
        }
        let (c1, c2) = (1.0 - b1.powi(it as i32), 1.0 - b2.powi(it as i32));
        let lr = config.learning_rate * (1.0 - 0.9 * it as f64 / iters as f64);
        for i in 0..n {
            for k in 0..dim {
                let g = grad[i][k];
                m[i][k] = b1 * m[i][k] + (1.0 - b1) * g;
                v[i][k] = b2 * v[i][k] + (1.0 - b2) * g * g;
                x[i][k] -= lr * (m[i][k] / c1) / ((v[i][k] / c2).sqrt() + eps);
            }
        }
        temp *= decay;
        if it % 25 == 0 || it == iters {
            let value = distortion_of(metric, &x, p);
            if value < best_value {
                best_value = value;
                best = x.clone();
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub instance: String,
    pub p: f64,
    pub dim: usize,
    pub lower: LowerBound,
    pub upper: f64,
    pub best_seed: u64,
    pub starts: Vec<(u64, f64)>,
    /// `lower ≤ upper` (vacuous when the lower bound is uninformative).
    pub certified: bool,
}

pub fn distortion_report(
    instance: &str,
    metric: &MetricMatrix,
    op: &AveragingOperator,
    config: &OptimizerConfig,
) -> Result<DistortionReport> {
    let lower = distortion_lower_bound(metric, op, config.p)?;
    let upper = distortion_upper_bound(metric, config)?;
    let certified = lower.value().is_none_or(|l| l <= upper.best.distortion + 1e-9);
    Ok(DistortionReport {
        instance: instance.to_string(),
        p: config.p,
        dim: upper.best.dim,
        lower,
        upper: upper.best.distortion,
        best_seed: upper.best.seed,
        starts: upper.starts,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> (MetricMatrix, AveragingOperator) {
        let metric = MetricMatrix::from_fn(n, |i, j| {
            let d = i.abs_diff(j);
            d.min(n - d) as f64
        })
        .unwrap();
        let op = AveragingOperator::from_tables(n, vec![(0..n).map(|x| (x + 1) % n).collect()]).unwrap();
        (metric, op)
    }

    #[test]
    fn equilateral_triangle_is_isometric_in_the_plane() {
        let m = MetricMatrix::from_fn(3, |i, j| if i == j { 0.0 } else { 1.0 }).unwrap();
        let cfg = OptimizerConfig {
            dim: Some(2),
            ..Default::default()
        };
        let up = distortion_upper_bound(&m, &cfg).unwrap();
        assert!((up.best.distortion - 1.0).abs() < 1e-6);
    }

    #[test]
    fn path_embeds_on_a_line() {
        let m = MetricMatrix::from_fn(4, |i, j| i.abs_diff(j) as f64).unwrap();
        let cfg = OptimizerConfig {
            dim: Some(1),
            ..Default::default()
        };
        assert!((distortion_upper_bound(&m, &cfg).unwrap().best.distortion - 1.0).abs() < 1e-9);
    }

    #[test]
    fn four_cycle_bounds() {
        let (m, op) = cycle(4);
        let cfg = OptimizerConfig {
            dim: Some(2),
            ..Default::default()
        };
        let report = distortion_report("c4", &m, &op, &cfg).unwrap();
        assert!((report.upper - 2f64.sqrt()).abs() < 1e-3, "{report:?}");
        let lower = report.lower.value().unwrap();
        assert!(lower <= 2f64.sqrt());
        assert!(report.certified);
    }

    #[test]
    fn repeated_point_has_bound_one() {
        let m = MetricMatrix::new(3, vec![0.0; 9]).unwrap();
        let op = AveragingOperator::from_tables(3, vec![vec![1, 2, 0]]).unwrap();
        assert_eq!(distortion_lower_bound(&m, &op, 2.0).unwrap().value(), Some(1.0));
        assert_eq!(
            distortion_upper_bound(&m, &OptimizerConfig::default())
                .unwrap()
                .best
                .distortion,
            1.0
        );
    }

    #[test]
    fn bounds_are_scale_invariant() {
        let (m, op) = cycle(7);
        let cfg = OptimizerConfig {
            iterations: 400,
            ..Default::default()
        };
        let a = distortion_report("c7", &m, &op, &cfg).unwrap();
        let b = distortion_report("c7", &m.scaled(3.7), &op, &cfg).unwrap();
        assert!((a.lower.value().unwrap() - b.lower.value().unwrap()).abs() < 1e-9);
        assert!((a.upper - b.upper).abs() < 1e-9);
        assert!(a.certified);
    }

    #[test]
    fn disconnected_operator_is_uninformative() {
        let (m, op) = cycle(4);
        let doubled = op.doubled();
        let m8 = MetricMatrix::from_fn(8, |i, j| if i / 4 == j / 4 { m.get(i % 4, j % 4) } else { 5.0 }).unwrap();
        assert!(matches!(
            distortion_lower_bound(&m8, &doubled, 2.0).unwrap(),
            LowerBound::Uninformative { .. }
        ));
    }
}
