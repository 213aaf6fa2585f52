//! ℤ^k acting by translation on the finite quotient `Γ/Γ_N` of a profinite
//! completion, with the exact tower max-metric.

use num_traits::Zero;

use super::{Isometry, ModelKind, Points, SpaceModel};
use crate::error::{Error, Result};
use crate::group::QuotientTower;
use crate::scalar::{Rational, Scalar};

fn index_of(residues: &[i64], m: i64) -> usize {
    residues.iter().fold(0usize, |acc, &r| acc * m as usize + r as usize)
}

fn residues_of(mut index: usize, m: usize, rank: usize) -> Vec<i64> {
    let mut out = vec![0i64; rank];
    for slot in out.iter_mut().rev() {
        *slot = (index % m) as i64;
        index /= m;
    }
    out
}

/// All of `Γ/Γ_N` (`N = depth`), identity at index 0, lexicographic order.
pub fn build_profinite_model(
    tower: &QuotientTower,
    depth: usize,
    t: Rational,
    cap: usize,
) -> Result<SpaceModel<Rational>> {
    if depth == 0 || depth > tower.depth() {
        return Err(Error::InvalidTower(format!(
            "depth {depth} outside 1..={}",
            tower.depth()
        )));
    }
    if t < Rational::from_integer(1) {
        return Err(Error::Validation(format!("level {t} < 1")));
    }
    let rank = tower.rank();
    let m = tower.moduli()[depth - 1] as usize;
    let n = (m as u128).checked_pow(rank as u32).unwrap_or(u128::MAX);
    if n > cap as u128 {
        return Err(Error::CapExceeded {
            what: "profinite quotient",
            needed: n.min(usize::MAX as u128) as usize,
            cap,
        });
    }
    let n = n as usize;
    let points: Vec<Vec<i64>> = (0..n).map(|i| residues_of(i, m, rank)).collect();

    let scales = &tower.scales()[..depth];
    let mut unit = vec![Rational::zero(); n * n];
    let mut diff = vec![0i64; rank];
    for i in 0..n {
        for j in 0..i {
            for (d, (a, b)) in diff.iter_mut().zip(points[i].iter().zip(&points[j])) {
                *d = a - b;
            }
            let d = scales
                .iter()
                .enumerate()
                .map(|(lvl, &a)| a * Rational::from_integer(tower.level_length(lvl + 1, &diff) as i128))
                .max()
                .expect("depth >= 1");
            unit[i * n + j] = d;
            unit[j * n + i] = d;
        }
    }

    let group = tower.base_group();
    let mut actions = Vec::with_capacity(2 * rank);
    for axis in 0..rank {
        for sign in [1i64, -1] {
            actions.push(
                points
                    .iter()
                    .map(|p| {
                        let mut q = p.clone();
                        q[axis] = (q[axis] + sign).rem_euclid(m as i64);
                        index_of(&q, m as i64)
                    })
                    .collect(),
            );
        }
    }
    let epsilon = Scalar::to_f64(t * scales[depth - 1]);
    SpaceModel::from_parts(
        ModelKind::Profinite {
            tower: tower.clone(),
            depth,
        },
        group,
        Points::Residues(points),
        unit,
        t,
        epsilon,
        actions,
        vec![0.0; 2 * rank],
        Isometry::Exact,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::tower_metric;

    #[test]
    fn matches_tower_metric_and_translation_is_exact() {
        let tower = QuotientTower::dyadic(2, 3).unwrap();
        let m = build_profinite_model(&tower, 3, Rational::from_integer(3), 10_000).unwrap();
        assert_eq!(m.len(), 64);
        let Points::Residues(points) = m.points().clone() else {
            unreachable!()
        };
        for i in 0..m.len() {
            for j in 0..m.len() {
                let g = tower.element_from_top(&points[i], 3);
                let h = tower.element_from_top(&points[j], 3);
                assert_eq!(m.unit_distance(i, j), tower_metric(&g, &h, &tower, 3).unwrap());
            }
        }
        assert_eq!(m.isometry_defect(), 0.0);
        assert_eq!(m.distance(0, 1), Rational::from_integer(3) * m.unit_distance(0, 1));
    }

    #[test]
    fn cap_is_enforced() {
        let tower = QuotientTower::dyadic(3, 4).unwrap();
        assert!(matches!(
            build_profinite_model(&tower, 4, Rational::from_integer(1), 1000),
            Err(Error::CapExceeded { .. })
        ));
    }
}
