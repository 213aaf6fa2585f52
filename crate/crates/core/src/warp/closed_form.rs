use std::collections::VecDeque;

use rayon::prelude::*;

use super::{Engine, WarpedDistanceMatrix};
use crate::error::{Error, Result};
use crate::group::{GroupElement, DEFAULT_BALL_CAP};
use crate::scalar::Scalar;
use crate::space::{Isometry, SpaceModel};

fn require_isometric<S: Scalar>(model: &SpaceModel<S>) -> Result<()> {
    match model.isometry() {
        Isometry::Exact => Ok(()),
        Isometry::Approximate { defect } => Err(Error::Contract(format!(
            "closed form needs an isometric action (defect {defect:e}); use warped_chain"
        ))),
    }
}

/// Schreier-graph word distances from `x`, up to `depth`.
fn orbit_depths<S: Scalar>(model: &SpaceModel<S>, x: usize, depth: u64) -> Vec<Option<u64>> {
    let mut reach = vec![None; model.len()];
    reach[x] = Some(0);
    let mut queue = VecDeque::from([x]);
    while let Some(y) = queue.pop_front() {
        let d = reach[y].expect("queued");
        if d == depth {
            continue;
        }
        for table in model.action_tables() {
            let z = table[y];
            if reach[z].is_none() {
                reach[z] = Some(d + 1);
                queue.push_back(z);
            }
        }
    }
    reach
}

/// `δ(x, x') = min_γ |γ| + d(γx, x')` over `|γ| ≤ ⌈max_{x'} d(x, x')⌉`.
pub fn warped_closed_form<S: Scalar>(model: &SpaceModel<S>) -> Result<WarpedDistanceMatrix<S>> {
    require_isometric(model)?;
    let n = model.len();
    let rows: Vec<(Vec<S>, u64)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let depth = (0..n)
                .map(|y| model.distance(x, y))
                .fold(S::zero(), S::max_of)
                .ceil_u64();
            let reach = orbit_depths(model, x, depth);
            let row = (0..n)
                .map(|x2| {
                    reach
                        .iter()
                        .enumerate()
                        .filter_map(|(y, r)| r.map(|len| S::from_int(len as i64) + model.distance(y, x2)))
                        .fold(model.distance(x, x2), S::min_of)
                })
                .collect();
            (row, depth)
        })
        .collect();
    let truncation = rows.iter().map(|r| r.1).max();
    Ok(WarpedDistanceMatrix {
        level: model.level(),
        n,
        values: rows.into_iter().flat_map(|r| r.0).collect(),
        engine: Engine::ClosedForm,
        truncation,
    })
}

/// Closed-form value for one pair with the shortlex-least minimizing `γ`.
pub fn closed_form_witness<S: Scalar>(model: &SpaceModel<S>, x: usize, x2: usize) -> Result<(S, GroupElement)> {
    require_isometric(model)?;
    let bound = model.distance(x, x2).ceil_u64() as usize;
    let mut best = (model.distance(x, x2), model.group().identity());
    for g in model.group().closed_ball(bound, DEFAULT_BALL_CAP)? {
        let value = S::from_int(g.len() as i64) + model.distance(model.act_element(&g, x), x2);
        if value < best.0 && !value.eq_tol(best.0) {
            best = (value, g);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::QuotientTower;
    use crate::scalar::Rational;
    use crate::space::{build_circle_model, build_profinite_model, build_su2_model, default_generators, golden_alpha};
    use crate::warp::warped_chain;

    #[test]
    fn generator_neighbour_at_high_level_is_one() {
        let tower = QuotientTower::dyadic(1, 3).unwrap();
        let model = build_profinite_model(&tower, 3, Rational::from_integer(64), 100).unwrap();
        let w = warped_closed_form(&model).unwrap();
        for x in 0..model.len() {
            assert_eq!(w.get(x, model.act(0, x)), Rational::from_integer(1));
        }
    }

    #[test]
    fn agrees_with_chain_on_profinite() {
        let tower = QuotientTower::dyadic(1, 4).unwrap();
        for t in [2, 4, 8, 16] {
            let model = build_profinite_model(&tower, 4, Rational::from_integer(t), 100).unwrap();
            assert_eq!(
                warped_closed_form(&model).unwrap().values,
                warped_chain(&model).unwrap().values
            );
        }
    }

    #[test]
    fn agrees_with_chain_on_circle() {
        let model = build_circle_model(golden_alpha(), 6.0, 0.3, 10_000).unwrap();
        let a = warped_closed_form(&model).unwrap();
        let b = warped_chain(&model).unwrap();
        assert!(a.max_deviation(&b).unwrap() <= 2.0 * model.max_snapping() * 6.0 + 1e-9);
    }

    #[test]
    fn witness_is_shortlex_least() {
        let tower = QuotientTower::dyadic(1, 3).unwrap();
        let model = build_profinite_model(&tower, 3, Rational::from_integer(8), 100).unwrap();
        let (v, g) = closed_form_witness(&model, 0, 4).unwrap();
        // γ = e and a⁴ both attain 4; the identity sorts first
        assert_eq!(v, Rational::from_integer(4));
        assert!(g.is_identity());
        let (v, g) = closed_form_witness(&model, 0, 7).unwrap();
        assert_eq!(v, warped_closed_form(&model).unwrap().get(0, 7));
        assert_eq!(model.group().format(&g), "A");
    }

    #[test]
    fn refuses_non_isometric_models() {
        let model = build_su2_model(&default_generators(), 1.0, 30, 1).unwrap();
        assert!(matches!(warped_closed_form(&model), Err(Error::Contract(_))));
    }
}
