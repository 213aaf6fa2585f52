//! ℤ acting on the circle by an irrational rotation, on a uniform net.

use std::f64::consts::TAU;

use super::{Isometry, ModelKind, Points, SpaceModel};
use crate::error::{Error, Result};
use crate::group::Group;

/// Default rotation number `(√5 − 1)/2`.
pub fn golden_alpha() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Arc distance between two angles.
pub(crate) fn arc(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Uniform net of `⌈2πt/ε⌉` points; the rotation by `2πα` is snapped to the
/// nearest multiple of the net step, so the model action is an exact isometry.
pub fn build_circle_model(alpha: f64, t: f64, epsilon: f64, cap: usize) -> Result<SpaceModel<f64>> {
    if !(t >= 1.0) || !t.is_finite() {
        return Err(Error::Validation(format!("level {t} < 1")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Validation(format!("epsilon {epsilon} must be positive")));
    }
    if !alpha.is_finite() {
        return Err(Error::Validation("rotation number must be finite".into()));
    }
    let n = (TAU * t / epsilon).ceil() as usize;
    if n > cap {
        return Err(Error::CapExceeded {
            what: "circle net",
            needed: n,
            cap,
        });
    }
    let n = n.max(1);
    let angles: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
    let shift = (alpha.rem_euclid(1.0) * n as f64).round() as usize % n;
    let mut unit = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let k = i.abs_diff(j);
            unit.push(TAU * k.min(n - k) as f64 / n as f64);
        }
    }
    let forward: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
    let backward: Vec<usize> = (0..n).map(|i| (i + n - shift) % n).collect();
    let snap = arc(TAU * alpha, TAU * shift as f64 / n as f64);
    SpaceModel::from_parts(
        ModelKind::Circle { alpha, shift },
        Group::integers(),
        Points::Angles(angles),
        unit,
        t,
        t * TAU / n as f64,
        vec![forward, backward],
        vec![snap, snap],
        Isometry::Exact,
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::validate_net;

    #[test]
    fn net_size_and_rotation() {
        let m = build_circle_model(golden_alpha(), 10.0, 0.5, 10_000).unwrap();
        assert_eq!(m.len(), (TAU * 20.0).ceil() as usize);
        assert_eq!(m.isometry_defect(), 0.0);
        let step = TAU / m.len() as f64;
        assert!(m.max_snapping() <= step / 2.0 + 1e-12);
        assert!(validate_net(&m, 500, 1).ok);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_circle_model(0.3, 0.5, 0.1, 100).is_err());
        assert!(matches!(
            build_circle_model(0.3, 1000.0, 0.01, 100),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn linear_action_matches_net_rotation() {
        let m = build_circle_model(golden_alpha(), 2.0, 0.3, 1000).unwrap();
        let g = m.group().reduce("a a A a").unwrap();
        for x in 0..m.len() {
            let v = m.apply_linear(&g, &m.coordinates(x));
            let w = m.coordinates(m.act_element(&g, x));
            assert!(v.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }
}
