//! Free groups acting on SU(2) ≅ S³ by left multiplication, on a
//! farthest-point net with bijectively snapped generator maps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Isometry, ModelKind, Points, SpaceModel};
use crate::error::{Error, Result};
use crate::group::Group;

/// Unit quaternion `(w, x, y, z)`.
pub type Quaternion = [f64; 4];

const UNIT_TOL: f64 = 1e-12;
const CANDIDATES: usize = 24;

pub fn quat_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub(crate) fn conj(q: Quaternion) -> Quaternion {
    [q[0], -q[1], -q[2], -q[3]]
}

fn dot(a: Quaternion, b: Quaternion) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

/// Bi-invariant distance `arccos ⟨p, q⟩` on S³.
pub fn su2_distance(p: Quaternion, q: Quaternion) -> f64 {
    dot(p, q).clamp(-1.0, 1.0).acos()
}

pub(crate) fn random_unit(rng: &mut ChaCha8Rng) -> Quaternion {
    loop {
        let q: Quaternion = std::array::from_fn(|_| rng.sample(StandardNormal));
        let norm = dot(q, q).sqrt();
        if norm > 1e-6 {
            return q.map(|c| c / norm);
        }
    }
}

/// Farthest-point sampling of `n` points from a seeded uniform pool.
fn farthest_points(n: usize, pool_size: usize, rng: &mut ChaCha8Rng) -> Vec<Quaternion> {
    let pool: Vec<Quaternion> = (0..pool_size).map(|_| random_unit(rng)).collect();
    let mut chosen = vec![pool[0]];
    let mut gap: Vec<f64> = pool.iter().map(|&p| su2_distance(p, pool[0])).collect();
    while chosen.len() < n {
        let (best, _) = gap.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc },
        );
        let q = pool[best];
        chosen.push(q);
        for (g, &p) in gap.iter_mut().zip(&pool) {
            *g = g.min(su2_distance(p, q));
        }
    }
    chosen
}

/// Maximum matching of the bipartite graph `adj` (left `i`, right `j`),
/// grown from `seed` by Hopcroft–Karp phases.
fn hopcroft_karp(adj: &[Vec<usize>], n: usize, seed: Vec<usize>) -> (Vec<usize>, usize) {
    const NONE: usize = usize::MAX;
    let mut left = seed;
    let mut right = vec![NONE; n];
    for (i, &j) in left.iter().enumerate() {
        if j != NONE {
            right[j] = i;
        }
    }
    let mut size = left.iter().filter(|&&j| j != NONE).count();
    let mut dist = vec![0usize; adj.len()];
    loop {
        let mut queue = std::collections::VecDeque::new();
        let mut found = false;
        for i in 0..adj.len() {
            if left[i] == NONE {
                dist[i] = 0;
                queue.push_back(i);
            } else {
                dist[i] = NONE;
            }
        }
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                match right[j] {
                    NONE => found = true,
                    k if dist[k] == NONE => {
                        dist[k] = dist[i] + 1;
                        queue.push_back(k);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            return (left, size);
        }
        fn augment(i: usize, adj: &[Vec<usize>], left: &mut [usize], right: &mut [usize], dist: &mut [usize]) -> bool {
            for &j in &adj[i] {
                let k = right[j];
                if k == usize::MAX || (dist[k] == dist[i] + 1 && augment(k, adj, left, right, dist)) {
                    left[i] = j;
                    right[j] = i;
                    return true;
                }
            }
            dist[i] = usize::MAX;
            false
        }
        for i in 0..adj.len() {
            if left[i] == NONE && augment(i, adj, &mut left, &mut right, &mut dist) {
                size += 1;
            }
        }
    }
}

/// Bijection `i ↦ π(i)` with `q_{π(i)}` close to `s · q_i`, minimizing the
/// largest displacement over the nearest candidates (greedy start, then
/// augmenting paths); nearest free point for whatever is left if no perfect
/// matching exists among the candidates.
fn snap_bijection(net: &[Quaternion], s: Quaternion) -> (Vec<usize>, f64) {
    let n = net.len();
    let images: Vec<Quaternion> = net.iter().map(|&q| quat_mul(s, q)).collect();
    let k = CANDIDATES.min(n);
    let candidates: Vec<Vec<(f64, usize)>> = images
        .iter()
        .map(|&p| {
            let mut row: Vec<(f64, usize)> = net.iter().enumerate().map(|(j, &q)| (su2_distance(p, q), j)).collect();
            row.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite"));
            row.truncate(k);
            row.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            row
        })
        .collect();
    let mut edges: Vec<(f64, usize, usize)> = candidates
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(d, j)| (d, i, j)))
        .collect();
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite"));

    let matching_below = |threshold: f64| {
        let mut seed = vec![usize::MAX; n];
        let mut taken = vec![false; n];
        for &(d, i, j) in &edges {
            if d > threshold {
                break;
            }
            if seed[i] == usize::MAX && !taken[j] {
                seed[i] = j;
                taken[j] = true;
            }
        }
        let adj: Vec<Vec<usize>> = candidates
            .iter()
            .map(|row| row.iter().take_while(|e| e.0 <= threshold).map(|e| e.1).collect())
            .collect();
        hopcroft_karp(&adj, n, seed)
    };

    let (mut lo, mut hi) = (0, edges.len() - 1);
    let (mut target, size) = matching_below(edges[hi].0);
    if size == n {
        while lo < hi {
            let mid = (lo + hi) / 2;
            let (m, size) = matching_below(edges[mid].0);
            if size == n {
                hi = mid;
                target = m;
            } else {
                lo = mid + 1;
            }
        }
    } else {
        let mut taken = vec![false; n];
        for &j in target.iter().filter(|&&j| j != usize::MAX) {
            taken[j] = true;
        }
        for i in 0..n {
            if target[i] == usize::MAX {
                let j = (0..n)
                    .filter(|&j| !taken[j])
                    .min_by(|&a, &b| {
                        su2_distance(images[i], net[a])
                            .partial_cmp(&su2_distance(images[i], net[b]))
                            .expect("finite")
                    })
                    .expect("a free point remains");
                target[i] = j;
                taken[j] = true;
            }
        }
    }
    let snap = (0..n)
        .map(|i| su2_distance(images[i], net[target[i]]))
        .fold(0.0, f64::max);
    (target, snap)
}

/// Model of `F_k` acting on SU(2) through `generators`, on an `n`-point net.
pub fn build_su2_model(generators: &[Quaternion], t: f64, n: usize, seed: u64) -> Result<SpaceModel<f64>> {
    if generators.is_empty() {
        return Err(Error::InvalidGenerators("need at least one SU(2) generator".into()));
    }
    for (i, q) in generators.iter().enumerate() {
        let norm = dot(*q, *q).sqrt();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(Error::Validation(format!(
                "generator {i} has norm {norm}, not a unit quaternion"
            )));
        }
    }
    if !(t >= 1.0) {
        return Err(Error::Validation(format!("level {t} < 1")));
    }
    if n < 2 {
        return Err(Error::Validation("SU(2) net needs at least 2 points".into()));
    }
    let group = Group::free(generators.len())?;
    let pool_size = (16 * n).max(4000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = farthest_points(n, pool_size, &mut rng);

    let mut unit = Vec::with_capacity(n * n);
    let mut separation = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 0.0 } else { su2_distance(net[i], net[j]) };
            if i != j {
                separation = separation.min(d);
            }
            unit.push(d);
        }
    }
    let covering = (0..2000)
        .map(|_| {
            let p = random_unit(&mut rng);
            net.iter().map(|&q| su2_distance(p, q)).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);

    let mut actions = Vec::new();
    let mut snapping = Vec::new();
    for &s in generators {
        let (forward, snap) = snap_bijection(&net, s);
        let mut backward = vec![0; n];
        for (i, &j) in forward.iter().enumerate() {
            backward[j] = i;
        }
        let snap_inv = (0..n)
            .map(|j| su2_distance(quat_mul(conj(s), net[j]), net[backward[j]]))
            .fold(0.0, f64::max);
        actions.push(forward);
        actions.push(backward);
        snapping.push(snap);
        snapping.push(snap_inv);
    }

    let mut model = SpaceModel::from_parts(
        ModelKind::Su2 {
            generators: generators.to_vec(),
            pool_size,
        },
        group,
        Points::Quaternions(net),
        unit,
        t,
        t * covering.max(separation),
        actions,
        snapping,
        Isometry::Exact,
        Some(seed),
    )?;
    model.isometry = Isometry::Approximate {
        defect: model.isometry_defect(),
    };
    Ok(model)
}

/// Default generators `(1 + 2i)/√5` and `(1 + 2j)/√5`.
pub fn default_generators() -> Vec<Quaternion> {
    let r = 5f64.sqrt();
    vec![[1.0 / r, 2.0 / r, 0.0, 0.0], [1.0 / r, 0.0, 2.0 / r, 0.0]]
}
