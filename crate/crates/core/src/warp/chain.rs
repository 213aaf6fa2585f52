use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::{cmp_scalar, Engine, WarpedDistanceMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::space::SpaceModel;

/// Largest node count that uses the complete metric edge set.
pub const COMPLETE_EDGE_LIMIT: usize = 2000;

/// Metric edges of a warped graph.
#[derive(Clone, Debug)]
pub enum MetricEdges<S> {
    /// Row-major level distance matrix; every pair is an edge.
    Complete(Vec<S>),
    /// Symmetrized k-nearest-neighbour lists.
    Sparse { k: usize, adjacency: Vec<Vec<(usize, S)>> },
}

/// Net points with metric edges and unit-weight generator edges.
#[derive(Clone, Debug)]
pub struct WarpedGraph<S> {
    n: usize,
    level: S,
    metric: MetricEdges<S>,
    generator_edges: Vec<Vec<usize>>,
}

#[derive(PartialEq)]
struct Item<S>(S, usize);

impl<S: Scalar> Eq for Item<S> {}

impl<S: Scalar> PartialOrd for Item<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Scalar> Ord for Item<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        cmp_scalar(self.0, other.0).then(self.1.cmp(&other.1))
    }
}

impl<S: Scalar> WarpedGraph<S> {
    /// Complete edges up to [`COMPLETE_EDGE_LIMIT`] nodes, k-nearest beyond.
    pub fn from_model(model: &SpaceModel<S>) -> Self {
        if model.len() <= COMPLETE_EDGE_LIMIT {
            Self::complete(model)
        } else {
            Self::nearest(model, 4)
        }
    }

    pub fn complete(model: &SpaceModel<S>) -> Self {
        Self {
            n: model.len(),
            level: model.level(),
            metric: MetricEdges::Complete(model.base_matrix()),
            generator_edges: model.action_tables().to_vec(),
        }
    }

    /// k-nearest metric edges, doubling `k` from `k0` until the metric graph
    /// alone is connected.
    pub fn nearest(model: &SpaceModel<S>, k0: usize) -> Self {
        let n = model.len();
        let order: Vec<Vec<usize>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                row.sort_by(|&a, &b| cmp_scalar(model.distance(i, a), model.distance(i, b)).then(a.cmp(&b)));
                row
            })
            .collect();
        let mut k = k0.max(1).min(n.saturating_sub(1)).max(1);
        loop {
            let mut adjacency: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
            for (i, row) in order.iter().enumerate() {
                for &j in row.iter().take(k) {
                    let d = model.distance(i, j);
                    adjacency[i].push((j, d));
                    adjacency[j].push((i, d));
                }
            }
            for list in &mut adjacency {
                list.sort_by_key(|e| e.0);
                list.dedup_by_key(|e| e.0);
            }
            let edges: Vec<Vec<usize>> = adjacency.iter().map(|l| l.iter().map(|e| e.0).collect()).collect();
            if components(n, &edges, &[]).len() == 1 || k >= n - 1 {
                return Self {
                    n,
                    level: model.level(),
                    metric: MetricEdges::Sparse { k, adjacency },
                    generator_edges: model.action_tables().to_vec(),
                };
            }
            k = (2 * k).min(n - 1);
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn metric_edges(&self) -> &MetricEdges<S> {
        &self.metric
    }

    pub fn generator_edges(&self) -> &[Vec<usize>] {
        &self.generator_edges
    }

    /// Adds a generator (and should be paired with its inverse by the caller).
    pub fn add_generator(&mut self, table: Vec<usize>) -> Result<()> {
        if table.len() != self.n {
            return Err(Error::Validation("generator table has wrong length".into()));
        }
        self.generator_edges.push(table);
        Ok(())
    }

    fn neighbours(&self) -> Vec<Vec<usize>> {
        match &self.metric {
            MetricEdges::Complete(_) => vec![Vec::new(); self.n],
            MetricEdges::Sparse { adjacency, .. } => {
                adjacency.iter().map(|l| l.iter().map(|e| e.0).collect()).collect()
            }
        }
    }

    /// Errors with the component list if the graph is disconnected.
    pub fn check_connected(&self) -> Result<()> {
        if matches!(self.metric, MetricEdges::Complete(_)) {
            return Ok(());
        }
        let comps = components(self.n, &self.neighbours(), &self.generator_edges);
        if comps.len() > 1 {
            return Err(Error::Disconnected {
                components: comps.len(),
                witness: comps.iter().map(|c| c[0]).collect(),
            });
        }
        Ok(())
    }

    /// Single-source shortest paths.
    pub fn shortest_from(&self, source: usize) -> Vec<S> {
        match &self.metric {
            MetricEdges::Complete(base) => self.dense_dijkstra(base, source),
            MetricEdges::Sparse { adjacency, .. } => self.heap_dijkstra(adjacency, source),
        }
    }

    fn dense_dijkstra(&self, base: &[S], source: usize) -> Vec<S> {
        let n = self.n;
        let one = S::from_int(1);
        let mut dist: Vec<Option<S>> = vec![None; n];
        let mut done = vec![false; n];
        dist[source] = Some(S::zero());
        for _ in 0..n {
            let mut u = usize::MAX;
            for v in 0..n {
                if done[v] {
                    continue;
                }
                if let Some(dv) = dist[v] {
                    if u == usize::MAX || dv < dist[u].expect("set") {
                        u = v;
                    }
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let du = dist[u].expect("set");
            let row = &base[u * n..(u + 1) * n];
            for v in 0..n {
                if !done[v] {
                    let cand = du + row[v];
                    if dist[v].is_none_or(|d| cand < d) {
                        dist[v] = Some(cand);
                    }
                }
            }
            for table in &self.generator_edges {
                let v = table[u];
                if !done[v] {
                    let cand = du + one;
                    if dist[v].is_none_or(|d| cand < d) {
                        dist[v] = Some(cand);
                    }
                }
            }
        }
        dist.into_iter()
            .map(|d| d.expect("complete graph is connected"))
            .collect()
    }

    fn heap_dijkstra(&self, adjacency: &[Vec<(usize, S)>], source: usize) -> Vec<S> {
        let n = self.n;
        let one = S::from_int(1);
        let mut dist: Vec<Option<S>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[source] = Some(S::zero());
        heap.push(Reverse(Item(S::zero(), source)));
        while let Some(Reverse(Item(du, u))) = heap.pop() {
            if dist[u].is_some_and(|d| d < du) {
                continue;
            }
            let relax = |v: usize, w: S, dist: &mut Vec<Option<S>>, heap: &mut BinaryHeap<Reverse<Item<S>>>| {
                let cand = du + w;
                if dist[v].is_none_or(|d| cand < d) {
                    dist[v] = Some(cand);
                    heap.push(Reverse(Item(cand, v)));
                }
            };
            for &(v, w) in &adjacency[u] {
                relax(v, w, &mut dist, &mut heap);
            }
            for table in &self.generator_edges {
                relax(table[u], one, &mut dist, &mut heap);
            }
        }
        dist.into_iter().map(|d| d.expect("connectivity checked")).collect()
    }

    /// All-pairs shortest paths, one row per source in parallel.
    pub fn all_pairs(&self) -> Result<WarpedDistanceMatrix<S>> {
        self.check_connected()?;
        let rows: Vec<Vec<S>> = (0..self.n).into_par_iter().map(|s| self.shortest_from(s)).collect();
        Ok(WarpedDistanceMatrix {
            level: self.level,
            n: self.n,
            values: rows.concat(),
            engine: super::Engine::Chain,
            truncation: None,
        })
    }
}

/// Connected components (sorted by least member) of the union of adjacency
/// lists and permutation tables.
pub(crate) fn components(n: usize, adjacency: &[Vec<usize>], tables: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut union = |a: usize, b: usize| {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    for (u, list) in adjacency.iter().enumerate() {
        for &v in list {
            union(u, v);
        }
    }
    for table in tables {
        for (u, &v) in table.iter().enumerate() {
            union(u, v);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..n {
        let r = find(&mut parent, x);
        groups.entry(r).or_default().push(x);
    }
    groups.into_values().collect()
}

/// δ_Γ on a level set by the chain definition.
pub fn warped_chain<S: Scalar>(model: &SpaceModel<S>) -> Result<WarpedDistanceMatrix<S>> {
    let m = WarpedGraph::from_model(model).all_pairs()?;
    debug_assert_eq!(m.engine, Engine::Chain);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::QuotientTower;
    use crate::scalar::Rational;
    use crate::space::{build_circle_model, build_profinite_model, golden_alpha};

    #[test]
    fn diagonal_and_generator_bound() {
        let tower = QuotientTower::dyadic(1, 3).unwrap();
        let model = build_profinite_model(&tower, 3, Rational::from_integer(8), 100).unwrap();
        let w = warped_chain(&model).unwrap();
        for x in 0..model.len() {
            assert_eq!(w.get(x, x), Rational::from_integer(0));
            for table in model.action_tables() {
                assert!(w.get(x, table[x]) <= Rational::from_integer(1));
            }
        }
    }

    #[test]
    fn sparse_edges_are_exact_on_the_circle() {
        let model = build_circle_model(golden_alpha(), 4.0, 0.2, 10_000).unwrap();
        let dense = WarpedGraph::complete(&model).all_pairs().unwrap();
        let sparse = WarpedGraph::nearest(&model, 2).all_pairs().unwrap();
        assert!(dense.max_deviation(&sparse).unwrap() < 1e-9);
    }

    #[test]
    fn disconnected_sparse_graph_is_reported() {
        let graph = WarpedGraph {
            n: 3,
            level: 1.0,
            metric: MetricEdges::Sparse {
                k: 0,
                adjacency: vec![vec![(1, 1.0)], vec![(0, 1.0)], vec![]],
            },
            generator_edges: vec![vec![0, 1, 2]],
        };
        match graph.all_pairs() {
            Err(Error::Disconnected { components, witness }) => {
                assert_eq!(components, 2);
                assert_eq!(witness, vec![0, 2]);
            }
            other => panic!("expected disconnection, got {other:?}"),
        }
    }
}
