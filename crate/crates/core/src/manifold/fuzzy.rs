use std::collections::BTreeMap;

use super::knn::KnnGraph;

const BISECTION_STEPS: usize = 64;
const MIN_SIGMA_SCALE: f64 = 1e-3;

/// Symmetric weighted neighborhood graph; each undirected edge stored once with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl FuzzyGraph {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.edges
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
            .map_or(0.0, |pos| self.edges[pos].2)
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }
}

/// Per-point calibration of the exponential neighbor kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalScales {
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Probabilistic union of two directed memberships.
pub fn fuzzy_union(w1: f64, w2: f64) -> f64 {
    let (hi, lo) = if w1 >= w2 { (w1, w2) } else { (w2, w1) };
    hi + lo * (1.0 - hi)
}

fn local_rho(dists: &[f64], local_connectivity: f64) -> f64 {
    let index = local_connectivity.floor() as usize;
    let interp = local_connectivity - index as f64;
    if index == 0 {
        return interp * dists[0];
    }
    if index > dists.len() {
        return dists[dists.len() - 1];
    }
    let base = dists[index - 1];
    match dists.get(index) {
        Some(&next) if interp > 0.0 => base + interp * (next - base),
        _ => base,
    }
}

fn membership_sum(dists: &[f64], rho: f64, sigma: f64) -> f64 {
    dists.iter().map(|&d| (-(d - rho).max(0.0) / sigma).exp()).sum()
}

/// Directed memberships `exp(-max(0, d - rho) / sigma)`, with sigma found by
/// bisection so each point's memberships sum to `log2(k)`.
pub fn directed_memberships(knn: &KnnGraph, local_connectivity: f64) -> (Vec<Vec<(usize, f64)>>, LocalScales) {
    let target = (knn.k as f64).log2();
    let all: Vec<f64> = knn.neighbors.iter().flatten().map(|&(_, d)| d).collect();
    let mean = if all.is_empty() {
        0.0
    } else {
        all.iter().sum::<f64>() / all.len() as f64
    };
    let floor = MIN_SIGMA_SCALE * mean;

    let mut rhos = Vec::with_capacity(knn.len());
    let mut sigmas = Vec::with_capacity(knn.len());
    let mut weights = Vec::with_capacity(knn.len());
    for nb in &knn.neighbors {
        let dists: Vec<f64> = nb.iter().map(|&(_, d)| d).collect();
        let rho = local_rho(&dists, local_connectivity);
        let max_d = dists.iter().copied().fold(0.0, f64::max);
        let sigma = if max_d <= 0.0 {
            1.0
        } else {
            let (mut lo, mut hi) = (floor.min(max_d), max_d);
            if membership_sum(&dists, rho, hi) <= target {
                hi
            } else if membership_sum(&dists, rho, lo) >= target {
                lo
            } else {
                for _ in 0..BISECTION_STEPS {
                    let mid = 0.5 * (lo + hi);
                    if membership_sum(&dists, rho, mid) > target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        let sigma = if sigma > 0.0 { sigma } else { f64::MIN_POSITIVE };
        let w: Vec<(usize, f64)> = nb
            .iter()
            .map(|&(j, d)| (j, (-(d - rho).max(0.0) / sigma).exp()))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        rhos.push(rho);
        sigmas.push(sigma);
        weights.push(w);
    }
    (weights, LocalScales { rho: rhos, sigma: sigmas })
}

/// Builds the symmetric fuzzy graph by probabilistic union of directed memberships.
pub fn build_fuzzy_graph(knn: &KnnGraph, local_connectivity: f64) -> FuzzyGraph {
    let (directed, _) = directed_memberships(knn, local_connectivity);
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for (i, row) in directed.iter().enumerate() {
        for &(j, w) in row {
            let e = pairs.entry((i.min(j), i.max(j))).or_insert((0.0, 0.0));
            if i < j {
                e.0 = w;
            } else {
                e.1 = w;
            }
        }
    }
    let edges = pairs
        .into_iter()
        .map(|((i, j), (w1, w2))| (i, j, fuzzy_union(w1, w2)))
        .collect();
    FuzzyGraph { n: knn.len(), edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::knn::{knn_exact, Metric};
    use ndarray::array;

    #[test]
    fn union_formula() {
        assert_eq!(fuzzy_union(0.5, 0.5), 0.75);
        assert_eq!(fuzzy_union(1.0, 0.0), 1.0);
    }

    #[test]
    fn nearest_neighbor_gets_full_membership() {
        let v = array![[0.0], [1.0], [3.0], [7.0], [8.5]];
        let knn = knn_exact(&v, 3, Metric::Euclidean).unwrap();
        let (w, scales) = directed_memberships(&knn, 1.0);
        for (i, row) in w.iter().enumerate() {
            assert_eq!(row[0].1, 1.0, "point {i}");
            assert_eq!(scales.rho[i], knn.neighbors[i][0].1);
        }
        let g = build_fuzzy_graph(&knn, 1.0);
        for &(i, j, w) in &g.edges {
            assert!(w > 0.0 && w <= 1.0);
            assert_eq!(g.weight(j, i), w);
        }
    }

    #[test]
    fn sigma_hits_target_sum() {
        let v = array![[0.0], [0.5], [1.7], [2.0], [4.0], [4.1], [6.0]];
        let knn = knn_exact(&v, 4, Metric::Euclidean).unwrap();
        let (w, _) = directed_memberships(&knn, 1.0);
        for row in &w {
            let s: f64 = row.iter().map(|&(_, w)| w).sum();
            // either hits log2(4) or sits at the clamp
            assert!(s <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn identical_points_have_unit_weights() {
        let v = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let knn = knn_exact(&v, 2, Metric::Euclidean).unwrap();
        let g = build_fuzzy_graph(&knn, 1.0);
        assert_eq!(g.edges.len(), 3);
        assert!(g.edges.iter().all(|e| e.2 == 1.0));
    }
}
