use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    /// `1 - cos(a, b)`; a zero vector is at distance 1 from everything but itself.
    Cosine,
}

impl Metric {
    pub fn distance(self, a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::Cosine => {
                let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
                cosine_from_parts(a.dot(&b), na, nb, a == b)
            }
        }
    }
}

pub(crate) fn euclidean(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn cosine_from_parts(dot: f64, na: f64, nb: f64, identical: bool) -> f64 {
    if identical {
        return 0.0;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).max(0.0)
}

/// Full pairwise distance row of point `i` (entry `i` is 0).
pub(crate) fn distance_row(vectors: &Array2<f64>, norms: Option<&[f64]>, metric: Metric, i: usize) -> Vec<f64> {
    let a = vectors.row(i);
    (0..vectors.nrows())
        .map(|j| {
            if i == j {
                return 0.0;
            }
            let b = vectors.row(j);
            match (metric, norms) {
                (Metric::Cosine, Some(n)) => cosine_from_parts(a.dot(&b), n[i], n[j], a == b),
                _ => metric.distance(a, b),
            }
        })
        .collect()
}

pub(crate) fn row_norms(vectors: &Array2<f64>) -> Vec<f64> {
    vectors.outer_iter().map(|r| r.dot(&r).sqrt()).collect()
}

/// Per-point neighbor lists, each sorted ascending by distance (ties by index).
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub k: usize,
    pub neighbors: Vec<Vec<(usize, f64)>>,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// Exact k nearest neighbors by exhaustive search; parallel over query points.
pub fn knn_exact(vectors: &Array2<f64>, k: usize, metric: Metric) -> Result<KnnGraph> {
    let n = vectors.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} requires 1 <= k < n = {n}")));
    }
    let norms = (metric == Metric::Cosine).then(|| row_norms(vectors));
    let neighbors = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = distance_row(vectors, norms.as_deref(), metric, i);
            let mut cand: Vec<(usize, f64)> = row
                .into_iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .collect();
            let cmp = |x: &(usize, f64), y: &(usize, f64)| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0));
            if cand.len() > k {
                cand.select_nth_unstable_by(k - 1, cmp);
                cand.truncate(k);
            }
            cand.sort_by(cmp);
            cand
        })
        .collect();
    Ok(KnnGraph { k, neighbors })
}
