//! UMAP-style nonlinear dimensionality reduction.
//!
//! The pipeline is exact k-NN, a fuzzy neighborhood graph, a deterministic
//! PCA initialization and stochastic layout optimization. Spectral
//! initialization is not used; the PCA start keeps runs reproducible without
//! a sparse eigensolver.

mod curve;
mod fuzzy;
mod knn;
mod layout;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

pub use curve::{curve, fit_ab, fit_grid, CurveFit};
pub use fuzzy::{build_fuzzy_graph, directed_memberships, fuzzy_union, FuzzyGraph, LocalScales};
pub use knn::{knn_exact, KnnGraph, Metric};
pub use layout::{optimize_layout, ExecutionMode, LayoutConfig, LowDimEmbedding};

pub(crate) use knn::distance_row;

use crate::corpus::{Document, EmbeddedCorpus};
use crate::error::{Error, Result};

const INIT_EXTENT: f64 = 10.0;

impl LowDimEmbedding {
    /// Pairs the coordinates with document ids for the JSONL vector format.
    pub fn to_corpus(&self, ids: &[String]) -> Result<EmbeddedCorpus> {
        if ids.len() != self.coordinates.nrows() {
            return Err(Error::invalid("id count does not match embedding rows"));
        }
        let docs = ids.iter().map(Document::new).collect();
        let rows = self.coordinates.outer_iter().map(|r| r.to_vec()).collect();
        EmbeddedCorpus::new(docs, rows)
    }
}

/// First `n_components` principal components of the centered data, each axis
/// rescaled to `[-10, 10]`. Axes beyond the data rank are zero. For the cosine
/// metric rows are L2-normalized first.
pub fn pca_init(vectors: &Array2<f64>, n_components: usize, metric: Metric) -> Array2<f64> {
    let (n, d) = vectors.dim();
    let mut x = vectors.clone();
    if metric == Metric::Cosine {
        for mut row in x.outer_iter_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
    }
    let mean = x.mean_axis(ndarray::Axis(0)).expect("nonempty");
    x -= &mean;
    let xm = DMatrix::from_row_iterator(n, d, x.iter().copied());

    // eigen-decompose whichever of X^T X / X X^T is smaller
    let scores: Vec<(f64, Vec<f64>)> = if d <= n {
        let eig = SymmetricEigen::new(xm.transpose() * &xm);
        sorted_eigen(&eig)
            .into_iter()
            .map(|(val, vec)| {
                let v = DMatrix::from_column_slice(d, 1, &vec);
                let proj = &xm * v;
                (val, proj.iter().copied().collect())
            })
            .collect()
    } else {
        let eig = SymmetricEigen::new(&xm * xm.transpose());
        sorted_eigen(&eig)
            .into_iter()
            .map(|(val, vec)| {
                let s = val.max(0.0).sqrt();
                (val, vec.into_iter().map(|u| u * s).collect())
            })
            .collect()
    };

    let top = scores.first().map_or(0.0, |s| s.0);
    let mut out = Array2::zeros((n, n_components));
    for (c, (val, mut col)) in scores.into_iter().take(n_components).enumerate() {
        if !(val > 1e-12 * top.max(f64::MIN_POSITIVE)) {
            continue;
        }
        // sign: largest-magnitude entry positive
        let pivot = col
            .iter()
            .copied()
            .fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= 0.0 {
            continue;
        }
        for (i, v) in col.into_iter().enumerate() {
            out[[i, c]] = 2.0 * INIT_EXTENT * (v - lo) / (hi - lo) - INIT_EXTENT;
        }
    }
    out
}

fn sorted_eigen(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> Vec<(f64, Vec<f64>)> {
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    order
        .into_iter()
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
        .collect()
}

/// k-NN graph, fuzzy union, PCA initialization, then layout optimization.
pub fn umap_reduce(
    vectors: &Array2<f64>,
    n_neighbors: usize,
    cfg: &LayoutConfig,
    metric: Metric,
) -> Result<LowDimEmbedding> {
    let n = vectors.nrows();
    if n < n_neighbors + 1 {
        return Err(Error::invalid(format!(
            "{n} points are too few for n_neighbors = {n_neighbors}"
        )));
    }
    cfg.validate()?;
    let knn = knn_exact(vectors, n_neighbors, metric)?;
    let graph = build_fuzzy_graph(&knn, 1.0);
    let init = pca_init(vectors, cfg.n_components, metric);
    optimize_layout(&graph, &init, cfg)
}
