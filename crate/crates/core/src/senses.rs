//! Word-sense induction over instance embeddings: 2-D reduction, k-means,
//! a linear SVM boundary for display, and per-cluster object profiles.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::EmbeddedCorpus;
use crate::error::{Error, Result};
use crate::manifold::{umap_reduce, LayoutConfig, Metric};
use crate::rng;
use crate::svg::{self, Svg};

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    /// Within-cluster sum of squares after each Lloyd iteration.
    pub sse_history: Vec<f64>,
    pub converged: bool,
}

impl KMeans {
    pub fn sse(&self) -> f64 {
        self.sse_history.last().copied().unwrap_or(0.0)
    }
}

/// Sum of squared distances from each point to the mean of its cluster.
pub fn within_cluster_sse(points: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
    let centroids = cluster_means(points, labels, k);
    points
        .outer_iter()
        .zip(labels)
        .map(|(p, &l)| sq_dist(p, centroids.row(l)))
        .sum()
}

fn cluster_means(points: &Array2<f64>, labels: &[usize], k: usize) -> Array2<f64> {
    let mut sums = Array2::<f64>::zeros((k, points.ncols()));
    let mut counts = vec![0usize; k];
    for (p, &l) in points.outer_iter().zip(labels) {
        sums.row_mut(l).scaled_add(1.0, &p);
        counts[l] += 1;
    }
    for (mut row, &c) in sums.outer_iter_mut().zip(&counts) {
        if c > 0 {
            row /= c as f64;
        }
    }
    sums
}

fn plus_plus_seeds(points: &Array2<f64>, k: usize, rng: &mut rng::StageRng) -> Vec<usize> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.outer_iter().map(|p| sq_dist(p, points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points.outer_iter()) {
            *d = d.min(sq_dist(p, points.row(next)));
        }
    }
    chosen
}

fn nearest(p: ArrayView1<f64>, centroids: &Array2<f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.outer_iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

/// Moves, for each empty cluster, the point farthest from its own centroid
/// (taken from a cluster with more than one member) into it.
fn repair_empty(points: &Array2<f64>, labels: &mut [usize], centroids: &Array2<f64>, k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let mut far = (usize::MAX, -1.0);
        for (i, p) in points.outer_iter().enumerate() {
            if counts[labels[i]] > 1 {
                let d = sq_dist(p, centroids.row(labels[i]));
                if d > far.1 {
                    far = (i, d);
                }
            }
        }
        labels[far.0] = empty;
    }
}

/// Independent k-means++ restarts run by [`kmeans`].
pub const DEFAULT_RESTARTS: usize = 10;

fn lloyd(points: &Array2<f64>, k: usize, mut rng: rng::StageRng, max_iter: usize) -> KMeans {
    let n = points.nrows();
    let seeds = plus_plus_seeds(points, k, &mut rng);
    let mut centroids = points.select(Axis(0), &seeds);
    let mut labels: Vec<usize> = vec![usize::MAX; n];
    let mut sse_history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let mut next: Vec<usize> = points.outer_iter().map(|p| nearest(p, &centroids)).collect();
        repair_empty(points, &mut next, &centroids, k);
        if next == labels {
            converged = true;
            break;
        }
        labels = next;
        centroids = cluster_means(points, &labels, k);
        sse_history.push(
            points
                .outer_iter()
                .zip(&labels)
                .map(|(p, &l)| sq_dist(p, centroids.row(l)))
                .sum(),
        );
    }
    KMeans {
        labels,
        centroids,
        sse_history,
        converged,
    }
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iter` is reached; best of [`DEFAULT_RESTARTS`] seeded restarts.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64, max_iter: usize) -> Result<KMeans> {
    kmeans_restarts(points, k, seed, max_iter, DEFAULT_RESTARTS)
}

/// As [`kmeans`] with an explicit restart count. The run with the lowest final
/// SSE wins, earliest restart on ties; its per-iteration history is returned.
pub fn kmeans_restarts(points: &Array2<f64>, k: usize, seed: u64, max_iter: usize, restarts: usize) -> Result<KMeans> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must be in 1..={n}")));
    }
    if max_iter == 0 || restarts == 0 {
        return Err(Error::invalid("max_iter and restarts must be at least 1"));
    }
    let runs: Vec<KMeans> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| lloyd(points, k, rng::indexed_rng(seed, "senses/kmeans", r), max_iter))
        .collect();
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.sse() < runs[best].sse() {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one restart"))
}

/// Hyperplane `w·x + b = 0`; positive side is the second label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBoundary {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearBoundary {
    pub fn decision(&self, x: ArrayView1<f64>) -> f64 {
        self.weights.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> bool {
        self.decision(x) > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
    /// Initial step size; step `t` uses `eta0 / (1 + lambda * eta0 * t)`.
    pub eta0: f64,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-3,
            epochs: 2000,
            eta0: 0.01,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmFit {
    pub boundary: LinearBoundary,
    /// Regularized hinge objective of the reported iterate after each epoch.
    pub objective_history: Vec<f64>,
}

fn svm_objective(x: &Array2<f64>, y: &[f64], w: &[f64], lambda: f64) -> f64 {
    let hinge: f64 = x
        .outer_iter()
        .zip(y)
        .map(|(row, &yi)| {
            let m = yi * row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            (1.0 - m).max(0.0)
        })
        .sum();
    0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>() + hinge / y.len() as f64
}

/// Soft-margin linear SVM by stochastic subgradient descent on the
/// regularized hinge objective, over centered points with a constant bias
/// feature. Samples are visited in a seeded shuffled order each epoch.
///
/// The reported iterate is the running (Polyak) average of all steps, taken
/// at an epoch boundary only when it does not raise the objective, so the
/// objective history never increases. `positive[i]` selects the side of point `i`.
pub fn linear_boundary(points: &Array2<f64>, positive: &[bool], cfg: &SvmConfig) -> Result<SvmFit> {
    let n = points.nrows();
    if positive.len() != n {
        return Err(Error::invalid("labels must align with points"));
    }
    if positive.iter().all(|&p| p) || positive.iter().all(|&p| !p) {
        return Err(Error::invalid("linear boundary needs both labels present"));
    }
    if !(cfg.lambda > 0.0) || !(cfg.eta0 > 0.0) || cfg.epochs == 0 {
        return Err(Error::invalid("svm needs lambda > 0, eta0 > 0 and at least one epoch"));
    }
    let d = points.ncols();
    let mean = points.mean_axis(Axis(0)).expect("nonempty");
    let mut x = Array2::<f64>::ones((n, d + 1));
    for (i, row) in points.outer_iter().enumerate() {
        for j in 0..d {
            x[[i, j]] = row[j] - mean[j];
        }
    }
    let y: Vec<f64> = positive.iter().map(|&p| if p { 1.0 } else { -1.0 }).collect();

    let mut rng = rng::stage_rng(cfg.seed, "senses/svm");
    let mut w = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut reported = avg.clone();
    let mut reported_obj = svm_objective(&x, &y, &reported, cfg.lambda);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0usize;
    let mut objective_history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = cfg.eta0 / (1.0 + cfg.lambda * cfg.eta0 * t as f64);
            t += 1;
            let margin = y[i] * x.row(i).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let shrink = 1.0 - eta * cfg.lambda;
            for v in w.iter_mut() {
                *v *= shrink;
            }
            if margin < 1.0 {
                for (v, xi) in w.iter_mut().zip(x.row(i)) {
                    *v += eta * y[i] * xi;
                }
            }
            let step = 1.0 / t as f64;
            for (a, v) in avg.iter_mut().zip(&w) {
                *a += (v - *a) * step;
            }
        }
        let obj = svm_objective(&x, &y, &avg, cfg.lambda);
        if obj <= reported_obj {
            reported.copy_from_slice(&avg);
            reported_obj = obj;
        }
        objective_history.push(reported_obj);
    }
    let weights = reported[..d].to_vec();
    let bias = reported[d] - weights.iter().zip(mean.iter()).map(|(a, b)| a * b).sum::<f64>();
    Ok(SvmFit {
        boundary: LinearBoundary { weights, bias },
        objective_history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SenseConfig {
    pub k: usize,
    pub n_neighbors: usize,
    pub metric: Metric,
    pub layout: LayoutConfig,
    pub max_iter: usize,
    pub svm: SvmConfig,
}

impl Default for SenseConfig {
    fn default() -> Self {
        SenseConfig {
            k: 2,
            n_neighbors: 15,
            metric: Metric::Euclidean,
            layout: LayoutConfig::new(2),
            max_iter: 300,
            svm: SvmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SenseModel {
    pub ids: Vec<String>,
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
    pub centroids: Array2<f64>,
    pub boundary: Option<LinearBoundary>,
}

/// Reduces instance vectors to 2-D, clusters with k-means and, for `k = 2`,
/// fits a separating line between the two clusters.
pub fn induce_senses(corpus: &EmbeddedCorpus, cfg: &SenseConfig, seed: u64) -> Result<SenseModel> {
    if cfg.k == 0 || cfg.k > corpus.len() {
        return Err(Error::invalid(format!("k = {} must be in 1..={}", cfg.k, corpus.len())));
    }
    let mut layout = cfg.layout.clone();
    layout.n_components = 2;
    layout.seed = rng::stage_seed(seed, "senses/umap");
    let reduced = umap_reduce(corpus.vectors(), cfg.n_neighbors, &layout, cfg.metric)?;
    let points = reduced.coordinates;
    let km = kmeans(&points, cfg.k, rng::stage_seed(seed, "senses/kmeans"), cfg.max_iter)?;
    let boundary = if cfg.k == 2 {
        let positive: Vec<bool> = km.labels.iter().map(|&l| l == 1).collect();
        let svm = SvmConfig {
            seed: rng::stage_seed(seed, "senses/svm"),
            ..cfg.svm
        };
        Some(linear_boundary(&points, &positive, &svm)?.boundary)
    } else {
        None
    };
    Ok(SenseModel {
        ids: corpus.ids().map(str::to_owned).collect(),
        points,
        labels: km.labels,
        centroids: km.centroids,
        boundary,
    })
}

#[derive(Serialize)]
struct ModelSidecar<'a> {
    k: usize,
    sizes: Vec<usize>,
    centroids: Vec<Vec<f64>>,
    boundary: &'a Option<LinearBoundary>,
}

impl SenseModel {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("id\tx\ty\tlabel\n");
        for (i, id) in self.ids.iter().enumerate() {
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{}",
                id,
                self.points[[i, 0]],
                self.points[[i, 1]],
                self.labels[i]
            );
        }
        out
    }

    /// Centroids, cluster sizes and boundary as pretty JSON.
    pub fn sidecar_json(&self) -> String {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        let side = ModelSidecar {
            k: self.k(),
            sizes,
            centroids: self.centroids.outer_iter().map(|r| r.to_vec()).collect(),
            boundary: &self.boundary,
        };
        serde_json::to_string_pretty(&side).expect("sidecar serializes")
    }

    /// Scatter of the 2-D points coloured by cluster, with the boundary line.
    pub fn scatter_svg(&self) -> String {
        const SIZE: f64 = 480.0;
        const PAD: f64 = 30.0;
        let xs = self.points.column(0);
        let ys = self.points.column(1);
        let (x0, x1) = extent(xs.iter().copied());
        let (y0, y1) = extent(ys.iter().copied());
        let span = (x1 - x0).max(y1 - y0).max(1e-9);
        let inner = SIZE - 2.0 * PAD;
        let sx = |x: f64| PAD + (x - x0) / span * inner;
        let sy = |y: f64| SIZE - PAD - (y - y0) / span * inner;
        let mut doc = Svg::new(SIZE, SIZE);
        for (i, &l) in self.labels.iter().enumerate() {
            let colour = svg::PALETTE[l % svg::PALETTE.len()];
            doc.circle(sx(xs[i]), sy(ys[i]), 2.5, colour, "none");
        }
        if let Some(b) = &self.boundary {
            if let Some(((ax, ay), (bx, by))) = clip_line(b, (x0, x0 + span), (y0, y0 + span)) {
                doc.line(sx(ax), sy(ay), sx(bx), sy(by), "#000000", true);
            }
        }
        for l in 0..self.k() {
            doc.text(
                PAD + 8.0,
                PAD + 14.0 * (l as f64 + 1.0),
                11.0,
                "start",
                None,
                &format!("cluster {}", l + 1),
            );
            doc.circle(PAD + 2.0, PAD + 14.0 * (l as f64 + 1.0) - 4.0, 3.0, svg::PALETTE[l % svg::PALETTE.len()], "none");
        }
        doc.finish()
    }
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Intersects `w·x + b = 0` with a box; `None` if the line misses it.
fn clip_line(b: &LinearBoundary, (x0, x1): (f64, f64), (y0, y1): (f64, f64)) -> Option<((f64, f64), (f64, f64))> {
    let (wx, wy) = (b.weights[0], b.weights[1]);
    let mut hits: Vec<(f64, f64)> = Vec::new();
    if wy.abs() > 1e-12 {
        for x in [x0, x1] {
            let y = -(wx * x + b.bias) / wy;
            if (y0..=y1).contains(&y) {
                hits.push((x, y));
            }
        }
    }
    if wx.abs() > 1e-12 {
        for y in [y0, y1] {
            let x = -(wy * y + b.bias) / wx;
            if (x0..=x1).contains(&x) {
                hits.push((x, y));
            }
        }
    }
    hits.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    (hits.len() >= 2).then(|| (hits[0], hits[1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectCount {
    pub object: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    pub cluster: usize,
    pub size: usize,
    /// Exact fraction of all instances.
    pub share: f64,
    /// `share` as a whole-number percentage, for display.
    pub percent: u32,
    pub objects: Vec<ObjectCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectProfile {
    pub clusters: Vec<ClusterProfile>,
}

/// Per cluster: share of instances and the `top_n` most frequent objects
/// (ties lexicographic). Instances without an object only count toward shares.
pub fn profile_clusters(labels: &[usize], objects: &[Option<String>], top_n: usize) -> Result<ObjectProfile> {
    if labels.len() != objects.len() {
        return Err(Error::invalid(format!(
            "{} labels but {} object annotations",
            labels.len(),
            objects.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    let mut counts: Vec<BTreeMap<&str, usize>> = vec![BTreeMap::new(); k];
    for (&l, o) in labels.iter().zip(objects) {
        sizes[l] += 1;
        if let Some(o) = o {
            *counts[l].entry(o.as_str()).or_default() += 1;
        }
    }
    let total = labels.len() as f64;
    let clusters = (0..k)
        .map(|c| {
            let mut ranked: Vec<(&str, usize)> = counts[c].iter().map(|(&o, &n)| (o, n)).collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            ranked.truncate(top_n);
            let share = sizes[c] as f64 / total;
            ClusterProfile {
                cluster: c,
                size: sizes[c],
                share,
                percent: (share * 100.0).round() as u32,
                objects: ranked
                    .into_iter()
                    .map(|(o, n)| ObjectCount {
                        object: o.to_owned(),
                        count: n,
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(ObjectProfile { clusters })
}

impl ObjectProfile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    /// One line per cluster: `Cluster 1: shang (51%): shen, shou, yan`.
    pub fn to_text(&self, word: &str) -> String {
        let mut out = String::new();
        for c in &self.clusters {
            let objects: Vec<&str> = c.objects.iter().map(|o| o.object.as_str()).collect();
            let _ = writeln!(out, "Cluster {}: {} ({}%): {}", c.cluster + 1, word, c.percent, objects.join(", "));
        }
        out
    }
}
