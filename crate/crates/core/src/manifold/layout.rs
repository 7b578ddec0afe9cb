use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::curve::fit_ab;
use super::fuzzy::FuzzyGraph;
use crate::error::{Error, Result};
use crate::rng;

const GRAD_CLIP: f64 = 4.0;
const REPULSION_EPS: f64 = 0.001;
const NEGATIVE_SAMPLE_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionMode {
    /// Edges updated one at a time from a single generator; bit-reproducible.
    #[default]
    Sequential,
    /// Edge chunks processed concurrently against a per-epoch snapshot.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub n_components: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub a: f64,
    pub b: f64,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub seed: u64,
    pub mode: ExecutionMode,
}

impl LayoutConfig {
    /// Defaults: `min_dist = 0.1`, `spread = 1.0`, 500 epochs, 5 negative samples.
    pub fn new(n_components: usize) -> Self {
        let fit = fit_ab(0.1, 1.0);
        LayoutConfig {
            n_components,
            min_dist: 0.1,
            spread: 1.0,
            a: fit.a,
            b: fit.b,
            n_epochs: 500,
            negative_sample_rate: 5,
            seed: 42,
            mode: ExecutionMode::Sequential,
        }
    }

    /// Sets `min_dist` and `spread` and refits the curve parameters.
    pub fn with_curve(mut self, min_dist: f64, spread: f64) -> Self {
        let fit = fit_ab(min_dist, spread);
        self.min_dist = min_dist;
        self.spread = spread;
        self.a = fit.a;
        self.b = fit.b;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::invalid("n_components must be positive"));
        }
        if !(self.spread > 0.0) || !(self.min_dist >= 0.0) || self.min_dist >= 4.0 * self.spread {
            return Err(Error::invalid(format!(
                "min_dist {} / spread {} out of range",
                self.min_dist, self.spread
            )));
        }
        if !(self.a.is_finite() && self.a > 0.0 && self.b.is_finite() && self.b > 0.0) {
            return Err(Error::invalid("curve parameters a, b must be positive and finite"));
        }
        if self.negative_sample_rate == 0 {
            return Err(Error::invalid("negative_sample_rate must be positive"));
        }
        Ok(())
    }
}

/// Low-dimensional layout, one row per input point.
#[derive(Debug, Clone, PartialEq)]
pub struct LowDimEmbedding {
    pub coordinates: Array2<f64>,
}

struct Schedule {
    heads: Vec<usize>,
    tails: Vec<usize>,
    epochs_per_sample: Vec<f64>,
    next_sample: Vec<f64>,
    epochs_per_negative: Vec<f64>,
    next_negative: Vec<f64>,
}

impl Schedule {
    fn new(graph: &FuzzyGraph, n_epochs: usize, negative_rate: usize) -> Self {
        let max_w = graph.edges.iter().map(|e| e.2).fold(0.0, f64::max);
        let floor = max_w / n_epochs as f64;
        let mut heads = Vec::new();
        let mut tails = Vec::new();
        let mut eps = Vec::new();
        for &(i, j, w) in &graph.edges {
            if w < floor {
                continue;
            }
            for (h, t) in [(i, j), (j, i)] {
                heads.push(h);
                tails.push(t);
                eps.push(max_w / w);
            }
        }
        let eneg: Vec<f64> = eps.iter().map(|e| e / negative_rate as f64).collect();
        Schedule {
            heads,
            tails,
            next_sample: eps.clone(),
            epochs_per_sample: eps,
            next_negative: eneg.clone(),
            epochs_per_negative: eneg,
        }
    }
}

fn clip(x: f64) -> f64 {
    x.clamp(-GRAD_CLIP, GRAD_CLIP)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Curve {
    a: f64,
    b: f64,
}

impl Curve {
    fn attraction(&self, d2: f64) -> f64 {
        if d2 > 0.0 {
            -2.0 * self.a * self.b * d2.powf(self.b - 1.0) / (self.a * d2.powf(self.b) + 1.0)
        } else {
            0.0
        }
    }

    fn repulsion(&self, d2: f64) -> f64 {
        if d2 > 0.0 {
            2.0 * self.b / ((REPULSION_EPS + d2) * (self.a * d2.powf(self.b) + 1.0))
        } else {
            0.0
        }
    }
}

/// A uniformly drawn non-neighbor of `head`; when `head` is adjacent to every
/// other point, any other point.
fn sample_negative<R: Rng>(rng: &mut R, n: usize, head: usize, adjacency: &[Vec<usize>]) -> Option<usize> {
    if n < 2 {
        return None;
    }
    if adjacency[head].len() + 1 >= n {
        let k = rng.random_range(0..n - 1);
        return Some(if k >= head { k + 1 } else { k });
    }
    for _ in 0..NEGATIVE_SAMPLE_ATTEMPTS {
        let k = rng.random_range(0..n);
        if k != head && adjacency[head].binary_search(&k).is_err() {
            return Some(k);
        }
    }
    None
}

/// Stochastic layout optimization of a fuzzy graph starting from `init`.
pub fn optimize_layout(graph: &FuzzyGraph, init: &Array2<f64>, cfg: &LayoutConfig) -> Result<LowDimEmbedding> {
    cfg.validate()?;
    if init.nrows() != graph.n || init.ncols() != cfg.n_components {
        return Err(Error::invalid(format!(
            "init is {}x{}, expected {}x{}",
            init.nrows(),
            init.ncols(),
            graph.n,
            cfg.n_components
        )));
    }
    if init.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("init contains non-finite coordinates"));
    }
    if graph.n == 0 {
        return Err(Error::invalid("empty graph"));
    }
    if cfg.n_epochs == 0 || graph.edges.is_empty() {
        return Ok(LowDimEmbedding {
            coordinates: init.clone(),
        });
    }

    let dim = cfg.n_components;
    let n = graph.n;
    let mut emb: Vec<f64> = init.iter().copied().collect();
    let adjacency = graph.adjacency();
    let mut sched = Schedule::new(graph, cfg.n_epochs, cfg.negative_sample_rate);
    let curve = Curve { a: cfg.a, b: cfg.b };

    match cfg.mode {
        ExecutionMode::Sequential => {
            let mut rng = rng::stage_rng(cfg.seed, "layout");
            for epoch in 0..cfg.n_epochs {
                let alpha = 1.0 - epoch as f64 / cfg.n_epochs as f64;
                let t = (epoch + 1) as f64;
                for e in 0..sched.heads.len() {
                    if sched.next_sample[e] > t {
                        continue;
                    }
                    let (h, tl) = (sched.heads[e], sched.tails[e]);
                    let d2 = sq_dist(&emb[h * dim..(h + 1) * dim], &emb[tl * dim..(tl + 1) * dim]);
                    let coeff = curve.attraction(d2);
                    for d in 0..dim {
                        let g = clip(coeff * (emb[h * dim + d] - emb[tl * dim + d]));
                        emb[h * dim + d] += g * alpha;
                        emb[tl * dim + d] -= g * alpha;
                    }
                    sched.next_sample[e] += sched.epochs_per_sample[e];

                    let n_neg = ((t - sched.next_negative[e]) / sched.epochs_per_negative[e]).floor().max(0.0) as usize;
                    for _ in 0..n_neg {
                        let Some(k) = sample_negative(&mut rng, n, h, &adjacency) else {
                            continue;
                        };
                        let d2 = sq_dist(&emb[h * dim..(h + 1) * dim], &emb[k * dim..(k + 1) * dim]);
                        let coeff = curve.repulsion(d2);
                        for d in 0..dim {
                            let g = clip(coeff * (emb[h * dim + d] - emb[k * dim + d]));
                            emb[h * dim + d] += g * alpha;
                        }
                    }
                    sched.next_negative[e] += n_neg as f64 * sched.epochs_per_negative[e];
                }
            }
        }
        ExecutionMode::Parallel => {
            let chunks = rayon::current_num_threads().max(1);
            let chunk_len = sched.heads.len().div_ceil(chunks);
            for epoch in 0..cfg.n_epochs {
                let alpha = 1.0 - epoch as f64 / cfg.n_epochs as f64;
                let t = (epoch + 1) as f64;
                let snapshot = &emb;
                let sched_ref = &sched;
                let deltas: Vec<(Vec<f64>, Vec<(usize, f64)>)> = (0..chunks)
                    .into_par_iter()
                    .map(|c| {
                        let mut rng = rng::indexed_rng(cfg.seed, "layout-parallel", (epoch * chunks + c) as u64);
                        let mut delta = vec![0.0; n * dim];
                        let mut fired = Vec::new();
                        let lo = (c * chunk_len).min(sched_ref.heads.len());
                        let hi = ((c + 1) * chunk_len).min(sched_ref.heads.len());
                        for e in lo..hi {
                            if sched_ref.next_sample[e] > t {
                                continue;
                            }
                            let (h, tl) = (sched_ref.heads[e], sched_ref.tails[e]);
                            let hs = &snapshot[h * dim..(h + 1) * dim];
                            let ts = &snapshot[tl * dim..(tl + 1) * dim];
                            let coeff = curve.attraction(sq_dist(hs, ts));
                            for d in 0..dim {
                                let g = clip(coeff * (hs[d] - ts[d]));
                                delta[h * dim + d] += g * alpha;
                                delta[tl * dim + d] -= g * alpha;
                            }
                            let n_neg = ((t - sched_ref.next_negative[e]) / sched_ref.epochs_per_negative[e])
                                .floor()
                                .max(0.0) as usize;
                            for _ in 0..n_neg {
                                let Some(k) = sample_negative(&mut rng, n, h, &adjacency) else {
                                    continue;
                                };
                                let ks = &snapshot[k * dim..(k + 1) * dim];
                                let coeff = curve.repulsion(sq_dist(hs, ks));
                                for d in 0..dim {
                                    delta[h * dim + d] += clip(coeff * (hs[d] - ks[d])) * alpha;
                                }
                            }
                            fired.push((e, n_neg as f64));
                        }
                        (delta, fired)
                    })
                    .collect();
                for (delta, fired) in deltas {
                    for (x, d) in emb.iter_mut().zip(delta) {
                        *x += d;
                    }
                    for (e, n_neg) in fired {
                        sched.next_sample[e] += sched.epochs_per_sample[e];
                        sched.next_negative[e] += n_neg * sched.epochs_per_negative[e];
                    }
                }
            }
        }
    }

    let coordinates = Array2::from_shape_vec((n, dim), emb).expect("shape preserved");
    Ok(LowDimEmbedding { coordinates })
}
