//! Bayesian optimization of the four clustering hyperparameters.
//!
//! A GP surrogate over the unit-cube image of the integer search space is
//! refitted after every trial; the next point maximizes expected improvement
//! over a randomly shifted Halton candidate set.

mod gp;

use std::collections::HashSet;
use std::fmt::Display;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use gp::{expected_improvement, matern52, GpSurrogate, DEFAULT_JITTER};

use crate::error::{Error, Result};
use crate::rng::{self, StageRng};
use crate::topic::ClusterParams;

/// Number of Halton candidates scored per proposal.
pub const CANDIDATES: usize = 1024;
/// Score recorded for failed objective evaluations (the NPMI floor).
pub const FAILED_SCORE: f64 = -1.0;
const MAX_CLIMB: usize = 64;

const DIMS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: usize,
    pub high: usize,
}

impl Bounds {
    pub const fn new(low: usize, high: usize) -> Self {
        Bounds { low, high }
    }

    fn to_unit(self, v: usize) -> f64 {
        if self.high == self.low {
            0.0
        } else {
            (v as f64 - self.low as f64) / (self.high - self.low) as f64
        }
    }

    fn from_unit(self, u: f64) -> usize {
        let v = self.low as f64 + u.clamp(0.0, 1.0) * (self.high - self.low) as f64;
        (v.round() as usize).clamp(self.low, self.high)
    }

    fn contains(self, v: usize) -> bool {
        (self.low..=self.high).contains(&v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n_neighbors: Bounds,
    pub n_components: Bounds,
    pub min_cluster_size: Bounds,
    pub min_samples: Bounds,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            n_neighbors: Bounds::new(5, 50),
            n_components: Bounds::new(2, 20),
            min_cluster_size: Bounds::new(5, 100),
            min_samples: Bounds::new(1, 100),
        }
    }
}

impl SearchSpace {
    fn bounds(&self) -> [Bounds; DIMS] {
        [self.n_neighbors, self.n_components, self.min_cluster_size, self.min_samples]
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds().iter().any(|b| b.low > b.high) {
            return Err(Error::invalid("search space bound has low > high"));
        }
        if self.min_samples.low > self.min_cluster_size.high {
            return Err(Error::invalid("min_samples lower bound exceeds every min_cluster_size"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &ClusterParams) -> bool {
        let [a, b, c, d] = self.bounds();
        a.contains(p.n_neighbors)
            && b.contains(p.n_components)
            && c.contains(p.min_cluster_size)
            && d.contains(p.min_samples)
            && p.min_samples <= p.min_cluster_size
    }

    pub fn normalize(&self, p: &ClusterParams) -> Vec<f64> {
        let [a, b, c, d] = self.bounds();
        vec![
            a.to_unit(p.n_neighbors),
            b.to_unit(p.n_components),
            c.to_unit(p.min_cluster_size),
            d.to_unit(p.min_samples),
        ]
    }

    /// Rounds a unit-cube point to integers and clamps `min_samples <= min_cluster_size`.
    pub fn denormalize(&self, x: &[f64]) -> ClusterParams {
        let [a, b, c, d] = self.bounds();
        let min_cluster_size = c.from_unit(x[2]);
        let min_samples = d.from_unit(x[3]).min(min_cluster_size).max(d.low);
        ClusterParams {
            n_neighbors: a.from_unit(x[0]),
            n_components: b.from_unit(x[1]),
            min_cluster_size,
            min_samples,
        }
    }

    /// Valid points one integer step away along a single coordinate.
    fn neighbours(&self, p: &ClusterParams) -> Vec<ClusterParams> {
        let mut out = Vec::with_capacity(2 * DIMS);
        let base = [p.n_neighbors, p.n_components, p.min_cluster_size, p.min_samples];
        for d in 0..DIMS {
            for up in [false, true] {
                let mut v = base;
                v[d] = if up { v[d] + 1 } else { v[d].wrapping_sub(1) };
                let q = ClusterParams {
                    n_neighbors: v[0],
                    n_components: v[1],
                    min_cluster_size: v[2],
                    min_samples: v[3],
                };
                if self.contains(&q) {
                    out.push(q);
                }
            }
        }
        out
    }

    fn random_point(&self, rng: &mut StageRng) -> ClusterParams {
        let x: Vec<f64> = (0..DIMS).map(|_| rng.random::<f64>()).collect();
        self.denormalize(&x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: ClusterParams,
    pub score: f64,
    pub failed: bool,
}

/// One JSON object per line.
pub fn write_history<W: Write>(trials: &[Trial], mut w: W) -> std::io::Result<()> {
    for t in trials {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_history<R: BufRead>(r: R) -> Result<Vec<Trial>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            index: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let t: Trial = serde_json::from_str(&line).map_err(|e| Error::Parse {
            index: i + 1,
            message: e.to_string(),
        })?;
        if t.index != out.len() {
            return Err(Error::Parse {
                index: i + 1,
                message: format!("trial index {} out of sequence", t.index),
            });
        }
        out.push(t);
    }
    Ok(out)
}

pub fn gp_fit(trials: &[Trial], space: &SearchSpace, jitter: f64) -> Result<GpSurrogate> {
    let points = trials.iter().map(|t| space.normalize(&t.params)).collect();
    let scores: Vec<f64> = trials.iter().map(|t| t.score).collect();
    GpSurrogate::fit(points, &scores, jitter)
}

/// Maximizes EI over [`CANDIDATES`] shifted Halton points, skipping candidates
/// whose rounded parameters were already observed. Each candidate is scored at
/// its rounded, clamped position; ties go to the earlier candidate. The winner
/// then climbs to the best unobserved integer neighbour (one step in one
/// coordinate) while that strictly raises EI.
pub fn propose_next(
    gp: &GpSurrogate,
    space: &SearchSpace,
    observed: &HashSet<ClusterParams>,
    best: f64,
    rng: &mut StageRng,
) -> ClusterParams {
    let shift: Vec<f64> = (0..DIMS).map(|_| rng.random::<f64>()).collect();
    let candidates: Vec<Vec<f64>> = (1..=CANDIDATES as u64).map(|i| rng::shifted_halton(i, &shift)).collect();
    let snapped: Vec<ClusterParams> = candidates.iter().map(|x| space.denormalize(x)).collect();
    let ei: Vec<f64> = snapped
        .iter()
        .map(|p| {
            let (m, v) = gp.posterior(&space.normalize(p));
            expected_improvement(m, v, best)
        })
        .collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| ei[j].total_cmp(&ei[i]).then(i.cmp(&j)));
    let acquisition = |p: &ClusterParams| {
        let (m, v) = gp.posterior(&space.normalize(p));
        expected_improvement(m, v, best)
    };
    for i in order {
        if !observed.contains(&snapped[i]) {
            return climb(space, observed, snapped[i], ei[i], acquisition);
        }
    }
    random_unobserved(space, observed, rng)
}

fn climb(
    space: &SearchSpace,
    observed: &HashSet<ClusterParams>,
    mut current: ClusterParams,
    mut value: f64,
    acquisition: impl Fn(&ClusterParams) -> f64,
) -> ClusterParams {
    for _ in 0..MAX_CLIMB {
        let mut step: Option<(ClusterParams, f64)> = None;
        for neighbour in space.neighbours(&current) {
            if observed.contains(&neighbour) {
                continue;
            }
            let e = acquisition(&neighbour);
            if e > step.map_or(value, |s| s.1) {
                step = Some((neighbour, e));
            }
        }
        match step {
            Some((p, e)) => (current, value) = (p, e),
            None => break,
        }
    }
    current
}

fn random_unobserved(space: &SearchSpace, observed: &HashSet<ClusterParams>, rng: &mut StageRng) -> ClusterParams {
    let mut p = space.random_point(rng);
    for _ in 0..10_000 {
        if !observed.contains(&p) {
            break;
        }
        p = space.random_point(rng);
    }
    p
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub space: SearchSpace,
    pub budget: usize,
    pub n_init: usize,
    pub seed: u64,
    pub jitter: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            space: SearchSpace::default(),
            budget: 150,
            n_init: 10,
            seed: 42,
            jitter: DEFAULT_JITTER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub best: Trial,
    pub history: Vec<Trial>,
}

fn best_trial(history: &[Trial]) -> Option<&Trial> {
    history
        .iter()
        .filter(|t| !t.failed)
        .fold(None, |acc: Option<&Trial>, t| match acc {
            Some(b) if b.score >= t.score => Some(b),
            _ => Some(t),
        })
}

/// Runs (or resumes) the optimization loop until `history` holds `budget` trials.
///
/// The first `n_init` trials are shifted-Halton points; the generator for each
/// trial is derived from the seed and the trial index, so a resumed run
/// proposes exactly what an uninterrupted one would. `on_trial` sees each new
/// trial as soon as it is scored.
pub fn optimize_resume<F, E>(
    cfg: &OptimizerConfig,
    mut history: Vec<Trial>,
    mut objective: F,
    mut on_trial: impl FnMut(&Trial),
) -> Result<OptimizationResult>
where
    F: FnMut(&ClusterParams) -> std::result::Result<f64, E>,
    E: Display,
{
    cfg.space.validate()?;
    if cfg.n_init < 2 || cfg.budget < cfg.n_init {
        return Err(Error::invalid(format!(
            "need budget >= n_init >= 2 (budget {}, n_init {})",
            cfg.budget, cfg.n_init
        )));
    }
    let mut observed: HashSet<ClusterParams> = history.iter().map(|t| t.params).collect();
    let init_shift: Vec<f64> = {
        let mut r = rng::stage_rng(cfg.seed, "hyperopt/init");
        (0..DIMS).map(|_| r.random::<f64>()).collect()
    };
    let mut halton_index = 1u64;

    while history.len() < cfg.budget {
        let index = history.len();
        let mut trial_rng = rng::indexed_rng(cfg.seed, "hyperopt/propose", index as u64);
        let params = if index < cfg.n_init {
            let mut p = None;
            for _ in 0..CANDIDATES {
                let c = cfg.space.denormalize(&rng::shifted_halton(halton_index, &init_shift));
                halton_index += 1;
                if !observed.contains(&c) {
                    p = Some(c);
                    break;
                }
            }
            p.unwrap_or_else(|| random_unobserved(&cfg.space, &observed, &mut trial_rng))
        } else {
            let best = best_trial(&history).map_or(FAILED_SCORE, |t| t.score);
            match gp_fit(&history, &cfg.space, cfg.jitter) {
                Ok(gp) => propose_next(&gp, &cfg.space, &observed, best, &mut trial_rng),
                Err(_) => random_unobserved(&cfg.space, &observed, &mut trial_rng),
            }
        };
        let (score, failed) = match objective(&params) {
            Ok(s) if s.is_finite() => (s, false),
            _ => (FAILED_SCORE, true),
        };
        let trial = Trial {
            index,
            params,
            score,
            failed,
        };
        on_trial(&trial);
        observed.insert(params);
        history.push(trial);
    }

    let best = best_trial(&history).cloned().ok_or(Error::AllTrialsFailed)?;
    Ok(OptimizationResult { best, history })
}

pub fn optimize<F, E>(cfg: &OptimizerConfig, objective: F) -> Result<OptimizationResult>
where
    F: FnMut(&ClusterParams) -> std::result::Result<f64, E>,
    E: Display,
{
    optimize_resume(cfg, Vec::new(), objective, |_| {})
}
