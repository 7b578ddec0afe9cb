mod common;

use std::collections::HashSet;
use std::time::Instant;

use nlskit::hyperopt::{
    expected_improvement, gp_fit, optimize, optimize_resume, propose_next, read_history, write_history, Bounds,
    GpSurrogate, OptimizerConfig, SearchSpace, Trial,
};
use nlskit::rng;
use nlskit::topic::ClusterParams;
use proptest::prelude::*;
use rand::Rng;

fn params(v: [usize; 4]) -> ClusterParams {
    ClusterParams {
        n_neighbors: v[0],
        n_components: v[1],
        min_cluster_size: v[2],
        min_samples: v[3],
    }
}

fn as_array(p: &ClusterParams) -> [usize; 4] {
    [p.n_neighbors, p.n_components, p.min_cluster_size, p.min_samples]
}

fn concave(opt: [usize; 4]) -> impl Fn(&ClusterParams) -> Result<f64, String> {
    move |p| {
        Ok(-as_array(p)
            .iter()
            .zip(&opt)
            .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
            .sum::<f64>())
    }
}

#[test]
fn interpolates_two_points() {
    let gp = GpSurrogate::fit(vec![vec![0.2], vec![0.7]], &[1.0, 3.0], 1e-8).unwrap();
    assert!((gp.posterior(&[0.2]).0 - 1.0).abs() < 1e-6);
    assert!((gp.posterior(&[0.7]).0 - 3.0).abs() < 1e-6);
    assert!(gp.posterior_standardized(&[0.2]).1 <= 1e-6);
}

#[test]
fn duplicated_point_is_absorbed() {
    let gp = GpSurrogate::fit(vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.1, 0.9]], &[2.0, 2.0, 0.0], 1e-8);
    assert!(gp.is_ok());
}

#[test]
fn smooth_function_held_out_midpoints() {
    let f = |x: f64| (3.0 * x).sin() + 0.5 * x;
    let xs: Vec<f64> = (0..10).map(|i| i as f64 / 9.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let gp = GpSurrogate::fit(xs.iter().map(|&x| vec![x]).collect(), &ys, 1e-8).unwrap();
    for w in xs.windows(2) {
        let mid = (w[0] + w[1]) / 2.0;
        let err = (gp.posterior(&[mid]).0 - f(mid)).abs();
        assert!(err < 0.1, "error {err} at {mid}");
    }
}

#[test]
fn reverts_to_prior_far_away() {
    let pts = vec![vec![0.0, 0.0], vec![0.05, 0.0], vec![0.0, 0.05]];
    let gp = GpSurrogate::fit_fixed(pts, &[1.0, 0.0, 2.0], 0.05, 1.0, 1e-8).unwrap();
    let (_, v) = gp.posterior_standardized(&[0.9, 0.9]);
    assert!((v - gp.signal_variance).abs() <= 0.05 * gp.signal_variance);
}

#[test]
fn mirrored_data_gives_mirrored_mean() {
    let xs = [0.1, 0.25, 0.4, 0.6, 0.75, 0.9];
    let ys = [0.3, 1.2, 2.0, 2.0, 1.2, 0.3];
    let gp = GpSurrogate::fit(xs.iter().map(|&x| vec![x]).collect(), &ys, 1e-8).unwrap();
    for i in 0..=20 {
        let x = i as f64 / 20.0;
        let (a, b) = (gp.posterior(&[x]).0, gp.posterior(&[1.0 - x]).0);
        assert!((a - b).abs() < 1e-8, "{a} vs {b} at {x}");
    }
}

#[test]
fn expected_improvement_examples() {
    assert!((expected_improvement(0.0, 1.0, 0.0) - 0.398_942_280_4).abs() < 1e-9);
    assert_eq!(expected_improvement(-1.0, 0.0, 0.0), 0.0);
    assert_eq!(expected_improvement(0.5, 0.0, 0.0), 0.5);
}

#[test]
fn proposal_tracks_exhaustive_argmax() {
    let space = SearchSpace {
        n_neighbors: Bounds::new(1, 7),
        n_components: Bounds::new(1, 7),
        min_cluster_size: Bounds::new(1, 7),
        min_samples: Bounds::new(1, 7),
    };
    let mut all = Vec::new();
    for a in 1..=7 {
        for b in 1..=7 {
            for c in 1..=7 {
                for d in 1..=c {
                    all.push(params([a, b, c, d]));
                }
            }
        }
    }
    let (mut checked, mut close) = (0, 0);
    for seed in 0..100u64 {
        let mut r = common::rng(seed);
        let opt = [r.random_range(1..=7), r.random_range(1..=7), r.random_range(4..=7), r.random_range(1..=3)];
        let f = concave(opt);
        let mut trials: Vec<Trial> = Vec::new();
        let mut observed = HashSet::new();
        while trials.len() < 12 {
            let p = all[r.random_range(0..all.len())];
            if observed.insert(p) {
                trials.push(Trial {
                    index: trials.len(),
                    params: p,
                    score: f(&p).unwrap(),
                    failed: false,
                });
            }
        }
        let best = trials.iter().map(|t| t.score).fold(f64::NEG_INFINITY, f64::max);
        let gp = gp_fit(&trials, &space, 1e-8).unwrap();
        let mut scored: Vec<(f64, ClusterParams)> = all
            .iter()
            .filter(|p| !observed.contains(*p))
            .map(|p| {
                let (m, v) = gp.posterior(&space.normalize(p));
                (expected_improvement(m, v, best), *p)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let peak = as_array(&scored[0].1);
        // a dominant peak: every point beyond one step of it has clearly lower EI
        let rival = scored
            .iter()
            .find(|(_, p)| as_array(p).iter().zip(&peak).any(|(x, y)| x.abs_diff(*y) > 1))
            .map_or(0.0, |s| s.0);
        if rival > 0.8 * scored[0].0 {
            continue;
        }
        checked += 1;
        let mut prng = rng::indexed_rng(seed, "test", 0);
        let proposal = as_array(&propose_next(&gp, &space, &observed, best, &mut prng));
        if proposal.iter().zip(&peak).all(|(x, y)| x.abs_diff(*y) <= 1) {
            close += 1;
        }
    }
    println!("{close}/{checked} proposals within one step");
    assert!(checked >= 25, "only {checked} fixtures with a dominant peak");
    assert_eq!(close, checked);
}

#[test]
fn concave_objective_optimum_found() {
    let opt = [27, 11, 40, 17];
    let start = Instant::now();
    let mut hits = 0;
    for seed in 0..10 {
        let cfg = OptimizerConfig {
            seed,
            ..OptimizerConfig::default()
        };
        let result = optimize(&cfg, concave(opt)).unwrap();
        let best = as_array(&result.best.params);
        if best.iter().zip(&opt).all(|(a, b)| a.abs_diff(*b) <= 2) {
            hits += 1;
        }
    }
    println!("{hits}/10 seeds within 2 steps in {:.1?}", start.elapsed());
    assert!(hits >= 9);
}

#[test]
fn budget_equal_to_init_is_quasi_random() {
    let cfg = OptimizerConfig {
        budget: 10,
        n_init: 10,
        ..OptimizerConfig::default()
    };
    let r = optimize(&cfg, concave([10, 10, 10, 10])).unwrap();
    assert_eq!(r.history.len(), 10);
}

#[test]
fn runs_are_reproducible_and_resumable() {
    let cfg = OptimizerConfig {
        budget: 30,
        seed: 3,
        ..OptimizerConfig::default()
    };
    let full = optimize(&cfg, concave([20, 5, 30, 10])).unwrap();
    assert_eq!(full, optimize(&cfg, concave([20, 5, 30, 10])).unwrap());

    let mut buf = Vec::new();
    write_history(&full.history[..17], &mut buf).unwrap();
    let partial = read_history(buf.as_slice()).unwrap();
    let resumed = optimize_resume(&cfg, partial, concave([20, 5, 30, 10]), |_| {}).unwrap();
    assert_eq!(resumed.history, full.history);
}

#[test]
fn failures_are_floored() {
    let cfg = OptimizerConfig {
        budget: 14,
        ..OptimizerConfig::default()
    };
    let r = optimize(&cfg, |p: &ClusterParams| {
        if p.n_neighbors % 2 == 0 {
            Err("odd only".to_string())
        } else {
            Ok(p.n_neighbors as f64)
        }
    })
    .unwrap();
    for t in &r.history {
        assert_eq!(t.failed, t.params.n_neighbors % 2 == 0);
        if t.failed {
            assert_eq!(t.score, -1.0);
        }
    }
    assert!(!r.best.failed);
}

proptest! {
    #[test]
    fn ei_nonnegative_and_monotone_in_sigma(mean in -5.0f64..5.0, best in -5.0f64..5.0, s1 in 0.0f64..3.0, s2 in 0.0f64..3.0) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let a = expected_improvement(mean, lo * lo, best);
        let b = expected_improvement(mean, hi * hi, best);
        prop_assert!(a >= 0.0 && b >= 0.0);
        if mean <= best {
            prop_assert!(b >= a - 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn history_respects_bounds_and_best_so_far(seed in 0u64..1000, opt in prop::array::uniform4(5usize..20)) {
        let cfg = OptimizerConfig { budget: 20, seed, ..OptimizerConfig::default() };
        let r = optimize(&cfg, concave(opt)).unwrap();
        prop_assert_eq!(r.history.len(), 20);
        let mut running = f64::NEG_INFINITY;
        let mut prev = f64::NEG_INFINITY;
        for t in &r.history {
            prop_assert!(cfg.space.contains(&t.params));
            running = running.max(t.score);
            prop_assert!(running >= prev);
            prev = running;
        }
        prop_assert_eq!(running, r.best.score);
    }
}
