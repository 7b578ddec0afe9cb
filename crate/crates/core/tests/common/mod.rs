#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, dim), |_| rng.random_range(-scale..scale))
}

/// Minimum SSE over every 2-partition with both parts nonempty.
pub fn exhaustive_two_means_sse(points: &Array2<f64>) -> f64 {
    let n = points.nrows();
    let d = points.ncols();
    let mut best = f64::INFINITY;
    // point 0 always in part A; masks over the remaining points choose part B
    for mask in 1u32..(1 << (n - 1)) {
        let mut sums = [vec![0.0; d], vec![0.0; d]];
        let mut counts = [0usize; 2];
        let part = |i: usize| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize };
        for i in 0..n {
            let p = part(i);
            counts[p] += 1;
            for j in 0..d {
                sums[p][j] += points[[i, j]];
            }
        }
        let mut sse = 0.0;
        for i in 0..n {
            let p = part(i);
            for j in 0..d {
                let m = sums[p][j] / counts[p] as f64;
                sse += (points[[i, j]] - m).powi(2);
            }
        }
        best = best.min(sse);
    }
    best
}

/// Adjusted Rand index from the pair-counting contingency table.
pub fn adjusted_rand(a: &[i64], b: &[i64]) -> f64 {
    use std::collections::HashMap;
    let n = a.len() as f64;
    let mut table: HashMap<(i64, i64), f64> = HashMap::new();
    let mut ra: HashMap<i64, f64> = HashMap::new();
    let mut rb: HashMap<i64, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *ra.entry(x).or_default() += 1.0;
        *rb.entry(y).or_default() += 1.0;
    }
    let c2 = |v: f64| v * (v - 1.0) / 2.0;
    let index: f64 = table.values().map(|&v| c2(v)).sum();
    let sa: f64 = ra.values().map(|&v| c2(v)).sum();
    let sb: f64 = rb.values().map(|&v| c2(v)).sum();
    let expected = sa * sb / c2(n);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Fraction of points whose label agrees with the majority ground truth of their cluster.
pub fn purity(labels: &[usize], truth: &[usize]) -> f64 {
    use std::collections::BTreeMap;
    let mut counts: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&l, &t) in labels.iter().zip(truth) {
        *counts.entry(l).or_default().entry(t).or_default() += 1;
    }
    let hit: usize = counts.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    hit as f64 / labels.len() as f64
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

/// Per point, every other index sorted by (distance, index).
pub fn brute_neighbors(points: &[Vec<f64>], dist: impl Fn(&[f64], &[f64]) -> f64) -> Vec<Vec<(usize, f64)>> {
    (0..points.len())
        .map(|i| {
            let mut v: Vec<(usize, f64)> = (0..points.len())
                .filter(|&j| j != i)
                .map(|j| (j, dist(&points[i], &points[j])))
                .collect();
            v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            v
        })
        .collect()
}

/// Kruskal with union-find over the dense mutual-reachability matrix; returns sorted edge weights.
pub fn kruskal_mutual_reachability(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    let n = points.len();
    let nbrs = brute_neighbors(points, euclid);
    let core: Vec<f64> = nbrs.iter().map(|v| v[min_samples - 1].1).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let w = euclid(&points[i], &points[j]).max(core[i]).max(core[j]);
            edges.push((w, i, j));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut out = Vec::new();
    for (w, i, j) in edges {
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
            out.push(w);
        }
    }
    out
}

/// Maximum total stability over all antichains of non-root nodes (the root
/// alone when it has no children), by enumeration.
pub fn best_antichain(tree: &nlskit::density::CondensedTree) -> f64 {
    let nodes = &tree.nodes;
    if nodes[0].children.is_empty() {
        return if nodes[0].size >= tree.min_cluster_size { nodes[0].stability } else { 0.0 };
    }
    let m = nodes.len() - 1;
    let mut best = 0.0f64;
    'subsets: for mask in 0u64..(1 << m) {
        let chosen: Vec<usize> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
        for &a in &chosen {
            for &b in &chosen {
                if a != b && tree.is_ancestor(a, b) {
                    continue 'subsets;
                }
            }
        }
        best = best.max(chosen.iter().map(|&c| nodes[c].stability).sum());
    }
    best
}

/// Gaussian blobs; returns points and the blob index of each.
pub fn blobs(rng: &mut ChaCha8Rng, centres: &[Vec<f64>], per: usize, sd: f64) -> (Array2<f64>, Vec<usize>) {
    use rand_distr::{Distribution, Normal};
    let dim = centres[0].len();
    let normal = Normal::new(0.0, sd).unwrap();
    let mut data = Vec::new();
    let mut truth = Vec::new();
    for (c, centre) in centres.iter().enumerate() {
        for _ in 0..per {
            for &x in centre {
                data.push(x + normal.sample(rng));
            }
            truth.push(c);
        }
    }
    (Array2::from_shape_vec((truth.len(), dim), data).unwrap(), truth)
}

/// Planted topics: well-separated embedding blobs in `dim` dimensions plus
/// topic-specific vocabularies (with a shared background vocabulary).
pub struct PlantedCorpus {
    pub corpus: nlskit::corpus::EmbeddedCorpus,
    pub tokens: nlskit::corpus::TokenizedCorpus,
    pub truth: Vec<usize>,
}

pub fn planted_topics(seed: u64, topics: usize, per_topic: usize, dim: usize) -> PlantedCorpus {
    use nlskit::corpus::{Document, EmbeddedCorpus, TokenizedCorpus};
    let mut r = rng(seed);
    let centres: Vec<Vec<f64>> = (0..topics)
        .map(|t| (0..dim).map(|d| if d % topics == t { 6.0 } else { 0.0 }).collect())
        .collect();
    let (vectors, truth) = blobs(&mut r, &centres, per_topic, 0.5);
    let background = ["good", "product", "use", "buy", "really"];
    let mut docs = Vec::new();
    let mut token_lists = Vec::new();
    for (i, &t) in truth.iter().enumerate() {
        let mut toks = Vec::new();
        for _ in 0..6 {
            toks.push(format!("t{t}w{}", r.random_range(0..8)));
        }
        for _ in 0..2 {
            toks.push(background[r.random_range(0..background.len())].to_owned());
        }
        let mut d = Document::new(format!("d{i}"));
        d.tokens = Some(toks.clone());
        docs.push(d);
        token_lists.push(toks);
    }
    let vecs = vectors.outer_iter().map(|v| v.to_vec()).collect();
    PlantedCorpus {
        corpus: EmbeddedCorpus::new(docs, vecs).unwrap(),
        tokens: TokenizedCorpus::new(token_lists),
        truth,
    }
}

/// Two far-apart sense blobs of instance vectors, with per-instance objects.
pub fn two_sense_corpus(seed: u64, per: usize, dim: usize) -> (nlskit::corpus::EmbeddedCorpus, Vec<usize>, Vec<Option<String>>) {
    use nlskit::corpus::{Document, EmbeddedCorpus};
    let mut r = rng(seed);
    let a: Vec<f64> = (0..dim).map(|d| if d == 0 { 8.0 } else { 0.0 }).collect();
    let b: Vec<f64> = (0..dim).map(|d| if d == 1 { 8.0 } else { 0.0 }).collect();
    let (v, truth) = blobs(&mut r, &[a, b], per, 1.0);
    let objects_a = ["shou", "shou", "shou", "yan", "pifu", "shen"];
    let objects_b = ["ren", "ganqing", "xin", "xin", "zizun"];
    let objects = truth
        .iter()
        .map(|&t| {
            if r.random_bool(0.1) {
                return None;
            }
            let pool: &[&str] = if t == 0 { &objects_a } else { &objects_b };
            Some(pool[r.random_range(0..pool.len())].to_owned())
        })
        .collect();
    let docs = (0..truth.len()).map(|i| Document::new(format!("i{i}"))).collect();
    let corpus = EmbeddedCorpus::new(docs, v.outer_iter().map(|x| x.to_vec()).collect()).unwrap();
    (corpus, truth, objects)
}

/// Trustworthiness of a low-dimensional layout with respect to the input (k neighbors).
pub fn trustworthiness(high: &[Vec<f64>], low: &[Vec<f64>], k: usize) -> f64 {
    let n = high.len();
    let hn = brute_neighbors(high, euclid);
    let ln = brute_neighbors(low, euclid);
    let mut penalty = 0.0;
    for i in 0..n {
        let mut rank = vec![0usize; n];
        for (r, &(j, _)) in hn[i].iter().enumerate() {
            rank[j] = r + 1;
        }
        for &(j, _) in ln[i].iter().take(k) {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    1.0 - 2.0 / (n as f64 * k as f64 * (2.0 * n as f64 - 3.0 * k as f64 - 1.0)) * penalty
}
