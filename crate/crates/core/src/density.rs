//! HDBSCAN: mutual-reachability MST, condensed cluster tree and
//! excess-of-mass cluster selection with outlier labeling.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::manifold::{distance_row, Metric};

/// Label assigned to points outside every selected cluster.
pub const OUTLIER: i64 = -1;

/// Distance from each point to its `min_samples`-th nearest other point.
pub fn core_distances(vectors: &Array2<f64>, min_samples: usize) -> Result<Vec<f64>> {
    let n = vectors.nrows();
    if min_samples == 0 || min_samples >= n {
        return Err(Error::invalid(format!(
            "min_samples = {min_samples} requires 1 <= min_samples < n = {n}"
        )));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = distance_row(vectors, None, Metric::Euclidean, i);
            row.swap_remove(i);
            let (_, kth, _) = row.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            *kth
        })
        .collect())
}

/// Minimum spanning tree; edges stored with `i < j` in the order Prim added them.
#[derive(Debug, Clone, PartialEq)]
pub struct Mst {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Mst {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Prim's algorithm over the implicit dense matrix
/// `d*(a, b) = max(core(a), core(b), d(a, b))`; ties go to the lower index pair.
pub fn mutual_reachability_mst(vectors: &Array2<f64>, core: &[f64]) -> Result<Mst> {
    let n = vectors.nrows();
    if core.len() != n {
        return Err(Error::invalid("core distance count does not match points"));
    }
    if n == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut in_tree = vec![false; n];
    let mut best_w = vec![f64::INFINITY; n];
    let mut best_from = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;

    for _ in 1..n {
        let row = distance_row(vectors, None, Metric::Euclidean, current);
        let updates: Vec<(usize, f64)> = (0..n)
            .into_par_iter()
            .filter(|&j| !in_tree[j])
            .map(|j| (j, row[j].max(core[current]).max(core[j])))
            .collect();
        for (j, w) in updates {
            let better = w < best_w[j]
                || (w == best_w[j] && ordered(current, j) < ordered(best_from[j], j));
            if better {
                best_w[j] = w;
                best_from[j] = current;
            }
        }
        let mut next = usize::MAX;
        for j in (0..n).filter(|&j| !in_tree[j]) {
            if next == usize::MAX {
                next = j;
                continue;
            }
            let cand = (best_w[j], ordered(best_from[j], j));
            let inc = (best_w[next], ordered(best_from[next], next));
            if cand.0 < inc.0 || (cand.0 == inc.0 && cand.1 < inc.1) {
                next = j;
            }
        }
        in_tree[next] = true;
        let (a, b) = ordered(best_from[next], next);
        edges.push((a, b, best_w[next]));
        current = next;
    }
    Ok(Mst { n, edges })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub lambda_birth: f64,
    pub lambda_death: f64,
    pub size: usize,
    /// Excess of mass: sum over member points of `lambda_p - lambda_birth`.
    pub stability: f64,
}

/// The cluster from which a point falls out, and at what lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointExit {
    pub cluster: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensedTree {
    pub min_cluster_size: usize,
    /// Node 0 is the root; children always have larger ids than their parent.
    pub nodes: Vec<ClusterNode>,
    pub points: Vec<PointExit>,
}

impl CondensedTree {
    pub fn is_ancestor(&self, ancestor: usize, mut node: usize) -> bool {
        while let Some(p) = self.nodes[node].parent {
            if p == ancestor {
                return true;
            }
            node = p;
        }
        false
    }
}

struct Dendrogram {
    /// Internal node `n + k` merges `children[k]` at `weights[k]`.
    children: Vec<(usize, usize)>,
    weights: Vec<f64>,
    sizes: Vec<usize>,
    n: usize,
}

impl Dendrogram {
    fn from_mst(mst: &Mst) -> Self {
        let n = mst.n;
        let mut edges = mst.edges.clone();
        edges.sort_by(|x, y| x.2.total_cmp(&y.2).then((x.0, x.1).cmp(&(y.0, y.1))));
        let mut parent: Vec<usize> = (0..2 * n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut sizes = vec![1; n];
        let mut children = Vec::with_capacity(n.saturating_sub(1));
        let mut weights = Vec::with_capacity(n.saturating_sub(1));
        for (i, j, w) in edges {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            let node = n + children.len();
            parent[ri] = node;
            parent[rj] = node;
            sizes.push(sizes[ri] + sizes[rj]);
            children.push((ri, rj));
            weights.push(w);
        }
        Dendrogram {
            children,
            weights,
            sizes,
            n,
        }
    }

    fn root(&self) -> usize {
        self.n + self.children.len() - 1
    }

    fn leaves(&self, node: usize, out: &mut Vec<usize>) {
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n {
                out.push(x);
            } else {
                let (l, r) = self.children[x - self.n];
                stack.push(r);
                stack.push(l);
            }
        }
    }
}

fn weight_to_lambda(w: f64) -> f64 {
    if w > 0.0 {
        1.0 / w
    } else {
        f64::INFINITY
    }
}

/// Condenses the single-linkage hierarchy of an MST: a split creates two new
/// clusters only when both sides have at least `min_cluster_size` points,
/// otherwise the smaller side's points fall out at `lambda = 1 / weight`.
/// Merges at weight 0 never split: coincident points leave together at infinite lambda.
pub fn condense_tree(mst: &Mst, min_cluster_size: usize) -> Result<CondensedTree> {
    if min_cluster_size < 2 {
        return Err(Error::invalid("min_cluster_size must be at least 2"));
    }
    let n = mst.n;
    if n == 0 || mst.edges.len() + 1 != n {
        return Err(Error::invalid("MST must have n - 1 edges over n >= 1 points"));
    }
    let mut nodes = vec![ClusterNode {
        parent: None,
        children: Vec::new(),
        lambda_birth: 0.0,
        lambda_death: 0.0,
        size: n,
        stability: 0.0,
    }];
    let mut points = vec![
        PointExit {
            cluster: 0,
            lambda: f64::INFINITY
        };
        n
    ];
    if n == 1 {
        nodes[0].lambda_death = f64::INFINITY;
        nodes[0].stability = f64::INFINITY;
        return Ok(CondensedTree {
            min_cluster_size,
            nodes,
            points,
        });
    }

    let dendro = Dendrogram::from_mst(mst);
    let mut leaves = Vec::new();
    let mut stack = vec![(dendro.root(), 0usize)];

    let mut fall = |nodes: &mut Vec<ClusterNode>, points: &mut Vec<PointExit>, node: usize, cluster: usize, lambda: f64| {
        leaves.clear();
        dendro.leaves(node, &mut leaves);
        let c = &mut nodes[cluster];
        for &p in leaves.iter() {
            points[p] = PointExit { cluster, lambda };
            c.stability += lambda - c.lambda_birth;
            c.lambda_death = c.lambda_death.max(lambda);
        }
    };

    while let Some((node, cluster)) = stack.pop() {
        if node < n {
            // only reachable when a cluster's dendrogram node is a single point
            fall(&mut nodes, &mut points, node, cluster, f64::INFINITY);
            continue;
        }
        let k = node - n;
        let (left, right) = dendro.children[k];
        let lambda = weight_to_lambda(dendro.weights[k]);
        let (ls, rs) = (dendro.sizes[left], dendro.sizes[right]);
        let (left_big, right_big) = (ls >= min_cluster_size, rs >= min_cluster_size);

        if lambda.is_infinite() {
            fall(&mut nodes, &mut points, node, cluster, lambda);
            continue;
        }
        match (left_big, right_big) {
            (true, true) => {
                nodes[cluster].lambda_death = lambda;
                for (child, size) in [(left, ls), (right, rs)] {
                    let id = nodes.len();
                    let birth = nodes[cluster].lambda_birth;
                    nodes[cluster].stability += size as f64 * (lambda - birth);
                    nodes[cluster].children.push(id);
                    nodes.push(ClusterNode {
                        parent: Some(cluster),
                        children: Vec::new(),
                        lambda_birth: lambda,
                        lambda_death: lambda,
                        size,
                        stability: 0.0,
                    });
                    stack.push((child, id));
                }
                // visit the left child first
                let len = stack.len();
                stack.swap(len - 1, len - 2);
            }
            (true, false) => {
                fall(&mut nodes, &mut points, right, cluster, lambda);
                stack.push((left, cluster));
            }
            (false, true) => {
                fall(&mut nodes, &mut points, left, cluster, lambda);
                stack.push((right, cluster));
            }
            (false, false) => {
                fall(&mut nodes, &mut points, left, cluster, lambda);
                fall(&mut nodes, &mut points, right, cluster, lambda);
            }
        }
    }
    Ok(CondensedTree {
        min_cluster_size,
        nodes,
        points,
    })
}

/// Per-point labels (`0..k` or [`OUTLIER`]) and membership strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabels {
    pub labels: Vec<i64>,
    pub membership: Vec<f64>,
}

impl ClusterLabels {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }

    pub fn n_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l == OUTLIER).count()
    }

    /// TSV with header `id\tlabel\tmembership`.
    pub fn to_tsv(&self, ids: &[String]) -> String {
        let mut out = String::from("id\tlabel\tmembership\n");
        for ((id, l), m) in ids.iter().zip(&self.labels).zip(&self.membership) {
            out.push_str(&format!("{id}\t{l}\t{m}\n"));
        }
        out
    }
}

/// Chooses the excess-of-mass optimal set of non-nested clusters.
///
/// When the root never splits it is the only candidate (kept if large enough);
/// otherwise candidates are all non-root nodes and a node is kept iff its
/// stability is at least the best total over its descendants.
pub fn select_clusters(tree: &CondensedTree) -> Vec<usize> {
    let nodes = &tree.nodes;
    if nodes[0].children.is_empty() {
        return if nodes[0].size >= tree.min_cluster_size {
            vec![0]
        } else {
            Vec::new()
        };
    }
    let mut best = vec![0.0; nodes.len()];
    let mut keep = vec![false; nodes.len()];
    for id in (1..nodes.len()).rev() {
        let below: f64 = nodes[id].children.iter().map(|&c| best[c]).sum();
        if nodes[id].stability >= below {
            keep[id] = true;
            best[id] = nodes[id].stability;
        } else {
            best[id] = below;
        }
    }
    let mut selected = Vec::new();
    let mut stack: Vec<usize> = nodes[0].children.iter().rev().copied().collect();
    while let Some(id) = stack.pop() {
        if keep[id] {
            selected.push(id);
        } else {
            stack.extend(nodes[id].children.iter().rev());
        }
    }
    selected.sort_unstable();
    selected
}

pub fn extract_clusters(tree: &CondensedTree) -> ClusterLabels {
    let selected = select_clusters(tree);
    let n = tree.points.len();
    let mut label_of_node = vec![None; tree.nodes.len()];
    for (label, &id) in selected.iter().enumerate() {
        label_of_node[id] = Some(label);
    }
    // nearest selected ancestor (or self) of every node
    let mut owner: Vec<Option<usize>> = vec![None; tree.nodes.len()];
    for id in 0..tree.nodes.len() {
        owner[id] = label_of_node[id].or_else(|| tree.nodes[id].parent.and_then(|p| owner[p]));
    }

    let mut labels = vec![OUTLIER; n];
    let mut max_lambda = vec![0.0_f64; selected.len()];
    for (p, exit) in tree.points.iter().enumerate() {
        if let Some(l) = owner[exit.cluster] {
            labels[p] = l as i64;
            max_lambda[l] = max_lambda[l].max(exit.lambda);
        }
    }
    let membership = labels
        .iter()
        .zip(&tree.points)
        .map(|(&l, exit)| {
            if l == OUTLIER {
                return 0.0;
            }
            let top = max_lambda[l as usize];
            let m = if top.is_infinite() {
                if exit.lambda.is_infinite() {
                    1.0
                } else {
                    0.0
                }
            } else if top > 0.0 {
                exit.lambda / top
            } else {
                1.0
            };
            m.clamp(0.0, 1.0)
        })
        .collect();
    ClusterLabels { labels, membership }
}

/// Full HDBSCAN; `min_samples` defaults to `min_cluster_size`.
pub fn hdbscan(vectors: &Array2<f64>, min_cluster_size: usize, min_samples: Option<usize>) -> Result<ClusterLabels> {
    let core = core_distances(vectors, min_samples.unwrap_or(min_cluster_size))?;
    let mst = mutual_reachability_mst(vectors, &core)?;
    let tree = condense_tree(&mst, min_cluster_size)?;
    Ok(extract_clusters(&tree))
}
