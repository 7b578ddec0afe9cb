//! Embedding-space topic discovery: UMAP reduction, HDBSCAN clustering and
//! class-based TF-IDF topic words.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddedCorpus, TokenizedCorpus};
use crate::density::{self, OUTLIER};
use crate::error::{Error, Result};
use crate::manifold::{umap_reduce, ExecutionMode, LayoutConfig, Metric};
use crate::rng;

/// Default number of words kept per topic.
pub const DEFAULT_TOP_N: usize = 10;

/// The four tuned clustering hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClusterParams {
    pub n_neighbors: usize,
    pub n_components: usize,
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

/// Per-document topic ids (`-1` for outliers) with HDBSCAN membership strengths.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicAssignment {
    pub topics: Vec<i64>,
    pub membership: Vec<f64>,
}

impl TopicAssignment {
    pub fn from_topics(topics: Vec<i64>) -> Self {
        let membership = topics.iter().map(|&t| if t == OUTLIER { 0.0 } else { 1.0 }).collect();
        TopicAssignment { topics, membership }
    }

    pub fn n_topics(&self) -> usize {
        self.topics.iter().filter(|&&t| t != OUTLIER).collect::<BTreeSet<_>>().len()
    }

    pub fn n_outliers(&self) -> usize {
        self.topics.iter().filter(|&&t| t == OUTLIER).count()
    }

    pub fn to_tsv(&self, ids: &[String]) -> String {
        density::ClusterLabels {
            labels: self.topics.clone(),
            membership: self.membership.clone(),
        }
        .to_tsv(ids)
    }
}

/// Reduces document vectors (cosine metric) and clusters the layout with HDBSCAN.
pub fn cluster_documents(
    corpus: &EmbeddedCorpus,
    params: &ClusterParams,
    seed: u64,
    mode: ExecutionMode,
) -> Result<TopicAssignment> {
    if params.min_samples > params.min_cluster_size {
        return Err(Error::invalid("min_samples must not exceed min_cluster_size"));
    }
    let mut layout = LayoutConfig::new(params.n_components).with_seed(rng::stage_seed(seed, "topics/umap"));
    layout.mode = mode;
    let reduced = umap_reduce(corpus.vectors(), params.n_neighbors, &layout, Metric::Cosine)?;
    let labels = density::hdbscan(&reduced.coordinates, params.min_cluster_size, Some(params.min_samples))?;
    Ok(TopicAssignment {
        topics: labels.labels,
        membership: labels.membership,
    })
}

/// c-TF-IDF weights for each non-outlier topic over the vocabulary of clustered documents.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTermMatrix {
    pub topics: Vec<i64>,
    /// Documents per topic.
    pub sizes: Vec<usize>,
    pub terms: Vec<String>,
    /// Raw term counts per topic.
    pub tf: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
    /// Token count of each class document.
    pub class_totals: Vec<f64>,
    /// Term counts across all classes.
    pub term_freq: Vec<f64>,
}

impl ClassTermMatrix {
    pub fn weight(&self, topic: i64, term: &str) -> Option<f64> {
        let c = self.topics.iter().position(|&t| t == topic)?;
        let t = self.terms.binary_search_by(|x| x.as_str().cmp(term)).ok()?;
        Some(self.weights[c][t])
    }

    /// Average token count per class.
    pub fn average_class_size(&self) -> f64 {
        self.class_totals.iter().sum::<f64>() / self.class_totals.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermWeighting {
    /// Raw counts.
    #[default]
    Raw,
    /// Counts divided by the class token total.
    L1,
}

/// `W(t, c) = tf(t, c) * ln(1 + A / f(t))`, with A the average token count per
/// class and f(t) the term's count over all classes. Outlier documents are excluded.
pub fn ctfidf(tokens: &TokenizedCorpus, assignment: &TopicAssignment, weighting: TermWeighting) -> Result<ClassTermMatrix> {
    if tokens.len() != assignment.topics.len() {
        return Err(Error::invalid(format!(
            "{} token lists but {} topic labels",
            tokens.len(),
            assignment.topics.len()
        )));
    }
    let mut classes: BTreeMap<i64, (usize, BTreeMap<&str, f64>)> = BTreeMap::new();
    for (doc, &topic) in tokens.docs().iter().zip(&assignment.topics) {
        if topic == OUTLIER {
            continue;
        }
        let entry = classes.entry(topic).or_default();
        entry.0 += 1;
        for t in doc {
            *entry.1.entry(t.as_str()).or_default() += 1.0;
        }
    }
    if classes.is_empty() {
        return Err(Error::NoClusteredDocuments);
    }
    let terms: Vec<String> = classes
        .values()
        .flat_map(|(_, counts)| counts.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_owned)
        .collect();
    let index: BTreeMap<&str, usize> = terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();

    let topics: Vec<i64> = classes.keys().copied().collect();
    let sizes: Vec<usize> = classes.values().map(|c| c.0).collect();
    let tf: Vec<Vec<f64>> = classes
        .values()
        .map(|(_, counts)| {
            let mut row = vec![0.0; terms.len()];
            for (t, &c) in counts {
                row[index[t]] = c;
            }
            row
        })
        .collect();
    let class_totals: Vec<f64> = tf.iter().map(|r| r.iter().sum()).collect();
    let mut term_freq = vec![0.0; terms.len()];
    for row in &tf {
        for (f, x) in term_freq.iter_mut().zip(row) {
            *f += x;
        }
    }
    let avg = class_totals.iter().sum::<f64>() / class_totals.len() as f64;
    let idf: Vec<f64> = term_freq.iter().map(|&f| (1.0 + avg / f).ln()).collect();
    let weights = tf
        .par_iter()
        .zip(&class_totals)
        .map(|(row, &total)| {
            row.iter()
                .zip(&idf)
                .map(|(&c, &w)| {
                    let tf = match weighting {
                        TermWeighting::Raw => c,
                        TermWeighting::L1 if total > 0.0 => c / total,
                        TermWeighting::L1 => 0.0,
                    };
                    tf * w
                })
                .collect()
        })
        .collect();
    Ok(ClassTermMatrix {
        topics,
        sizes,
        terms,
        tf,
        weights,
        class_totals,
        term_freq,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedTerm {
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub topic: i64,
    /// Number of documents (sentences) in the topic.
    pub size: usize,
    pub words: Vec<WeightedTerm>,
}

/// Top-weighted terms per topic; serializes as a JSON array of [`TopicEntry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TopicWords {
    pub topics: Vec<TopicEntry>,
}

impl TopicWords {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("topic words serialize")
    }
}

/// The `top_n` highest-weighted nonzero terms of each topic, ties broken lexicographically.
pub fn top_topic_words(matrix: &ClassTermMatrix, top_n: usize) -> Result<TopicWords> {
    if top_n == 0 {
        return Err(Error::invalid("top_n must be at least 1"));
    }
    let topics = matrix
        .topics
        .iter()
        .zip(&matrix.sizes)
        .zip(&matrix.weights)
        .map(|((&topic, &size), row)| {
            let mut ranked: Vec<(usize, f64)> = row
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, w)| w > 0.0)
                .collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| matrix.terms[a.0].cmp(&matrix.terms[b.0])));
            ranked.truncate(top_n);
            TopicEntry {
                topic,
                size,
                words: ranked
                    .into_iter()
                    .map(|(i, weight)| WeightedTerm {
                        term: matrix.terms[i].clone(),
                        weight,
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(TopicWords { topics })
}
