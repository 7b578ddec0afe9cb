//! NPMI topic coherence over document-level co-occurrence.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use crate::corpus::TokenizedCorpus;
use crate::error::{Error, Result};
use crate::topic::TopicWords;

pub const DEFAULT_EPS: f64 = 1e-12;

/// Document counts for a set of terms and their pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CooccurrenceCounts {
    pub n_docs: usize,
    counts: HashMap<String, usize>,
    joint: HashMap<(String, String), usize>,
}

fn pair_key(x: &str, y: &str) -> (String, String) {
    if x <= y {
        (x.to_owned(), y.to_owned())
    } else {
        (y.to_owned(), x.to_owned())
    }
}

impl CooccurrenceCounts {
    /// Counts, over documents, the presence of each tracked term and pair.
    pub fn from_corpus<'a>(corpus: &TokenizedCorpus, terms: impl IntoIterator<Item = &'a str>) -> Self {
        let tracked: BTreeSet<&str> = terms.into_iter().collect();
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut joint: HashMap<(String, String), usize> = HashMap::new();
        for doc in corpus.docs() {
            let present: Vec<&str> = doc
                .iter()
                .map(String::as_str)
                .filter(|t| tracked.contains(t))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            for (i, &x) in present.iter().enumerate() {
                *counts.entry(x.to_owned()).or_default() += 1;
                for &y in &present[i + 1..] {
                    *joint.entry(pair_key(x, y)).or_default() += 1;
                }
            }
        }
        CooccurrenceCounts {
            n_docs: corpus.len(),
            counts,
            joint,
        }
    }

    /// Direct construction from known counts.
    pub fn from_parts(n_docs: usize, counts: &[(&str, usize)], joint: &[(&str, &str, usize)]) -> Self {
        CooccurrenceCounts {
            n_docs,
            counts: counts.iter().map(|&(t, c)| (t.to_owned(), c)).collect(),
            joint: joint.iter().map(|&(x, y, c)| (pair_key(x, y), c)).collect(),
        }
    }

    pub fn count(&self, term: &str) -> usize {
        self.counts.get(term).copied().unwrap_or(0)
    }

    pub fn joint(&self, x: &str, y: &str) -> usize {
        if x == y {
            return self.count(x);
        }
        self.joint.get(&pair_key(x, y)).copied().unwrap_or(0)
    }
}

/// `ln((p(x,y) + eps) / (p(x) p(y))) / -ln(p(x,y) + eps)`, clamped to `[-1, 1]`.
///
/// A pair present in every document is perfectly associated; the formula would
/// otherwise divide by `-ln(1 + eps)` and flip sign, so it is defined as 1.
pub fn npmi_pair(counts: &CooccurrenceCounts, x: &str, y: &str, eps: f64) -> f64 {
    let n = counts.n_docs as f64;
    let (cx, cy, cxy) = (counts.count(x), counts.count(y), counts.joint(x, y));
    debug_assert!(cx > 0 && cy > 0, "npmi_pair requires both terms to occur");
    if cxy == counts.n_docs {
        return 1.0;
    }
    let (px, py, pxy) = (cx as f64 / n, cy as f64 / n, cxy as f64 / n);
    let v = ((pxy + eps) / (px * py)).ln() / -(pxy + eps).ln();
    v.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    /// Mean pairwise NPMI per topic; `None` when fewer than two words occur in the corpus.
    pub per_topic: Vec<Option<f64>>,
    pub mean: f64,
}

pub fn topic_coherence(topics: &TopicWords, corpus: &TokenizedCorpus, top_n: usize, eps: f64) -> Result<CoherenceReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let words: Vec<Vec<&str>> = topics
        .topics
        .iter()
        .map(|t| t.words.iter().take(top_n).map(|w| w.term.as_str()).collect())
        .collect();
    let counts = CooccurrenceCounts::from_corpus(corpus, words.iter().flatten().copied());
    let per_topic: Vec<Option<f64>> = words
        .par_iter()
        .map(|ws| {
            let present: Vec<&str> = ws.iter().copied().filter(|w| counts.count(w) > 0).collect();
            if present.len() < 2 {
                return None;
            }
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for (i, x) in present.iter().enumerate() {
                for y in &present[i + 1..] {
                    sum += npmi_pair(&counts, x, y, eps);
                    pairs += 1;
                }
            }
            Some(sum / pairs as f64)
        })
        .collect();
    let scored: Vec<f64> = per_topic.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(Error::CoherenceUndefined);
    }
    let mean = (scored.iter().sum::<f64>() / scored.len() as f64).clamp(-1.0, 1.0);
    Ok(CoherenceReport { per_topic, mean })
}

/// Mean NPMI over topics with at least two scoreable words.
pub fn topic_npmi(topics: &TopicWords, corpus: &TokenizedCorpus, top_n: usize, eps: f64) -> Result<f64> {
    topic_coherence(topics, corpus, top_n, eps).map(|r| r.mean)
}
