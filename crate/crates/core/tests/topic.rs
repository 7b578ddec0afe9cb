mod common;

use std::collections::BTreeSet;

use nlskit::coherence::{npmi_pair, topic_npmi, CooccurrenceCounts, DEFAULT_EPS};
use nlskit::corpus::{EmbeddedCorpus, TokenizedCorpus};
use nlskit::manifold::ExecutionMode;
use nlskit::topic::{
    cluster_documents, ctfidf, top_topic_words, ClusterParams, TermWeighting, TopicAssignment, TopicEntry,
    TopicWords, WeightedTerm,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

fn words(lists: &[&[&str]]) -> TopicWords {
    TopicWords {
        topics: lists
            .iter()
            .enumerate()
            .map(|(i, ws)| TopicEntry {
                topic: i as i64,
                size: 1,
                words: ws
                    .iter()
                    .map(|w| WeightedTerm {
                        term: w.to_string(),
                        weight: 1.0,
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// NPMI straight from the documents: count presence with sets, no shared code.
fn oracle_npmi(docs: &[Vec<String>], x: &str, y: &str) -> f64 {
    let sets: Vec<BTreeSet<&str>> = docs.iter().map(|d| d.iter().map(String::as_str).collect()).collect();
    let n = sets.len() as f64;
    let px = sets.iter().filter(|s| s.contains(x)).count() as f64 / n;
    let py = sets.iter().filter(|s| s.contains(y)).count() as f64 / n;
    let pxy = sets.iter().filter(|s| s.contains(x) && s.contains(y)).count() as f64 / n;
    if pxy == 1.0 {
        return 1.0;
    }
    (((pxy + 1e-12) / (px * py)).ln() / -(pxy + 1e-12).ln()).clamp(-1.0, 1.0)
}

#[test]
fn npmi_closed_forms() {
    let c = CooccurrenceCounts::from_parts(100, &[("x", 50), ("y", 50)], &[("x", "y", 25)]);
    assert!(npmi_pair(&c, "x", "y", DEFAULT_EPS).abs() < 1e-9);
    let c = CooccurrenceCounts::from_parts(100, &[("x", 25), ("y", 25)], &[("x", "y", 25)]);
    assert!((npmi_pair(&c, "x", "y", DEFAULT_EPS) - 1.0).abs() < 1e-6);
    let c = CooccurrenceCounts::from_parts(100, &[("x", 40), ("y", 30)], &[("x", "y", 20)]);
    let hand = (5.0f64 / 3.0).ln() / -(0.2f64).ln();
    assert!((npmi_pair(&c, "x", "y", DEFAULT_EPS) - hand).abs() < 1e-6);
    assert!((hand - 0.3174).abs() < 1e-4);
}

#[test]
fn coherence_means() {
    let corpus = TokenizedCorpus::new(vec![toks("a b"), toks("a b"), toks("c"), toks("d")]);
    assert!((topic_npmi(&words(&[&["a", "b"]]), &corpus, 10, DEFAULT_EPS).unwrap() - 1.0).abs() < 1e-6);

    // second topic: c and d in half the documents each, together in a quarter (independent)
    let corpus = TokenizedCorpus::new(vec![toks("a b c d"), toks("a b c"), toks("d"), toks("e")]);
    let score = topic_npmi(&words(&[&["a", "b"], &["c", "d"]]), &corpus, 10, DEFAULT_EPS).unwrap();
    assert!((score - 0.5).abs() < 1e-6, "{score}");
    assert!(topic_npmi(&words(&[&["zz", "a"]]), &corpus, 10, DEFAULT_EPS).is_err());
}

#[test]
fn ctfidf_hand_case() {
    let corpus = TokenizedCorpus::new(vec![toks("x x a b"), toks("c c c d d d")]);
    let m = ctfidf(&corpus, &TopicAssignment::from_topics(vec![0, 1]), TermWeighting::Raw).unwrap();
    let expected = 2.0 * 3.5f64.ln();
    assert!((m.weight(0, "x").unwrap() - expected).abs() < 1e-9);
    assert!((expected - 2.5055).abs() < 1e-4);
    assert_eq!(m.weight(1, "x").unwrap(), 0.0);
    let top = top_topic_words(&m, 10).unwrap();
    assert_eq!(top.topics[0].words[0].term, "x");
    assert_eq!(top.topics[0].words.len(), 3);
}

#[test]
fn ctfidf_symmetry_and_single_class() {
    let corpus = TokenizedCorpus::new(vec![toks("s a a"), toks("s b b")]);
    let m = ctfidf(&corpus, &TopicAssignment::from_topics(vec![0, 1]), TermWeighting::Raw).unwrap();
    assert_eq!(m.weight(0, "s"), m.weight(1, "s"));

    let corpus = TokenizedCorpus::new(vec![toks("a a a b b c"), toks("c d")]);
    let m = ctfidf(&corpus, &TopicAssignment::from_topics(vec![0, 0]), TermWeighting::Raw).unwrap();
    let avg = m.average_class_size();
    let mut by_formula: Vec<(f64, &str)> =
        m.terms.iter().zip(&m.tf[0]).map(|(t, &tf)| (tf * (1.0 + avg / tf).ln(), t.as_str())).collect();
    by_formula.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    let ranked: Vec<String> = top_topic_words(&m, 10).unwrap().topics[0].words.iter().map(|w| w.term.clone()).collect();
    let expected: Vec<String> = by_formula.iter().map(|p| p.1.to_owned()).collect();
    assert_eq!(ranked, expected);
}

#[test]
fn identical_vectors_form_one_topic() {
    let corpus = EmbeddedCorpus::new(
        (0..30).map(|i| nlskit::corpus::Document::new(format!("d{i}"))).collect(),
        vec![vec![1.0, 2.0, 3.0]; 30],
    )
    .unwrap();
    let params = ClusterParams {
        n_neighbors: 5,
        n_components: 2,
        min_cluster_size: 5,
        min_samples: 3,
    };
    let a = cluster_documents(&corpus, &params, 1, ExecutionMode::Sequential).unwrap();
    assert_eq!(a.n_topics(), 1);
    assert_eq!(a.n_outliers(), 0);
    let small = ClusterParams {
        n_neighbors: 30,
        ..params
    };
    assert!(cluster_documents(&corpus, &small, 1, ExecutionMode::Sequential).is_err());
}

fn planted_params() -> ClusterParams {
    ClusterParams {
        n_neighbors: 15,
        n_components: 5,
        min_cluster_size: 15,
        min_samples: 5,
    }
}

#[test]
fn planted_topics_recovered() {
    let planted = common::planted_topics(21, 4, 60, 16);
    let assign = cluster_documents(&planted.corpus, &planted_params(), 42, ExecutionMode::Sequential).unwrap();
    let truth: Vec<i64> = planted.truth.iter().map(|&t| t as i64).collect();
    let ari = common::adjusted_rand(&assign.topics, &truth);
    assert_eq!(assign.n_topics(), 4);
    assert!(ari >= 0.9, "ARI {ari}");

    let top = top_topic_words(&ctfidf(&planted.tokens, &assign, TermWeighting::Raw).unwrap(), 10).unwrap();
    let found = topic_npmi(&top, &planted.tokens, 10, DEFAULT_EPS).unwrap();
    let mut shuffled = assign.topics.clone();
    shuffled.shuffle(&mut common::rng(99));
    let random = TopicAssignment::from_topics(shuffled);
    let rtop = top_topic_words(&ctfidf(&planted.tokens, &random, TermWeighting::Raw).unwrap(), 10).unwrap();
    let baseline = topic_npmi(&rtop, &planted.tokens, 10, DEFAULT_EPS).unwrap();
    assert!(found > baseline, "{found} vs {baseline}");

    let again = cluster_documents(&planted.corpus, &planted_params(), 42, ExecutionMode::Sequential).unwrap();
    let top_again = top_topic_words(&ctfidf(&planted.tokens, &again, TermWeighting::Raw).unwrap(), 10).unwrap();
    assert_eq!(top.to_json(), top_again.to_json());
}

fn token_corpus() -> impl Strategy<Value = (Vec<Vec<String>>, Vec<i64>)> {
    prop::collection::vec((prop::collection::vec("[a-f]", 1..6), -1i64..3), 2..30)
        .prop_map(|v| v.into_iter().unzip())
        .prop_filter("needs a clustered document", |(_, t): &(Vec<Vec<String>>, Vec<i64>)| t.iter().any(|&x| x >= 0))
}

proptest! {
    #[test]
    fn npmi_symmetric_bounded_and_matches_oracle(docs in prop::collection::vec(prop::collection::vec("[a-e]", 1..5), 1..30)) {
        let corpus = TokenizedCorpus::new(docs.clone());
        let terms: Vec<String> = corpus.vocabulary().keys().cloned().collect();
        let counts = CooccurrenceCounts::from_corpus(&corpus, terms.iter().map(String::as_str));
        let doubled = TokenizedCorpus::new(docs.iter().chain(&docs).cloned().collect());
        let counts2 = CooccurrenceCounts::from_corpus(&doubled, terms.iter().map(String::as_str));
        for x in &terms {
            for y in &terms {
                if x == y {
                    continue;
                }
                let v = npmi_pair(&counts, x, y, DEFAULT_EPS);
                prop_assert!((-1.0..=1.0).contains(&v));
                prop_assert_eq!(v, npmi_pair(&counts, y, x, DEFAULT_EPS));
                prop_assert!((v - oracle_npmi(&docs, x, y)).abs() < 1e-9);
                prop_assert!((v - npmi_pair(&counts2, x, y, DEFAULT_EPS)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ctfidf_ignores_document_order((docs, topics) in token_corpus(), seed in 0u64..1000) {
        let base = ctfidf(&TokenizedCorpus::new(docs.clone()), &TopicAssignment::from_topics(topics.clone()), TermWeighting::Raw).unwrap();
        let mut order: Vec<usize> = (0..docs.len()).collect();
        order.shuffle(&mut common::rng(seed));
        let d2: Vec<Vec<String>> = order.iter().map(|&i| docs[i].clone()).collect();
        let t2: Vec<i64> = order.iter().map(|&i| topics[i]).collect();
        let perm = ctfidf(&TokenizedCorpus::new(d2), &TopicAssignment::from_topics(t2), TermWeighting::Raw).unwrap();
        prop_assert_eq!(&base.terms, &perm.terms);
        for (a, b) in base.weights.iter().flatten().zip(perm.weights.iter().flatten()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (row_w, row_tf) in base.weights.iter().zip(&base.tf) {
            for (&w, &tf) in row_w.iter().zip(row_tf) {
                prop_assert!(w >= 0.0);
                prop_assert_eq!(w == 0.0, tf == 0.0);
            }
        }
    }

    #[test]
    fn dropping_a_topic_keeps_other_counts((docs, topics) in token_corpus()) {
        let present: BTreeSet<i64> = topics.iter().copied().filter(|&t| t >= 0).collect();
        prop_assume!(present.len() >= 2);
        let drop = *present.iter().next().unwrap();
        let full = ctfidf(&TokenizedCorpus::new(docs.clone()), &TopicAssignment::from_topics(topics.clone()), TermWeighting::Raw).unwrap();
        let (d2, t2): (Vec<Vec<String>>, Vec<i64>) = docs.into_iter().zip(topics).filter(|(_, t)| *t != drop).unzip();
        let reduced = ctfidf(&TokenizedCorpus::new(d2), &TopicAssignment::from_topics(t2), TermWeighting::Raw).unwrap();
        for (ci, &topic) in reduced.topics.iter().enumerate() {
            let fi = full.topics.iter().position(|&t| t == topic).unwrap();
            for (ti, term) in reduced.terms.iter().enumerate() {
                let fj = full.terms.iter().position(|t| t == term).unwrap();
                prop_assert_eq!(reduced.tf[ci][ti], full.tf[fi][fj]);
            }
        }
    }
}
