//! Run configuration: a TOML file, overridden by command-line flags.
//!
//! Relative paths in the file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use nlskit::hyperopt::SearchSpace;
use nlskit::topic::{ClusterParams, TermWeighting, DEFAULT_TOP_N};
use serde::Deserialize;

use crate::failure::Failure;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub topics: TopicsSection,
    pub optimize: OptimizeSection,
    pub senses: SensesSection,
    pub profile: ProfileSection,
    pub count: CountSection,
    pub keywords: KeywordsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicsSection {
    /// Vector file (JSONL or binary).
    pub vectors: Option<PathBuf>,
    /// Documents JSONL supplying tokens or text; defaults to the vector file's own records.
    pub documents: Option<PathBuf>,
    /// One stopword per line.
    pub stopwords: Option<PathBuf>,
    /// `surface<TAB>lemma` per line.
    pub lemmas: Option<PathBuf>,
    pub n_neighbors: usize,
    pub n_components: usize,
    pub min_cluster_size: usize,
    pub min_samples: usize,
    pub top_n: usize,
    pub weighting: TermWeighting,
}

impl Default for TopicsSection {
    fn default() -> Self {
        TopicsSection {
            vectors: None,
            documents: None,
            stopwords: None,
            lemmas: None,
            n_neighbors: 15,
            n_components: 5,
            min_cluster_size: 10,
            min_samples: 5,
            top_n: DEFAULT_TOP_N,
            weighting: TermWeighting::Raw,
        }
    }
}

impl TopicsSection {
    pub fn params(&self) -> ClusterParams {
        ClusterParams {
            n_neighbors: self.n_neighbors,
            n_components: self.n_components,
            min_cluster_size: self.min_cluster_size,
            min_samples: self.min_samples,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub budget: usize,
    pub n_init: usize,
    pub space: SearchSpace,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            budget: 150,
            n_init: 10,
            space: SearchSpace::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensesSection {
    pub vectors: Option<PathBuf>,
    /// `id<TAB>object` per line.
    pub objects: Option<PathBuf>,
    pub word: String,
    pub k: usize,
    pub n_neighbors: usize,
    pub top_n: usize,
}

impl Default for SensesSection {
    fn default() -> Self {
        SensesSection {
            vectors: None,
            objects: None,
            word: "target".into(),
            k: 2,
            n_neighbors: 15,
            top_n: 5,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    /// Profile CSV; the bundled shang/harm/kizutsukeru table when absent.
    pub table: Option<PathBuf>,
    /// Frame annotations TSV.
    pub frames: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub language: String,
    pub name: String,
    pub lemmas: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub language: String,
    pub name: String,
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountSection {
    pub lemmas: Option<PathBuf>,
    pub targets: Vec<TargetSpec>,
    pub partitions: Vec<PartitionSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeywordsSection {
    pub target: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    pub min_doc_ratio: f64,
    pub top: usize,
}

impl Default for KeywordsSection {
    fn default() -> Self {
        KeywordsSection {
            target: None,
            reference: None,
            stopwords: None,
            lemmas: None,
            min_doc_ratio: 0.05,
            top: 50,
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io("config", path, &e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Failure::usage("config", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        cfg.resolve(&base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        rebase(base, &mut self.out_dir);
        for p in [
            &mut self.topics.vectors,
            &mut self.topics.documents,
            &mut self.topics.stopwords,
            &mut self.topics.lemmas,
            &mut self.senses.vectors,
            &mut self.senses.objects,
            &mut self.profile.table,
            &mut self.profile.frames,
            &mut self.count.lemmas,
            &mut self.keywords.target,
            &mut self.keywords.reference,
            &mut self.keywords.stopwords,
            &mut self.keywords.lemmas,
        ] {
            rebase(base, p);
        }
        for part in &mut self.count.partitions {
            for input in &mut part.inputs {
                if input.is_relative() {
                    *input = base.join(&*input);
                }
            }
        }
    }
}
