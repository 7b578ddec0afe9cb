use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use nlskit::coherence::{topic_coherence, CoherenceReport, DEFAULT_EPS};
use nlskit::corpus::{
    count_targets, extract_keywords, load_corpus, load_documents, tokenize, Document, EmbeddedCorpus,
    FrequencyRow, FrequencyTable, TargetSets, TokenizedCorpus, VectorFormat,
};
use nlskit::hyperopt::{optimize_resume, read_history, write_history, OptimizerConfig};
use nlskit::manifold::ExecutionMode;
use nlskit::profile::{
    appendix_table, correspondence_analysis, frame_tally, inertia_report, inertia_report_tsv, load_profile_table,
    moon_plot, parse_annotations, MoonStyle,
};
use nlskit::senses::{induce_senses, profile_clusters, SenseConfig};
use nlskit::topic::{cluster_documents, ctfidf, top_topic_words, ClusterParams, TermWeighting, TopicAssignment, TopicWords};
use serde_json::json;

use crate::config::{CountSection, KeywordsSection, OptimizeSection, ProfileSection, SensesSection, TopicsSection};
use crate::failure::{require, Failure, StageExt};

/// Settings shared by every command.
pub struct Env {
    pub seed: u64,
    pub mode: ExecutionMode,
    pub out_dir: PathBuf,
}

impl Env {
    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        fs::create_dir_all(&self.out_dir).map_err(|e| Failure::io("output", &self.out_dir, &e))?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents).map_err(|e| Failure::io("output", &path, &e))?;
        note("output", format!("wrote {}", path.display()));
        Ok(())
    }
}

pub fn note(stage: &str, msg: impl AsRef<str>) {
    eprintln!("[{stage}] {}", msg.as_ref());
}

fn read_text(stage: &str, path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(stage, path, &e))
}

fn read_stopwords(path: Option<&Path>) -> Result<HashSet<String>, Failure> {
    let Some(path) = path else {
        return Ok(HashSet::new());
    };
    Ok(read_text("stopwords", path)?
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn read_lemmas(path: Option<&Path>) -> Result<HashMap<String, String>, Failure> {
    let Some(path) = path else {
        return Ok(HashMap::new());
    };
    let mut map = HashMap::new();
    for (i, line) in read_text("lemmas", path)?.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((surface, lemma)) = line.split_once('\t') else {
            return Err(Failure::new("lemmas", format!("{} line {}: expected surface<TAB>lemma", path.display(), i + 1)));
        };
        map.insert(surface.trim().to_lowercase(), lemma.trim().to_lowercase());
    }
    Ok(map)
}

fn doc_tokens(
    stage: &str,
    doc: &Document,
    stop: &HashSet<String>,
    lemmas: &HashMap<String, String>,
) -> Result<Vec<String>, Failure> {
    match (&doc.tokens, &doc.text) {
        (Some(t), _) => Ok(t.clone()),
        (None, Some(_)) => Ok(tokenize(doc, stop, lemmas)),
        (None, None) => Err(Failure::new(stage, format!("document {:?} has neither tokens nor text", doc.id))),
    }
}

fn tokenized(
    stage: &str,
    docs: &[Document],
    stop: &HashSet<String>,
    lemmas: &HashMap<String, String>,
) -> Result<TokenizedCorpus, Failure> {
    let lists = docs
        .iter()
        .map(|d| doc_tokens(stage, d, stop, lemmas))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TokenizedCorpus::new(lists))
}

fn load_vectors(stage: &str, path: &Path) -> Result<EmbeddedCorpus, Failure> {
    let corpus = load_corpus(path, VectorFormat::from_path(path)).stage(stage)?;
    note(stage, format!("{} records of dimension {} from {}", corpus.len(), corpus.dim(), path.display()));
    Ok(corpus)
}

/// Document vectors with the token list of each document, in vector-file order.
pub struct TopicInputs {
    pub corpus: EmbeddedCorpus,
    pub tokens: TokenizedCorpus,
    pub ids: Vec<String>,
}

pub fn load_topic_inputs(sec: &TopicsSection) -> Result<TopicInputs, Failure> {
    require("topics", "vector file", sec.vectors.as_deref())?;
    for p in [&sec.documents, &sec.stopwords, &sec.lemmas].into_iter().flatten() {
        require("topics", "input file", Some(p))?;
    }
    let corpus = load_vectors("topics/load", sec.vectors.as_deref().unwrap())?;
    let stop = read_stopwords(sec.stopwords.as_deref())?;
    let lemmas = read_lemmas(sec.lemmas.as_deref())?;
    let ids: Vec<String> = corpus.ids().map(str::to_owned).collect();
    let tokens = match &sec.documents {
        None => tokenized("topics/tokens", corpus.documents(), &stop, &lemmas)?,
        Some(path) => {
            let docs = load_documents(path).stage("topics/tokens")?;
            let by_id: HashMap<&str, &Document> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
            let ordered = ids
                .iter()
                .map(|id| {
                    by_id
                        .get(id.as_str())
                        .map(|d| (*d).clone())
                        .ok_or_else(|| Failure::new("topics/tokens", format!("no document {id:?} in {}", path.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            tokenized("topics/tokens", &ordered, &stop, &lemmas)?
        }
    };
    Ok(TopicInputs { corpus, tokens, ids })
}

pub struct TopicRun {
    pub assignment: TopicAssignment,
    pub words: TopicWords,
    pub coherence: CoherenceReport,
}

/// Clustering, c-TF-IDF, topic words and NPMI for one parameter setting.
pub fn topic_pipeline(
    inputs: &TopicInputs,
    params: &ClusterParams,
    top_n: usize,
    weighting: TermWeighting,
    env: &Env,
) -> Result<TopicRun, Failure> {
    let assignment = cluster_documents(&inputs.corpus, params, env.seed, env.mode).stage("topics/cluster")?;
    let matrix = ctfidf(&inputs.tokens, &assignment, weighting).stage("topics/ctfidf")?;
    let words = top_topic_words(&matrix, top_n).stage("topics/words")?;
    let coherence = topic_coherence(&words, &inputs.tokens, top_n, DEFAULT_EPS).stage("topics/coherence")?;
    Ok(TopicRun {
        assignment,
        words,
        coherence,
    })
}

pub fn cmd_topics(env: &Env, sec: &TopicsSection) -> Result<(), Failure> {
    let inputs = load_topic_inputs(sec)?;
    let run = topic_pipeline(&inputs, &sec.params(), sec.top_n, sec.weighting, env)?;
    let per_topic: Vec<_> = run
        .words
        .topics
        .iter()
        .zip(&run.coherence.per_topic)
        .map(|(t, s)| json!({"topic": t.topic, "npmi": s}))
        .collect();
    let coherence = json!({"top_n": sec.top_n, "mean": run.coherence.mean, "topics": per_topic});
    env.write("topics.json", &run.words.to_json())?;
    env.write("assignments.tsv", &run.assignment.to_tsv(&inputs.ids))?;
    env.write("coherence.json", &serde_json::to_string_pretty(&coherence).expect("json value"))?;
    println!("topics: {}", run.assignment.n_topics());
    println!("outliers: {}", run.assignment.n_outliers());
    println!("npmi: {}", run.coherence.mean);
    Ok(())
}

pub fn cmd_optimize(env: &Env, topics: &TopicsSection, sec: &OptimizeSection, resume: bool) -> Result<(), Failure> {
    let inputs = load_topic_inputs(topics)?;
    let history_path = env.out_dir.join("history.jsonl");
    let prior = if resume && history_path.exists() {
        let file = File::open(&history_path).map_err(|e| Failure::io("optimize", &history_path, &e))?;
        read_history(BufReader::new(file)).stage("optimize/resume")?
    } else {
        Vec::new()
    };
    if prior.len() > sec.budget {
        return Err(Failure::new(
            "optimize/resume",
            format!("history already holds {} trials, budget is {}", prior.len(), sec.budget),
        ));
    }
    if !prior.is_empty() {
        note("optimize", format!("resuming after {} trials", prior.len()));
    }
    fs::create_dir_all(&env.out_dir).map_err(|e| Failure::io("output", &env.out_dir, &e))?;
    let mut file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(resume)
        .truncate(!resume)
        .open(&history_path)
        .map_err(|e| Failure::io("optimize", &history_path, &e))?;

    let cfg = OptimizerConfig {
        space: sec.space,
        budget: sec.budget,
        n_init: sec.n_init,
        seed: env.seed,
        ..OptimizerConfig::default()
    };
    let budget = sec.budget;
    let mut write_error = None;
    let objective = |p: &ClusterParams| {
        topic_pipeline(&inputs, p, topics.top_n, topics.weighting, env).map(|r| r.coherence.mean).map_err(|f| f.message)
    };
    let result = optimize_resume(&cfg, prior, objective, |t| {
        let status = if t.failed { "failed".to_string() } else { format!("{}", t.score) };
        note("optimize", format!("trial {}/{budget}: {:?} -> {status}", t.index + 1, t.params));
        if write_error.is_none() {
            if let Err(e) = write_history(std::slice::from_ref(t), &mut file).and_then(|_| file.flush()) {
                write_error = Some(e);
            }
        }
    })
    .stage("optimize")?;
    if let Some(e) = write_error {
        return Err(Failure::io("optimize", &history_path, &e));
    }
    note("output", format!("wrote {}", history_path.display()));
    env.write("best_params.json", &serde_json::to_string_pretty(&result.best).expect("trial serializes"))?;
    let p = result.best.params;
    println!(
        "best: n_neighbors={} n_components={} min_cluster_size={} min_samples={}",
        p.n_neighbors, p.n_components, p.min_cluster_size, p.min_samples
    );
    println!("npmi: {}", result.best.score);
    Ok(())
}

fn read_objects(path: &Path) -> Result<HashMap<String, String>, Failure> {
    let mut map = HashMap::new();
    for (i, line) in read_text("senses/objects", path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, object)) = line.split_once('\t') else {
            return Err(Failure::new(
                "senses/objects",
                format!("{} line {}: expected id<TAB>object", path.display(), i + 1),
            ));
        };
        let object = object.trim();
        if !object.is_empty() {
            map.insert(id.trim().to_owned(), object.to_owned());
        }
    }
    Ok(map)
}

pub fn cmd_senses(env: &Env, sec: &SensesSection) -> Result<(), Failure> {
    require("senses", "vector file", sec.vectors.as_deref())?;
    if let Some(p) = &sec.objects {
        require("senses", "object file", Some(p))?;
    }
    let corpus = load_vectors("senses/load", sec.vectors.as_deref().unwrap())?;
    let mut cfg = SenseConfig {
        k: sec.k,
        n_neighbors: sec.n_neighbors,
        ..SenseConfig::default()
    };
    cfg.layout.mode = env.mode;
    let model = induce_senses(&corpus, &cfg, env.seed).stage("senses/induce")?;
    env.write("senses.tsv", &model.to_tsv())?;
    env.write("senses.json", &model.sidecar_json())?;
    env.write("senses.svg", &model.scatter_svg())?;

    match &sec.objects {
        Some(path) => {
            let objects = read_objects(path)?;
            let per_instance: Vec<Option<String>> = model.ids.iter().map(|id| objects.get(id).cloned()).collect();
            let profile = profile_clusters(&model.labels, &per_instance, sec.top_n).stage("senses/profile")?;
            let text = profile.to_text(&sec.word);
            env.write("object_profile.json", &profile.to_json())?;
            env.write("object_profile.txt", &text)?;
            print!("{text}");
        }
        None => {
            note("senses", "no object file; object profile omitted");
            let mut sizes = vec![0usize; model.k()];
            for &l in &model.labels {
                sizes[l] += 1;
            }
            for (c, n) in sizes.iter().enumerate() {
                println!("Cluster {}: {} instances", c + 1, n);
            }
        }
    }
    Ok(())
}

pub fn cmd_profile(env: &Env, sec: &ProfileSection) -> Result<(), Failure> {
    let table = match &sec.table {
        Some(path) => {
            require("profile", "profile table", Some(path))?;
            load_profile_table(path).stage("profile/load")?
        }
        None => {
            note("profile", "using the bundled shang/harm/kizutsukeru table");
            appendix_table()
        }
    };
    if let Some(p) = &sec.frames {
        require("profile", "annotation file", Some(p))?;
    }
    let ca = correspondence_analysis(&table).stage("profile/ca")?;
    let report = inertia_report_tsv(&inertia_report(&ca));
    env.write("ca.json", &ca.to_json())?;
    env.write("inertia.tsv", &report)?;
    if ca.dims() == 0 {
        note("profile", "total inertia is zero; moon plot omitted");
    } else {
        env.write("moon.svg", &moon_plot(&ca, &MoonStyle::default()).to_svg())?;
    }
    if let Some(path) = &sec.frames {
        let annotations = parse_annotations(&read_text("profile/frames", path)?).stage("profile/frames")?;
        let tally = frame_tally(&annotations).stage("profile/frames")?;
        env.write("frames.json", &tally.to_json())?;
        env.write("frames.svg", &tally.to_svg())?;
    }
    print!("{report}");
    Ok(())
}

pub fn cmd_count(env: &Env, sec: &CountSection) -> Result<(), Failure> {
    if sec.partitions.is_empty() {
        return Err(Failure::usage("count", "no partitions configured"));
    }
    for part in &sec.partitions {
        if part.inputs.is_empty() {
            return Err(Failure::usage("count", format!("partition {:?} has no inputs", part.name)));
        }
        for input in &part.inputs {
            require("count", "input file", Some(input))?;
        }
    }
    if let Some(p) = &sec.lemmas {
        require("count", "lemma file", Some(p))?;
    }
    let lemmas = read_lemmas(sec.lemmas.as_deref())?;
    let stop = HashSet::new();

    let mut by_language: BTreeMap<&str, (TargetSets, Vec<String>)> = BTreeMap::new();
    for t in &sec.targets {
        let entry = by_language.entry(t.language.as_str()).or_default();
        if entry.0.contains_key(&t.name) {
            return Err(Failure::new("count", format!("target {:?} repeated for language {:?}", t.name, t.language)));
        }
        entry.0.insert(t.name.clone(), t.lemmas.iter().map(|l| l.to_lowercase()).collect());
        entry.1.push(t.name.clone());
    }

    let mut table = FrequencyTable::default();
    let mut order = HashMap::new();
    for part in &sec.partitions {
        let Some((targets, names)) = by_language.get(part.language.as_str()) else {
            return Err(Failure::new("count", format!("no targets for language {:?}", part.language)));
        };
        let mut docs = Vec::new();
        for input in &part.inputs {
            docs.extend(load_documents(input).stage("count/load")?);
        }
        let tokens = tokenized("count/tokens", &docs, &stop, &lemmas)?;
        let counts = count_targets(&tokens, targets).stage("count")?;
        note("count", format!("{}/{}: {} documents", part.language, part.name, tokens.len()));
        order.insert((part.language.clone(), part.name.clone()), names.clone());
        table.rows.push(FrequencyRow {
            language: part.language.clone(),
            partition: part.name.clone(),
            counts,
        });
    }
    let csv = table.to_csv(&order);
    env.write("counts.csv", &csv)?;
    print!("{csv}");
    Ok(())
}

pub fn cmd_keywords(env: &Env, sec: &KeywordsSection) -> Result<(), Failure> {
    require("keywords", "target file", sec.target.as_deref())?;
    require("keywords", "reference file", sec.reference.as_deref())?;
    for p in [&sec.stopwords, &sec.lemmas].into_iter().flatten() {
        require("keywords", "input file", Some(p))?;
    }
    let stop = read_stopwords(sec.stopwords.as_deref())?;
    let lemmas = read_lemmas(sec.lemmas.as_deref())?;
    let load = |path: &Path| -> Result<TokenizedCorpus, Failure> {
        let docs = load_documents(path).stage("keywords/load")?;
        tokenized("keywords/tokens", &docs, &stop, &lemmas)
    };
    let target = load(sec.target.as_deref().unwrap())?;
    let reference = load(sec.reference.as_deref().unwrap())?;
    let keywords = extract_keywords(&target, &reference, sec.min_doc_ratio).stage("keywords")?;
    let mut out = String::from("term\tkeyness\ttarget_docs\treference_docs\n");
    for k in keywords.iter().take(sec.top) {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", k.term, k.keyness, k.target_docs, k.reference_docs));
    }
    env.write("keywords.tsv", &out)?;
    print!("{out}");
    Ok(())
}
