#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
pub mod synth;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlskit::corpus::{save_corpus, VectorFormat};

pub fn nlskit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlskit"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Planted-topic vectors (with tokens) as JSONL; returns the path and true topics.
pub fn write_planted(dir: &Path, seed: u64, topics: usize, per_topic: usize, dim: usize) -> (PathBuf, Vec<i64>) {
    let planted = synth::planted_topics(seed, topics, per_topic, dim);
    let path = dir.join("planted.jsonl");
    save_corpus(&planted.corpus, &path, VectorFormat::Jsonl).unwrap();
    (path, planted.truth.iter().map(|&t| t as i64).collect())
}

/// Two-sense instance vectors plus an `id<TAB>object` file.
pub fn write_two_sense(dir: &Path, seed: u64, per: usize, dim: usize) -> (PathBuf, PathBuf, Vec<usize>) {
    let (corpus, truth, objects) = synth::two_sense_corpus(seed, per, dim);
    let vectors = dir.join("instances.jsonl");
    save_corpus(&corpus, &vectors, VectorFormat::Jsonl).unwrap();
    let mut tsv = String::new();
    for (id, obj) in corpus.ids().zip(&objects) {
        if let Some(o) = obj {
            tsv.push_str(&format!("{id}\t{o}\n"));
        }
    }
    let objects_path = dir.join("objects.tsv");
    fs::write(&objects_path, tsv).unwrap();
    (vectors, objects_path, truth)
}

/// A documents JSONL file with the given token lists.
pub fn write_docs(path: &Path, docs: &[&str]) {
    let mut out = String::new();
    for (i, d) in docs.iter().enumerate() {
        let toks: Vec<&str> = d.split_whitespace().collect();
        out.push_str(&serde_json::json!({"id": format!("{}-{i}", path.file_stem().unwrap().to_str().unwrap()), "tokens": toks}).to_string());
        out.push('\n');
    }
    fs::write(path, out).unwrap();
}

/// Every file under `dir`, keyed by relative name.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            out.insert(entry.file_name().to_string_lossy().into_owned(), fs::read(entry.path()).unwrap());
        }
    }
    out
}

/// `(id, label)` rows of a TSV with a header, taking the label from `column`.
pub fn tsv_column(path: &Path, column: usize) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(column).unwrap().to_owned())
        .collect()
}

/// A small Table 1 style count setup: two languages, two products each.
pub fn write_count_fixture(dir: &Path) -> PathBuf {
    write_docs(&dir.join("zh_a.jsonl"), &["shang shou", "shang shou", "shang shou", "bu shang", "bu shang"]);
    write_docs(&dir.join("zh_b.jsonl"), &["sunhai pifu", "shang pifu"]);
    write_docs(&dir.join("en_a.jsonl"), &["harm skin", "no harm", "damage hair"]);
    write_docs(&dir.join("en_b.jsonl"), &["damage damage", "harm"]);
    let cfg = r#"
[[count.targets]]
language = "zh"
name = "shang"
lemmas = ["shang"]
[[count.targets]]
language = "zh"
name = "sunhai"
lemmas = ["sunhai"]
[[count.targets]]
language = "en"
name = "harm"
lemmas = ["harm"]
[[count.targets]]
language = "en"
name = "damage"
lemmas = ["damage"]

[[count.partitions]]
language = "zh"
name = "product A"
inputs = ["zh_a.jsonl"]
[[count.partitions]]
language = "zh"
name = "product B"
inputs = ["zh_b.jsonl"]
[[count.partitions]]
language = "en"
name = "product A"
inputs = ["en_a.jsonl"]
[[count.partitions]]
language = "en"
name = "product B"
inputs = ["en_b.jsonl"]
"#;
    let path = dir.join("count.toml");
    fs::write(&path, cfg).unwrap();
    path
}

pub const IDENTICAL_COLUMNS_CSV: &str = "tag_type,id_tag,a,b\nt,x,1,2\nt,y,3,6\nt,z,2,4\n";

pub const ANNOTATIONS_TSV: &str = "language\tlu\tframe\tinstance_id\n\
zh\tshang\tNegative_product_impact\t1\n\
zh\tshang\tCause_harm\t2\n\
zh\tsunhai\tNegative_product_impact\t3\n\
en\tharm\tNegative_product_impact\t4\n\
en\tdamage\tDamaging\t5\n";
