//! Document collections: vector-file IO, sentence splitting, tokenization,
//! target counting and document-frequency keyness.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magic prefix of the binary vector format.
pub const BINARY_MAGIC: &[u8; 8] = b"ONOMVEC1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
}

impl Document {
    pub fn new(id: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            text: None,
            lang: None,
            tokens: None,
        }
    }

    pub fn with_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            text: Some(text.into()),
            ..Document::new(id)
        }
    }
}

/// Documents paired with fixed-dimension embedding vectors (one row per document).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCorpus {
    documents: Vec<Document>,
    vectors: Array2<f64>,
}

impl EmbeddedCorpus {
    /// Validates ids, dimensions and finiteness.
    pub fn new(documents: Vec<Document>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if documents.len() != vectors.len() {
            return Err(Error::invalid(format!(
                "{} documents but {} vectors",
                documents.len(),
                vectors.len()
            )));
        }
        let dim = match vectors.first() {
            Some(v) => v.len(),
            None => return Err(Error::EmptyCorpus),
        };
        let mut seen = HashSet::with_capacity(documents.len());
        for (i, (doc, v)) in documents.iter().zip(&vectors).enumerate() {
            validate_record(i + 1, doc, v, dim, &mut seen)?;
        }
        let n = documents.len();
        let flat: Vec<f64> = vectors.into_iter().flatten().collect();
        let vectors = Array2::from_shape_vec((n, dim), flat).expect("validated shape");
        Ok(EmbeddedCorpus { documents, vectors })
    }

    /// Builds a corpus with generated ids `0..n` from a matrix of vectors.
    pub fn from_matrix(vectors: Array2<f64>) -> Result<Self> {
        let documents = (0..vectors.nrows())
            .map(|i| Document::new(i.to_string()))
            .collect();
        let rows = vectors.outer_iter().map(|r| r.to_vec()).collect();
        EmbeddedCorpus::new(documents, rows)
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.id.as_str())
    }
}

fn validate_record(
    index: usize,
    doc: &Document,
    vector: &[f64],
    dim: usize,
    seen: &mut HashSet<String>,
) -> Result<()> {
    if doc.id.is_empty() {
        return Err(Error::Parse {
            index,
            message: "empty id".into(),
        });
    }
    if dim == 0 {
        return Err(Error::Parse {
            index,
            message: "vector must have at least one component".into(),
        });
    }
    if vector.len() != dim {
        return Err(Error::DimensionMismatch {
            index,
            expected: dim,
            found: vector.len(),
        });
    }
    if vector.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if let Some(tokens) = &doc.tokens {
        if tokens.iter().any(String::is_empty) {
            return Err(Error::Parse {
                index,
                message: "empty token".into(),
            });
        }
    }
    if !seen.insert(doc.id.clone()) {
        return Err(Error::DuplicateId {
            index,
            id: doc.id.clone(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorFormat {
    Jsonl,
    Binary,
}

impl VectorFormat {
    /// `.bin` / `.onomvec` select the binary format, anything else JSONL.
    pub fn from_path(path: &Path) -> VectorFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("onomvec") => VectorFormat::Binary,
            _ => VectorFormat::Jsonl,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    id: String,
    vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lang: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
}

pub fn load_corpus(path: &Path, format: VectorFormat) -> Result<EmbeddedCorpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        VectorFormat::Jsonl => read_jsonl(BufReader::new(file)),
        VectorFormat::Binary => {
            let mut bytes = Vec::new();
            BufReader::new(file)
                .read_to_end(&mut bytes)
                .map_err(|e| Error::io(path, e))?;
            read_binary(&bytes)
        }
    }
}

pub fn save_corpus(corpus: &EmbeddedCorpus, path: &Path, format: VectorFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    match format {
        VectorFormat::Jsonl => write_jsonl(corpus, &mut w).map_err(|e| Error::io(path, e))?,
        VectorFormat::Binary => {
            let bytes = encode_binary(corpus)?;
            w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<EmbeddedCorpus> {
    let mut documents = Vec::new();
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut seen = HashSet::new();
    let mut dim = None;
    for (line_no, line) in reader.lines().enumerate() {
        let index = line_no + 1;
        let line = line.map_err(|e| Error::Parse {
            index,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            index,
            message: e.to_string(),
        })?;
        let doc = Document {
            id: rec.id,
            text: rec.text,
            lang: rec.lang,
            tokens: rec.tokens,
        };
        let dim = *dim.get_or_insert(rec.vector.len());
        validate_record(documents.len() + 1, &doc, &rec.vector, dim, &mut seen)?;
        documents.push(doc);
        vectors.push(rec.vector);
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    EmbeddedCorpus::new(documents, vectors)
}

pub fn write_jsonl<W: Write>(corpus: &EmbeddedCorpus, mut w: W) -> std::io::Result<()> {
    for (doc, v) in corpus.documents.iter().zip(corpus.vectors.outer_iter()) {
        let rec = JsonRecord {
            id: doc.id.clone(),
            vector: v.to_vec(),
            text: doc.text.clone(),
            lang: doc.lang.clone(),
            tokens: doc.tokens.clone(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_binary(bytes: &[u8]) -> Result<EmbeddedCorpus> {
    let mut cur = ByteCursor { bytes, pos: 0 };
    let magic = cur.take(8, 0)?;
    if magic != BINARY_MAGIC {
        return Err(Error::Parse {
            index: 0,
            message: "bad magic".into(),
        });
    }
    let count = cur.u32(0)? as usize;
    let dim = cur.u32(0)? as usize;
    if count == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut documents = Vec::with_capacity(count);
    let mut vectors = Vec::with_capacity(count);
    let mut seen = HashSet::with_capacity(count);
    for i in 0..count {
        let index = i + 1;
        let len = cur.u16(index)? as usize;
        let id = std::str::from_utf8(cur.take(len, index)?)
            .map_err(|e| Error::Parse {
                index,
                message: e.to_string(),
            })?
            .to_owned();
        let mut v = Vec::with_capacity(dim);
        for _ in 0..dim {
            v.push(f64::from(cur.f32(index)?));
        }
        let doc = Document::new(id);
        validate_record(index, &doc, &v, dim, &mut seen)?;
        documents.push(doc);
        vectors.push(v);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Parse {
            index: count,
            message: "trailing bytes after last record".into(),
        });
    }
    EmbeddedCorpus::new(documents, vectors)
}

/// Encodes ids and vectors (narrowed to f32); text, lang and tokens are not stored.
pub fn encode_binary(corpus: &EmbeddedCorpus) -> Result<Vec<u8>> {
    let count = u32::try_from(corpus.len()).map_err(|_| Error::invalid("too many records"))?;
    let dim = u32::try_from(corpus.dim()).map_err(|_| Error::invalid("dimension too large"))?;
    let mut out = Vec::with_capacity(16 + corpus.len() * (2 + 16 + 4 * corpus.dim()));
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for (doc, v) in corpus.documents.iter().zip(corpus.vectors.outer_iter()) {
        let len = u16::try_from(doc.id.len())
            .map_err(|_| Error::invalid(format!("id too long: {}", doc.id)))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(doc.id.as_bytes());
        for &x in v {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, n: usize, index: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Parse {
                index,
                message: "unexpected end of file".into(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, index: usize) -> Result<u16> {
        let b = self.take(2, index)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, index: usize) -> Result<u32> {
        let b = self.take(4, index)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self, index: usize) -> Result<f32> {
        let b = self.take(4, index)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Reads a JSONL file of documents (`id` plus optional `text`, `lang`, `tokens`).
/// Any `vector` field is ignored.
pub fn load_documents(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let index = line_no + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
            index,
            message: e.to_string(),
        })?;
        if doc.id.is_empty() {
            return Err(Error::Parse {
                index,
                message: "empty id".into(),
            });
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId { index, id: doc.id });
        }
        docs.push(doc);
    }
    Ok(docs)
}

fn is_latin_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_cjk_terminator(c: char) -> bool {
    matches!(c, '。' | '！' | '？')
}

/// Splits text into sentence documents with ids `<parent>.<n>` (1-based).
///
/// Latin terminators (`. ! ?`) end a sentence only when followed by whitespace or
/// end of input; CJK terminators (`。！？`) end it immediately. Runs of terminators
/// stay attached to the sentence they close.
pub fn split_sentences(parent_id: &str, text: &str, lang: Option<&str>) -> Vec<Document> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (_, c) = chars[i];
        let cjk = is_cjk_terminator(c);
        if cjk || is_latin_terminator(c) {
            let mut j = i + 1;
            while j < chars.len() && (is_cjk_terminator(chars[j].1) || is_latin_terminator(chars[j].1))
            {
                j += 1;
            }
            let at_boundary = j == chars.len() || chars[j].1.is_whitespace();
            if cjk || at_boundary {
                let end = chars.get(j).map_or(text.len(), |&(b, _)| b);
                pieces.push(&text[start..end]);
                start = end;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    pieces.push(&text[start..]);

    pieces
        .into_iter()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(n, s)| Document {
            id: format!("{parent_id}.{}", n + 1),
            text: Some(s.to_owned()),
            lang: lang.map(str::to_owned),
            tokens: None,
        })
        .collect()
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

/// Lowercases, strips punctuation, lemmatizes through `lemma_map` and drops stopwords.
/// A token is dropped if either its surface form or its lemma is a stopword.
pub fn tokenize(
    doc: &Document,
    stopwords: &HashSet<String>,
    lemma_map: &HashMap<String, String>,
) -> Vec<String> {
    let Some(text) = doc.text.as_deref() else {
        return Vec::new();
    };
    text.split(|c: char| !is_token_char(c))
        .map(|t| t.trim_matches('\''))
        .filter(|t| !t.is_empty())
        .filter_map(|t| {
            let surface = t.to_lowercase();
            if stopwords.contains(&surface) {
                return None;
            }
            let lemma = lemma_map.get(&surface).cloned().unwrap_or(surface);
            (!lemma.is_empty() && !stopwords.contains(&lemma)).then_some(lemma)
        })
        .collect()
}

/// Token lists with a sorted vocabulary and document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpus {
    docs: Vec<Vec<String>>,
    vocabulary: BTreeMap<String, usize>,
    doc_freq: BTreeMap<String, usize>,
}

impl TokenizedCorpus {
    pub fn new(docs: Vec<Vec<String>>) -> Self {
        let mut doc_freq: BTreeMap<String, usize> = BTreeMap::new();
        for doc in &docs {
            let unique: BTreeSet<&String> = doc.iter().collect();
            for t in unique {
                *doc_freq.entry(t.clone()).or_default() += 1;
            }
        }
        let vocabulary = doc_freq
            .keys()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        TokenizedCorpus {
            docs,
            vocabulary,
            doc_freq,
        }
    }

    pub fn docs(&self) -> &[Vec<String>] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn vocabulary(&self) -> &BTreeMap<String, usize> {
        &self.vocabulary
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }

    pub fn concat(&self, other: &TokenizedCorpus) -> TokenizedCorpus {
        let mut docs = self.docs.clone();
        docs.extend(other.docs.iter().cloned());
        TokenizedCorpus::new(docs)
    }
}

/// Target-set name to lemma set.
pub type TargetSets = BTreeMap<String, BTreeSet<String>>;

/// Counts, per target name, all occurrences of any lemma in its set.
pub fn count_targets(corpus: &TokenizedCorpus, targets: &TargetSets) -> Result<BTreeMap<String, u64>> {
    if let Some((name, _)) = targets.iter().find(|(_, set)| set.is_empty()) {
        return Err(Error::invalid(format!("target set {name:?} is empty")));
    }
    let mut term_counts: HashMap<&str, u64> = HashMap::new();
    for t in corpus.docs.iter().flatten() {
        *term_counts.entry(t.as_str()).or_default() += 1;
    }
    Ok(targets
        .iter()
        .map(|(name, set)| {
            let n = set
                .iter()
                .map(|l| term_counts.get(l.as_str()).copied().unwrap_or(0))
                .sum();
            (name.clone(), n)
        })
        .collect())
}

/// One counted partition (e.g. one product's reviews in one language).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequencyRow {
    pub language: String,
    pub partition: String,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FrequencyTable {
    pub rows: Vec<FrequencyRow>,
}

impl FrequencyTable {
    /// Long-format CSV: `language,partition,target,count`, rows in insertion order,
    /// targets in the order given by `order` for each row (falling back to sorted).
    pub fn to_csv(&self, order: &HashMap<(String, String), Vec<String>>) -> String {
        let mut out = String::from("language,partition,target,count\n");
        for row in &self.rows {
            let key = (row.language.clone(), row.partition.clone());
            let names: Vec<&String> = match order.get(&key) {
                Some(o) => o.iter().collect(),
                None => row.counts.keys().collect(),
            };
            for name in names {
                let n = row.counts.get(name).copied().unwrap_or(0);
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    csv_field(&row.language),
                    csv_field(&row.partition),
                    csv_field(name),
                    n
                ));
            }
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Keyword {
    pub term: String,
    /// Signed G²: positive when the term is proportionally more frequent in the target.
    pub keyness: f64,
    pub target_docs: usize,
    pub reference_docs: usize,
}

fn xlogx_ratio(observed: f64, expected: f64) -> f64 {
    if observed > 0.0 {
        observed * (observed / expected).ln()
    } else {
        0.0
    }
}

/// Signed log-likelihood G² over the 2x2 table of documents containing / not
/// containing a term in the target and reference corpora.
pub fn document_g2(target_docs: usize, target_total: usize, ref_docs: usize, ref_total: usize) -> f64 {
    let (a, c) = (target_docs as f64, target_total as f64);
    let (b, d) = (ref_docs as f64, ref_total as f64);
    let n = c + d;
    let with = a + b;
    let without = n - with;
    if with == 0.0 || without == 0.0 {
        return 0.0;
    }
    let cells = [
        (a, c * with / n),
        (c - a, c * without / n),
        (b, d * with / n),
        (d - b, d * without / n),
    ];
    let g2 = 2.0 * cells.iter().map(|&(o, e)| xlogx_ratio(o, e)).sum::<f64>();
    let g2 = g2.max(0.0);
    if a * d >= b * c {
        g2
    } else {
        -g2
    }
}

/// Ranks target-corpus terms by document-frequency keyness against a reference.
/// Terms occurring in fewer than `min_doc_ratio` of target documents are skipped.
pub fn extract_keywords(
    target: &TokenizedCorpus,
    reference: &TokenizedCorpus,
    min_doc_ratio: f64,
) -> Result<Vec<Keyword>> {
    if target.is_empty() || reference.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !(0.0..=1.0).contains(&min_doc_ratio) {
        return Err(Error::invalid(format!("min_doc_ratio {min_doc_ratio} outside [0, 1]")));
    }
    let (nt, nr) = (target.len(), reference.len());
    let mut out: Vec<Keyword> = target
        .doc_freq
        .iter()
        .filter(|(_, &df)| df as f64 / nt as f64 >= min_doc_ratio)
        .map(|(term, &df)| {
            let rdf = reference.doc_freq(term);
            Keyword {
                term: term.clone(),
                keyness: document_g2(df, nt, rdf, nr),
                target_docs: df,
                reference_docs: rdf,
            }
        })
        .collect();
    out.sort_by(|x, y| {
        y.keyness
            .total_cmp(&x.keyness)
            .then_with(|| x.term.cmp(&y.term))
    });
    Ok(out)
}
