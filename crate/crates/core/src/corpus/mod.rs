//! Dataset ingestion, tokenization and vocabulary handling.
//!
//! Datasets are line-delimited JSON records `{"id", "source", "summary"}`.
//! Text is lowercased and split on whitespace and punctuation boundaries,
//! so `"The cat sat."` becomes `["the", "cat", "sat", "."]`.

mod synth;
mod vocab;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use synth::{generate_synthetic_corpus, SynthProfile};
pub use vocab::{TokenId, Vocabulary, EOS, EOS_TOKEN, SOS, SOS_TOKEN, UNK, UNK_TOKEN};

use crate::error::{Error, Result};

/// Splits `text` into lowercase word and punctuation tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
        } else if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            out.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

/// A source document and its human-written reference summary, as token ids.
///
/// The reference never contains SOS or EOS; consumers append EOS themselves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentPair {
    pub id: String,
    pub source: Vec<TokenId>,
    pub reference: Vec<TokenId>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub split: Split,
    pub pairs: Vec<DocumentPair>,
    vocab: Arc<Vocabulary>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    source: String,
    summary: String,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    id: &'a str,
    source: String,
    summary: String,
}

impl Corpus {
    /// Builds a corpus, checking the pair invariants.
    pub fn new(split: Split, pairs: Vec<DocumentPair>, vocab: Arc<Vocabulary>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, p) in pairs.iter().enumerate() {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::config(format!("duplicate id {:?} in {split} split", p.id)));
            }
            if p.source.is_empty() {
                return Err(Error::EmptyField { field: "source", line: i + 1 });
            }
            if p.reference.is_empty() {
                return Err(Error::EmptyField { field: "reference", line: i + 1 });
            }
            if p.reference.iter().any(|&t| t == SOS || t == EOS) {
                return Err(Error::config(format!("reference of {:?} contains a reserved token", p.id)));
            }
        }
        Ok(Corpus { split, pairs, vocab })
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn get(&self, id: &str) -> Option<&DocumentPair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    /// Re-encodes every pair against another vocabulary; unknown tokens become UNK.
    pub fn reencode(&self, vocab: Arc<Vocabulary>) -> Corpus {
        let map =
            |ids: &[TokenId]| -> Vec<TokenId> { ids.iter().map(|&t| vocab.id_or_unk(self.vocab.token(t))).collect() };
        let pairs = self
            .pairs
            .iter()
            .map(|p| DocumentPair { id: p.id.clone(), source: map(&p.source), reference: map(&p.reference) })
            .collect();
        Corpus { split: self.split, pairs, vocab }
    }

    /// Returns the sub-corpus of pairs in `range`, keeping the vocabulary.
    pub fn slice(&self, range: std::ops::Range<usize>, split: Split) -> Corpus {
        Corpus { split, pairs: self.pairs[range].to_vec(), vocab: Arc::clone(&self.vocab) }
    }

    /// Writes the corpus in the line-delimited dataset format.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for p in &self.pairs {
            let rec = RecordOut {
                id: &p.id,
                source: self.vocab.detokenize(&p.source),
                summary: self.vocab.detokenize(&p.reference),
            };
            let line = serde_json::to_string(&rec).expect("record serializes");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats::compute(self)
    }
}

/// Reads a dataset file.
///
/// Without a vocabulary, one is built from the file itself with `min_count = 1`.
pub fn load_corpus(path: &Path, vocab: Option<Arc<Vocabulary>>) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut raw: Vec<(String, Vec<String>, Vec<String>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record =
            serde_json::from_str(line).map_err(|e| Error::Malformed { line: lineno, reason: e.to_string() })?;
        let source = tokenize(&rec.source);
        let summary = tokenize(&rec.summary);
        if source.is_empty() {
            return Err(Error::EmptyField { field: "source", line: lineno });
        }
        if summary.is_empty() {
            return Err(Error::EmptyField { field: "reference", line: lineno });
        }
        raw.push((rec.id, source, summary));
    }
    if raw.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let vocab = match vocab {
        Some(v) => v,
        None => {
            let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
            for (_, s, r) in &raw {
                for t in s.iter().chain(r) {
                    *counts.entry(t.as_str()).or_default() += 1;
                }
            }
            Arc::new(Vocabulary::from_counts(counts, 1))
        }
    };
    let pairs = raw
        .into_iter()
        .map(|(id, s, r)| DocumentPair { id, source: vocab.encode(&s), reference: vocab.encode(&r) })
        .collect();
    Corpus::new(Split::Train, pairs, vocab)
}

/// Builds a vocabulary from every source and reference token seen at least
/// `min_count` times. Ids are assigned by descending count, ties broken
/// lexicographically.
pub fn build_vocabulary(corpus: &Corpus, min_count: u64) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::config("cannot build a vocabulary from an empty corpus"));
    }
    if min_count < 1 {
        return Err(Error::config("min_count must be at least 1"));
    }
    let vocab = corpus.vocab();
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for p in &corpus.pairs {
        for &t in p.source.iter().chain(&p.reference) {
            if t == UNK {
                continue;
            }
            *counts.entry(vocab.token(t)).or_default() += 1;
        }
    }
    Ok(Vocabulary::from_counts(counts, min_count))
}

/// Length and abstractiveness statistics of a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusStats {
    pub mean_source_len: f64,
    pub mean_reference_len: f64,
    /// Mean over pairs of the percentage of reference tokens absent from the source.
    pub abstractiveness: f64,
}

impl CorpusStats {
    pub fn compute(corpus: &Corpus) -> Self {
        let n = corpus.len().max(1) as f64;
        let mut src = 0.0;
        let mut refl = 0.0;
        let mut abstr = 0.0;
        for p in &corpus.pairs {
            src += p.source.len() as f64;
            refl += p.reference.len() as f64;
            let in_source: HashSet<TokenId> = p.source.iter().copied().collect();
            let novel = p.reference.iter().filter(|t| !in_source.contains(t)).count();
            abstr += 100.0 * novel as f64 / p.reference.len() as f64;
        }
        CorpusStats { mean_source_len: src / n, mean_reference_len: refl / n, abstractiveness: abstr / n }
    }
}
