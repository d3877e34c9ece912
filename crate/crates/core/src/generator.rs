//! Conditional next-token models.
//!
//! [`GeneratorModel`] is the only thing the decoder needs: a normalized
//! log-distribution over the vocabulary for a `(source, prefix)` pair.
//! [`NGramCopyModel`] is the built-in implementation, a mixture of a
//! backoff-smoothed n-gram model over references and a bag-of-words copy
//! distribution over the source:
//!
//! `P(t | x, prefix) = λ·copy(t | x) + (1 − λ)·ngram(t | prefix)`

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, TokenId, Vocabulary, EOS, SOS};
use crate::error::{Error, Result};

pub trait GeneratorModel: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Log-probability of every vocabulary id following `prefix`, which starts with SOS.
    fn next_logprobs(&self, source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>>;
}

/// `log P(y | x)` for an EOS-terminated `y` (without the leading SOS).
pub fn sequence_logprob<G: GeneratorModel + ?Sized>(model: &G, source: &[TokenId], y: &[TokenId]) -> Result<f64> {
    match y.split_last() {
        Some((&EOS, body)) if !body.contains(&EOS) => {}
        _ => return Err(Error::config("sequence must end with EOS and contain no other EOS")),
    }
    let mut prefix = Vec::with_capacity(y.len() + 1);
    prefix.push(SOS);
    let mut total = 0.0;
    for &t in y {
        total += model.next_logprobs(source, &prefix)?[t as usize];
        prefix.push(t);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
struct Successors {
    total: u64,
    next: Vec<(TokenId, u64)>,
}

/// Hyperparameters of [`NGramCopyModel`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub order: usize,
    pub kappa: f64,
    pub lambda_copy: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams { order: 3, kappa: 1.0, lambda_copy: 0.1 }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if self.order < 1 {
            return Err(Error::config("generator order must be at least 1"));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::config("kappa must be positive"));
        }
        if !(0.0..=1.0).contains(&self.lambda_copy) {
            return Err(Error::config("lambda_copy must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramCopyModel {
    params: GeneratorParams,
    vocab_size: usize,
    vocab_hash: String,
    /// Indexed by context length, `0..order`.
    tables: Vec<HashMap<Vec<TokenId>, Successors>>,
    unigram: Vec<f64>,
}

/// Trains on the corpus references, each framed as `SOS … EOS`.
pub fn train_generator(corpus: &Corpus, params: GeneratorParams) -> Result<NGramCopyModel> {
    params.validate()?;
    if corpus.is_empty() {
        return Err(Error::config("cannot train a generator on an empty corpus"));
    }
    let mut counts: BTreeMap<(Vec<TokenId>, TokenId), u64> = BTreeMap::new();
    for p in &corpus.pairs {
        let mut framed = Vec::with_capacity(p.reference.len() + 2);
        framed.push(SOS);
        framed.extend_from_slice(&p.reference);
        framed.push(EOS);
        for i in 1..framed.len() {
            for k in 0..params.order.min(i + 1) {
                *counts.entry((framed[i - k..i].to_vec(), framed[i])).or_default() += 1;
            }
        }
    }
    NGramCopyModel::from_counts(params, corpus.vocab(), counts)
}

impl NGramCopyModel {
    /// Assembles a model from raw `(context, token) → count` entries.
    pub fn from_counts(
        params: GeneratorParams,
        vocab: &Vocabulary,
        counts: BTreeMap<(Vec<TokenId>, TokenId), u64>,
    ) -> Result<Self> {
        Self::assemble(params, vocab.len(), vocab.hash(), counts)
    }

    fn assemble(
        params: GeneratorParams,
        vocab_size: usize,
        vocab_hash: String,
        counts: BTreeMap<(Vec<TokenId>, TokenId), u64>,
    ) -> Result<Self> {
        params.validate()?;
        let mut tables: Vec<HashMap<Vec<TokenId>, Successors>> = vec![HashMap::new(); params.order];
        for ((ctx, tok), c) in counts {
            if ctx.len() >= params.order {
                return Err(Error::model("generator", format!("context {ctx:?} exceeds order")));
            }
            if tok as usize >= vocab_size || tok == SOS || ctx.iter().any(|&t| t as usize >= vocab_size) {
                return Err(Error::model("generator", format!("token id out of range in {ctx:?} {tok}")));
            }
            if c == 0 {
                continue;
            }
            let s = tables[ctx.len()].entry(ctx).or_insert_with(|| Successors { total: 0, next: Vec::new() });
            s.total += c;
            s.next.push((tok, c));
        }

        let mut unigram = vec![0.0; vocab_size];
        let empty = tables[0].get(&[][..]);
        let n_total = empty.map_or(0, |s| s.total) as f64;
        let support = (vocab_size - 1) as f64;
        let denom = n_total + params.kappa * support;
        for p in unigram.iter_mut().skip(1) {
            *p = params.kappa / denom;
        }
        if let Some(s) = empty {
            for &(t, c) in &s.next {
                unigram[t as usize] = (c as f64 + params.kappa) / denom;
            }
        }
        Ok(NGramCopyModel { params, vocab_size, vocab_hash, tables, unigram })
    }

    pub fn params(&self) -> GeneratorParams {
        self.params
    }

    pub fn vocab_hash(&self) -> &str {
        &self.vocab_hash
    }

    /// Raw count of `token` after `context`.
    pub fn count(&self, context: &[TokenId], token: TokenId) -> u64 {
        self.tables
            .get(context.len())
            .and_then(|t| t.get(context))
            .and_then(|s| s.next.iter().find(|(t, _)| *t == token))
            .map_or(0, |&(_, c)| c)
    }

    /// Smoothed n-gram distribution after `prefix` (SOS gets zero).
    ///
    /// Uses the longest context seen in training. Counts there are smoothed
    /// toward the next-shorter context's distribution with pseudo-count
    /// `kappa`, bottoming out at the add-`kappa` unigram floor.
    pub fn ngram_distribution(&self, prefix: &[TokenId]) -> Vec<f64> {
        let mut p = self.unigram.clone();
        let kappa = self.params.kappa;
        for k in 1..self.params.order {
            if prefix.len() < k {
                break;
            }
            let Some(s) = self.tables[k].get(&prefix[prefix.len() - k..]) else {
                break;
            };
            let denom = s.total as f64 + kappa;
            p.iter_mut().for_each(|v| *v *= kappa / denom);
            for &(t, c) in &s.next {
                p[t as usize] += c as f64 / denom;
            }
        }
        p
    }

    /// `count(t in source) / |source|`.
    pub fn copy_distribution(&self, source: &[TokenId]) -> Vec<f64> {
        let mut p = vec![0.0; self.vocab_size];
        let w = 1.0 / source.len() as f64;
        for &t in source {
            if let Some(slot) = p.get_mut(t as usize) {
                *slot += w;
            }
        }
        p
    }

    /// The mixture distribution (not logged).
    pub fn next_probs(&self, source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>> {
        if source.is_empty() {
            return Err(Error::EmptySource);
        }
        if prefix.first() != Some(&SOS) {
            return Err(Error::MissingStart);
        }
        let lambda = self.params.lambda_copy;
        let mut p = self.ngram_distribution(prefix);
        if lambda > 0.0 {
            let copy = self.copy_distribution(source);
            for (v, c) in p.iter_mut().zip(copy) {
                *v = lambda * c + (1.0 - lambda) * *v;
            }
        }
        Ok(p)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ngram-copy 1");
        let _ = writeln!(s, "order {}", self.params.order);
        let _ = writeln!(s, "kappa {}", self.params.kappa);
        let _ = writeln!(s, "lambda_copy {}", self.params.lambda_copy);
        let _ = writeln!(s, "vocab_size {}", self.vocab_size);
        let _ = writeln!(s, "vocab_hash {}", self.vocab_hash);
        let mut lines: Vec<(&[TokenId], TokenId, u64)> = Vec::new();
        for table in &self.tables {
            for (ctx, succ) in table {
                for &(t, c) in &succ.next {
                    lines.push((ctx, t, c));
                }
            }
        }
        lines.sort_unstable();
        let _ = writeln!(s, "ngrams {}", lines.len());
        for (ctx, t, c) in lines {
            let ctx = if ctx.is_empty() {
                "-".to_string()
            } else {
                ctx.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
            };
            let _ = writeln!(s, "{ctx} {t} {c}");
        }
        s
    }

    pub fn file_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_string().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::model("generator", m);
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            match line.split_once(' ') {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(bad(format!("expected {key}, got {line:?}"))),
            }
        };
        if header("ngram-copy")? != "1" {
            return Err(bad("unsupported version".into()));
        }
        let num = |v: String, k: &str| v.parse::<f64>().map_err(|_| bad(format!("bad {k}")));
        let order = header("order")?.parse::<usize>().map_err(|_| bad("bad order".into()))?;
        let kappa = num(header("kappa")?, "kappa")?;
        let lambda_copy = num(header("lambda_copy")?, "lambda_copy")?;
        let vocab_size = header("vocab_size")?.parse::<usize>().map_err(|_| bad("bad vocab_size".into()))?;
        let vocab_hash = header("vocab_hash")?;
        let n = header("ngrams")?.parse::<usize>().map_err(|_| bad("bad ngrams".into()))?;
        let mut counts = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(' ').collect();
            let parse_id = |x: &str| x.parse::<TokenId>().map_err(|_| bad(format!("bad id on n-gram line {}", i + 1)));
            if f.len() != 3 {
                return Err(bad(format!("n-gram line {} has {} fields", i + 1, f.len())));
            }
            let ctx =
                if f[0] == "-" { Vec::new() } else { f[0].split(',').map(parse_id).collect::<Result<Vec<_>>>()? };
            let c = f[2].parse::<u64>().map_err(|_| bad(format!("bad count on n-gram line {}", i + 1)))?;
            counts.insert((ctx, parse_id(f[1])?), c);
        }
        if counts.len() != n {
            return Err(bad(format!("expected {n} n-grams, found {}", counts.len())));
        }
        let params = GeneratorParams { order, kappa, lambda_copy };
        Self::assemble(params, vocab_size, vocab_hash, counts)
    }
}

impl GeneratorModel for NGramCopyModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_logprobs(&self, source: &[TokenId], prefix: &[TokenId]) -> Result<Vec<f64>> {
        Ok(self.next_probs(source, prefix)?.into_iter().map(f64::ln).collect())
    }
}
