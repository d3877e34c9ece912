use std::collections::{HashMap, HashSet};

use crate::corpus::{Corpus, TokenId, EOS};

pub const N_DENSE: usize = 7;

pub const DENSE_NAMES: [&str; N_DENSE] =
    ["length", "rep1", "rep2", "rep3", "background_logfreq", "ends_with_eos", "length_prior"];

/// How prefixes are turned into feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub d_hash: usize,
    pub use_source: bool,
    pub t_max: usize,
    /// log10 unigram frequency per token id; ids past the end count as 0.
    pub background: Vec<f64>,
    /// Scaled log share of references at least `t` tokens long, indexed by `t`.
    pub length_prior: Vec<f64>,
}

impl FeatureConfig {
    pub fn new(d_hash: usize, use_source: bool, t_max: usize) -> Self {
        FeatureConfig {
            d_hash: d_hash.max(1),
            use_source,
            t_max: t_max.max(1),
            background: Vec::new(),
            length_prior: Vec::new(),
        }
    }

    /// Add-one smoothed unigram frequencies over sources and EOS-framed references.
    pub fn with_background(mut self, corpus: &Corpus) -> Self {
        let v = corpus.vocab().len();
        let mut counts = vec![1.0f64; v];
        let mut total = v as f64;
        for p in &corpus.pairs {
            for &t in p.source.iter().chain(&p.reference) {
                counts[t as usize] += 1.0;
            }
            counts[EOS as usize] += 1.0;
            total += (p.source.len() + p.reference.len() + 1) as f64;
        }
        self.background = counts.into_iter().map(|c| (c / total).log10()).collect();
        self.with_length_prior(corpus)
    }

    /// Add-one smoothed survival of EOS-framed reference lengths, in `[-1, 0]`.
    pub fn with_length_prior(mut self, corpus: &Corpus) -> Self {
        let n = corpus.pairs.len() as f64;
        let mut at_least = vec![0.0f64; self.t_max + 2];
        for p in &corpus.pairs {
            let len = (p.reference.len() + 1).min(self.t_max + 1);
            at_least[..=len].iter_mut().for_each(|c| *c += 1.0);
        }
        let scale = (n + 1.0).ln();
        self.length_prior = at_least.into_iter().map(|c| ((c + 1.0) / (n + 1.0)).ln() / scale).collect();
        self
    }
}

/// Dense statistics plus hashed sparse indicators, sorted by index.
///
/// The sparse part holds prefix unigram and bigram frequencies, plus indicators
/// for the exact prefix length and the last token conjoined with a coarse
/// length bucket. With the source enabled every unigram also fires a copy
/// tagged with its (capped) count in the source, every bigram one tagged with
/// whether it occurs in the source, and the share of prefix tokens
/// found in the source fires at its length bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub dense: [f64; N_DENSE],
    pub sparse: Vec<(u32, f64)>,
}

fn fnv1a(parts: &[u32]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

pub(crate) fn repetition_fraction(tokens: &[TokenId], n: usize) -> f64 {
    if tokens.len() < n {
        return 0.0;
    }
    let total = tokens.len() + 1 - n;
    let types: HashSet<&[TokenId]> = tokens.windows(n).collect();
    1.0 - types.len() as f64 / total as f64
}

const UNIGRAM: u32 = 1;
const BIGRAM: u32 = 2;
const LENGTH: u32 = 3;
const LAST_AT: u32 = 4;
const UNIGRAM_SRC: u32 = 5;
const BIGRAM_SRC: u32 = 6;
const OVERLAP: u32 = 7;

/// Source counts above this share one unigram indicator.
const SOURCE_COUNT_CAP: u32 = 3;

/// Resolution of the source-overlap share in the overlap-by-length indicator.
const OVERLAP_LEVELS: f64 = 5.0;

/// Width of the length buckets the last token is conjoined with.
const LENGTH_BUCKET: usize = 4;

pub fn extract_features(source: &[TokenId], prefix: &[TokenId], config: &FeatureConfig) -> FeatureVector {
    let mut dense = [0.0; N_DENSE];
    let t = prefix.len();
    if t == 0 {
        return FeatureVector { dense, sparse: Vec::new() };
    }
    let mut src_uni: HashMap<TokenId, u32> = HashMap::new();
    if config.use_source {
        for &x in source {
            *src_uni.entry(x).or_default() += 1;
        }
    }
    let src_bi: HashSet<(TokenId, TokenId)> =
        if config.use_source { source.windows(2).map(|w| (w[0], w[1])).collect() } else { HashSet::new() };

    dense[0] = t as f64 / config.t_max as f64;
    dense[1] = repetition_fraction(prefix, 1);
    dense[2] = repetition_fraction(prefix, 2);
    dense[3] = repetition_fraction(prefix, 3);
    dense[4] =
        prefix.iter().map(|&x| config.background.get(x as usize).copied().unwrap_or(0.0)).sum::<f64>() / t as f64;
    dense[5] = if prefix[t - 1] == EOS { 1.0 } else { 0.0 };
    if let Some(last) = config.length_prior.last() {
        dense[6] = config.length_prior.get(t).copied().unwrap_or(*last);
    }

    let d = config.d_hash as u64;
    let mut acc: Vec<(u32, f64)> = Vec::with_capacity(4 * t + 2);
    let uni = 1.0 / t as f64;
    for &x in prefix {
        acc.push(((fnv1a(&[UNIGRAM, x]) % d) as u32, uni));
        if config.use_source {
            let seen = src_uni.get(&x).copied().unwrap_or(0).min(SOURCE_COUNT_CAP);
            acc.push(((fnv1a(&[UNIGRAM_SRC, x, seen]) % d) as u32, uni));
        }
    }
    if t > 1 {
        let bi = 1.0 / (t - 1) as f64;
        for w in prefix.windows(2) {
            acc.push(((fnv1a(&[BIGRAM, w[0], w[1]]) % d) as u32, bi));
            if config.use_source {
                let bit = src_bi.contains(&(w[0], w[1])) as u32;
                acc.push(((fnv1a(&[BIGRAM_SRC, w[0], w[1], bit]) % d) as u32, bi));
            }
        }
    }
    let t_cap = t.min(config.t_max) as u32;
    acc.push(((fnv1a(&[LENGTH, t_cap]) % d) as u32, 1.0));
    let bucket = (t_cap as usize / LENGTH_BUCKET) as u32;
    acc.push(((fnv1a(&[LAST_AT, prefix[t - 1], bucket]) % d) as u32, 1.0));
    if config.use_source {
        let copied = prefix.iter().filter(|x| src_uni.contains_key(x)).count();
        let level = (OVERLAP_LEVELS * copied as f64 / t as f64).round() as u32;
        acc.push(((fnv1a(&[OVERLAP, level, bucket]) % d) as u32, 1.0));
    }
    acc.sort_unstable_by_key(|&(i, _)| i);
    let mut sparse: Vec<(u32, f64)> = Vec::with_capacity(acc.len());
    for (i, v) in acc {
        match sparse.last_mut() {
            Some(last) if last.0 == i => last.1 += v,
            _ => sparse.push((i, v)),
        }
    }
    FeatureVector { dense, sparse }
}
