//! Beam search with discriminator re-ranking.
//!
//! Each step expands every unfinished hypothesis by one token, carries ended
//! hypotheses along unchanged, keeps the `k_rerank` best candidates by
//! generator score, asks the discriminator about those, and keeps the
//! `beam_size` best by the fused score `s_gen + alpha * ln D`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TokenId, Vocabulary, EOS, SOS};
use crate::discriminator::DiscriminatorModel;
use crate::error::{Error, Result};
use crate::generator::{sequence_logprob, GeneratorModel};

/// Discriminator probabilities are clamped from below to keep `ln D` finite.
pub const DIS_FLOOR: f64 = 1e-9;

/// Anything that can say how human-like a summary prefix looks.
pub trait PrefixScorer: Send + Sync {
    /// Probability in `[0, 1]` that `prefix` (no SOS) was written by a human.
    fn prob(&self, source: &[TokenId], prefix: &[TokenId]) -> f64;
}

impl PrefixScorer for DiscriminatorModel {
    fn prob(&self, source: &[TokenId], prefix: &[TokenId]) -> f64 {
        self.score(source, prefix)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Starts with SOS; ends with EOS once `ended`.
    pub tokens: Vec<TokenId>,
    pub s_gen: f64,
    pub s_dis: Option<f64>,
    pub s_das: Option<f64>,
    pub ended: bool,
    /// Set when the discriminator returned a probability below [`DIS_FLOOR`].
    pub floored: bool,
}

impl Hypothesis {
    pub fn start() -> Self {
        Hypothesis { tokens: vec![SOS], s_gen: 0.0, s_dis: None, s_das: None, ended: false, floored: false }
    }

    /// Tokens after SOS, including a final EOS if present.
    pub fn prefix(&self) -> &[TokenId] {
        &self.tokens[1..]
    }

    /// Summary tokens without SOS and EOS.
    pub fn content(&self) -> &[TokenId] {
        let p = self.prefix();
        match p.last() {
            Some(&EOS) => &p[..p.len() - 1],
            _ => p,
        }
    }

    fn das_or_gen(&self) -> f64 {
        self.s_das.unwrap_or(self.s_gen)
    }
}

/// Appends `token` with generator log-probability `logp`.
pub fn s_gen_extend(h: &Hypothesis, token: TokenId, logp: f64) -> Result<Hypothesis> {
    if h.ended {
        return Err(Error::ExtendEnded);
    }
    let mut tokens = Vec::with_capacity(h.tokens.len() + 1);
    tokens.extend_from_slice(&h.tokens);
    tokens.push(token);
    Ok(Hypothesis { tokens, s_gen: h.s_gen + logp, s_dis: None, s_das: None, ended: token == EOS, floored: false })
}

/// Attaches the fused score for discriminator probability `dis_prob`.
pub fn s_das(mut h: Hypothesis, alpha: f64, dis_prob: f64) -> Hypothesis {
    let p = if dis_prob.is_nan() || dis_prob < DIS_FLOOR {
        h.floored = true;
        DIS_FLOOR
    } else {
        dis_prob.min(1.0)
    };
    let s_dis = p.ln();
    h.s_dis = Some(s_dis);
    h.s_das = Some(if alpha == 0.0 { h.s_gen } else { h.s_gen + alpha * s_dis });
    h
}

/// True unless appending `token` would repeat a trigram already in `h`.
pub fn apply_trigram_block(h: &Hypothesis, token: TokenId) -> bool {
    let t = &h.tokens;
    if t.len() < 2 {
        return true;
    }
    let (a, b) = (t[t.len() - 2], t[t.len() - 1]);
    !t.windows(3).any(|w| w == [a, b, token])
}

/// Divisor `((5 + length)^beta) / 6^beta`.
pub fn length_penalty(length: usize, beta: f64) -> f64 {
    ((5.0 + length as f64) / 6.0).powf(beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rules {
    /// `beta` of the length penalty; `None` leaves it off.
    pub length_penalty: Option<f64>,
    pub block_repeated_trigrams: bool,
}

/// Which score picks the returned hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalRank {
    #[default]
    Das,
    Gen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub beam_size: usize,
    pub k_rerank: usize,
    pub alpha: f64,
    pub t_max: usize,
    pub rules: Rules,
    pub final_rank: FinalRank,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_size: 3,
            k_rerank: 10,
            alpha: 1.0,
            t_max: 140,
            rules: Rules::default(),
            final_rank: FinalRank::Das,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::config("beam_size must be at least 1"));
        }
        if self.k_rerank < self.beam_size {
            return Err(Error::config(format!(
                "k_rerank ({}) must be at least beam_size ({})",
                self.k_rerank, self.beam_size
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha must be a finite non-negative number"));
        }
        if self.t_max == 0 {
            return Err(Error::config("t_max must be at least 1"));
        }
        if let Some(beta) = self.rules.length_penalty {
            if !beta.is_finite() {
                return Err(Error::config("length penalty beta must be finite"));
            }
        }
        Ok(())
    }

    fn validate_for(&self, vocab_size: usize) -> Result<()> {
        self.validate()?;
        if self.k_rerank > vocab_size * self.beam_size {
            return Err(Error::config(format!(
                "k_rerank ({}) exceeds vocabulary size times beam size ({})",
                self.k_rerank,
                vocab_size * self.beam_size
            )));
        }
        Ok(())
    }
}

/// Candidate, pre-filter pool and survivors of one step, as token sequences.
#[derive(Debug, Clone, Default)]
pub struct StepTrace {
    pub candidates: Vec<Vec<TokenId>>,
    pub pool: Vec<Vec<TokenId>>,
    pub survivors: Vec<Vec<TokenId>>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Final beam, best first.
    pub hypotheses: Vec<Hypothesis>,
    pub steps: usize,
    /// The content length limit was hit and EOS had to be forced on the winner.
    pub truncated: bool,
    pub trace: Option<Vec<StepTrace>>,
}

impl SearchOutcome {
    pub fn best(&self) -> &Hypothesis {
        &self.hypotheses[0]
    }
}

fn by_score(key: impl Fn(&Hypothesis) -> f64) -> impl Fn(&Hypothesis, &Hypothesis) -> Ordering {
    move |a, b| {
        key(b).total_cmp(&key(a)).then_with(|| b.s_gen.total_cmp(&a.s_gen)).then_with(|| a.tokens.cmp(&b.tokens))
    }
}

struct Search<'a> {
    generator: &'a dyn GeneratorModel,
    scorer: Option<&'a dyn PrefixScorer>,
    source: &'a [TokenId],
    config: SearchConfig,
    cache: HashMap<Vec<TokenId>, f64>,
    trace: Option<Vec<StepTrace>>,
}

impl Search<'_> {
    fn expand(&self, beam: &[Hypothesis], force_eos: bool) -> Result<Vec<Hypothesis>> {
        let mut out = Vec::new();
        for h in beam {
            if h.ended {
                out.push(h.clone());
                continue;
            }
            let probs = self.generator.next_logprobs(self.source, &h.tokens)?;
            if force_eos {
                out.push(s_gen_extend(h, EOS, probs[EOS as usize])?);
                continue;
            }
            for (tok, &lp) in probs.iter().enumerate() {
                let tok = tok as TokenId;
                if tok == SOS || lp == f64::NEG_INFINITY {
                    continue;
                }
                if self.config.rules.block_repeated_trigrams && !apply_trigram_block(h, tok) {
                    continue;
                }
                out.push(s_gen_extend(h, tok, lp)?);
            }
        }
        Ok(out)
    }

    fn score(&mut self, mut h: Hypothesis) -> Hypothesis {
        if h.s_das.is_some() {
            return h;
        }
        match self.scorer {
            Some(d) => {
                let p = match self.cache.get(h.prefix()) {
                    Some(&p) => p,
                    None => {
                        let p = d.prob(self.source, h.prefix());
                        self.cache.insert(h.prefix().to_vec(), p);
                        p
                    }
                };
                s_das(h, self.config.alpha, p)
            }
            None => {
                h.s_das = Some(h.s_gen);
                h
            }
        }
    }

    fn step(&mut self, beam: &[Hypothesis], force_eos: bool) -> Result<Vec<Hypothesis>> {
        let mut cands = self.expand(beam, force_eos)?;
        let snapshot = self.trace.is_some().then(|| cands.iter().map(|h| h.tokens.clone()).collect());

        cands.sort_by(by_score(|h| h.s_gen));
        cands.truncate(self.config.k_rerank);
        let pool: Vec<Hypothesis> = cands.into_iter().map(|h| self.score(h)).collect();
        let pool_tokens = self.trace.is_some().then(|| pool.iter().map(|h| h.tokens.clone()).collect());

        let mut survivors = pool;
        survivors.sort_by(by_score(Hypothesis::das_or_gen));
        survivors.truncate(self.config.beam_size);
        if let Some(trace) = &mut self.trace {
            trace.push(StepTrace {
                candidates: snapshot.unwrap_or_default(),
                pool: pool_tokens.unwrap_or_default(),
                survivors: survivors.iter().map(|h| h.tokens.clone()).collect(),
            });
        }
        Ok(survivors)
    }

    fn run(mut self) -> Result<SearchOutcome> {
        let mut beam = vec![Hypothesis::start()];
        let mut steps = 0;
        while steps < self.config.t_max && beam.iter().any(|h| !h.ended) {
            beam = self.step(&beam, false)?;
            steps += 1;
        }
        let mut forced = Vec::new();
        if beam.iter().any(|h| !h.ended) {
            forced = beam.iter().filter(|h| !h.ended).map(|h| h.tokens.clone()).collect();
            beam = self.step(&beam, true)?;
            steps += 1;
        }
        let cfg = self.config;
        let key = move |h: &Hypothesis| {
            let s = match cfg.final_rank {
                FinalRank::Das => h.das_or_gen(),
                FinalRank::Gen => h.s_gen,
            };
            match cfg.rules.length_penalty {
                Some(beta) => s / length_penalty(h.prefix().len(), beta),
                None => s,
            }
        };
        beam.sort_by(by_score(key));
        let best = &beam[0].tokens;
        let truncated = forced.iter().any(|f| best.starts_with(f) && best.len() == f.len() + 1);
        Ok(SearchOutcome { hypotheses: beam, steps, truncated, trace: self.trace })
    }
}

fn search(
    generator: &dyn GeneratorModel,
    scorer: Option<&dyn PrefixScorer>,
    source: &[TokenId],
    config: &SearchConfig,
    trace: bool,
) -> Result<SearchOutcome> {
    config.validate_for(generator.vocab_size())?;
    if source.is_empty() {
        return Err(Error::EmptySource);
    }
    if scorer.is_none() && config.alpha != 0.0 {
        return Err(Error::config("a discriminator is required when alpha > 0"));
    }
    // With alpha = 0 the discriminator has no say, so it is not consulted.
    Search {
        generator,
        scorer: scorer.filter(|_| config.alpha != 0.0),
        source,
        config: *config,
        cache: HashMap::new(),
        trace: trace.then(Vec::new),
    }
    .run()
}

/// Discriminator-guided beam search. `discriminator` may be `None` only when
/// `config.alpha == 0`.
pub fn das_beam_search(
    generator: &dyn GeneratorModel,
    discriminator: Option<&dyn PrefixScorer>,
    source: &[TokenId],
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    search(generator, discriminator, source, config, false)
}

/// As [`das_beam_search`] but records the candidate sets of every step.
pub fn das_beam_search_traced(
    generator: &dyn GeneratorModel,
    discriminator: Option<&dyn PrefixScorer>,
    source: &[TokenId],
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    search(generator, discriminator, source, config, true)
}

/// Beam search on generator score alone.
pub fn plain_beam_search(
    generator: &dyn GeneratorModel,
    source: &[TokenId],
    config: &SearchConfig,
) -> Result<SearchOutcome> {
    let cfg = SearchConfig { alpha: 0.0, k_rerank: config.beam_size, final_rank: FinalRank::Gen, ..*config };
    search(generator, None, source, &cfg, false)
}

/// Upper bound on the number of sequences [`exhaustive_oracle`] will score.
pub const ORACLE_BUDGET: u128 = 1_000_000;

/// Best EOS-terminated sequence over `tokens` with at most `t_max` content
/// tokens, by `s_gen + alpha * ln D`. Returns `(content, s_das)`.
pub fn exhaustive_oracle(
    generator: &dyn GeneratorModel,
    discriminator: Option<&dyn PrefixScorer>,
    source: &[TokenId],
    alpha: f64,
    t_max: usize,
    tokens: &[TokenId],
) -> Result<(Vec<TokenId>, f64)> {
    let v = tokens.len() as u128;
    let total: u128 =
        (0..=t_max as u32).try_fold(0u128, |acc, k| v.checked_pow(k).map(|p| acc + p)).unwrap_or(u128::MAX);
    if total > ORACLE_BUDGET {
        return Err(Error::BudgetExceeded(total, ORACLE_BUDGET));
    }
    if discriminator.is_none() && alpha != 0.0 {
        return Err(Error::config("a discriminator is required when alpha > 0"));
    }
    let mut best: Option<(f64, f64, Vec<TokenId>)> = None;
    let mut content: Vec<TokenId> = Vec::new();
    let mut visit = |content: &[TokenId]| -> Result<()> {
        let mut y = content.to_vec();
        y.push(EOS);
        let s_gen = sequence_logprob(generator, source, &y)?;
        let s = match discriminator {
            Some(d) if alpha != 0.0 => s_gen + alpha * d.prob(source, &y).max(DIS_FLOOR).ln(),
            _ => s_gen,
        };
        let better = match &best {
            None => true,
            Some((bs, bg, bt)) => match s.total_cmp(bs).then_with(|| s_gen.total_cmp(bg)) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => y < *bt,
            },
        };
        if better {
            best = Some((s, s_gen, y));
        }
        Ok(())
    };
    fn walk(
        content: &mut Vec<TokenId>,
        tokens: &[TokenId],
        t_max: usize,
        visit: &mut dyn FnMut(&[TokenId]) -> Result<()>,
    ) -> Result<()> {
        visit(content)?;
        if content.len() == t_max {
            return Ok(());
        }
        for &t in tokens {
            content.push(t);
            walk(content, tokens, t_max, visit)?;
            content.pop();
        }
        Ok(())
    }
    walk(&mut content, tokens, t_max, &mut visit)?;
    let (s, _, mut y) = best.expect("at least the empty sequence is visited");
    y.pop();
    Ok((y, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecodeMode {
    Plain,
    Das,
}

/// One line of a generations file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub id: String,
    /// Summary token ids without SOS and EOS.
    pub tokens: Vec<TokenId>,
    pub text: String,
    pub s_gen: f64,
    pub s_dis: Option<f64>,
    pub s_das: Option<f64>,
    pub steps: usize,
    pub truncated: bool,
}

/// Decodes every source of `corpus` in parallel, preserving corpus order.
pub fn decode_corpus(
    corpus: &Corpus,
    generator: &dyn GeneratorModel,
    discriminator: Option<&dyn PrefixScorer>,
    config: &SearchConfig,
    mode: DecodeMode,
) -> Result<Vec<Generation>> {
    config.validate_for(generator.vocab_size())?;
    let vocab = corpus.vocab();
    corpus
        .pairs
        .par_iter()
        .map(|p| {
            let out = match mode {
                DecodeMode::Plain => plain_beam_search(generator, &p.source, config)?,
                DecodeMode::Das => das_beam_search(generator, discriminator, &p.source, config)?,
            };
            let h = out.best();
            Ok(Generation {
                id: p.id.clone(),
                tokens: h.content().to_vec(),
                text: vocab.detokenize(h.content()),
                s_gen: h.s_gen,
                s_dis: h.s_dis,
                s_das: h.s_das,
                steps: out.steps,
                truncated: out.truncated,
            })
        })
        .collect()
}

/// `id -> tokens` view of a generations list.
pub fn generation_map(gens: &[Generation]) -> HashMap<String, Vec<TokenId>> {
    gens.iter().map(|g| (g.id.clone(), g.tokens.clone())).collect()
}

pub fn write_generations(path: &Path, gens: &[Generation]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for g in gens {
        let line = serde_json::to_string(g).expect("generation serializes");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_generations(path: &Path) -> Result<Vec<Generation>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let g: Generation =
            serde_json::from_str(&line).map_err(|e| Error::Malformed { line: i + 1, reason: e.to_string() })?;
        out.push(g);
    }
    Ok(out)
}

/// Re-encodes generation text with another vocabulary.
pub fn reencode_generations(gens: &mut [Generation], vocab: &Vocabulary) {
    for g in gens {
        let words: Vec<&str> = g.text.split_whitespace().collect();
        g.tokens = vocab.encode(&words);
    }
}
