//! Summary evaluation: length, novelty, repetition, BLEU-1, ROUGE-1, ROUGE-L,
//! their differences to the human references, and the token frequency and
//! repetition position reports.
//!
//! Conventions:
//! * `rep-n` is the duplicated n-gram mass, `100 * (1 - types / instances)`.
//! * `nov-n` counts summary n-gram *instances* absent from the source.
//! * ROUGE is reported as F1; recall is kept alongside.
//! * Corpus-level scores are means of per-summary scores unless the pooled
//!   (micro) variants are requested.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{Corpus, TokenId, Vocabulary};
use crate::error::{Error, Result};

fn ngrams(tokens: &[TokenId], n: usize) -> impl Iterator<Item = &[TokenId]> {
    tokens.windows(n.max(1))
}

/// Percentage of summary n-gram instances that never occur in `source`.
/// `None` when the summary is shorter than `n`.
pub fn novelty_n(summary: &[TokenId], source: &[TokenId], n: usize) -> Option<f64> {
    let (novel, total) = novelty_counts(summary, source, n)?;
    Some(100.0 * novel as f64 / total as f64)
}

fn novelty_counts(summary: &[TokenId], source: &[TokenId], n: usize) -> Option<(usize, usize)> {
    if n == 0 || summary.len() < n {
        return None;
    }
    let in_source: HashSet<&[TokenId]> = ngrams(source, n).collect();
    let total = summary.len() + 1 - n;
    let novel = ngrams(summary, n).filter(|g| !in_source.contains(g)).count();
    Some((novel, total))
}

/// Duplicated n-gram mass in percent. `None` when the summary is shorter than `n`.
pub fn repetition_n(summary: &[TokenId], n: usize) -> Option<f64> {
    let (types, total) = repetition_counts(summary, n)?;
    Some(100.0 * (1.0 - types as f64 / total as f64))
}

fn repetition_counts(summary: &[TokenId], n: usize) -> Option<(usize, usize)> {
    if n == 0 || summary.len() < n {
        return None;
    }
    let types: HashSet<&[TokenId]> = ngrams(summary, n).collect();
    Some((types.len(), summary.len() + 1 - n))
}

/// `m_human - m_model`; negative when the model value is larger.
pub fn delta(m_human: f64, m_model: f64) -> f64 {
    m_human - m_model
}

fn counts(tokens: &[TokenId]) -> HashMap<TokenId, usize> {
    let mut m = HashMap::new();
    for &t in tokens {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

fn clipped_overlap(hyp: &[TokenId], reference: &[TokenId]) -> usize {
    let r = counts(reference);
    counts(hyp).into_iter().map(|(t, c)| c.min(r.get(&t).copied().unwrap_or(0))).sum()
}

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        return 0.0;
    }
    (1.0 - ref_len as f64 / hyp_len as f64).min(0.0).exp()
}

/// Sentence BLEU-1 in `[0, 1]`: clipped unigram precision times brevity penalty.
pub fn bleu1(hyp: &[TokenId], reference: &[TokenId]) -> f64 {
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let precision = clipped_overlap(hyp, reference) as f64 / hyp.len() as f64;
    precision * brevity_penalty(hyp.len(), reference.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Rouge {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl Rouge {
    fn from_overlap(overlap: usize, hyp_len: usize, ref_len: usize) -> Self {
        if hyp_len == 0 || ref_len == 0 {
            return Rouge::default();
        }
        let recall = overlap as f64 / ref_len as f64;
        let precision = overlap as f64 / hyp_len as f64;
        let f1 = if recall + precision > 0.0 { 2.0 * recall * precision / (recall + precision) } else { 0.0 };
        Rouge { recall, precision, f1 }
    }
}

pub fn rouge1(hyp: &[TokenId], reference: &[TokenId]) -> Rouge {
    Rouge::from_overlap(clipped_overlap(hyp, reference), hyp.len(), reference.len())
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[TokenId], b: &[TokenId]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l(hyp: &[TokenId], reference: &[TokenId]) -> Rouge {
    Rouge::from_overlap(lcs_len(hyp, reference), hyp.len(), reference.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZipfEntry {
    pub rank: usize,
    pub token: TokenId,
    pub frequency: usize,
}

/// The `k` most frequent tokens across `generations`, ties broken by token id.
pub fn zipf_report(generations: &[&[TokenId]], k: usize) -> Vec<ZipfEntry> {
    let mut freq: HashMap<TokenId, usize> = HashMap::new();
    for g in generations {
        for &t in *g {
            *freq.entry(t).or_insert(0) += 1;
        }
    }
    let mut items: Vec<(TokenId, usize)> = freq.into_iter().collect();
    items.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    items
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (token, frequency))| ZipfEntry { rank: i + 1, token, frequency })
        .collect()
}

/// Side-by-side CSV of two Zipf reports: `rank,model_token,model_freq,human_token,human_freq`.
pub fn zipf_csv(model: &[ZipfEntry], human: &[ZipfEntry], vocab: &Vocabulary) -> String {
    let mut s = String::from("rank,model_token,model_freq,human_token,human_freq\n");
    for i in 0..model.len().max(human.len()) {
        let cell = |e: Option<&ZipfEntry>| match e {
            Some(e) => (csv_field(vocab.token(e.token)), e.frequency.to_string()),
            None => (String::new(), String::new()),
        };
        let (mt, mf) = cell(model.get(i));
        let (ht, hf) = cell(human.get(i));
        let _ = writeln!(s, "{},{mt},{mf},{ht},{hf}", i + 1);
    }
    s
}

fn csv_field(t: &str) -> String {
    if t.contains(',') || t.contains('"') {
        format!("\"{}\"", t.replace('"', "\"\""))
    } else {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositionHistogram {
    /// Probability mass per equal-width bucket over relative position `[0, 1)`.
    pub density: Vec<f64>,
    /// Number of repeated n-gram instances recorded.
    pub count: usize,
}

impl PositionHistogram {
    pub fn to_csv(&self) -> String {
        let b = self.density.len();
        let mut s = String::from("bucket_start,bucket_end,density\n");
        for (i, d) in self.density.iter().enumerate() {
            let _ = writeln!(s, "{:.4},{:.4},{d:.6}", i as f64 / b as f64, (i + 1) as f64 / b as f64);
        }
        s
    }
}

/// Where repeated n-grams start, relative to the number of n-gram positions in
/// their summary. Only second and later occurrences of a type are recorded.
pub fn repetition_position_hist(generations: &[&[TokenId]], n: usize, buckets: usize) -> PositionHistogram {
    let buckets = buckets.max(1);
    let mut hist = vec![0usize; buckets];
    let mut count = 0;
    for g in generations {
        if n == 0 || g.len() < n {
            continue;
        }
        let positions = g.len() + 1 - n;
        let mut seen: HashSet<&[TokenId]> = HashSet::new();
        for (i, gram) in g.windows(n).enumerate() {
            if !seen.insert(gram) {
                let rel = i as f64 / positions as f64;
                let b = ((rel * buckets as f64) as usize).min(buckets - 1);
                hist[b] += 1;
                count += 1;
            }
        }
    }
    let density = hist.into_iter().map(|c| if count == 0 { 0.0 } else { c as f64 / count as f64 }).collect();
    PositionHistogram { density, count }
}

/// Averaging options for [`evaluate_system`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Pool n-gram counts over the corpus for nov/rep instead of averaging per summary.
    pub pooled: bool,
    /// Corpus BLEU-1 from pooled clipped counts instead of the mean sentence score.
    pub micro_bleu: bool,
}

/// Length, novelty and repetition of one set of summaries.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ShapeMetrics {
    pub len: f64,
    pub nov1: Option<f64>,
    pub nov3: Option<f64>,
    pub rep1: Option<f64>,
    pub rep3: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Deltas {
    pub len: f64,
    pub nov1: Option<f64>,
    pub nov3: Option<f64>,
    pub rep1: Option<f64>,
    pub rep3: Option<f64>,
}

impl Deltas {
    fn between(human: &ShapeMetrics, model: &ShapeMetrics) -> Self {
        let d = |h: Option<f64>, m: Option<f64>| Some(delta(h?, m?));
        Deltas {
            len: delta(human.len, model.len),
            nov1: d(human.nov1, model.nov1),
            nov3: d(human.nov3, model.nov3),
            rep1: d(human.rep1, model.rep1),
            rep3: d(human.rep3, model.rep3),
        }
    }

    /// `|Δlen| + |Δnov-1| + |Δrep-3|`, missing terms counted as zero.
    pub fn summed_abs(&self) -> f64 {
        self.len.abs() + self.nov1.unwrap_or(0.0).abs() + self.rep3.unwrap_or(0.0).abs()
    }
}

/// Evaluation of one system against a reference corpus. BLEU and ROUGE are ×100.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub system: String,
    pub n: usize,
    pub model: ShapeMetrics,
    pub human: Option<ShapeMetrics>,
    pub delta: Option<Deltas>,
    pub bleu1: f64,
    pub rouge1: f64,
    pub rouge1_recall: f64,
    pub rouge_l: f64,
    pub rouge_l_recall: f64,
}

type PairCounter<'a> = dyn Fn(&[TokenId], &[TokenId]) -> Option<(usize, usize)> + 'a;

fn shape_metrics(items: &[(&[TokenId], &[TokenId])], source_aware: bool, pooled: bool) -> ShapeMetrics {
    let len = items.iter().map(|(s, _)| s.len() as f64).sum::<f64>() / items.len().max(1) as f64;
    let aggregate = |f: &PairCounter<'_>| -> Option<f64> {
        let parts: Vec<(usize, usize)> = items.iter().filter_map(|(s, x)| f(s, x)).collect();
        if parts.is_empty() {
            return None;
        }
        if pooled {
            let num: usize = parts.iter().map(|p| p.0).sum();
            let den: usize = parts.iter().map(|p| p.1).sum();
            Some(100.0 * num as f64 / den as f64)
        } else {
            let sum: f64 = parts.iter().map(|&(a, b)| a as f64 / b as f64).sum();
            Some(100.0 * sum / parts.len() as f64)
        }
    };
    let nov = |n: usize| {
        if source_aware {
            aggregate(&|s, x| novelty_counts(s, x, n))
        } else {
            None
        }
    };
    // duplicated mass = instances - types
    let rep = |n: usize| aggregate(&|s, _| repetition_counts(s, n).map(|(ty, tot)| (tot - ty, tot)));
    ShapeMetrics { len, nov1: nov(1), nov3: nov(3), rep1: rep(1), rep3: rep(3) }
}

/// Scores `generations` (id → summary tokens, without SOS/EOS) against `corpus`.
pub fn evaluate_system<S: std::hash::BuildHasher>(
    system: &str,
    generations: &HashMap<String, Vec<TokenId>, S>,
    corpus: &Corpus,
    source_aware: bool,
    opts: EvalOptions,
) -> Result<MetricReport> {
    let missing: Vec<String> =
        corpus.pairs.iter().filter(|p| !generations.contains_key(&p.id)).map(|p| p.id.clone()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingGeneration(missing));
    }
    let model_items: Vec<(&[TokenId], &[TokenId])> =
        corpus.pairs.iter().map(|p| (generations[&p.id].as_slice(), p.source.as_slice())).collect();
    let human_items: Vec<(&[TokenId], &[TokenId])> =
        corpus.pairs.iter().map(|p| (p.reference.as_slice(), p.source.as_slice())).collect();

    let model = shape_metrics(&model_items, source_aware, opts.pooled);
    let human = shape_metrics(&human_items, source_aware, opts.pooled);

    let n = corpus.len().max(1) as f64;
    let mut bleu = 0.0;
    let (mut clip, mut hyp_len, mut ref_len) = (0usize, 0usize, 0usize);
    let (mut r1, mut r1r, mut rl, mut rlr) = (0.0, 0.0, 0.0, 0.0);
    for p in &corpus.pairs {
        let g = &generations[&p.id];
        bleu += bleu1(g, &p.reference);
        clip += clipped_overlap(g, &p.reference);
        hyp_len += g.len();
        ref_len += p.reference.len();
        let a = rouge1(g, &p.reference);
        let b = rouge_l(g, &p.reference);
        r1 += a.f1;
        r1r += a.recall;
        rl += b.f1;
        rlr += b.recall;
    }
    let bleu1 = if opts.micro_bleu {
        if hyp_len == 0 {
            0.0
        } else {
            clip as f64 / hyp_len as f64 * brevity_penalty(hyp_len, ref_len)
        }
    } else {
        bleu / n
    };

    Ok(MetricReport {
        system: system.to_string(),
        n: corpus.len(),
        delta: Some(Deltas::between(&human, &model)),
        model,
        human: Some(human),
        bleu1: 100.0 * bleu1,
        rouge1: 100.0 * r1 / n,
        rouge1_recall: 100.0 * r1r / n,
        rouge_l: 100.0 * rl / n,
        rouge_l_recall: 100.0 * rlr / n,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// One CSV row per report.
pub fn reports_csv(reports: &[MetricReport]) -> String {
    let mut s =
        String::from("system,n,len,nov1,nov3,rep1,rep3,bleu1,rouge1,rougeL,d_len,d_nov1,d_nov3,d_rep1,d_rep3\n");
    for r in reports {
        let d = r.delta.unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{:.4},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{},{},{},{}",
            csv_field(&r.system),
            r.n,
            r.model.len,
            opt(r.model.nov1),
            opt(r.model.nov3),
            opt(r.model.rep1),
            opt(r.model.rep3),
            r.bleu1,
            r.rouge1,
            r.rouge_l,
            d.len,
            opt(d.nov1),
            opt(d.nov3),
            opt(d.rep1),
            opt(d.rep3),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocumentPair, Split};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    // a=10 b=11 ...
    const A: u32 = 10;
    const B: u32 = 11;
    const C: u32 = 12;
    const D: u32 = 13;

    #[test]
    fn novelty_examples() {
        assert_abs_diff_eq!(novelty_n(&[A, B, C], &[A], 1).unwrap(), 200.0 / 3.0, epsilon = 1e-9);
        assert_eq!(novelty_n(&[A, B], &[A, B, C], 1), Some(0.0));
        assert_eq!(novelty_n(&[A, B], &[A, B, C], 2), Some(0.0));
        assert_eq!(novelty_n(&[20, 21, 22], &[A, B], 3), Some(100.0));
        assert_eq!(novelty_n(&[A], &[A], 2), None);
    }

    #[test]
    fn repetition_examples() {
        assert_abs_diff_eq!(repetition_n(&[A, A, A], 1).unwrap(), 200.0 / 3.0, epsilon = 1e-9);
        assert_eq!(repetition_n(&[A, B], 1), Some(0.0));
        // the cat sat the cat sat the cat: 6 trigram instances, 3 types
        let s = [1, 2, 3, 1, 2, 3, 1, 2].map(|x| x + 9);
        assert_abs_diff_eq!(repetition_n(&s, 3).unwrap(), 50.0, epsilon = 1e-12);
        assert_eq!(repetition_n(&[A, B], 3), None);
    }

    #[test]
    fn delta_sign_convention() {
        assert_eq!(delta(3.0, 3.0), 0.0);
        assert_abs_diff_eq!(delta(61.04, 101.41), -40.37, epsilon = 1e-9);
        assert!(delta(10.0, 20.0) < 0.0);
    }

    #[test]
    fn bleu_examples() {
        assert_eq!(bleu1(&[A, B, C], &[A, B, C]), 1.0);
        assert_abs_diff_eq!(bleu1(&[A, A, B], &[A, B, C]), 2.0 / 3.0, epsilon = 1e-12);
        let short = bleu1(&[A], &[A, B, C, D]);
        assert!(short < 1.0);
        assert_abs_diff_eq!(short, (-3.0f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn rouge_examples() {
        let r = rouge1(&[A, B], &[A, C, D]);
        assert_abs_diff_eq!(r.recall, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.precision, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.f1, 0.4, epsilon = 1e-12);
        assert_eq!(rouge1(&[A, B], &[C, D]).f1, 0.0);
        assert_eq!(rouge1(&[A, B], &[A, B]).f1, 1.0);

        let l = rouge_l(&[A, B, C], &[A, C, D]);
        assert_abs_diff_eq!(l.recall, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.precision, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.f1, 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(lcs_len(&[A, B, C, D], &[D, C, B, A]), 1);
        assert_eq!(rouge_l(&[A, B, C], &[A, B, C]).f1, 1.0);
    }

    #[test]
    fn zipf_examples() {
        let g: Vec<u32> = vec![A, A, B];
        let r = zipf_report(&[&g], 5);
        assert_eq!(r.len(), 2);
        assert_eq!((r[0].rank, r[0].token, r[0].frequency), (1, A, 2));
        assert_eq!((r[1].rank, r[1].token, r[1].frequency), (2, B, 1));
    }

    #[test]
    fn position_histogram_examples() {
        let none: Vec<u32> = vec![A, B, C, D];
        let h = repetition_position_hist(&[&none], 3, 4);
        assert_eq!(h.count, 0);
        let rep: Vec<u32> = vec![20, 21, 22, 20, 21, 22];
        let h = repetition_position_hist(&[&rep, &none], 3, 4);
        assert_eq!(h.count, 1);
        assert_eq!(h.density, vec![0.0, 0.0, 0.0, 1.0]);
        let h = repetition_position_hist(&[&[A, A, A, A, A, B][..]], 2, 10);
        assert_abs_diff_eq!(h.density.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    fn hand_corpus() -> Corpus {
        let vocab = Arc::new(Vocabulary::from_tokens((0..20).map(|i| format!("w{i}")).collect::<Vec<_>>()));
        let pairs = vec![
            DocumentPair { id: "p1".into(), source: vec![A, B, C, D], reference: vec![A, B, C] },
            DocumentPair { id: "p2".into(), source: vec![A, B], reference: vec![A, C, D] },
            DocumentPair { id: "p3".into(), source: vec![C, D, 14], reference: vec![14, 15, 14, 15] },
        ];
        Corpus::new(Split::Test, pairs, vocab).unwrap()
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let c = hand_corpus();
        let gens: HashMap<String, Vec<u32>> = c.pairs.iter().map(|p| (p.id.clone(), p.reference.clone())).collect();
        let r = evaluate_system("human", &gens, &c, true, EvalOptions::default()).unwrap();
        let d = r.delta.unwrap();
        assert_eq!(d.len, 0.0);
        assert_eq!(d.nov1, Some(0.0));
        assert_eq!(d.rep3, Some(0.0));
        assert_abs_diff_eq!(r.bleu1, 100.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.rouge1, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn report_matches_per_metric_recomputation() {
        let c = hand_corpus();
        let mut gens = HashMap::new();
        gens.insert("p1".to_string(), vec![A, A, B]);
        gens.insert("p2".to_string(), vec![A, B]);
        gens.insert("p3".to_string(), vec![14, 15, 16, 14, 15, 16]);
        let r = evaluate_system("m", &gens, &c, true, EvalOptions::default()).unwrap();
        assert_abs_diff_eq!(r.model.len, 11.0 / 3.0, epsilon = 1e-12);
        // bleu: 2/3, (1/2)*exp(1-3/2), (4/6)
        let bleu = (2.0 / 3.0 + 0.5 * (-0.5f64).exp() + 4.0 / 6.0) / 3.0 * 100.0;
        assert_abs_diff_eq!(r.bleu1, bleu, epsilon = 1e-9);
        // rouge1 f1: p1 overlap 2 of 3/3 -> 2/3; p2 overlap 1, R=1/3 P=1/2 -> 0.4; p3 overlap 4, R=1 P=2/3 -> 0.8
        assert_abs_diff_eq!(r.rouge1, (2.0 / 3.0 + 0.4 + 0.8) / 3.0 * 100.0, epsilon = 1e-9);
        // rep1: p1 1/3, p2 0, p3 1/2
        assert_abs_diff_eq!(r.model.rep1.unwrap(), (1.0 / 3.0 + 0.0 + 0.5) / 3.0 * 100.0, epsilon = 1e-9);
        // rep3 only p1 (0) and p3 (1/4) are long enough
        assert_abs_diff_eq!(r.model.rep3.unwrap(), (0.0 + 0.25) / 2.0 * 100.0, epsilon = 1e-9);
        // nov1: p1 0, p2 0, p3 4/6
        assert_abs_diff_eq!(r.model.nov1.unwrap(), (4.0 / 6.0) / 3.0 * 100.0, epsilon = 1e-9);
        // human len 10/3
        assert_abs_diff_eq!(r.delta.unwrap().len, 10.0 / 3.0 - 11.0 / 3.0, epsilon = 1e-12);
        let again = evaluate_system("m", &gens, &c, true, EvalOptions::default()).unwrap();
        assert_eq!(reports_csv(&[r]), reports_csv(&[again]));
    }

    #[test]
    fn missing_generation_lists_ids() {
        let c = hand_corpus();
        let gens: HashMap<String, Vec<u32>> = HashMap::new();
        let err = evaluate_system("m", &gens, &c, true, EvalOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "missing generation for ids: p1, p2, p3");
    }

    fn lcs_memo(a: &[u32], b: &[u32], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + lcs_memo(a, b, i + 1, j + 1, memo)
        } else {
            lcs_memo(a, b, i + 1, j, memo).max(lcs_memo(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn lcs_matches_memoized_recursion(a in proptest::collection::vec(0u32..5, 0..20),
                                          b in proptest::collection::vec(0u32..5, 0..20)) {
            prop_assert_eq!(lcs_len(&a, &b), lcs_memo(&a, &b, 0, 0, &mut HashMap::new()));
        }

        #[test]
        fn percentages_bounded_and_rouge_symmetric(h in proptest::collection::vec(0u32..6, 1..25),
                                                   r in proptest::collection::vec(0u32..6, 1..25)) {
            for n in 1..=3 {
                if let Some(v) = novelty_n(&h, &r, n) { prop_assert!((0.0..=100.0).contains(&v)); }
                if let Some(v) = repetition_n(&h, n) { prop_assert!((0.0..=100.0).contains(&v)); }
            }
            prop_assert!((rouge1(&h, &r).precision - rouge1(&r, &h).recall).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&bleu1(&h, &r)));
        }

        #[test]
        fn invariant_under_relabeling(h in proptest::collection::vec(0u32..6, 3..25),
                                      s in proptest::collection::vec(0u32..6, 1..25)) {
            let relabel = |x: &u32| (x * 7 + 3) % 11 + 100;
            let h2: Vec<u32> = h.iter().map(relabel).collect();
            let s2: Vec<u32> = s.iter().map(relabel).collect();
            for n in 1..=3 {
                prop_assert_eq!(novelty_n(&h, &s, n), novelty_n(&h2, &s2, n));
                prop_assert_eq!(repetition_n(&h, n), repetition_n(&h2, n));
            }
        }

        #[test]
        fn zero_repetition_iff_unique(h in proptest::collection::vec(0u32..4, 3..12)) {
            let grams: Vec<_> = h.windows(3).collect();
            let unique: HashSet<_> = grams.iter().collect();
            prop_assert_eq!(repetition_n(&h, 3) == Some(0.0), unique.len() == grams.len());
        }
    }
}
