//! Sequential "human vs. generated" prefix classifier.
//!
//! Every prefix `y[..t]` of a human reference is a positive example and every
//! prefix of a generated summary a negative one. The classifier is a logistic
//! regression over [`FeatureVector`]s, trained by stochastic gradient ascent on
//!
//! `J = 1/|H| Σ_H log D(x, y) + 1/|G| Σ_G log(1 − D(x, y))`
//!
//! where each set is normalized by its own size.

mod features;

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use features::{extract_features, FeatureConfig, FeatureVector, DENSE_NAMES, N_DENSE};

use crate::corpus::{Corpus, TokenId, EOS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Human,
    Generated,
}

/// One `(x, y[..t], label)` training instance.
#[derive(Debug, Clone)]
pub struct PrefixExample {
    pub source: Arc<[TokenId]>,
    sequence: Arc<[TokenId]>,
    pub t: usize,
    pub label: Label,
}

impl PrefixExample {
    pub fn new(source: Arc<[TokenId]>, sequence: Arc<[TokenId]>, t: usize, label: Label) -> Self {
        assert!(t >= 1 && t <= sequence.len(), "prefix length out of range");
        PrefixExample { source, sequence, t, label }
    }

    pub fn prefix(&self) -> &[TokenId] {
        &self.sequence[..self.t]
    }
}

fn enumerate_prefixes(
    out: &mut Vec<PrefixExample>,
    source: &Arc<[TokenId]>,
    seq: Vec<TokenId>,
    t_max: usize,
    label: Label,
) {
    let seq: Arc<[TokenId]> = seq.into();
    for t in 1..=seq.len().min(t_max) {
        out.push(PrefixExample::new(Arc::clone(source), Arc::clone(&seq), t, label));
    }
}

/// Builds the human set `H` from the references and the generated set `G` from
/// `generations`, one example per prefix length up to `t_max`.
///
/// With `frame_eos`, EOS is appended to every sequence first so the complete
/// summaries are seen as EOS-terminated prefixes.
pub fn build_prefix_sets<S: std::hash::BuildHasher>(
    corpus: &Corpus,
    generations: &HashMap<String, Vec<TokenId>, S>,
    t_max: usize,
    frame_eos: bool,
) -> Result<(Vec<PrefixExample>, Vec<PrefixExample>)> {
    let missing: Vec<String> =
        corpus.pairs.iter().filter(|p| !generations.contains_key(&p.id)).map(|p| p.id.clone()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingGeneration(missing));
    }
    let frame = |s: &[TokenId]| {
        let mut v = s.to_vec();
        if frame_eos && v.last() != Some(&EOS) {
            v.push(EOS);
        }
        v
    };
    let mut human = Vec::new();
    let mut generated = Vec::new();
    for p in &corpus.pairs {
        let gen = &generations[&p.id];
        if gen.is_empty() {
            return Err(Error::EmptyGeneration(p.id.clone()));
        }
        let source: Arc<[TokenId]> = p.source.clone().into();
        enumerate_prefixes(&mut human, &source, frame(&p.reference), t_max, Label::Human);
        enumerate_prefixes(&mut generated, &source, frame(gen), t_max, Label::Generated);
    }
    Ok((human, generated))
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscParams {
    pub d_hash: usize,
    pub use_source: bool,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for DiscParams {
    fn default() -> Self {
        DiscParams { d_hash: 1 << 16, use_source: true, epochs: 5, learning_rate: 0.1, seed: 0 }
    }
}

impl DiscParams {
    pub fn validate(&self) -> Result<()> {
        if self.d_hash == 0 {
            return Err(Error::config("d_hash must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorModel {
    pub config: FeatureConfig,
    pub bias: f64,
    pub dense: [f64; N_DENSE],
    pub sparse: Vec<f64>,
    /// Objective after each training epoch; the last entry is the final value.
    pub objective_history: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl DiscriminatorModel {
    /// All-zero weights: scores 0.5 everywhere.
    pub fn zeros(config: FeatureConfig) -> Self {
        let d = config.d_hash;
        DiscriminatorModel {
            config,
            bias: 0.0,
            dense: [0.0; N_DENSE],
            sparse: vec![0.0; d],
            objective_history: Vec::new(),
        }
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.objective_history.last().copied()
    }

    pub fn logit_of(&self, f: &FeatureVector) -> f64 {
        let mut z = self.bias;
        for (w, x) in self.dense.iter().zip(&f.dense) {
            z += w * x;
        }
        for &(i, x) in &f.sparse {
            z += self.sparse[i as usize] * x;
        }
        z
    }

    /// `D(x, prefix)`, the probability that `prefix` is human-written.
    pub fn score(&self, source: &[TokenId], prefix: &[TokenId]) -> f64 {
        sigmoid(self.logit_of(&extract_features(source, prefix, &self.config)))
    }

    fn logit(&self, e: &PrefixExample) -> f64 {
        self.logit_of(&extract_features(&e.source, e.prefix(), &self.config))
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(s, "discriminator 1");
        let _ = writeln!(s, "d_hash {}", c.d_hash);
        let _ = writeln!(s, "use_source {}", c.use_source);
        let _ = writeln!(s, "t_max {}", c.t_max);
        let bg: Vec<String> = c.background.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "background {} {}", bg.len(), bg.join(" "));
        let lp: Vec<String> = c.length_prior.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "length_prior {} {}", lp.len(), lp.join(" "));
        let hist: Vec<String> = self.objective_history.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "objective {} {}", hist.len(), hist.join(" "));
        let _ = writeln!(s, "bias {}", self.bias);
        let dense: Vec<String> = self.dense.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "dense {}", dense.join(" "));
        for (i, w) in self.sparse.iter().enumerate() {
            if *w != 0.0 {
                let _ = writeln!(s, "{i} {w}");
            }
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
        let bad = |m: String| Error::model("discriminator", m);
        let mut lines = text.lines();
        let mut field = |key: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            let mut parts = line.split(' ');
            if parts.next() != Some(key) {
                return Err(bad(format!("expected {key}, got {line:?}")));
            }
            Ok(parts.filter(|p| !p.is_empty()).map(str::to_string).collect())
        };
        let one = |v: Vec<String>, k: &str| v.into_iter().next().ok_or_else(|| bad(format!("empty {k}")));
        let f64s = |v: &[String], k: &str| -> Result<Vec<f64>> {
            v.iter().map(|x| x.parse::<f64>().map_err(|_| bad(format!("bad number in {k}")))).collect()
        };
        if one(field("discriminator")?, "version")? != "1" {
            return Err(bad("unsupported version".into()));
        }
        let d_hash: usize = one(field("d_hash")?, "d_hash")?.parse().map_err(|_| bad("bad d_hash".into()))?;
        let use_source: bool =
            one(field("use_source")?, "use_source")?.parse().map_err(|_| bad("bad use_source".into()))?;
        let t_max: usize = one(field("t_max")?, "t_max")?.parse().map_err(|_| bad("bad t_max".into()))?;
        let counted = |v: Vec<String>, k: &str| -> Result<Vec<f64>> {
            let n: usize = v.first().and_then(|x| x.parse().ok()).ok_or_else(|| bad(format!("bad {k} count")))?;
            let vals = f64s(&v[1..], k)?;
            if vals.len() != n {
                return Err(bad(format!("{k}: expected {n} values")));
            }
            Ok(vals)
        };
        let background = counted(field("background")?, "background")?;
        let length_prior = counted(field("length_prior")?, "length_prior")?;
        let objective_history = counted(field("objective")?, "objective")?;
        let bias = f64s(&field("bias")?, "bias")?.first().copied().ok_or_else(|| bad("bad bias".into()))?;
        let dense_v = f64s(&field("dense")?, "dense")?;
        let dense: [f64; N_DENSE] = dense_v.try_into().map_err(|_| bad("wrong dense width".into()))?;
        let mut sparse = vec![0.0; d_hash];
        for line in lines {
            let (i, w) = line.split_once(' ').ok_or_else(|| bad(format!("bad sparse line {line:?}")))?;
            let i: usize = i.parse().map_err(|_| bad(format!("bad index {i:?}")))?;
            let w: f64 = w.parse().map_err(|_| bad(format!("bad weight {w:?}")))?;
            *sparse.get_mut(i).ok_or_else(|| bad(format!("index {i} out of range")))? = w;
        }
        Ok(DiscriminatorModel {
            config: FeatureConfig { d_hash, use_source, t_max, background, length_prior },
            bias,
            dense,
            sparse,
            objective_history,
        })
    }
}

/// `D(x, prefix)` under `model`.
pub fn score_prefix(model: &DiscriminatorModel, source: &[TokenId], prefix: &[TokenId]) -> f64 {
    model.score(source, prefix)
}

/// The per-set normalized log-likelihood `J`.
pub fn objective(model: &DiscriminatorModel, human: &[PrefixExample], generated: &[PrefixExample]) -> f64 {
    let side = |set: &[PrefixExample], sign: f64| -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        // log σ(z) = −softplus(−z), log(1 − σ(z)) = −softplus(z)
        let terms: Vec<f64> = set.par_iter().map(|e| -softplus(-sign * model.logit(e))).collect();
        terms.iter().sum::<f64>() / set.len() as f64
    };
    side(human, 1.0) + side(generated, -1.0)
}

/// Gradient of [`objective`] with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    pub bias: f64,
    pub dense: [f64; N_DENSE],
    pub sparse: Vec<f64>,
}

pub fn objective_gradient(
    model: &DiscriminatorModel,
    human: &[PrefixExample],
    generated: &[PrefixExample],
) -> ObjectiveGradient {
    let mut g = ObjectiveGradient { bias: 0.0, dense: [0.0; N_DENSE], sparse: vec![0.0; model.sparse.len()] };
    for (set, target) in [(human, 1.0), (generated, 0.0)] {
        if set.is_empty() {
            continue;
        }
        let w = 1.0 / set.len() as f64;
        for e in set {
            let f = extract_features(&e.source, e.prefix(), &model.config);
            let r = w * (target - sigmoid(model.logit_of(&f)));
            g.bias += r;
            for (gd, x) in g.dense.iter_mut().zip(&f.dense) {
                *gd += r * x;
            }
            for &(i, x) in &f.sparse {
                g.sparse[i as usize] += r * x;
            }
        }
    }
    g
}

/// Stochastic gradient ascent on [`objective`] with step `lr / sqrt(epoch)`.
///
/// Example order is shuffled per epoch from `params.seed`. The smaller set is
/// repeated to roughly the size of the larger one, and each slot is weighted
/// by `N / slots` of its side, so one epoch is an unbiased pass over `J`. `init` warm-starts from existing weights.
pub fn train_discriminator(
    human: &[PrefixExample],
    generated: &[PrefixExample],
    config: FeatureConfig,
    params: &DiscParams,
    init: Option<&DiscriminatorModel>,
) -> Result<DiscriminatorModel> {
    params.validate()?;
    if human.is_empty() || generated.is_empty() {
        return Err(Error::config("both prefix sets must be non-empty"));
    }
    let mut model = match init {
        Some(m) if m.config.d_hash == config.d_hash => {
            DiscriminatorModel { config, objective_history: Vec::new(), ..m.clone() }
        }
        Some(_) => return Err(Error::config("warm start model has a different d_hash")),
        None => DiscriminatorModel::zeros(config),
    };
    // The smaller set is repeated so both sides take steps of similar size.
    let (rep_h, rep_g) = match human.len().cmp(&generated.len()) {
        Ordering::Less => (generated.len().div_ceil(human.len()), 1),
        _ => (1, human.len().div_ceil(generated.len())),
    };
    let slots_h = rep_h * human.len();
    let slots_g = rep_g * generated.len();
    let n = (slots_h + slots_g) as f64;
    let w_h = n / slots_h as f64;
    let w_g = n / slots_g as f64;

    let mut order: Vec<(bool, usize)> = (0..slots_h)
        .map(|i| (true, i % human.len()))
        .chain((0..slots_g).map(|i| (false, i % generated.len())))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    for epoch in 1..=params.epochs {
        order.shuffle(&mut rng);
        let lr = params.learning_rate / (epoch as f64).sqrt();
        for &(is_human, i) in &order {
            let e = if is_human { &human[i] } else { &generated[i] };
            let f = extract_features(&e.source, e.prefix(), &model.config);
            let p = sigmoid(model.logit_of(&f));
            let step = if is_human { lr * w_h * (1.0 - p) } else { -lr * w_g * p };
            model.bias += step;
            for (w, x) in model.dense.iter_mut().zip(&f.dense) {
                *w += step * x;
            }
            for &(j, x) in &f.sparse {
                model.sparse[j as usize] += step * x;
            }
        }
        let obj = objective(&model, human, generated);
        model.objective_history.push(obj);
    }
    Ok(model)
}

fn correct(model: &DiscriminatorModel, e: &PrefixExample) -> bool {
    let human = model.logit(e) >= 0.0;
    human == (e.label == Label::Human)
}

/// Fraction of examples classified correctly at threshold 0.5.
pub fn accuracy(model: &DiscriminatorModel, human: &[PrefixExample], generated: &[PrefixExample]) -> f64 {
    let all: Vec<&PrefixExample> = human.iter().chain(generated).collect();
    if all.is_empty() {
        return f64::NAN;
    }
    let hits = all.par_iter().filter(|e| correct(model, e)).count();
    hits as f64 / all.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthAccuracy {
    pub t: usize,
    /// `None` when no example has this prefix length.
    pub accuracy: Option<f64>,
    pub n_examples: usize,
}

/// Accuracy restricted to prefixes of each length in `buckets`.
pub fn accuracy_by_length(
    model: &DiscriminatorModel,
    human: &[PrefixExample],
    generated: &[PrefixExample],
    buckets: &[usize],
) -> Vec<LengthAccuracy> {
    let mut tally: HashMap<usize, (usize, usize)> = buckets.iter().map(|&t| (t, (0, 0))).collect();
    let hits: Vec<(usize, bool)> = human
        .par_iter()
        .chain(generated.par_iter())
        .filter(|e| tally.contains_key(&e.t))
        .map(|e| (e.t, correct(model, e)))
        .collect();
    for (t, ok) in hits {
        let slot = tally.get_mut(&t).expect("bucket present");
        slot.0 += ok as usize;
        slot.1 += 1;
    }
    buckets
        .iter()
        .map(|&t| {
            let (ok, n) = tally[&t];
            LengthAccuracy { t, accuracy: (n > 0).then(|| ok as f64 / n as f64), n_examples: n }
        })
        .collect()
}

/// `t,accuracy,n_examples`; absent accuracies are left empty.
pub fn accuracy_csv(rows: &[LengthAccuracy]) -> String {
    let mut s = String::from("t,accuracy,n_examples\n");
    for r in rows {
        let acc = r.accuracy.map(|a| format!("{a:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{},{acc},{}", r.t, r.n_examples);
    }
    s
}
