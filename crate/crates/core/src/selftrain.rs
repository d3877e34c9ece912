//! Discriminator self-retraining.
//!
//! Each step decodes the training split with DAS under the current
//! discriminator, rebuilds the generated prefix set from those outputs and
//! trains the next discriminator. The generator is only ever read.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TokenId};
use crate::decoder::{decode_corpus, generation_map, write_generations, DecodeMode, Generation, SearchConfig};
use crate::discriminator::{
    accuracy, build_prefix_sets, train_discriminator, DiscParams, DiscriminatorModel, FeatureConfig, PrefixExample,
};
use crate::generator::GeneratorModel;
use crate::metrics::{evaluate_system, EvalOptions, MetricReport};
use crate::{Error, Result};

/// Loop settings. `tau_delta` defaults to `0.01 * t_max` when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfTrainConfig {
    pub max_iters: usize,
    pub tau_acc: f64,
    pub tau_delta: Option<f64>,
    /// Start each retrain from the previous weights instead of zeros.
    pub warm_start: bool,
    /// Keep generated prefixes from all earlier iterations in `G`.
    pub replay: bool,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig { max_iters: 3, tau_acc: 0.55, tau_delta: None, warm_start: false, replay: false }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.tau_acc) {
            return Err(Error::config("tau_acc must lie in [0,1]"));
        }
        if self.tau_delta.is_some_and(|d| !d.is_finite()) {
            return Err(Error::config("tau_delta must be finite"));
        }
        Ok(())
    }

    pub fn tau_delta_for(&self, t_max: usize) -> f64 {
        self.tau_delta.unwrap_or(0.01 * t_max as f64)
    }
}

/// The corpora the loop reads: `train` supplies `H` and the decoded `G`,
/// `validation` the held-out accuracy and metric deltas.
#[derive(Debug, Clone, Copy)]
pub struct Splits<'a> {
    pub train: &'a Corpus,
    pub validation: &'a Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Accuracy of this iteration's discriminator on validation references
    /// against validation outputs of the decoder that produced its `G`.
    pub val_accuracy: f64,
    pub report: MetricReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    AccuracyFloor,
    DeltaPlateau,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct SelfTrainState {
    pub iteration: usize,
    pub discriminator: DiscriminatorModel,
    /// Training split outputs that formed the latest `G`.
    pub last_generations: Vec<Generation>,
    pub validation_generations: Vec<Generation>,
    pub history: Vec<IterationRecord>,
    pub stop: Option<StopReason>,
    replay_pool: Vec<PrefixExample>,
}

impl SelfTrainState {
    pub fn generation_map(&self) -> HashMap<String, Vec<TokenId>> {
        generation_map(&self.last_generations)
    }
}

struct Trained {
    model: DiscriminatorModel,
    generated: Vec<PrefixExample>,
    record: IterationRecord,
}

#[allow(clippy::too_many_arguments)]
fn train_on(
    iteration: usize,
    splits: Splits<'_>,
    train_gens: &[Generation],
    val_gens: &[Generation],
    search: &SearchConfig,
    disc: &DiscParams,
    init: Option<&DiscriminatorModel>,
    replay: &[PrefixExample],
) -> Result<Trained> {
    let t_max = search.t_max;
    let (human, mut generated) = build_prefix_sets(splits.train, &generation_map(train_gens), t_max, true)?;
    let fresh = generated.clone();
    generated.extend_from_slice(replay);
    let features = FeatureConfig::new(disc.d_hash, disc.use_source, t_max).with_background(splits.train);
    let model = train_discriminator(&human, &generated, features, disc, init)?;

    let val_map = generation_map(val_gens);
    let (vh, vg) = build_prefix_sets(splits.validation, &val_map, t_max, true)?;
    let record = IterationRecord {
        iteration,
        val_accuracy: accuracy(&model, &vh, &vg),
        report: evaluate_system(
            &format!("iter_{iteration}"),
            &val_map,
            splits.validation,
            true,
            EvalOptions::default(),
        )?,
    };
    Ok(Trained { model, generated: fresh, record })
}

/// Trains the first discriminator against plain beam search outputs.
pub fn bootstrap(
    splits: Splits<'_>,
    generator: &dyn GeneratorModel,
    search: &SearchConfig,
    disc: &DiscParams,
) -> Result<SelfTrainState> {
    let train_gens = decode_corpus(splits.train, generator, None, search, DecodeMode::Plain)?;
    let val_gens = decode_corpus(splits.validation, generator, None, search, DecodeMode::Plain)?;
    let t = train_on(0, splits, &train_gens, &val_gens, search, disc, None, &[])?;
    Ok(SelfTrainState {
        iteration: 0,
        discriminator: t.model,
        last_generations: train_gens,
        validation_generations: val_gens,
        history: vec![t.record],
        stop: None,
        replay_pool: t.generated,
    })
}

/// Decodes with the current discriminator and trains its successor.
pub fn self_train_step(
    state: SelfTrainState,
    generator: &dyn GeneratorModel,
    splits: Splits<'_>,
    search: &SearchConfig,
    disc: &DiscParams,
    cfg: &SelfTrainConfig,
) -> Result<SelfTrainState> {
    let d = Some(&state.discriminator as &dyn crate::decoder::PrefixScorer);
    let train_gens = decode_corpus(splits.train, generator, d, search, DecodeMode::Das)?;
    let val_gens = decode_corpus(splits.validation, generator, d, search, DecodeMode::Das)?;
    let iteration = state.iteration + 1;
    let init = cfg.warm_start.then_some(&state.discriminator);
    let replay: &[PrefixExample] = if cfg.replay { &state.replay_pool } else { &[] };
    let t = train_on(iteration, splits, &train_gens, &val_gens, search, disc, init, replay)?;

    let mut history = state.history;
    history.push(t.record);
    let mut replay_pool = state.replay_pool;
    if cfg.replay {
        replay_pool.extend(t.generated);
    }
    Ok(SelfTrainState {
        iteration,
        discriminator: t.model,
        last_generations: train_gens,
        validation_generations: val_gens,
        history,
        stop: None,
        replay_pool,
    })
}

/// The stop test applied after each step, if any fires.
pub fn stop_reason(
    history: &[IterationRecord],
    steps_taken: usize,
    cfg: &SelfTrainConfig,
    t_max: usize,
) -> Option<StopReason> {
    let last = history.last()?;
    if last.val_accuracy < cfg.tau_acc {
        return Some(StopReason::AccuracyFloor);
    }
    if let [.., prev, cur] = history {
        let gap = |r: &IterationRecord| r.report.delta.map(|d| d.summed_abs()).unwrap_or(0.0);
        if gap(prev) - gap(cur) < cfg.tau_delta_for(t_max) {
            return Some(StopReason::DeltaPlateau);
        }
    }
    (steps_taken >= cfg.max_iters).then_some(StopReason::MaxIters)
}

/// Steps until a stop test fires, calling `on_step` after each step.
pub fn run_until_convergence(
    mut state: SelfTrainState,
    generator: &dyn GeneratorModel,
    splits: Splits<'_>,
    search: &SearchConfig,
    disc: &DiscParams,
    cfg: &SelfTrainConfig,
    mut on_step: impl FnMut(&SelfTrainState) -> Result<()>,
) -> Result<SelfTrainState> {
    cfg.validate()?;
    let mut steps = 0;
    loop {
        state = self_train_step(state, generator, splits, search, disc, cfg)?;
        steps += 1;
        state.stop = stop_reason(&state.history, steps, cfg, search.t_max);
        on_step(&state)?;
        if state.stop.is_some() {
            return Ok(state);
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut s = String::from(
        "iteration,val_accuracy,delta_len,delta_nov1,delta_nov3,delta_rep1,delta_rep3,bleu1,rouge1,rouge_l\n",
    );
    for r in history {
        let d = r.report.delta.unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{},{},{},{},{:.6},{:.6},{:.6}",
            r.iteration,
            r.val_accuracy,
            d.len,
            opt(d.nov1),
            opt(d.nov3),
            opt(d.rep1),
            opt(d.rep3),
            r.report.bleu1,
            r.report.rouge1,
            r.report.rouge_l
        );
    }
    s
}

/// Writes `iter_k/` with the training outputs, validation outputs,
/// discriminator and the history so far. Returns the directory.
pub fn write_iteration(run_dir: &Path, state: &SelfTrainState) -> Result<PathBuf> {
    let dir = run_dir.join(format!("iter_{}", state.iteration));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_generations(&dir.join("generations.jsonl"), &state.last_generations)?;
    write_generations(&dir.join("validation_generations.jsonl"), &state.validation_generations)?;
    state.discriminator.save(&dir.join("discriminator.model"))?;
    let hist = dir.join("history.csv");
    fs::write(&hist, history_csv(&state.history)).map_err(|e| Error::io(&hist, e))?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_corpus, Split, SynthProfile};
    use crate::generator::{train_generator, GeneratorParams};

    struct Fixture {
        train: Corpus,
        val: Corpus,
        gen: crate::generator::NGramCopyModel,
    }

    fn fixture() -> Fixture {
        let all = generate_synthetic_corpus(4, 260, &SynthProfile::default()).unwrap();
        let gen = train_generator(&all.slice(0..200, Split::Train), GeneratorParams::default()).unwrap();
        Fixture { train: all.slice(200..240, Split::Train), val: all.slice(240..260, Split::Validation), gen }
    }

    fn search(alpha: f64) -> SearchConfig {
        SearchConfig { beam_size: 2, k_rerank: 4, alpha, t_max: 24, ..Default::default() }
    }

    fn disc() -> DiscParams {
        DiscParams { d_hash: 1 << 10, epochs: 2, learning_rate: 0.5, ..Default::default() }
    }

    #[test]
    fn bootstrap_then_step_grows_history() {
        let f = fixture();
        let splits = Splits { train: &f.train, validation: &f.val };
        let s0 = bootstrap(splits, &f.gen, &search(1.0), &disc()).unwrap();
        assert_eq!(s0.iteration, 0);
        assert_eq!(s0.history.len(), 1);
        let plain = decode_corpus(&f.train, &f.gen, None, &search(1.0), DecodeMode::Plain).unwrap();
        assert_eq!(plain, s0.last_generations);

        let s1 = self_train_step(s0, &f.gen, splits, &search(1.0), &disc(), &SelfTrainConfig::default()).unwrap();
        assert_eq!(s1.iteration, 1);
        assert_eq!(s1.history.len(), 2);
        assert_eq!(s1.history[1].iteration, 1);
    }

    #[test]
    fn alpha_zero_step_reproduces_bootstrap_outputs() {
        let f = fixture();
        let splits = Splits { train: &f.train, validation: &f.val };
        let s0 = bootstrap(splits, &f.gen, &search(0.0), &disc()).unwrap();
        let before = s0.last_generations.clone();
        let s1 = self_train_step(s0, &f.gen, splits, &search(0.0), &disc(), &SelfTrainConfig::default()).unwrap();
        let strip = |g: &[Generation]| g.iter().map(|x| x.tokens.clone()).collect::<Vec<_>>();
        assert_eq!(strip(&before), strip(&s1.last_generations));
    }

    #[test]
    fn max_iters_and_degenerate_threshold() {
        let f = fixture();
        let splits = Splits { train: &f.train, validation: &f.val };
        let s0 = bootstrap(splits, &f.gen, &search(1.0), &disc()).unwrap();
        let one = SelfTrainConfig { max_iters: 1, tau_delta: Some(-1e9), ..Default::default() };
        let s = run_until_convergence(s0.clone(), &f.gen, splits, &search(1.0), &disc(), &one, |_| Ok(())).unwrap();
        assert_eq!(s.iteration, 1);
        assert_eq!(s.stop, Some(StopReason::MaxIters));

        let strict = SelfTrainConfig { max_iters: 5, tau_acc: 1.0, ..Default::default() };
        let mut calls = 0;
        let s = run_until_convergence(s0, &f.gen, splits, &search(1.0), &disc(), &strict, |_| {
            calls += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(s.iteration, 1);
        assert_eq!(calls, 1);
        assert_eq!(s.stop, Some(StopReason::AccuracyFloor));
    }

    #[test]
    fn zero_max_iters_rejected() {
        let cfg = SelfTrainConfig { max_iters: 0, ..Default::default() };
        assert!(cfg.validate().unwrap_err().is_validation());
    }

    #[test]
    fn history_csv_has_one_row_per_iteration() {
        let f = fixture();
        let splits = Splits { train: &f.train, validation: &f.val };
        let s0 = bootstrap(splits, &f.gen, &search(1.0), &disc()).unwrap();
        let csv = history_csv(&s0.history);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("0,"));
        assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
    }
}
