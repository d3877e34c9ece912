//! Run configuration, persistence and the command implementations behind the
//! `das` binary.
//!
//! A run is driven by one TOML file. Model files default to fixed names under
//! `paths.output_dir`, so the commands chain without extra flags:
//! `synth`, `train-generator`, `train-discriminator`, `decode`, `evaluate`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{
    build_vocabulary, generate_synthetic_corpus, load_corpus, Corpus, Split, SynthProfile, Vocabulary,
};
use crate::decoder::{
    decode_corpus, generation_map, read_generations, write_generations, DecodeMode, Generation, SearchConfig,
};
use crate::discriminator::{
    accuracy_by_length, accuracy_csv, build_prefix_sets, train_discriminator, DiscParams, DiscriminatorModel,
    FeatureConfig,
};
use crate::generator::{train_generator, GeneratorParams, NGramCopyModel};
use crate::metrics::{
    evaluate_system, repetition_position_hist, reports_csv, zipf_csv, zipf_report, EvalOptions, MetricReport,
};
use crate::selftrain::{self, SelfTrainConfig, Splits, StopReason};
use crate::{Error, Result};

/// Input and output locations. Unset model paths fall back to names under `output_dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub train: Option<PathBuf>,
    pub disc_train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub generator: Option<PathBuf>,
    pub discriminator: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            train: None,
            disc_train: None,
            validation: None,
            test: None,
            vocab: None,
            generator: None,
            discriminator: None,
            output_dir: PathBuf::from("runs/default"),
        }
    }
}

/// Split sizes for the `synth` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub train: usize,
    pub disc_train: usize,
    pub validation: usize,
    pub test: usize,
    pub profile: SynthProfile,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { train: 1000, disc_train: 1000, validation: 400, test: 400, profile: SynthProfile::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub k_rerank: Vec<usize>,
    pub alpha: Vec<f64>,
    pub subset_sizes: Vec<usize>,
    pub repetitions: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_rerank: vec![1, 5, 10],
            alpha: vec![0.0, 0.5, 1.0, 5.0],
            subset_sizes: vec![100],
            repetitions: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; component seeds are derived from it with [`component_seed`].
    pub seed: u64,
    pub vocab_min_count: u64,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub generator: GeneratorParams,
    pub discriminator: DiscParams,
    pub search: SearchConfig,
    pub selftrain: SelfTrainConfig,
    pub metrics: EvalOptions,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            vocab_min_count: 1,
            paths: Paths::default(),
            synth: SynthConfig::default(),
            generator: GeneratorParams::default(),
            discriminator: DiscParams { learning_rate: 0.5, ..DiscParams::default() },
            search: SearchConfig::default(),
            selftrain: SelfTrainConfig::default(),
            metrics: EvalOptions::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Checks numeric ranges. Paths are checked by each command.
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.discriminator.validate()?;
        self.search.validate()?;
        self.selftrain.validate()?;
        self.synth.profile.validate()?;
        if self.vocab_min_count == 0 {
            return Err(Error::config("vocab_min_count must be at least 1"));
        }
        let s = &self.sweep;
        if s.k_rerank.contains(&0) {
            return Err(Error::config("sweep k_rerank values must be at least 1"));
        }
        if s.alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::config("sweep alpha values must be finite and non-negative"));
        }
        if s.subset_sizes.contains(&0) || s.repetitions == 0 {
            return Err(Error::config("sweep subsets must be non-empty"));
        }
        Ok(())
    }

    fn out(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }

    pub fn vocab_path(&self) -> PathBuf {
        self.paths.vocab.clone().unwrap_or_else(|| self.out("vocab.txt"))
    }

    pub fn generator_path(&self) -> PathBuf {
        self.paths.generator.clone().unwrap_or_else(|| self.out("generator.model"))
    }

    pub fn discriminator_path(&self) -> PathBuf {
        self.paths.discriminator.clone().unwrap_or_else(|| self.out("discriminator.model"))
    }

    fn split_path(&self, which: &Option<PathBuf>, synth_name: &str) -> PathBuf {
        which.clone().unwrap_or_else(|| self.out(synth_name))
    }

    pub fn train_path(&self) -> PathBuf {
        self.split_path(&self.paths.train, "train.jsonl")
    }

    pub fn disc_train_path(&self) -> PathBuf {
        self.split_path(&self.paths.disc_train, "disc_train.jsonl")
    }

    pub fn validation_path(&self) -> PathBuf {
        self.split_path(&self.paths.validation, "validation.jsonl")
    }

    /// The split `decode`, `evaluate` and `sweep` read: test when configured, else validation.
    pub fn eval_path(&self) -> PathBuf {
        match &self.paths.test {
            Some(p) => p.clone(),
            None => {
                let t = self.out("test.jsonl");
                if t.exists() {
                    t
                } else {
                    self.validation_path()
                }
            }
        }
    }

    /// Seed handed to the discriminator trainer.
    pub fn discriminator_params(&self) -> DiscParams {
        DiscParams { seed: component_seed(self.seed ^ self.discriminator.seed, "discriminator"), ..self.discriminator }
    }
}

fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `splitmix64(master ^ fnv1a64(name))`.
pub fn component_seed(master: u64, name: &str) -> u64 {
    splitmix64(master ^ fnv1a64(name))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// What a command read and wrote, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: String,
    pub master_seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub notes: BTreeMap<String, String>,
    pub wall_time_secs: f64,
}

struct Recorder<'a> {
    cfg: &'a RunConfig,
    command: &'static str,
    start: Instant,
    seeds: BTreeMap<String, u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    notes: BTreeMap<String, String>,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &'a RunConfig, command: &'static str) -> Result<Self> {
        cfg.validate()?;
        let dir = &cfg.paths.output_dir;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Recorder {
            cfg,
            command,
            start: Instant::now(),
            seeds: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            notes: BTreeMap::new(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<PathBuf> {
        if !path.is_file() {
            return Err(Error::config(format!("input file {} does not exist", path.display())));
        }
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(path.to_path_buf())
    }

    fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        fs::write(path, contents).map_err(|e| Error::io(path, e))?;
        self.output(path)
    }

    fn finish(self) -> Result<Manifest> {
        let m = Manifest {
            command: self.command.to_string(),
            config: self.cfg.to_toml(),
            master_seed: self.cfg.seed,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs: self.outputs,
            notes: self.notes,
            wall_time_secs: self.start.elapsed().as_secs_f64(),
        };
        let path = self.cfg.out(&format!("{}.manifest.json", self.command));
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(m)
    }
}

fn load_vocab(rec: &mut Recorder<'_>) -> Result<Arc<Vocabulary>> {
    let p = rec.input(&rec.cfg.vocab_path())?;
    Ok(Arc::new(Vocabulary::load(&p)?))
}

fn load_split(rec: &mut Recorder<'_>, path: &Path, vocab: &Arc<Vocabulary>, split: Split) -> Result<Corpus> {
    let p = rec.input(path)?;
    Ok(load_corpus(&p, Some(Arc::clone(vocab)))?.with_split(split))
}

fn load_generator(rec: &mut Recorder<'_>, vocab: &Vocabulary) -> Result<NGramCopyModel> {
    let p = rec.input(&rec.cfg.generator_path())?;
    let g = NGramCopyModel::load(&p)?;
    if g.vocab_hash() != vocab.hash() {
        return Err(Error::config("generator was trained with a different vocabulary"));
    }
    Ok(g)
}

fn load_discriminator(rec: &mut Recorder<'_>) -> Result<DiscriminatorModel> {
    let p = rec.input(&rec.cfg.discriminator_path())?;
    DiscriminatorModel::load(&p)
}

/// Writes `train`, `disc_train`, `validation` and `test` splits of a synthetic corpus.
pub fn cmd_synth(cfg: &RunConfig) -> Result<Manifest> {
    let mut rec = Recorder::new(cfg, "synth")?;
    let s = &cfg.synth;
    let seed = component_seed(cfg.seed, "synth");
    rec.seeds.insert("synth".into(), seed);
    let total = s.train + s.disc_train + s.validation + s.test;
    let all = generate_synthetic_corpus(seed, total, &s.profile)?;
    let mut at = 0;
    for (name, n) in [("train", s.train), ("disc_train", s.disc_train), ("validation", s.validation), ("test", s.test)]
    {
        if n == 0 {
            continue;
        }
        let path = cfg.out(&format!("{name}.jsonl"));
        all.slice(at..at + n, Split::Train).write_jsonl(&path)?;
        rec.output(&path)?;
        at += n;
    }
    rec.finish()
}

/// Builds the vocabulary from the training split and fits the generator on it.
pub fn cmd_train_generator(cfg: &RunConfig) -> Result<Manifest> {
    let mut rec = Recorder::new(cfg, "train-generator")?;
    let path = rec.input(&cfg.train_path())?;
    let raw = load_corpus(&path, None)?;
    let vocab = Arc::new(build_vocabulary(&raw, cfg.vocab_min_count)?);
    let train = raw.reencode(Arc::clone(&vocab));
    let model = train_generator(&train, cfg.generator)?;

    let vp = cfg.vocab_path();
    vocab.save(&vp)?;
    rec.output(&vp)?;
    let gp = cfg.generator_path();
    model.save(&gp)?;
    rec.output(&gp)?;
    rec.finish()
}

/// Prefix lengths reported in the accuracy-by-length CSV.
pub fn length_buckets(t_max: usize) -> Vec<usize> {
    let mut b: Vec<usize> = [1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30, 40, 60, 80, 100, 120, 140]
        .into_iter()
        .filter(|&t| t < t_max)
        .collect();
    b.push(t_max);
    b
}

/// Trains a discriminator against plain beam outputs on `disc_train` and
/// reports its accuracy by prefix length on validation.
pub fn cmd_train_discriminator(cfg: &RunConfig) -> Result<Manifest> {
    let mut rec = Recorder::new(cfg, "train-discriminator")?;
    let vocab = load_vocab(&mut rec)?;
    let gen = load_generator(&mut rec, &vocab)?;
    let train = load_split(&mut rec, &cfg.disc_train_path(), &vocab, Split::Train)?;
    let val = load_split(&mut rec, &cfg.validation_path(), &vocab, Split::Validation)?;
    let params = cfg.discriminator_params();
    rec.seeds.insert("discriminator".into(), params.seed);

    let t_max = cfg.search.t_max;
    let gens = decode_corpus(&train, &gen, None, &cfg.search, DecodeMode::Plain)?;
    let (h, g) = build_prefix_sets(&train, &generation_map(&gens), t_max, true)?;
    let features = FeatureConfig::new(params.d_hash, params.use_source, t_max).with_background(&train);
    let model = train_discriminator(&h, &g, features, &params, None)?;

    let val_gens = decode_corpus(&val, &gen, None, &cfg.search, DecodeMode::Plain)?;
    let (vh, vg) = build_prefix_sets(&val, &generation_map(&val_gens), t_max, true)?;
    let rows = accuracy_by_length(&model, &vh, &vg, &length_buckets(t_max));

    let dp = cfg.discriminator_path();
    model.save(&dp)?;
    rec.output(&dp)?;
    rec.write(&cfg.out("accuracy_by_length.csv"), &accuracy_csv(&rows))?;
    rec.finish()
}

pub fn generations_path(cfg: &RunConfig, mode: DecodeMode) -> PathBuf {
    cfg.out(match mode {
        DecodeMode::Plain => "generations_plain.jsonl",
        DecodeMode::Das => "generations_das.jsonl",
    })
}

/// Decodes the evaluation split.
pub fn cmd_decode(cfg: &RunConfig, mode: DecodeMode) -> Result<Manifest> {
    let mut rec = Recorder::new(
        cfg,
        match mode {
            DecodeMode::Plain => "decode-plain",
            DecodeMode::Das => "decode-das",
        },
    )?;
    let vocab = load_vocab(&mut rec)?;
    let gen = load_generator(&mut rec, &vocab)?;
    let corpus = load_split(&mut rec, &cfg.eval_path(), &vocab, Split::Test)?;
    let disc = match mode {
        DecodeMode::Das => Some(load_discriminator(&mut rec)?),
        DecodeMode::Plain => None,
    };
    let gens =
        decode_corpus(&corpus, &gen, disc.as_ref().map(|d| d as &dyn crate::decoder::PrefixScorer), &cfg.search, mode)?;
    let out = generations_path(cfg, mode);
    write_generations(&out, &gens)?;
    rec.output(&out)?;
    rec.finish()
}

/// Runs the self-retraining loop into `output_dir/selftrain`.
pub fn cmd_self_train(cfg: &RunConfig) -> Result<Manifest> {
    let mut rec = Recorder::new(cfg, "self-train")?;
    let vocab = load_vocab(&mut rec)?;
    let gen_path = cfg.generator_path();
    let gen = load_generator(&mut rec, &vocab)?;
    let gen_hash = sha256_file(&gen_path)?;
    let train = load_split(&mut rec, &cfg.disc_train_path(), &vocab, Split::Train)?;
    let val = load_split(&mut rec, &cfg.validation_path(), &vocab, Split::Validation)?;
    let params = cfg.discriminator_params();
    rec.seeds.insert("discriminator".into(), params.seed);

    let run_dir = cfg.out("selftrain");
    let splits = Splits { train: &train, validation: &val };
    let state = selftrain::bootstrap(splits, &gen, &cfg.search, &params)?;
    selftrain::write_iteration(&run_dir, &state)?;
    let state = selftrain::run_until_convergence(state, &gen, splits, &cfg.search, &params, &cfg.selftrain, |s| {
        selftrain::write_iteration(&run_dir, s).map(|_| ())
    })?;
    let last = run_dir.join(format!("iter_{}", state.iteration));
    for name in ["generations.jsonl", "validation_generations.jsonl", "discriminator.model", "history.csv"] {
        rec.output(&last.join(name))?;
    }
    let reason = match state.stop {
        Some(StopReason::AccuracyFloor) => "accuracy_floor",
        Some(StopReason::DeltaPlateau) => "delta_plateau",
        Some(StopReason::MaxIters) | None => "max_iters",
    };
    rec.notes.insert("stop_reason".into(), reason.into());
    rec.notes.insert("iterations".into(), state.iteration.to_string());
    rec.notes.insert("generator_hash_before".into(), gen_hash);
    rec.notes.insert("generator_hash_after".into(), sha256_file(&gen_path)?);
    rec.finish()
}

/// A named generations file for `evaluate`; the name defaults to the file stem.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub name: String,
    pub path: PathBuf,
}

impl std::str::FromStr for SystemSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, path) = match s.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(s);
                let n = p.file_stem().and_then(|x| x.to_str()).ok_or("system path has no file name")?;
                (n.to_string(), p)
            }
        };
        if name.is_empty() {
            return Err("empty system name".into());
        }
        Ok(SystemSpec { name, path })
    }
}

/// Scores each system against the evaluation split. Writes `report.csv`,
/// `report.json`, and per-system `zipf_<name>.csv` and `positions_<name>.csv`.
pub fn cmd_evaluate(cfg: &RunConfig, systems: &[SystemSpec]) -> Result<(Manifest, Vec<MetricReport>)> {
    if systems.is_empty() {
        return Err(Error::config("evaluate needs at least one system"));
    }
    let mut rec = Recorder::new(cfg, "evaluate")?;
    let vocab = load_vocab(&mut rec)?;
    let corpus = load_split(&mut rec, &cfg.eval_path(), &vocab, Split::Test)?;
    let human: Vec<&[u32]> = corpus.pairs.iter().map(|p| p.reference.as_slice()).collect();
    let human_zipf = zipf_report(&human, 100);
    let mut reports = Vec::new();
    for sys in systems {
        let path = rec.input(&sys.path)?;
        let mut gens: Vec<Generation> = read_generations(&path)?;
        crate::decoder::reencode_generations(&mut gens, &vocab);
        let map = generation_map(&gens);
        reports.push(evaluate_system(&sys.name, &map, &corpus, true, cfg.metrics)?);

        let ordered: Vec<&[u32]> = corpus.pairs.iter().map(|p| map[&p.id].as_slice()).collect();
        rec.write(
            &cfg.out(&format!("zipf_{}.csv", sys.name)),
            &zipf_csv(&zipf_report(&ordered, 100), &human_zipf, &vocab),
        )?;
        rec.write(
            &cfg.out(&format!("positions_{}.csv", sys.name)),
            &repetition_position_hist(&ordered, 3, 10).to_csv(),
        )?;
    }
    rec.write(&cfg.out("report.csv"), &reports_csv(&reports))?;
    rec.write(&cfg.out("report.json"), &serde_json::to_string_pretty(&reports).expect("report serializes"))?;
    Ok((rec.finish()?, reports))
}

/// One decode of one subset at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k_rerank: usize,
    pub alpha: f64,
    pub beam_size: usize,
    pub subset_size: usize,
    pub repetition: usize,
    pub report: MetricReport,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    use std::fmt::Write as _;
    let mut s = String::from(
        "k_rerank,alpha,beam_size,subset_size,repetition,len,nov1,rep3,delta_len,delta_nov1,delta_rep3,bleu1,rouge1,rouge_l\n",
    );
    for r in rows {
        let m = &r.report;
        let d = m.delta.unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:.6},{},{},{:.6},{},{},{:.6},{:.6},{:.6}",
            r.k_rerank,
            r.alpha,
            r.beam_size,
            r.subset_size,
            r.repetition,
            m.model.len,
            opt(m.model.nov1),
            opt(m.model.rep3),
            d.len,
            opt(d.nov1),
            opt(d.rep3),
            m.bleu1,
            m.rouge1,
            m.rouge_l
        );
    }
    s
}

/// Decodes random subsets of the evaluation split over the `K_rerank × α`
/// grid with the configured discriminator. Beam size is clamped to `K_rerank`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<(Manifest, Vec<SweepRow>)> {
    let mut rec = Recorder::new(cfg, "sweep")?;
    let vocab = load_vocab(&mut rec)?;
    let gen = load_generator(&mut rec, &vocab)?;
    let corpus = load_split(&mut rec, &cfg.eval_path(), &vocab, Split::Test)?;
    let disc = load_discriminator(&mut rec)?;
    let seed = component_seed(cfg.seed, "sweep");
    rec.seeds.insert("sweep".into(), seed);

    let sw = &cfg.sweep;
    let mut rows = Vec::new();
    for &size in &sw.subset_sizes {
        if size > corpus.len() {
            return Err(Error::config(format!("subset size {size} exceeds the {} available pairs", corpus.len())));
        }
        for rep in 0..sw.repetitions {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((size as u64) << 32) ^ rep as u64);
            let mut idx = sample(&mut rng, corpus.len(), size).into_vec();
            idx.sort_unstable();
            let pairs = idx.iter().map(|&i| corpus.pairs[i].clone()).collect();
            let subset = Corpus::new(Split::Test, pairs, Arc::clone(corpus.vocab()))?;
            for &k in &sw.k_rerank {
                for &alpha in &sw.alpha {
                    let search =
                        SearchConfig { beam_size: cfg.search.beam_size.min(k), k_rerank: k, alpha, ..cfg.search };
                    let gens = decode_corpus(&subset, &gen, Some(&disc), &search, DecodeMode::Das)?;
                    let report =
                        evaluate_system(&format!("k{k}_a{alpha}"), &generation_map(&gens), &subset, true, cfg.metrics)?;
                    rows.push(SweepRow {
                        k_rerank: k,
                        alpha,
                        beam_size: search.beam_size,
                        subset_size: size,
                        repetition: rep,
                        report,
                    });
                }
            }
        }
    }
    rec.write(&cfg.out("sweep.csv"), &sweep_csv(&rows))?;
    Ok((rec.finish()?, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let mut c = RunConfig { seed: 17, ..Default::default() };
        c.paths.test = Some("data/test.jsonl".into());
        c.search.rules.length_penalty = Some(1.5);
        c.selftrain.tau_delta = Some(0.3);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::from_toml(&back.to_toml()).unwrap(), back);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = RunConfig::from_toml("seed = 3\n[search]\nalpha = 0.5\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.search.alpha, 0.5);
        assert_eq!(c.search.k_rerank, SearchConfig::default().k_rerank);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = RunConfig::from_toml("[search]\nbeam = 2\n").unwrap_err();
        assert!(e.is_validation());
    }

    #[test]
    fn component_seeds_differ_and_are_stable() {
        let a = component_seed(1, "discriminator");
        assert_eq!(a, component_seed(1, "discriminator"));
        assert_ne!(a, component_seed(1, "sweep"));
        assert_ne!(a, component_seed(2, "discriminator"));
    }

    #[test]
    fn system_spec_parsing() {
        let s: SystemSpec = "das=out/g.jsonl".parse().unwrap();
        assert_eq!(s.name, "das");
        let s: SystemSpec = "out/generations_plain.jsonl".parse().unwrap();
        assert_eq!(s.name, "generations_plain");
        assert!("=x".parse::<SystemSpec>().is_err());
    }

    #[test]
    fn length_buckets_end_at_t_max() {
        assert_eq!(length_buckets(5), vec![1, 2, 3, 4, 5]);
        assert_eq!(*length_buckets(140).last().unwrap(), 140);
    }

    #[test]
    fn bad_sweep_grid_rejected() {
        let mut c = RunConfig::default();
        c.sweep.k_rerank = vec![0];
        assert!(c.validate().unwrap_err().is_validation());
    }
}
