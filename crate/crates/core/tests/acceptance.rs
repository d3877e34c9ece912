//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line. Failures only change the exit
//! status when `ACCEPTANCE_STRICT` is set.

use std::collections::HashMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use das::corpus::{generate_synthetic_corpus, Corpus, Split, SynthProfile, TokenId};
use das::decoder::{
    das_beam_search, decode_corpus, exhaustive_oracle, generation_map, plain_beam_search, DecodeMode, Generation,
    Rules, SearchConfig,
};
use das::discriminator::{
    accuracy_by_length, build_prefix_sets, objective, objective_gradient, train_discriminator, DiscParams,
    DiscriminatorModel, FeatureConfig, LengthAccuracy, N_DENSE,
};
use das::generator::{train_generator, GeneratorModel, GeneratorParams, NGramCopyModel};
use das::metrics::{bleu1, evaluate_system, novelty_n, repetition_n, rouge_l, EvalOptions, MetricReport};
use das::run::{self, RunConfig};
use das::selftrain::{self, SelfTrainConfig, Splits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn small_disc(train: &Corpus, gen: &NGramCopyModel, search: &SearchConfig) -> DiscriminatorModel {
    let gens = decode_corpus(train, gen, None, search, DecodeMode::Plain).unwrap();
    let (h, g) = build_prefix_sets(train, &generation_map(&gens), search.t_max, true).unwrap();
    let cfg = FeatureConfig::new(1 << 12, true, search.t_max).with_background(train);
    let params = DiscParams { d_hash: 1 << 12, epochs: 1, learning_rate: 0.5, ..Default::default() };
    train_discriminator(&h, &g, cfg, &params, None).unwrap()
}

/// Generator, discriminator and 200 held-out sources for one corpus seed.
fn seeded_setup(seed: u64) -> (NGramCopyModel, DiscriminatorModel, Corpus) {
    let all = generate_synthetic_corpus(seed, 700, &SynthProfile::default()).unwrap();
    let gen = train_generator(&all.slice(0..400, Split::Train), GeneratorParams::default()).unwrap();
    let search = SearchConfig { t_max: 60, ..Default::default() };
    let disc = small_disc(&all.slice(400..500, Split::Train), &gen, &search);
    (gen, disc, all.slice(500..700, Split::Test))
}

fn alpha_zero_equivalence() -> Outcome {
    let mut compared = 0;
    for seed in 0..5 {
        let (gen, disc, sources) = seeded_setup(seed);
        let das_cfg = SearchConfig { alpha: 0.0, ..Default::default() };
        for p in &sources.pairs {
            let a = das_beam_search(&gen, Some(&disc), &p.source, &das_cfg).unwrap();
            let b = plain_beam_search(&gen, &p.source, &das_cfg).unwrap();
            if a.best().tokens != b.best().tokens {
                return Err(format!("seed {seed} id {} differs", p.id));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} sources identical"))
}

fn k_rerank_one_equivalence() -> Outcome {
    let mut compared = 0;
    for seed in 0..5 {
        let (gen, disc, sources) = seeded_setup(seed);
        let greedy = SearchConfig { beam_size: 1, k_rerank: 1, alpha: 0.0, ..Default::default() };
        for p in &sources.pairs {
            let base = plain_beam_search(&gen, &p.source, &greedy).unwrap();
            for alpha in [0.5, 1.0, 5.0] {
                let cfg = SearchConfig { alpha, ..greedy };
                let out = das_beam_search(&gen, Some(&disc), &p.source, &cfg).unwrap();
                if out.best().tokens != base.best().tokens {
                    return Err(format!("seed {seed} id {} alpha {alpha} differs", p.id));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} decodes identical to greedy"))
}

/// Four-symbol generator `{SOS, EOS, a, b}` with fixed random distributions.
struct TinyGenerator(u64);

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl GeneratorModel for TinyGenerator {
    fn vocab_size(&self) -> usize {
        4
    }

    fn next_logprobs(&self, source: &[TokenId], prefix: &[TokenId]) -> das::Result<Vec<f64>> {
        let mut h = self.0;
        for &t in source.iter().chain(prefix) {
            h = mix(h ^ t as u64);
        }
        let mut w = [0.0, 0.0, 0.0, 0.0];
        for (i, x) in w.iter_mut().enumerate().skip(1) {
            *x = 0.05 + (mix(h ^ (i as u64) << 40) >> 11) as f64 / (1u64 << 53) as f64;
        }
        let z: f64 = w.iter().sum();
        Ok(w.iter().map(|x| (x / z).ln()).collect())
    }
}

fn random_discriminator(rng: &mut ChaCha8Rng, d_hash: usize, t_max: usize) -> DiscriminatorModel {
    let mut m = DiscriminatorModel::zeros(FeatureConfig::new(d_hash, true, t_max));
    m.bias = rng.gen_range(-1.0..1.0);
    m.dense.iter_mut().for_each(|w| *w = rng.gen_range(-2.0..2.0));
    m.sparse.iter_mut().for_each(|w| *w = rng.gen_range(-2.0..2.0));
    m
}

fn oracle_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t_max = 4;
    for i in 0..50u64 {
        let gen = TinyGenerator(i);
        let disc = random_discriminator(&mut rng, 64, t_max);
        let source: Vec<TokenId> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(2..4)).collect();
        let cfg = SearchConfig { beam_size: 64, k_rerank: 64, alpha: 1.0, t_max, ..Default::default() };
        let out = das_beam_search(&gen, Some(&disc), &source, &cfg).unwrap();
        let (best, s) = exhaustive_oracle(&gen, Some(&disc), &source, 1.0, t_max, &[2, 3]).unwrap();
        if out.best().content() != best.as_slice() {
            return Err(format!("instance {i}: beam {:?} vs oracle {best:?}", out.best().content()));
        }
        if (out.best().s_das.unwrap() - s).abs() > 1e-9 {
            return Err(format!("instance {i}: score mismatch"));
        }
    }
    Ok("50 instances match the oracle".into())
}

fn gradient_check() -> Outcome {
    let all = generate_synthetic_corpus(9, 80, &SynthProfile::default()).unwrap();
    let gen = train_generator(&all.slice(0..60, Split::Train), GeneratorParams::default()).unwrap();
    let train = all.slice(60..80, Split::Train);
    let search = SearchConfig { t_max: 20, ..Default::default() };
    let gens = decode_corpus(&train, &gen, None, &search, DecodeMode::Plain).unwrap();
    let (h, g) = build_prefix_sets(&train, &generation_map(&gens), 20, true).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut m = random_discriminator(&mut rng, 48, 20);
        m.config = FeatureConfig::new(48, true, 20).with_background(&train);
        let grad = objective_gradient(&m, &h, &g);
        let eps = 1e-5;
        let numeric = |set: &dyn Fn(&mut DiscriminatorModel, f64)| {
            let mut plus = m.clone();
            set(&mut plus, eps);
            let mut minus = m.clone();
            set(&mut minus, -eps);
            (objective(&plus, &h, &g) - objective(&minus, &h, &g)) / (2.0 * eps)
        };
        let mut analytic = vec![grad.bias];
        let mut num = vec![numeric(&|m, d| m.bias += d)];
        for k in 0..N_DENSE {
            analytic.push(grad.dense[k]);
            num.push(numeric(&|m, d| m.dense[k] += d));
        }
        for k in 0..48 {
            analytic.push(grad.sparse[k]);
            num.push(numeric(&|m, d| m.sparse[k] += d));
        }
        let diff: f64 = analytic.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 =
            analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + num.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(diff / norm.max(1e-12));
    }
    check(worst < 1e-4, format!("worst relative error {worst:.2e}"))
}

fn metric_golden_cases() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() < 1e-4;
    let cases = [
        ("bleu1", 100.0 * bleu1(&[1, 1, 2], &[1, 2, 3]), 66.6667),
        ("rougeL", 100.0 * rouge_l(&[1, 2, 3], &[1, 3, 4]).f1, 66.6667),
        ("rep3", repetition_n(&[1, 2, 3, 1, 2, 3, 1, 2], 3).unwrap(), 50.0),
        ("nov1", novelty_n(&[1, 2, 3], &[1], 1).unwrap(), 66.6667),
    ];
    let bad: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| !close(*got, *want))
        .map(|(n, got, want)| format!("{n}: {got} != {want}"))
        .collect();
    check(bad.is_empty(), if bad.is_empty() { "4 cases within 1e-4".into() } else { bad.join("; ") })
}

/// The shared synthetic experiment behind the trend criteria.
struct Experiment {
    val: Corpus,
    curve_src: Vec<LengthAccuracy>,
    curve_nosrc: Vec<LengthAccuracy>,
    plain: MetricReport,
    blocked: Vec<Generation>,
    das_single: MetricReport,
    das_retrain: MetricReport,
    secs: f64,
}

const T_MAX: usize = 140;

fn experiment_search() -> SearchConfig {
    SearchConfig { beam_size: 3, k_rerank: 10, alpha: 1.0, t_max: T_MAX, ..Default::default() }
}

fn experiment_params() -> DiscParams {
    DiscParams { d_hash: 1 << 16, epochs: 5, learning_rate: 0.5, seed: 5, use_source: true }
}

fn run_experiment() -> Experiment {
    let start = Instant::now();
    let all = generate_synthetic_corpus(1, 2400, &SynthProfile::default()).unwrap();
    let gen = train_generator(&all.slice(0..1000, Split::Train), GeneratorParams::default()).unwrap();
    let train = all.slice(1000..2000, Split::Train);
    let val = all.slice(2000..2400, Split::Validation);
    let search = experiment_search();
    let params = experiment_params();
    let splits = Splits { train: &train, validation: &val };

    let state0 = selftrain::bootstrap(splits, &gen, &search, &params).unwrap();
    let plain_val = state0.validation_generations.clone();
    let (vh, vg) = build_prefix_sets(&val, &generation_map(&plain_val), T_MAX, true).unwrap();
    let buckets: Vec<usize> = (1..=40).chain([60, 80, 100, 120, T_MAX]).collect();
    let curve_src = accuracy_by_length(&state0.discriminator, &vh, &vg, &buckets);

    let (h, g) = build_prefix_sets(&train, &state0.generation_map(), T_MAX, true).unwrap();
    let nosrc_cfg = FeatureConfig::new(params.d_hash, false, T_MAX).with_background(&train);
    let nosrc = train_discriminator(&h, &g, nosrc_cfg, &DiscParams { use_source: false, ..params }, None).unwrap();
    let curve_nosrc = accuracy_by_length(&nosrc, &vh, &vg, &buckets);

    let blocked_cfg = SearchConfig { rules: Rules { block_repeated_trigrams: true, length_penalty: None }, ..search };
    let blocked = decode_corpus(&val, &gen, None, &blocked_cfg, DecodeMode::Plain).unwrap();

    let state1 =
        selftrain::self_train_step(state0, &gen, splits, &search, &params, &SelfTrainConfig::default()).unwrap();
    let single_val = state1.validation_generations.clone();
    let retrain_val = decode_corpus(&val, &gen, Some(&state1.discriminator), &search, DecodeMode::Das).unwrap();

    let eval = |name: &str, gens: &[Generation]| {
        evaluate_system(name, &generation_map(gens), &val, true, EvalOptions::default()).unwrap()
    };
    Experiment {
        plain: eval("plain", &plain_val),
        das_single: eval("das-single", &single_val),
        das_retrain: eval("das-retrain", &retrain_val),
        blocked,
        curve_src,
        curve_nosrc,
        val,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn acc_at(curve: &[LengthAccuracy], t: usize) -> f64 {
    curve.iter().find(|r| r.t == t).and_then(|r| r.accuracy).unwrap_or(f64::NAN)
}

fn accuracy_trend(e: &Experiment) -> Outcome {
    let first = acc_at(&e.curve_src, 1);
    let last = acc_at(&e.curve_src, T_MAX);
    let rise = 100.0 * (last - first);
    let mut losses = Vec::new();
    for (s, n) in e.curve_src.iter().zip(&e.curve_nosrc).filter(|(s, _)| s.t <= 40) {
        if let (Some(a), Some(b)) = (s.accuracy, n.accuracy) {
            if a < b {
                losses.push(format!("t={} {:.1}<{:.1}", s.t, 100.0 * a, 100.0 * b));
            }
        }
    }
    let mean = |c: &[LengthAccuracy]| {
        let v: Vec<f64> = c.iter().filter(|r| r.t <= 40).filter_map(|r| r.accuracy).collect();
        100.0 * v.iter().sum::<f64>() / v.len() as f64
    };
    let detail = format!(
        "acc t=1 {:.1} -> t={T_MAX} {:.1} (rise {rise:.1}); mean t<=40 source {:.2} vs no-source {:.2}; source below at [{}]",
        100.0 * first,
        100.0 * last,
        mean(&e.curve_src),
        mean(&e.curve_nosrc),
        losses.join(", ")
    );
    check(rise >= 10.0 && losses.is_empty(), detail)
}

fn gaps(r: &MetricReport) -> (f64, f64) {
    let d = r.delta.expect("references present");
    (d.len, d.rep3.unwrap_or(0.0))
}

fn directional_reproduction(e: &Experiment) -> Outcome {
    let (pl, pr) = gaps(&e.plain);
    let (sl, sr) = gaps(&e.das_single);
    let (rl, rr) = gaps(&e.das_retrain);
    let no_worse = |retrain: f64, single: f64| retrain.abs() <= single.abs() * 1.05;
    let ok = sl.abs() < pl.abs() && sr.abs() < pr.abs() && no_worse(rl, sl) && no_worse(rr, sr);
    check(
        ok,
        format!("dlen plain {pl:.2} single {sl:.2} retrain {rl:.2}; drep3 plain {pr:.2} single {sr:.2} retrain {rr:.2}; {:.0}s", e.secs),
    )
}

fn rules_orthogonality(e: &Experiment) -> Outcome {
    let repeated = e
        .blocked
        .iter()
        .filter(|g| {
            let mut seen = std::collections::HashSet::new();
            g.tokens.windows(3).any(|w| !seen.insert(w.to_vec()))
        })
        .count();
    let human = e.das_retrain.human.and_then(|h| h.rep3).unwrap_or(0.0);
    let model = e.das_retrain.model.rep3.unwrap_or(f64::NAN);
    check(
        repeated == 0 && (model - human).abs() <= 2.0,
        format!(
            "blocked outputs with a repeated trigram: {repeated}/{}; das-retrain rep3 {model:.2} vs human {human:.2}",
            e.val.len()
        ),
    )
}

fn small_run_config(dir: &Path) -> RunConfig {
    let mut cfg = RunConfig { seed: 21, ..Default::default() };
    cfg.paths.output_dir = dir.to_path_buf();
    cfg.synth.train = 300;
    cfg.synth.disc_train = 150;
    cfg.synth.validation = 50;
    cfg.synth.test = 50;
    cfg.search.t_max = 40;
    cfg.discriminator.d_hash = 1 << 12;
    cfg.selftrain.max_iters = 2;
    cfg.sweep.subset_sizes = vec![20];
    cfg.sweep.repetitions = 2;
    cfg.sweep.k_rerank = vec![1, 5];
    cfg.sweep.alpha = vec![0.0, 1.0];
    cfg
}

fn run_all_commands(cfg: &RunConfig) -> das::Result<()> {
    run::cmd_synth(cfg)?;
    run::cmd_train_generator(cfg)?;
    run::cmd_train_discriminator(cfg)?;
    run::cmd_decode(cfg, DecodeMode::Plain)?;
    run::cmd_decode(cfg, DecodeMode::Das)?;
    run::cmd_self_train(cfg)?;
    let systems = [
        run::generations_path(cfg, DecodeMode::Plain).to_string_lossy().parse().unwrap(),
        run::generations_path(cfg, DecodeMode::Das).to_string_lossy().parse().unwrap(),
    ];
    run::cmd_evaluate(cfg, &systems)?;
    run::cmd_sweep(cfg)?;
    Ok(())
}

fn generator_immutability() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_run_config(dir.path());
    run::cmd_synth(&cfg).unwrap();
    run::cmd_train_generator(&cfg).unwrap();
    let before = run::sha256_file(&cfg.generator_path()).unwrap();
    let m = run::cmd_self_train(&cfg).unwrap();
    let after = run::sha256_file(&cfg.generator_path()).unwrap();
    let recorded = m.notes["generator_hash_before"] == m.notes["generator_hash_after"];
    check(
        before == after && recorded,
        format!("hash {} unchanged over {} iterations", &before[..16], m.notes["iterations"]),
    )
}

fn output_hashes(dir: &Path) -> HashMap<String, String> {
    let mut out = HashMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.to_string_lossy().ends_with(".manifest.json") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, run::sha256_file(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_all_commands(&small_run_config(a.path())).map_err(|e| e.to_string())?;
    run_all_commands(&small_run_config(b.path())).map_err(|e| e.to_string())?;
    let ha = output_hashes(a.path());
    let hb = output_hashes(b.path());
    let differing: Vec<&String> = ha.keys().filter(|k| ha.get(*k) != hb.get(*k)).collect();
    check(
        differing.is_empty() && ha.len() == hb.len(),
        format!("{} output files compared, differing: {differing:?}", ha.len()),
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));
    let mut failed = 0;
    let mut report = |n: usize, name: &str, f: &dyn Fn() -> Outcome| {
        if !wanted(n) {
            return;
        }
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("criterion {n:>2} PASS {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL {name}: {d} [{secs:.1}s]");
            }
        }
    };
    report(1, "alpha=0 equals plain beam", &alpha_zero_equivalence);
    report(2, "k_rerank=1 equals greedy", &k_rerank_one_equivalence);
    report(3, "saturated beam equals exhaustive oracle", &oracle_exactness);
    report(4, "objective gradient matches central differences", &gradient_check);
    let exp = std::sync::LazyLock::new(run_experiment);
    report(5, "accuracy rises with prefix length, source helps", &|| accuracy_trend(&exp));
    report(6, "DAS reduces length and repetition gaps", &|| directional_reproduction(&exp));
    report(7, "metric golden cases", &metric_golden_cases);
    report(8, "generator unchanged by self-training", &generator_immutability);
    report(9, "reruns are byte-identical", &determinism);
    report(10, "trigram blocking and rule-free DAS-retrain", &|| rules_orthogonality(&exp));
    if failed == 0 {
        return ExitCode::SUCCESS;
    }
    println!("{failed} criteria failed");
    if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
