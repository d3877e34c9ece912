//! Compares plain beam, trigram-blocked beam and discriminator-guided beam on
//! the same held-out sources.
use das::corpus::{generate_synthetic_corpus, Split, SynthProfile};
use das::decoder::{decode_corpus, generation_map, DecodeMode, Rules, SearchConfig};
use das::discriminator::DiscParams;
use das::generator::{train_generator, GeneratorParams};
use das::metrics::{evaluate_system, reports_csv, EvalOptions};
use das::selftrain::{bootstrap, Splits};

fn main() -> das::Result<()> {
    let all = generate_synthetic_corpus(3, 1400, &SynthProfile::default())?;
    let gen = train_generator(&all.slice(0..600, Split::Train), GeneratorParams::default())?;
    let train = all.slice(600..1200, Split::Train);
    let val = all.slice(1200..1400, Split::Validation);
    let search = SearchConfig { k_rerank: 10, alpha: 1.0, t_max: 120, ..Default::default() };
    let params = DiscParams { d_hash: 1 << 15, epochs: 3, ..Default::default() };
    let state = bootstrap(Splits { train: &train, validation: &val }, &gen, &search, &params)?;

    let blocked = SearchConfig { rules: Rules { block_repeated_trigrams: true, length_penalty: None }, ..search };
    let systems = [
        ("plain", state.validation_generations.clone()),
        ("blocked", decode_corpus(&val, &gen, None, &blocked, DecodeMode::Plain)?),
        ("das", decode_corpus(&val, &gen, Some(&state.discriminator), &search, DecodeMode::Das)?),
    ];
    let mut reports = Vec::new();
    for (name, gens) in &systems {
        println!("{name:>8}: {}", gens[0].text);
        reports.push(evaluate_system(name, &generation_map(gens), &val, true, EvalOptions::default())?);
    }
    println!("{:>8}: {}\n", "human", val.vocab().detokenize(&val.pairs[0].reference));
    print!("{}", reports_csv(&reports));
    Ok(())
}
