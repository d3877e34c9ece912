//! Runs the self-training loop until a stop test fires and prints the history.
use das::corpus::{generate_synthetic_corpus, Split, SynthProfile};
use das::decoder::SearchConfig;
use das::discriminator::DiscParams;
use das::generator::{train_generator, GeneratorParams};
use das::selftrain::{bootstrap, history_csv, run_until_convergence, SelfTrainConfig, Splits};

fn main() -> das::Result<()> {
    let all = generate_synthetic_corpus(5, 1000, &SynthProfile::default())?;
    let gen = train_generator(&all.slice(0..500, Split::Train), GeneratorParams::default())?;
    let train = all.slice(500..900, Split::Train);
    let val = all.slice(900..1000, Split::Validation);
    let splits = Splits { train: &train, validation: &val };
    let search = SearchConfig { k_rerank: 10, alpha: 1.0, t_max: 100, ..Default::default() };
    let params = DiscParams { d_hash: 1 << 14, epochs: 3, ..Default::default() };
    let cfg = SelfTrainConfig { max_iters: 3, ..Default::default() };

    let state = bootstrap(splits, &gen, &search, &params)?;
    let state = run_until_convergence(state, &gen, splits, &search, &params, &cfg, |s| {
        eprintln!("iteration {} done", s.iteration);
        Ok(())
    })?;
    println!("stopped: {:?}", state.stop);
    print!("{}", history_csv(&state.history));
    Ok(())
}
