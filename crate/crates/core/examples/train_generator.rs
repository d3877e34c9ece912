//! Fits the n-gram + copy generator and decodes a few held-out sources.
use das::corpus::{generate_synthetic_corpus, Split, SynthProfile, EOS};
use das::decoder::{plain_beam_search, SearchConfig};
use das::generator::{sequence_logprob, train_generator, GeneratorParams};

fn main() -> das::Result<()> {
    let all = generate_synthetic_corpus(1, 1100, &SynthProfile::default())?;
    let train = all.slice(0..1000, Split::Train);
    let test = all.slice(1000..1100, Split::Test);
    let gen = train_generator(&train, GeneratorParams::default())?;

    let mut total = 0.0;
    let mut tokens = 0;
    for p in &test.pairs {
        let mut y = p.reference.clone();
        y.push(EOS);
        total += sequence_logprob(&gen, &p.source, &y)?;
        tokens += y.len();
    }
    println!("held-out reference perplexity {:.2}", (-total / tokens as f64).exp());

    let search = SearchConfig { t_max: 80, ..Default::default() };
    for p in test.pairs.iter().take(3) {
        let out = plain_beam_search(&gen, &p.source, &search)?;
        println!(
            "\nref:  {}\nbeam: {}",
            test.vocab().detokenize(&p.reference),
            test.vocab().detokenize(out.best().content())
        );
    }
    Ok(())
}
