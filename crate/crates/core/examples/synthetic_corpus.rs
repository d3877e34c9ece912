//! Generates a small synthetic corpus and prints its shape.
use das::corpus::{generate_synthetic_corpus, SynthProfile};

fn main() -> das::Result<()> {
    let corpus = generate_synthetic_corpus(7, 500, &SynthProfile::default())?;
    println!("{:#?}", corpus.stats());
    let vocab = corpus.vocab();
    for p in corpus.pairs.iter().take(2) {
        println!(
            "\n[{}]\nsource:    {}\nreference: {}",
            p.id,
            vocab.detokenize(&p.source),
            vocab.detokenize(&p.reference)
        );
    }
    Ok(())
}
