//! Checks that a saturated beam finds the exhaustive best sequence on a
//! tiny vocabulary, with a trained discriminator in the loop.
use das::corpus::{Corpus, DocumentPair, Split, TokenId, Vocabulary, UNK};
use das::decoder::{das_beam_search, exhaustive_oracle, SearchConfig};
use das::discriminator::{build_prefix_sets, train_discriminator, DiscParams, FeatureConfig};
use das::generator::{train_generator, GeneratorModel, GeneratorParams};
use std::collections::HashMap;
use std::sync::Arc;

fn main() -> das::Result<()> {
    let vocab = Arc::new(Vocabulary::from_tokens(["a", "b"]));
    let (a, b) = (vocab.id_or_unk("a"), vocab.id_or_unk("b"));
    let pair = |i: usize, src: &[TokenId], r: &[TokenId]| DocumentPair {
        id: i.to_string(),
        source: src.to_vec(),
        reference: r.to_vec(),
    };
    let pairs = vec![pair(0, &[a, b, a], &[a, b]), pair(1, &[b, b], &[b]), pair(2, &[a, a, b], &[a, a, b])];
    let corpus = Corpus::new(Split::Train, pairs, vocab)?;
    let gen = train_generator(&corpus, GeneratorParams::default())?;

    let generated: HashMap<String, Vec<TokenId>> = corpus.pairs.iter().map(|p| (p.id.clone(), vec![a, a, a])).collect();
    let (h, g) = build_prefix_sets(&corpus, &generated, 4, true)?;
    let cfg = FeatureConfig::new(64, true, 4).with_background(&corpus);
    let disc = train_discriminator(&h, &g, cfg, &DiscParams { d_hash: 64, epochs: 20, ..Default::default() }, None)?;

    let search = SearchConfig { beam_size: 64, k_rerank: 64, alpha: 1.0, t_max: 4, ..Default::default() };
    let tokens: Vec<TokenId> = (UNK..gen.vocab_size() as TokenId).collect();
    for p in &corpus.pairs {
        let beam = das_beam_search(&gen, Some(&disc), &p.source, &search)?;
        let (best, score) = exhaustive_oracle(&gen, Some(&disc), &p.source, 1.0, 4, &tokens)?;
        println!(
            "source {:?}: beam {:?} {:.4}, oracle {:?} {:.4}",
            p.source,
            beam.best().content(),
            beam.best().s_das.unwrap_or(f64::NAN),
            best,
            score
        );
    }
    Ok(())
}
