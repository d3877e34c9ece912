//! Trains source-aware and source-blind discriminators against plain beam
//! outputs and prints held-out accuracy by prefix length.
use das::corpus::{generate_synthetic_corpus, Split, SynthProfile};
use das::decoder::{decode_corpus, generation_map, DecodeMode, SearchConfig};
use das::discriminator::{
    accuracy_by_length, build_prefix_sets, train_discriminator, DiscParams, FeatureConfig, DENSE_NAMES,
};
use das::generator::{train_generator, GeneratorParams};

fn main() -> das::Result<()> {
    let all = generate_synthetic_corpus(1, 1600, &SynthProfile::default())?;
    let gen = train_generator(&all.slice(0..600, Split::Train), GeneratorParams::default())?;
    let train = all.slice(600..1400, Split::Train);
    let val = all.slice(1400..1600, Split::Validation);
    let search = SearchConfig { t_max: 100, ..Default::default() };

    let tg = decode_corpus(&train, &gen, None, &search, DecodeMode::Plain)?;
    let vg = decode_corpus(&val, &gen, None, &search, DecodeMode::Plain)?;
    let (h, g) = build_prefix_sets(&train, &generation_map(&tg), search.t_max, true)?;
    let (vh, vgp) = build_prefix_sets(&val, &generation_map(&vg), search.t_max, true)?;

    let buckets = [1, 2, 3, 5, 10, 20, 40, 60, 100];
    println!("{:>4} {:>8} {:>8}", "t", "source", "blind");
    let mut curves = Vec::new();
    for use_source in [true, false] {
        let params = DiscParams { d_hash: 1 << 15, epochs: 3, use_source, ..Default::default() };
        let cfg = FeatureConfig::new(params.d_hash, use_source, search.t_max).with_background(&train);
        let model = train_discriminator(&h, &g, cfg, &params, None)?;
        if use_source {
            for (name, w) in DENSE_NAMES.iter().zip(&model.dense) {
                println!("  dense {name:<18} {w:+.3}");
            }
        }
        curves.push(accuracy_by_length(&model, &vh, &vgp, &buckets));
    }
    let pct = |a: Option<f64>| a.map_or("-".to_string(), |a| format!("{:.1}", 100.0 * a));
    for (s, b) in curves[0].iter().zip(&curves[1]) {
        println!("{:>4} {:>8} {:>8}", s.t, pct(s.accuracy), pct(b.accuracy));
    }
    Ok(())
}
