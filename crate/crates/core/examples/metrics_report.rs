//! Surface metrics on hand-made sequences, plus Zipf and repetition-position
//! summaries for a degenerate and a human-like system.
use das::corpus::Vocabulary;
use das::metrics::{bleu1, novelty_n, repetition_n, repetition_position_hist, rouge_l, zipf_csv, zipf_report};

fn main() {
    let vocab = Vocabulary::from_tokens("the cat sat on a mat and dog ran".split(' '));
    let ids = |s: &str| vocab.encode(&s.split(' ').collect::<Vec<_>>());

    let source = ids("the cat sat on the mat");
    let human = ids("a cat sat on a mat");
    let looping = ids("the cat sat on the cat sat on the cat");
    println!("bleu1   {:.4}", bleu1(&looping, &human));
    println!("rougeL  {:.4}", rouge_l(&looping, &human).f1);
    println!("rep3    {:?} vs {:?}", repetition_n(&looping, 3), repetition_n(&human, 3));
    println!("nov1    {:?} vs {:?}", novelty_n(&looping, &source, 1), novelty_n(&human, &source, 1));

    let model: Vec<&[u32]> = vec![&looping, &looping];
    let refs: Vec<&[u32]> = vec![&human, &source];
    println!("\n{}", zipf_csv(&zipf_report(&model, 5), &zipf_report(&refs, 5), &vocab));
    print!("{}", repetition_position_hist(&model, 3, 4).to_csv());
}
