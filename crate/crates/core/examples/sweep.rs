//! Runs the file-based pipeline in a scratch directory and prints the
//! `K_rerank x alpha` sweep table.
use das::decoder::DecodeMode;
use das::run::{self, RunConfig};

fn main() -> das::Result<()> {
    let dir = std::env::temp_dir().join("das-sweep-example");
    let mut cfg = RunConfig::default();
    cfg.paths.output_dir = dir.clone();
    cfg.synth.train = 400;
    cfg.synth.disc_train = 300;
    cfg.synth.validation = 100;
    cfg.synth.test = 100;
    cfg.search.t_max = 60;
    cfg.discriminator.d_hash = 1 << 14;
    cfg.sweep.subset_sizes = vec![50];
    cfg.sweep.repetitions = 2;

    run::cmd_synth(&cfg)?;
    run::cmd_train_generator(&cfg)?;
    run::cmd_train_discriminator(&cfg)?;
    run::cmd_decode(&cfg, DecodeMode::Plain)?;
    let (_, rows) = run::cmd_sweep(&cfg)?;
    print!("{}", run::sweep_csv(&rows));
    println!("artifacts in {}", dir.display());
    Ok(())
}
