use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use das::decoder::DecodeMode;
use das::run::{self, RunConfig, SystemSpec};

#[derive(Parser)]
#[command(name = "das", version, about = "Discriminator-guided beam search for summarization")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "DAS_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Worker threads for decoding and scoring.
    #[arg(long, global = true, env = "DAS_JOBS")]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Args, Default)]
struct SearchFlags {
    #[arg(long)]
    beam_size: Option<usize>,
    #[arg(long)]
    k_rerank: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t_max: Option<usize>,
    /// Forbid repeated trigrams.
    #[arg(long)]
    block_trigrams: bool,
    /// Length penalty exponent.
    #[arg(long)]
    length_penalty: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Plain,
    Das,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic train/disc_train/validation/test splits.
    Synth,
    TrainGenerator,
    TrainDiscriminator {
        #[command(flatten)]
        search: SearchFlags,
    },
    Decode {
        #[arg(long, value_enum)]
        mode: Mode,
        #[command(flatten)]
        search: SearchFlags,
    },
    SelfTrain {
        #[command(flatten)]
        search: SearchFlags,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        warm_start: bool,
    },
    /// Score generation files, given as `path` or `name=path`.
    Evaluate {
        #[arg(required = true)]
        systems: Vec<SystemSpec>,
    },
    Sweep {
        #[command(flatten)]
        search: SearchFlags,
    },
}

impl SearchFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.search;
        if let Some(v) = self.beam_size {
            s.beam_size = v;
        }
        if let Some(v) = self.k_rerank {
            s.k_rerank = v;
        }
        if let Some(v) = self.alpha {
            s.alpha = v;
        }
        if let Some(v) = self.t_max {
            s.t_max = v;
        }
        if self.block_trigrams {
            s.rules.block_repeated_trigrams = true;
        }
        if self.length_penalty.is_some() {
            s.rules.length_penalty = self.length_penalty;
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            if !p.is_file() {
                return Err(das::Error::Config(format!("config file {} does not exist", p.display())).into());
            }
            RunConfig::load(p)?
        }
        None => RunConfig::default(),
    };
    if let Some(d) = &common.output_dir {
        cfg.paths.output_dir = d.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(j) = cli.common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global().context("configuring the worker pool")?;
    }
    let mut cfg = load_config(&cli.common)?;
    let manifest = match &cli.command {
        Command::Synth => run::cmd_synth(&cfg)?,
        Command::TrainGenerator => run::cmd_train_generator(&cfg)?,
        Command::TrainDiscriminator { search } => {
            search.apply(&mut cfg);
            run::cmd_train_discriminator(&cfg)?
        }
        Command::Decode { mode, search } => {
            search.apply(&mut cfg);
            let mode = match mode {
                Mode::Plain => DecodeMode::Plain,
                Mode::Das => DecodeMode::Das,
            };
            run::cmd_decode(&cfg, mode)?
        }
        Command::SelfTrain { search, max_iters, warm_start } => {
            search.apply(&mut cfg);
            if let Some(m) = max_iters {
                cfg.selftrain.max_iters = *m;
            }
            cfg.selftrain.warm_start |= warm_start;
            run::cmd_self_train(&cfg)?
        }
        Command::Evaluate { systems } => {
            let (m, reports) = run::cmd_evaluate(&cfg, systems)?;
            print!("{}", das::metrics::reports_csv(&reports));
            m
        }
        Command::Sweep { search } => {
            search.apply(&mut cfg);
            run::cmd_sweep(&cfg)?.0
        }
    };
    for (path, hash) in &manifest.outputs {
        eprintln!("{path} {}", &hash[..12]);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.downcast_ref::<das::Error>().is_some_and(das::Error::is_validation);
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
