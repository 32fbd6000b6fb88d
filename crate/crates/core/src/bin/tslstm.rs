use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tslstm::cli::{self, Overrides, RunConfig};
use tslstm::data::Split;
use tslstm::training::EpochLog;

#[derive(Parser)]
#[command(name = "tslstm", version, about = "Temporal-pooling LSTM video captioning")]
struct Cli {
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    beam_width: Option<usize>,
    /// Number of temporal segments.
    #[arg(long = "ne", global = true)]
    n_e: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct DataArgs {
    /// Dataset manifest.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    split: Option<Split>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic event-world corpus.
    Synth,
    /// Train a model, optionally continuing from a checkpoint.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients on a tiny model.
    Gradcheck,
    /// Beam-search captions for a dataset split.
    Caption {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Score a captions file against a dataset split.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        captions: Option<PathBuf>,
    },
    /// Train and evaluate one model per number of segments.
    AblateNe {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated n_e values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
}

fn print_epoch(e: &EpochLog) {
    let r = &e.record;
    eprintln!(
        "epoch {:>4}  train loss {:.5} ppl {:.4}  val loss {:.5} ppl {:.4}{}  {:.2}s",
        r.epoch,
        r.train_loss,
        r.train_perplexity,
        r.val_loss,
        r.val_perplexity,
        if r.improved { " *" } else { "" },
        e.wall_seconds
    );
}

fn run(cli: Cli) -> tslstm::Result<i32> {
    let mut o = Overrides {
        seed: cli.seed,
        beam_width: cli.beam_width,
        n_e: cli.n_e,
        out: cli.out,
        ..Overrides::default()
    };
    let mut resume = None;
    let data = match &cli.command {
        Command::Train { data, resume: r } => {
            resume = r.clone();
            Some(data)
        }
        Command::Caption { data, checkpoint } => {
            o.checkpoint = checkpoint.clone();
            Some(data)
        }
        Command::Eval { data, captions } => {
            o.captions = captions.clone();
            Some(data)
        }
        Command::AblateNe { data, values } => {
            o.values = values.clone();
            Some(data)
        }
        Command::Synth | Command::Gradcheck => None,
    };
    if let Some(d) = data {
        o.dataset = d.dataset.clone();
        o.split = d.split;
    }
    let cfg = RunConfig::load(cli.config.as_deref())?.resolve(&o);

    match cli.command {
        Command::Synth => println!("{}", cli::cmd_synth(&cfg)?),
        Command::Train { .. } => println!("{}", cli::cmd_train(&cfg, resume.as_deref().map(Path::new), print_epoch)?),
        Command::Gradcheck => {
            let report = cli::cmd_gradcheck(&cfg)?;
            for t in &report.tensors {
                println!(
                    "{:<16} {:>5} entries  max rel err {:.3e}  {}",
                    t.name,
                    t.entries,
                    t.max_relative_error,
                    if t.passed { "ok" } else { "FAIL" }
                );
            }
            println!("gradcheck {}", if report.passed { "passed" } else { "FAILED" });
            if !report.passed {
                return Ok(cli::EXIT_GRADCHECK);
            }
        }
        Command::Caption { .. } => {
            let file = cli::cmd_caption(&cfg)?;
            for (id, c) in &file.captions {
                println!("{id}\t{c}");
            }
        }
        Command::Eval { .. } => println!("{}", cli::cmd_eval(&cfg)?),
        Command::AblateNe { .. } => {
            let table = cli::cmd_ablate_ne(&cfg, |n_e, e| {
                eprint!("[n_e={n_e}] ");
                print_epoch(e);
            })?;
            println!("{table}");
        }
    }
    Ok(cli::EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { cli::EXIT_VALIDATION } else { cli::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
