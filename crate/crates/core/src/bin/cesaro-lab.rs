use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};

use cesaro_lab::config::{RunConfig, OUTPUT_DIR_ENV};
use cesaro_lab::corpus::Corpus;
use cesaro_lab::suites::{self, Suite};

#[derive(Parser)]
#[command(name = "cesaro-lab", version, about = "Numerical experiments on lacunary Cesaro means of Fourier series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite and write JSON and CSV reports.
    Run {
        /// kernels, cz, sets, hilbert, lemmas34, lemmas5, orthogonality,
        /// replacement, convergence or all.
        #[arg(long)]
        suite: Suite,
        /// JSON run configuration; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        grid_level: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, env = OUTPUT_DIR_ENV)]
        out: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<String>,
        /// Worker threads, 0 for one per core.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Inspect corpora.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Print item summaries as JSON lines.
    List {
        #[arg(long, default_value = "extended")]
        corpus: String,
        #[arg(long, default_value_t = RunConfig::default().seed)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            suite,
            config,
            grid_level,
            seed,
            out,
            corpus,
            workers,
        } => {
            let mut cfg = match &config {
                Some(p) => RunConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
                None => RunConfig::default(),
            };
            if let Some(g) = grid_level {
                cfg.grid_level = g;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            if let Some(c) = corpus {
                cfg.corpus = c;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let outcome = suites::run(cfg, suite)?;
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                for h in &outcome.hard_failures {
                    eprintln!("FAILED {h}");
                }
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Corpus {
            command: CorpusCommand::List { corpus, seed },
        } => {
            let c = Corpus::resolve(&corpus, seed)?;
            for s in c.summaries() {
                println!("{}", serde_json::to_string(&s)?);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
