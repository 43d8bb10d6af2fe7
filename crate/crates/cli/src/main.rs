//! `lingvec`: build, merge and evaluate annotation-aware embeddings.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use artifacts::{Layout, MissingArtifact};
use commands::Ctx;
use config::RunConfig;

const DEFAULT_OUT: &str = "lingvec-out";

#[derive(Parser, Debug)]
#[command(name = "lingvec", version, about = "Joint word and annotation embeddings")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Annotation-kind combination such as `sf_l_c`.
    #[arg(long, global = true)]
    kinds: Option<String>,
    /// Co-occurrence window size.
    #[arg(long, global = true)]
    window: Option<usize>,
    /// `harmonic` or `uniform`.
    #[arg(long, global = true)]
    weighting: Option<String>,
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Vocabulary block size; the vocabulary is cut to a multiple of it.
    #[arg(long, global = true)]
    shard_dim: Option<usize>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output root for all artifacts.
    #[arg(long, global = true, env = "LINGVEC_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read and filter raw corpora into the output root.
    Ingest {
        /// Corpus files; override `corpus.paths`.
        files: Vec<PathBuf>,
        /// `jsonl` or `text`.
        #[arg(long)]
        format: Option<String>,
    },
    /// Count keys and write the shard-aligned vocabulary.
    Vocab {
        #[arg(long)]
        min_count: Option<u64>,
    },
    /// Count windowed co-occurrences and write shards.
    Cooc,
    /// Factorize the co-occurrence shards into an embedding.
    Train,
    /// Combine embedding spaces over their shared keys.
    Merge {
        inputs: Vec<PathBuf>,
        /// `average`, `add`, `concat` or `svd_reduce`.
        #[arg(long)]
        op: Option<String>,
        #[arg(long)]
        target_dim: Option<usize>,
        #[arg(long)]
        name: Option<String>,
    },
    /// Word-similarity correlation.
    EvalSim {
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Word-analogy accuracy.
    EvalAnalogy {
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Context-to-center prediction on a held-out corpus.
    EvalPredict {
        #[arg(long)]
        embedding: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// k-fold multi-label document classification.
    Classify {
        #[arg(long)]
        embedding: Option<PathBuf>,
        /// `frozen`, `random_normal` or `trainable`.
        #[arg(long)]
        mode: Option<String>,
        /// `average`, `concat` or `svd_reduce:<dim>`.
        #[arg(long)]
        fusion: Option<String>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Classification over every kind combination and fusion.
    Sweep,
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(k) = &cli.kinds {
        cfg.kinds = k.clone();
    }
    if let Some(w) = cli.window {
        cfg.cooc.window = w;
    }
    if let Some(w) = &cli.weighting {
        cfg.cooc.weighting = w.clone();
    }
    if let Some(d) = cli.dim {
        cfg.train.dim = d;
    }
    if let Some(s) = cli.steps {
        cfg.train.steps = s;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    match &cli.command {
        Command::Ingest { files, format } => {
            if !files.is_empty() {
                cfg.corpus.paths = files.clone();
            }
            if let Some(f) = format {
                cfg.corpus.format = f.clone();
            }
        }
        Command::Vocab { min_count: Some(m) } => cfg.vocab.min_count = *m,
        Command::Merge { inputs, op, target_dim, name } => {
            if !inputs.is_empty() {
                cfg.merge.inputs = inputs.clone();
            }
            if let Some(o) = op {
                cfg.merge.op = o.clone();
            }
            if target_dim.is_some() {
                cfg.merge.target_dim = *target_dim;
            }
            if let Some(n) = name {
                cfg.merge.name = n.clone();
            }
        }
        Command::EvalPredict { corpus: Some(c), .. } => cfg.eval.predict_corpus = Some(c.clone()),
        Command::Classify { mode, fusion, folds, .. } => {
            if let Some(m) = mode {
                cfg.classify.embedding_mode = m.clone();
            }
            if let Some(f) = fusion {
                cfg.classify.fusion = f.clone();
            }
            if let Some(k) = folds {
                cfg.classify.folds = *k;
            }
        }
        _ => {}
    }
    if let Some(s) = cli.shard_dim {
        cfg.vocab.shard_dim = s;
    }
    cfg.validate()?;
    cfg.kinds = cfg.kind_set()?.label();
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Vec<(String, String)>> {
    let cfg = build_config(&cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let root = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let ctx = Ctx { cfg, layout: Layout::new(root) };
    match &cli.command {
        Command::Ingest { .. } => commands::ingest(&ctx),
        Command::Vocab { .. } => commands::vocab(&ctx),
        Command::Cooc => commands::cooc(&ctx),
        Command::Train => commands::train_cmd(&ctx),
        Command::Merge { .. } => commands::merge_cmd(&ctx),
        Command::EvalSim { embedding } => commands::eval_sim(&ctx, embedding.as_deref()),
        Command::EvalAnalogy { embedding } => commands::eval_analogy_cmd(&ctx, embedding.as_deref()),
        Command::EvalPredict { embedding, .. } => commands::eval_predict_cmd(&ctx, embedding.as_deref()),
        Command::Classify { embedding, .. } => commands::classify(&ctx, embedding.as_deref()),
        Command::Sweep => commands::sweep_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(fields) => {
            let line: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!("{}", line.join(" "));
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<MissingArtifact>().is_some() {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
