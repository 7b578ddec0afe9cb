mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlskit::manifold::ExecutionMode;

use commands::Env;
use config::{RunConfig, DEFAULT_SEED};
use failure::Failure;

/// Topic discovery, sense induction and behavioral-profile analysis over
/// embedded corpora.
#[derive(Debug, Parser)]
#[command(name = "nlskit", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed (default 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 (the default) gives byte-identical reruns, 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster document vectors into topics, label them by c-TF-IDF and score NPMI.
    Topics(TopicsArgs),
    /// Tune the four clustering parameters for topic coherence.
    Optimize(OptimizeArgs),
    /// Induce senses of a target word from instance vectors.
    Senses(SensesArgs),
    /// Correspondence analysis and moon plot of a behavioral-profile table.
    Profile(ProfileArgs),
    /// Count target-word frequencies per corpus partition.
    Count(CountArgs),
    /// Rank keywords of a target corpus against a reference corpus.
    Keywords(KeywordsArgs),
}

#[derive(Debug, Args)]
struct TopicsArgs {
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    documents: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    lemmas: Option<PathBuf>,
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long)]
    n_components: Option<usize>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[command(flatten)]
    topics: TopicsArgs,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    n_init: Option<usize>,
    /// Continue from `history.jsonl` in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Debug, Args)]
struct SensesArgs {
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// `id<TAB>object` per line.
    #[arg(long)]
    objects: Option<PathBuf>,
    /// Target word named in the profile text.
    #[arg(long)]
    word: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long)]
    top_n: Option<usize>,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    /// Profile CSV; the bundled table when omitted.
    #[arg(long)]
    table: Option<PathBuf>,
    /// Frame annotations TSV (language, lu, frame, instance_id).
    #[arg(long)]
    frames: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CountArgs {
    #[arg(long)]
    lemmas: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KeywordsArgs {
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    lemmas: Option<PathBuf>,
    #[arg(long)]
    min_doc_ratio: Option<f64>,
    #[arg(long)]
    top: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_topics(cfg: &mut config::TopicsSection, a: TopicsArgs) {
    set_opt(&mut cfg.vectors, a.vectors);
    set_opt(&mut cfg.documents, a.documents);
    set_opt(&mut cfg.stopwords, a.stopwords);
    set_opt(&mut cfg.lemmas, a.lemmas);
    set(&mut cfg.n_neighbors, a.n_neighbors);
    set(&mut cfg.n_components, a.n_components);
    set(&mut cfg.min_cluster_size, a.min_cluster_size);
    set(&mut cfg.min_samples, a.min_samples);
    set(&mut cfg.top_n, a.top_n);
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let threads = cli.threads.or(cfg.threads).unwrap_or(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::new("threads", e.to_string()))?;
    let env = Env {
        seed: cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        mode: if threads == 1 {
            ExecutionMode::Sequential
        } else {
            ExecutionMode::Parallel
        },
        out_dir: cli.out_dir.or(cfg.out_dir.take()).unwrap_or_else(|| PathBuf::from("out")),
    };
    commands::note("run", format!("seed {}, {threads} thread(s), output in {}", env.seed, env.out_dir.display()));

    match cli.command {
        Command::Topics(a) => {
            apply_topics(&mut cfg.topics, a);
            commands::cmd_topics(&env, &cfg.topics)
        }
        Command::Optimize(a) => {
            apply_topics(&mut cfg.topics, a.topics);
            set(&mut cfg.optimize.budget, a.budget);
            set(&mut cfg.optimize.n_init, a.n_init);
            commands::cmd_optimize(&env, &cfg.topics, &cfg.optimize, a.resume)
        }
        Command::Senses(a) => {
            let s = &mut cfg.senses;
            set_opt(&mut s.vectors, a.vectors);
            set_opt(&mut s.objects, a.objects);
            set(&mut s.word, a.word);
            set(&mut s.k, a.k);
            set(&mut s.n_neighbors, a.n_neighbors);
            set(&mut s.top_n, a.top_n);
            commands::cmd_senses(&env, s)
        }
        Command::Profile(a) => {
            set_opt(&mut cfg.profile.table, a.table);
            set_opt(&mut cfg.profile.frames, a.frames);
            commands::cmd_profile(&env, &cfg.profile)
        }
        Command::Count(a) => {
            set_opt(&mut cfg.count.lemmas, a.lemmas);
            commands::cmd_count(&env, &cfg.count)
        }
        Command::Keywords(a) => {
            let k = &mut cfg.keywords;
            set_opt(&mut k.target, a.target);
            set_opt(&mut k.reference, a.reference);
            set_opt(&mut k.stopwords, a.stopwords);
            set_opt(&mut k.lemmas, a.lemmas);
            set(&mut k.min_doc_ratio, a.min_doc_ratio);
            set(&mut k.top, a.top);
            commands::cmd_keywords(&env, k)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code)
        }
    }
}
