//! `stylodetect`: corpus statistics, featurization, training, evaluation,
//! ablation, prediction and histograms for human vs AI text detection.

mod commands;
mod config;
mod pipeline;
mod providers;

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stylodetect::clients::{Mode, ProviderKind};
use stylodetect::corpus::TaskName;
use stylodetect::features::Selection;
use stylodetect::ml::ModelKind;

use config::{GlobalFlags, Settings};

/// Invalid invocation or configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "stylodetect",
    version,
    about = "Stylometric detection of AI-generated and AI-rephrased text",
    after_help = "Settings are taken from flags, then the --config file, then STYLO_* environment variables."
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML configuration file
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Directory for every artifact written by the run [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for featurization and evaluation [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Directory of provider response caches [default: <out>/cache]
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// JSONL file of pre-collected chat answers ({"id", "response"} per line)
    #[arg(long, global = true, value_name = "FILE")]
    annotations: Option<PathBuf>,
    /// Directory of lexicon files replacing the bundled ones
    #[arg(long, global = true, value_name = "DIR")]
    lexicons: Option<PathBuf>,
    /// Use the fixed AI-feedback value when no chat answer is available
    #[arg(long, global = true)]
    impute_ai_feedback: bool,
    /// Never touch the network: live providers read their caches only
    #[arg(long, global = true)]
    cached_only: bool,
    /// Grammar provider mode: live, cached_only or fallback
    #[arg(long, global = true, value_name = "MODE")]
    grammar: Option<Mode>,
    /// Chat provider mode: live, cached_only or fallback
    #[arg(long, global = true, value_name = "MODE")]
    chat: Option<Mode>,
    /// Embedding provider mode: live, cached_only or fallback
    #[arg(long, global = true, value_name = "MODE")]
    embedding: Option<Mode>,
    /// Perplexity provider mode; fallback uses the built-in n-gram model
    #[arg(long, global = true, value_name = "MODE")]
    lm: Option<Mode>,
    /// Vector size returned by the embedding service
    #[arg(long, global = true, value_name = "N")]
    embedding_dim: Option<usize>,
}

#[derive(Args)]
struct Data {
    /// Corpus JSONL file or directory
    #[arg(long, value_name = "PATH")]
    corpus: Option<PathBuf>,
}

#[derive(Args)]
struct Seeded {
    /// Base random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Use the base seed for every task's splits instead of one per task
    #[arg(long)]
    shared_split_seed: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Paragraph, sentence and word counts per category, class and variant
    Stats {
        /// Corpus JSONL file or directory
        corpus: Option<PathBuf>,
    },
    /// Write the feature matrix of a task or of the whole corpus
    Featurize {
        #[command(flatten)]
        data: Data,
        /// Detection task; the whole corpus when omitted
        #[arg(long)]
        task: Option<TaskName>,
        /// Feature selection, e.g. All_traditional+new
        #[arg(long)]
        selection: Option<Selection>,
    },
    /// Tune and save one classifier for a task
    Train {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        seeded: Seeded,
        /// Detection task
        #[arg(long)]
        task: Option<TaskName>,
        /// Classifier: gbt, rf or mlp
        #[arg(long)]
        classifier: Option<ModelKind>,
        /// Feature selection [default: All_traditional+new]
        #[arg(long)]
        selection: Option<Selection>,
        /// Model file name without extension [default: <classifier>_<task>]
        #[arg(long)]
        name: Option<String>,
    },
    /// Cross-validate classifiers on one task and selection
    Evaluate {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        seeded: Seeded,
        /// Detection task
        #[arg(long)]
        task: Option<TaskName>,
        /// Classifier to evaluate; all three when omitted
        #[arg(long)]
        classifier: Option<ModelKind>,
        /// Feature selection [default: All_traditional+new]
        #[arg(long)]
        selection: Option<Selection>,
    },
    /// Every preset selection against every classifier
    Ablate {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        seeded: Seeded,
        /// Detection task; all four when omitted
        #[arg(long)]
        task: Option<TaskName>,
    },
    /// Classify one text file with a trained model and explain the features
    Predict {
        /// Plain-text file to classify
        file: PathBuf,
        /// Model file written by `train`
        #[arg(long)]
        model: PathBuf,
        /// Topic title used by the title-based features [default: file stem]
        #[arg(long)]
        title: Option<String>,
    },
    /// Per-class histogram of one scalar feature
    Hist {
        #[command(flatten)]
        data: Data,
        /// Feature name, e.g. PPL_mean or quotation_count
        #[arg(long)]
        feature: String,
        /// Number of bins
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
}

impl Global {
    fn flags(&self) -> GlobalFlags {
        let modes: HashMap<ProviderKind, Mode> = [
            (ProviderKind::Grammar, self.grammar),
            (ProviderKind::Chat, self.chat),
            (ProviderKind::Embedding, self.embedding),
            (ProviderKind::Lm, self.lm),
        ]
        .into_iter()
        .filter_map(|(k, m)| m.map(|m| (k, m)))
        .collect();
        GlobalFlags {
            config: self.config.clone(),
            out: self.out.clone(),
            jobs: self.jobs,
            cache_dir: self.cache_dir.clone(),
            annotations: self.annotations.clone(),
            lexicons: self.lexicons.clone(),
            impute_ai_feedback: self.impute_ai_feedback,
            cached_only: self.cached_only,
            modes,
            embedding_dim: self.embedding_dim,
        }
    }
}

const DEFAULT_SELECTION: &str = "All_traditional+new";

fn shared(s: &Settings, flag: bool) -> bool {
    flag || s.file.shared_split_seed.unwrap_or(false)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let settings = Settings::resolve(&cli.global.flags())?;
    if let Some(n) = settings.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let s = &settings;
    let task = |flag| s.parsed(flag, &s.file.task, "task", None);
    let selection = |flag| s.parsed(flag, &s.file.selection, "selection", Some(DEFAULT_SELECTION));
    match cli.command {
        Command::Stats { corpus } => commands::stats(s, corpus),
        Command::Featurize { data, task, selection: sel } => commands::featurize(
            s,
            commands::FeaturizeArgs {
                corpus: data.corpus,
                task: s.optional(task, &s.file.task, "task")?,
                selection: selection(sel)?,
            },
        ),
        Command::Train { data, seeded, task: t, classifier, selection: sel, name } => commands::train(
            s,
            commands::TrainArgs {
                corpus: data.corpus,
                task: task(t)?,
                classifier: s.parsed(classifier, &s.file.classifier, "classifier", None)?,
                selection: selection(sel)?,
                seed: s.seed(seeded.seed)?,
                shared_split_seed: shared(s, seeded.shared_split_seed),
                name,
            },
        ),
        Command::Evaluate { data, seeded, task: t, classifier, selection: sel } => {
            let classifiers = match s.optional(classifier, &s.file.classifier, "classifier")? {
                Some(k) => vec![k],
                None => ModelKind::ALL.to_vec(),
            };
            commands::evaluate(
                s,
                commands::EvaluateArgs {
                    corpus: data.corpus,
                    task: task(t)?,
                    classifiers,
                    selection: selection(sel)?,
                    seed: s.seed(seeded.seed)?,
                    shared_split_seed: shared(s, seeded.shared_split_seed),
                },
            )
        }
        Command::Ablate { data, seeded, task: t } => {
            let tasks = match s.optional(t, &s.file.task, "task")? {
                Some(t) => vec![t],
                None => TaskName::ALL.to_vec(),
            };
            commands::ablate(
                s,
                commands::AblateArgs {
                    corpus: data.corpus,
                    tasks,
                    seed: s.seed(seeded.seed)?,
                    shared_split_seed: shared(s, seeded.shared_split_seed),
                },
            )
        }
        Command::Predict { file, model, title } => {
            commands::predict(s, commands::PredictArgs { file, model, title })
        }
        Command::Hist { data, feature, bins } => commands::hist(
            s,
            commands::HistArgs {
                corpus: data.corpus,
                feature,
                bins,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
