//! `valstack`: synthetic data, lexicon extension, training, evaluation,
//! prediction and behavior analysis from the command line.
//!
//! Every flag can also be set through an environment variable named
//! `VALSTACK_<FLAG>` (upper case, dashes as underscores). Precedence is
//! flag, then environment, then `--config`, then built-in defaults.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use valstack_core::behavior::FriendDenominator;
use valstack_core::model::stack::LossMode;
use valstack_core::selection::SelectionMethod;
use valstack_core::FeatureSources;

use crate::config::{parse_denominator, parse_loss, parse_selection, parse_sources, Config, LexiconKind, ModelKind};
use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "valstack", version, about = "Personal-value prediction from lexicon features")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON config file; flags and environment variables override it.
    #[arg(long, global = true, env = "VALSTACK_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory; a manifest of artifact hashes is written there.
    #[arg(long, global = true, env = "VALSTACK_OUT", default_value = "valstack-out")]
    out: PathBuf,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "VALSTACK_WORKERS")]
    workers: Option<usize>,
    /// Single-threaded numerics.
    #[arg(long, global = true, env = "VALSTACK_DETERMINISTIC")]
    deterministic: bool,
    /// Log filter, e.g. `info` or `valstack_core=debug`.
    #[arg(long, global = true, env = "VALSTACK_LOG", default_value = "info")]
    log: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted effects.
    Synth(SynthArgs),
    /// Train word embeddings on a corpus.
    Embed(EmbedArgs),
    /// Extend a dictionary with embedding neighbors that pass a synonym classifier.
    BuildLexicon(BuildLexiconArgs),
    /// Select features and train base and/or stack models on all users.
    Train(TrainArgs),
    /// Cross-validate models over feature settings.
    Evaluate(EvaluateArgs),
    /// Score users with a trained model.
    Predict(PredictArgs),
    /// Compare behavior of the users with the highest and lowest predictions.
    AnalyzeBehavior(BehaviorArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, env = "VALSTACK_USERS")]
    users: Option<usize>,
    #[arg(long, env = "VALSTACK_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long, env = "VALSTACK_CORPUS")]
    corpus: Option<PathBuf>,
    #[arg(long, env = "VALSTACK_DIM")]
    dim: Option<usize>,
    #[arg(long, env = "VALSTACK_EPOCHS")]
    epochs: Option<usize>,
    #[arg(long, env = "VALSTACK_MIN_COUNT")]
    min_count: Option<usize>,
    #[arg(long, env = "VALSTACK_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct BuildLexiconArgs {
    /// Base `.dic` dictionary.
    #[arg(long, env = "VALSTACK_LEXICON")]
    lexicon: Option<PathBuf>,
    /// Text embeddings, one `word v1 .. vd` line per word.
    #[arg(long, env = "VALSTACK_EMBEDDINGS")]
    embeddings: Option<PathBuf>,
    /// TSV of `word_a word_b syn|ant` training pairs.
    #[arg(long, env = "VALSTACK_PAIRS")]
    pairs: Option<PathBuf>,
    /// Neighbors considered per seed word.
    #[arg(long, env = "VALSTACK_Q")]
    q: Option<usize>,
    /// Minimum synonym probability for a neighbor to be added.
    #[arg(long, env = "VALSTACK_THRESHOLD")]
    threshold: Option<f64>,
    #[arg(long, env = "VALSTACK_LR_LAMBDA")]
    lr_lambda: Option<f64>,
    /// Optional corpus for a coverage report.
    #[arg(long, env = "VALSTACK_CORPUS")]
    corpus: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long, env = "VALSTACK_CORPUS")]
    corpus: Option<PathBuf>,
    #[arg(long, env = "VALSTACK_LEXICON")]
    lexicon: Option<PathBuf>,
    /// Extension dictionary, needed for the S-LIWC lexicon.
    #[arg(long, env = "VALSTACK_EXTENSION")]
    extension: Option<PathBuf>,
    /// Survey answers (`user_id,item_1,..`); needs --dimension-map.
    #[arg(long, env = "VALSTACK_SVS")]
    svs: Option<PathBuf>,
    /// CSV `item_index,dimension`.
    #[arg(long, env = "VALSTACK_DIMENSION_MAP")]
    dimension_map: Option<PathBuf>,
    /// Precomputed labels CSV, instead of --svs.
    #[arg(long, env = "VALSTACK_LABELS")]
    labels: Option<PathBuf>,
    /// Percentage of users labelled at each end (50 or 40 in practice).
    #[arg(long, env = "VALSTACK_K_PERCENT")]
    k_percent: Option<u32>,
    /// Features kept per source and dimension.
    #[arg(long, env = "VALSTACK_N")]
    n: Option<usize>,
    /// rfe or univariate.
    #[arg(long, env = "VALSTACK_SELECTION", value_parser = parse_selection)]
    selection: Option<SelectionMethod>,
    #[arg(long, env = "VALSTACK_MODEL_KIND", value_enum)]
    model_kind: Option<ModelKind>,
    /// nll or literal.
    #[arg(long, env = "VALSTACK_LOSS", value_parser = parse_loss)]
    loss: Option<LossMode>,
    #[arg(long, env = "VALSTACK_EPOCHS")]
    epochs: Option<usize>,
    #[arg(long, env = "VALSTACK_LEARNING_RATE")]
    learning_rate: Option<f64>,
    /// L2 penalty on the stack heads.
    #[arg(long, env = "VALSTACK_STACK_L2")]
    stack_l2: Option<f64>,
    /// Slope of the shared-loss schedule.
    #[arg(long, env = "VALSTACK_BETA_M")]
    beta_m: Option<f64>,
    /// L2 penalty of the logistic regressions.
    #[arg(long, env = "VALSTACK_LR_LAMBDA")]
    lr_lambda: Option<f64>,
    /// Raw counts and no URL/mention stripping.
    #[arg(long, env = "VALSTACK_LITERAL_FEATURES")]
    literal_features: bool,
    #[arg(long, env = "VALSTACK_SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, env = "VALSTACK_LEXICON_KIND", value_enum)]
    lexicon_kind: Option<LexiconKind>,
    /// post, profile or post+profile.
    #[arg(long, env = "VALSTACK_FEATURES", value_parser = parse_sources)]
    features: Option<FeatureSources>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, env = "VALSTACK_FOLDS")]
    folds: Option<usize>,
    /// Lexicons to compare (default: both when --extension is given).
    #[arg(long, env = "VALSTACK_LEXICONS", value_enum, value_delimiter = ',')]
    lexicons: Vec<LexiconKind>,
    /// Feature settings to compare (default: all three).
    #[arg(long, env = "VALSTACK_FEATURE_SETS", value_parser = parse_sources, value_delimiter = ',')]
    feature_sets: Vec<FeatureSources>,
    /// Select features once on all users instead of inside each fold.
    #[arg(long, env = "VALSTACK_GLOBAL_SELECTION")]
    global_selection: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long, env = "VALSTACK_MODEL")]
    model: Option<PathBuf>,
    #[arg(long, env = "VALSTACK_CORPUS")]
    corpus: Option<PathBuf>,
    #[arg(long, env = "VALSTACK_LEXICON")]
    lexicon: Option<PathBuf>,
    #[arg(long, env = "VALSTACK_EXTENSION")]
    extension: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BehaviorArgs {
    /// Predictions CSV written by `predict`.
    #[arg(long, env = "VALSTACK_PREDICTIONS")]
    predictions: Option<PathBuf>,
    #[arg(long, env = "VALSTACK_TWEETS")]
    tweets: Option<PathBuf>,
    #[arg(long, env = "VALSTACK_EDGES")]
    edges: Option<PathBuf>,
    /// Users per group (default: 20% of users).
    #[arg(long, env = "VALSTACK_X")]
    x: Option<usize>,
    /// Window start, UTC seconds (default 2017-01-01).
    #[arg(long, env = "VALSTACK_WINDOW_START", allow_negative_numbers = true)]
    window_start: Option<i64>,
    /// Window end, exclusive, UTC seconds (default 2017-02-01).
    #[arg(long, env = "VALSTACK_WINDOW_END", allow_negative_numbers = true)]
    window_end: Option<i64>,
    /// followers or followees.
    #[arg(long, env = "VALSTACK_DENOMINATOR", value_parser = parse_denominator)]
    denominator: Option<FriendDenominator>,
}

fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

impl DataArgs {
    fn overlay(&self) -> Config {
        Config {
            corpus: self.corpus.clone(),
            lexicon: self.lexicon.clone(),
            extension: self.extension.clone(),
            svs: self.svs.clone(),
            dimension_map: self.dimension_map.clone(),
            labels: self.labels.clone(),
            k_percent: self.k_percent,
            n: self.n,
            selection: self.selection,
            model_kind: self.model_kind,
            loss: self.loss,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            stack_l2: self.stack_l2,
            beta_m: self.beta_m,
            lr_lambda: self.lr_lambda,
            literal_features: flag(self.literal_features),
            seed: self.seed,
            ..Config::default()
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Embed(_) => "embed",
            Command::BuildLexicon(_) => "build-lexicon",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Predict(_) => "predict",
            Command::AnalyzeBehavior(_) => "analyze-behavior",
        }
    }

    fn overlay(&self) -> Config {
        match self {
            Command::Synth(_) => Config::default(),
            Command::Embed(a) => Config {
                corpus: a.corpus.clone(),
                ..Config::default()
            },
            Command::BuildLexicon(a) => Config {
                lexicon: a.lexicon.clone(),
                embeddings: a.embeddings.clone(),
                pairs: a.pairs.clone(),
                q: a.q,
                threshold: a.threshold,
                lr_lambda: a.lr_lambda,
                corpus: a.corpus.clone(),
                ..Config::default()
            },
            Command::Train(a) => Config {
                lexicon_kind: a.lexicon_kind,
                features: a.features,
                ..Config::default()
            }
            .overlay_data(&a.data),
            Command::Evaluate(a) => Config {
                folds: a.folds,
                lexicons: (!a.lexicons.is_empty()).then(|| a.lexicons.clone()),
                feature_sets: (!a.feature_sets.is_empty()).then(|| a.feature_sets.clone()),
                global_selection: flag(a.global_selection),
                ..Config::default()
            }
            .overlay_data(&a.data),
            Command::Predict(a) => Config {
                model: a.model.clone(),
                corpus: a.corpus.clone(),
                lexicon: a.lexicon.clone(),
                extension: a.extension.clone(),
                ..Config::default()
            },
            Command::AnalyzeBehavior(a) => Config {
                predictions: a.predictions.clone(),
                tweets: a.tweets.clone(),
                edges: a.edges.clone(),
                x: a.x,
                window_start: a.window_start,
                window_end: a.window_end,
                denominator: a.denominator,
                ..Config::default()
            },
        }
    }
}

impl Config {
    fn overlay_data(self, data: &DataArgs) -> Config {
        data.overlay().overlay(self)
    }
}

impl Command {
    /// Flags that land inside the nested generator and embedding sections.
    fn apply_nested(&self, cfg: &mut Config) {
        match self {
            Command::Synth(a) => {
                let g = cfg.synth.get_or_insert_with(Default::default);
                if let Some(u) = a.users {
                    g.n_users = u;
                }
                if let Some(s) = a.seed {
                    g.seed = s;
                }
            }
            Command::Embed(a) => {
                let e = cfg.embedding.get_or_insert_with(Default::default);
                if let Some(v) = a.dim {
                    e.dim = v;
                }
                if let Some(v) = a.epochs {
                    e.epochs = v;
                }
                if let Some(v) = a.min_count {
                    e.min_count = v;
                }
                if let Some(v) = a.seed {
                    e.seed = v;
                }
            }
            _ => {}
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.global.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let workers = if cli.global.deterministic {
        1
    } else {
        cli.global
            .workers
            .or(file.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    };
    if workers == 0 {
        return Err(CliError::Config("--workers must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let name = cli.command.name();
    let overlay = cli.command.overlay();
    let mut cfg = file.overlay(overlay);
    cli.command.apply_nested(&mut cfg);
    cfg.workers = Some(workers);
    commands::run(name, cfg, &cli.global.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.global.log)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("valstack: error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => {
            eprintln!("valstack: internal error");
            ExitCode::from(1)
        }
    }
}
