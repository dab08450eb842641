//! Pipeline configuration. The same structure is read from `--config`,
//! overlaid with flags and environment variables, and written back to the
//! output directory fully resolved, so `--config <out>/config.json`
//! replays a run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use valstack_core::behavior::FriendDenominator;
use valstack_core::model::stack::LossMode;
use valstack_core::selection::SelectionMethod;
use valstack_core::sliwc::SgnsConfig;
use valstack_core::synth::GeneratorConfig;
use valstack_core::FeatureSources;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LexiconKind {
    /// The base dictionary.
    Liwc,
    /// The base dictionary merged with its extension.
    SLiwc,
}

impl LexiconKind {
    pub fn label(self) -> &'static str {
        match self {
            LexiconKind::Liwc => "LIWC",
            LexiconKind::SLiwc => "S-LIWC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Base,
    Stack,
    Both,
}

impl ModelKind {
    pub fn base(self) -> bool {
        matches!(self, ModelKind::Base | ModelKind::Both)
    }

    pub fn stack(self) -> bool {
        matches!(self, ModelKind::Stack | ModelKind::Both)
    }
}

macro_rules! config_struct {
    ($( $(#[$doc:meta])* $field:ident : $ty:ty, )*) => {
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct Config {
            $(
                $(#[$doc])*
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl Config {
            /// Fields set in `over` win.
            pub fn overlay(self, over: Config) -> Config {
                Config { $( $field: over.$field.or(self.$field), )* }
            }
        }
    };
}

config_struct! {
    corpus: PathBuf,
    lexicon: PathBuf,
    extension: PathBuf,
    svs: PathBuf,
    dimension_map: PathBuf,
    labels: PathBuf,
    embeddings: PathBuf,
    pairs: PathBuf,
    tweets: PathBuf,
    edges: PathBuf,
    model: PathBuf,
    predictions: PathBuf,

    lexicon_kind: LexiconKind,
    /// Lexicons compared by `evaluate`.
    lexicons: Vec<LexiconKind>,
    features: FeatureSources,
    /// Feature settings compared by `evaluate`.
    feature_sets: Vec<FeatureSources>,
    /// Raw counts and no URL/mention stripping.
    literal_features: bool,
    k_percent: u32,
    n: usize,
    selection: SelectionMethod,
    global_selection: bool,
    model_kind: ModelKind,
    loss: LossMode,
    epochs: usize,
    learning_rate: f64,
    stack_l2: f64,
    beta_m: f64,
    init_std: f64,
    batch_size: usize,
    lr_lambda: f64,
    folds: usize,
    seed: u64,
    q: usize,
    threshold: f64,
    x: usize,
    window_start: i64,
    window_end: i64,
    denominator: FriendDenominator,
    workers: usize,
    synth: GeneratorConfig,
    embedding: SgnsConfig,
}

impl Config {
    /// Reads a JSON config. Relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: Config =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.paths_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    fn paths_mut(&mut self) -> impl Iterator<Item = &mut PathBuf> {
        [
            &mut self.corpus,
            &mut self.lexicon,
            &mut self.extension,
            &mut self.svs,
            &mut self.dimension_map,
            &mut self.labels,
            &mut self.embeddings,
            &mut self.pairs,
            &mut self.tweets,
            &mut self.edges,
            &mut self.model,
            &mut self.predictions,
        ]
        .into_iter()
        .flatten()
    }
}

/// An input file that must exist; `flag` names the option in messages.
pub fn input<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    let p = path
        .as_deref()
        .ok_or_else(|| CliError::Config(format!("--{flag} is required")))?;
    if !p.is_file() {
        return Err(CliError::Config(format!("--{flag}: file not found: {}", p.display())));
    }
    Ok(p)
}

pub fn parse_sources(s: &str) -> std::result::Result<FeatureSources, String> {
    s.parse().map_err(|e: valstack_core::Error| e.to_string())
}

pub fn parse_selection(s: &str) -> std::result::Result<SelectionMethod, String> {
    s.parse().map_err(|e: valstack_core::Error| e.to_string())
}

pub fn parse_loss(s: &str) -> std::result::Result<LossMode, String> {
    s.parse().map_err(|e: valstack_core::Error| e.to_string())
}

pub fn parse_denominator(s: &str) -> std::result::Result<FriendDenominator, String> {
    match s.to_ascii_lowercase().as_str() {
        "followers" => Ok(FriendDenominator::Followers),
        "followees" => Ok(FriendDenominator::Followees),
        other => Err(format!("unknown denominator `{other}` (expected followers or followees)")),
    }
}
