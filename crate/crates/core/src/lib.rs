//! Personal-value prediction from lexicon word-category features.

pub mod behavior;
pub mod corpus;
pub mod dims;
pub mod error;
pub mod evaluation;
pub mod labels;
pub mod lexicon;
pub mod model;
pub mod selection;
pub mod sliwc;
pub mod stats;
pub mod synth;

pub use corpus::{FeatureMatrix, FeatureSources, Source, UserRecord};
pub use dims::{Dimension, N_DIMS};
pub use error::{Error, Result};
pub use labels::{BinaryLabelSet, DimensionMap, Label, SvsResponse, ValueProfile};
pub use lexicon::{CategoryId, CategoryScoreVector, Lexicon};
