use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or contradictory configuration.
    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: valstack_core::Error },

    #[error(transparent)]
    Core(#[from] valstack_core::Error),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// 0 success, 2 input/config error, 3 degenerate data, 1 internal.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::File { source, .. } | CliError::Core(source) => core_code(source),
            CliError::Internal(_) => 1,
        }
    }
}

fn core_code(e: &valstack_core::Error) -> u8 {
    match e {
        valstack_core::Error::Degenerate(_) => 3,
        _ => 2,
    }
}

/// Attaches the offending path to a loader error.
pub trait WithPath<T> {
    fn at(self, path: &std::path::Path) -> Result<T>;
}

impl<T> WithPath<T> for valstack_core::Result<T> {
    fn at(self, path: &std::path::Path) -> Result<T> {
        self.map_err(|source| CliError::File {
            path: path.to_path_buf(),
            source,
        })
    }
}
