use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] inkportrait_core::Error),
}

pub type CliResult<T> = Result<T, CliError>;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use inkportrait_core::Error as E;
        match self {
            Self::Config(_) | Self::Core(E::Config(_) | E::Param(_)) => EXIT_CONFIG,
            Self::Data(_) | Self::Core(E::Data(_) | E::Format(_) | E::Shape { .. }) => EXIT_DATA,
            Self::Io { .. } | Self::Core(E::Usage(_)) => EXIT_FAILURE,
        }
    }
}
