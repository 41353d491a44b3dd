//! Photo to pen-plotter pipeline: configuration, file formats and the
//! `train`, `sketch`, `plot` and `run` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{cmd_plot, cmd_run, cmd_sketch, cmd_train, Artifact, Manifest, PlotReport};
pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
