//! Library behind the `lpgs` binary. Every subcommand is a plain function so
//! the same code paths can be driven from tests.

pub mod commands;
pub mod manifest;

use std::path::{Path, PathBuf};

use lpgs_core::atm::AtmError;
use lpgs_core::codec::{CodecError, PlyError};
use lpgs_core::image::ImageError;
use lpgs_core::raster::RasterError;
use lpgs_core::scene::SceneError;
use lpgs_core::trainer::TrainerError;
use thiserror::Error;

pub use commands::{run, Cli, Command};
pub use manifest::{DatasetManifest, ImageEntry, InitBox, Split, SplitFilter};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("unknown camera id {id} (dataset has {count})")]
    UnknownCamera { id: usize, count: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("image {path}: {source}")]
    Image {
        path: PathBuf,
        source: ImageError,
    },
    #[error("image {path} is {got:?}, manifest camera expects {expected:?}")]
    ImageSize {
        path: PathBuf,
        got: [usize; 2],
        expected: [usize; 2],
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Ply(#[from] PlyError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trainer(#[from] TrainerError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Atm(#[from] AtmError),
    #[error("log: {0}")]
    Log(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
