//! Text classification through rendered glyph grids.
//!
//! Text is laid out character by character on a fixed square grid
//! ([`layout`]), drawn into a grayscale image with a scalable font
//! ([`raster`]), and the images are classified by a small convolutional
//! network ([`classifier`]). [`corpus`] handles CSV ingestion, length
//! statistics and rendered datasets; [`cli`] wires it all into the
//! `superchars` command.

pub mod classifier;
pub mod cli;
pub mod corpus;
pub mod layout;
pub mod raster;

use std::path::PathBuf;

use thiserror::Error;

use classifier::ClassifierError;
use corpus::CorpusError;
use layout::LayoutError;
use raster::RasterError;

/// Process exit codes used by the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const FONT: i32 = 3;
    pub const MISMATCH: i32 = 4;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Layout(_) => exit::CONFIG,
            Error::Io { .. } => exit::IO,
            Error::Raster(e) => raster_code(e),
            Error::Corpus(e) => corpus_code(e),
            Error::Classifier(e) => match e {
                ClassifierError::InvalidConfig(_) => exit::CONFIG,
                ClassifierError::DatasetMismatch(_) | ClassifierError::ConfigMismatch(_) => {
                    exit::MISMATCH
                }
                ClassifierError::Corpus(c) => corpus_code(c),
                ClassifierError::Raster(r) => raster_code(r),
                _ => exit::IO,
            },
        }
    }
}

fn raster_code(e: &RasterError) -> i32 {
    match e {
        RasterError::FontNotFound(_) | RasterError::FontRead { .. } | RasterError::FontParse(_) => {
            exit::FONT
        }
        RasterError::Layout(_) => exit::CONFIG,
        RasterError::GeometryMismatch { .. } => exit::MISMATCH,
        RasterError::PngDecode(_) => exit::IO,
    }
}

fn corpus_code(e: &CorpusError) -> i32 {
    match e {
        CorpusError::DatasetMismatch(_) => exit::MISMATCH,
        CorpusError::InvalidColumns(_) | CorpusError::InvalidSplit(_) => exit::CONFIG,
        _ => exit::IO,
    }
}
