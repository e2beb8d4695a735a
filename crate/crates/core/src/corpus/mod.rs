//! Labeled text corpora: CSV ingestion, length statistics and rendered
//! image datasets.

mod dataset;
mod reader;
mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use dataset::{
    build_dataset, build_dataset_streaming, config_hash, load_image, DatasetManifest,
    ManifestEntry, SplitSummary, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use reader::{read_csv, CsvSamples, TextColumns};
pub use stats::{stats, suggest_cut_length, text_length, LengthStats, DEFAULT_GRID_CANDIDATES};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("label {label} at line {line} is outside 1..={num_classes}")]
    LabelOutOfRange {
        line: u64,
        label: i64,
        num_classes: u32,
    },
    #[error("{} contains no samples", .0.display())]
    EmptyFile(PathBuf),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid column spec: {0}")]
    InvalidColumns(String),
    #[error("invalid split name {0:?}")]
    InvalidSplit(String),
    #[error("cannot parse manifest {}: {reason}", path.display())]
    ManifestParse { path: PathBuf, reason: String },
    #[error("inconsistent manifest: {0}")]
    Inconsistent(String),
    #[error("dataset mismatch: {0}")]
    DatasetMismatch(String),
    #[error("render failed: {0}")]
    Render(String),
}

/// One labeled record. `class` is 0-based; CSV files and manifests use the
/// 1-based [`label`](LabeledSample::label).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub class: u32,
    pub text: String,
}

impl LabeledSample {
    pub fn label(&self) -> u32 {
        self.class + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub num_classes: u32,
    pub samples: Vec<LabeledSample>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
