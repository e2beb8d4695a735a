//! A small from-scratch CNN for glyph-grid images.
//!
//! All arithmetic is `f64`, gradients are hand-derived, and every random
//! draw comes from [`Prng`], so a seed fixes the whole training run.

mod io;
mod model;
pub mod ops;
mod rng;
mod tensor;
mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::{config_hash, CorpusError};
use crate::layout::LayoutConfig;
use crate::raster::{render_text, FontHandle, RasterError};

pub use io::{from_bytes, load_model, save_model, to_bytes, FORMAT_VERSION, MAGIC};
pub use model::{
    init_model, ConvLayer, DenseLayer, Executor, ForwardCache, Gradients, Model, ModelConfig,
    Prediction,
};
pub use ops::{conv2d, maxpool2, relu, softmax_xent, Pooled};
pub use rng::Prng;
pub use tensor::Tensor;
pub use train::{evaluate, predict_all, train, Dataset, EpochLog, Evaluation, TrainConfig};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("{0}")]
    StateError(String),
    #[error("dataset mismatch: {0}")]
    DatasetMismatch(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("layout config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("bad model file: {0}")]
    ModelFormat(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// Render `text` with `layout` and `font` and classify it.
///
/// The layout/font fingerprint must match the dataset the model was trained
/// on unless `allow_mismatch` is set.
pub fn predict(
    model: &Model,
    text: &str,
    layout: &LayoutConfig,
    font: &FontHandle,
    allow_mismatch: bool,
) -> Result<Prediction, ClassifierError> {
    if layout.image_size != model.config.input_side {
        return Err(ClassifierError::ConfigMismatch(format!(
            "layout renders {}px images, model takes {}px",
            layout.image_size, model.config.input_side
        )));
    }
    if !allow_mismatch {
        if let Some(expected) = &model.dataset_hash {
            let got = config_hash(layout, font.sha256());
            if &got != expected {
                return Err(ClassifierError::ConfigMismatch(
                    "layout or font differs from the training dataset".into(),
                ));
            }
        }
    }
    let image = render_text(text, font, layout)?;
    model.predict_input(&image.to_unit_f64())
}
