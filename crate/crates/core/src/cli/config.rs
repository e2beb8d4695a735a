//! JSON run configuration merged with command-line overrides.
//!
//! Precedence for every setting: command-line flag, then the config file,
//! then the built-in default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{ModelConfig, TrainConfig};
use crate::layout::{derive_geometry, FontSpec, LayoutConfig, Segmentation, SizePolicy};
use crate::Error;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    pub image_size: Option<u32>,
    pub grid_dim: Option<u32>,
    pub cut_length: Option<u32>,
    pub segmentation: Option<Segmentation>,
    pub font: Option<FontSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub input_side: Option<u32>,
    pub num_classes: Option<u32>,
    pub conv_channels: Option<Vec<u32>>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub num_classes: Option<u32>,
    /// `"all"` or a comma list of 1-based column numbers (label is column 1).
    pub columns: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub csv: Option<PathBuf>,
    pub test_csv: Option<PathBuf>,
    pub font: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub model: Option<PathBuf>,
}

/// Everything a run can be configured with, as read from one JSON file.
/// All fields are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub layout: LayoutSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub corpus: CorpusSection,
    pub paths: PathsSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self, Error> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }
}

pub const DEFAULT_IMAGE_SIZE: u32 = 224;
pub const DEFAULT_GRID_DIM: u32 = 8;

/// Layout values supplied on the command line.
#[derive(Debug, Clone, Default)]
pub struct LayoutOverrides {
    pub image_size: Option<u32>,
    pub grid_dim: Option<u32>,
    pub cut_length: Option<u32>,
    pub segmentation: Option<Segmentation>,
    pub font: Option<PathBuf>,
}

impl LayoutSection {
    /// Merge flags over this section and validate the result. `cut_length`
    /// defaults to `grid_dim²` when neither source gives one.
    pub fn resolve(&self, flags: &LayoutOverrides) -> Result<LayoutConfig, Error> {
        let image_size = flags
            .image_size
            .or(self.image_size)
            .unwrap_or(DEFAULT_IMAGE_SIZE);
        let grid_dim = flags.grid_dim.or(self.grid_dim).unwrap_or(DEFAULT_GRID_DIM);
        // A grid flag without a cut-length flag re-derives the cut-length.
        let cut_length = match (flags.cut_length, flags.grid_dim) {
            (Some(c), _) => c,
            (None, Some(g)) => g.saturating_mul(g),
            (None, None) => self.cut_length.unwrap_or(grid_dim.saturating_mul(grid_dim)),
        };
        let segmentation = flags
            .segmentation
            .or(self.segmentation)
            .unwrap_or_default();
        let mut font = self.font.clone().unwrap_or_default();
        if let Some(p) = &flags.font {
            font.path = Some(p.clone());
        }
        let config = LayoutConfig {
            image_size,
            grid_dim,
            cut_length,
            segmentation,
            font: FontSpec {
                path: font.path,
                size_policy: SizePolicy::EmToCell,
            },
        };
        derive_geometry(&config)?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOverrides {
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
}

impl TrainSection {
    pub fn resolve(&self, flags: &TrainOverrides) -> Result<TrainConfig, Error> {
        let d = TrainConfig::default();
        let cfg = TrainConfig {
            learning_rate: flags
                .learning_rate
                .or(self.learning_rate)
                .unwrap_or(d.learning_rate),
            momentum: flags.momentum.or(self.momentum).unwrap_or(d.momentum),
            batch_size: flags.batch_size.or(self.batch_size).unwrap_or(d.batch_size),
            epochs: flags.epochs.or(self.epochs).unwrap_or(d.epochs),
            seed: flags.seed.or(self.seed).unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModelOverrides {
    pub conv_channels: Option<Vec<u32>>,
    pub seed: Option<u64>,
}

impl ModelSection {
    /// `input_side` and `num_classes` fall back to the dataset's values.
    pub fn resolve(
        &self,
        flags: &ModelOverrides,
        input_side: u32,
        num_classes: u32,
    ) -> Result<ModelConfig, Error> {
        let d = ModelConfig::default();
        let cfg = ModelConfig {
            input_side: self.input_side.unwrap_or(input_side),
            num_classes: self.num_classes.unwrap_or(num_classes),
            conv_channels: flags
                .conv_channels
                .clone()
                .or_else(|| self.conv_channels.clone())
                .unwrap_or(d.conv_channels),
            seed: flags.seed.or(self.seed).unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
