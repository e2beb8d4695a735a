//! Glyph grid layout.
//!
//! Text is split into tokens and assigned to cells of a square grid in
//! reading order before anything is drawn. Cells that receive no placement
//! are padding and stay blank.

mod segment;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_segmentation::UnicodeSegmentation;

pub use segment::{grapheme_count, is_whitespace_grapheme, segment};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("image size {image_size} is not divisible by grid dimension {grid_dim}")]
    NonDivisible { image_size: u32, grid_dim: u32 },
    #[error("invalid layout config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    /// One cell per grapheme cluster.
    #[default]
    CharLevel,
    /// Whitespace-delimited words are kept on one row when they fit.
    WordLevel,
}

impl std::str::FromStr for Segmentation {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "char" | "char_level" => Ok(Segmentation::CharLevel),
            "word" | "word_level" => Ok(Segmentation::WordLevel),
            other => Err(LayoutError::InvalidConfig(format!(
                "unknown segmentation mode {other:?} (expected char_level or word_level)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SizePolicy {
    /// The font's em square is scaled to the cell side.
    #[default]
    EmToCell,
}

/// Which font to draw with. `path: None` selects the bundled test font.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct FontSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub size_policy: SizePolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub image_size: u32,
    pub grid_dim: u32,
    pub cut_length: u32,
    #[serde(default)]
    pub segmentation: Segmentation,
    #[serde(default)]
    pub font: FontSpec,
}

impl LayoutConfig {
    /// Config with `cut_length = grid_dim²` and the default font.
    pub fn new(image_size: u32, grid_dim: u32, segmentation: Segmentation) -> Self {
        LayoutConfig {
            image_size,
            grid_dim,
            cut_length: grid_dim.saturating_mul(grid_dim),
            segmentation,
            font: FontSpec::default(),
        }
    }

    pub fn geometry(&self) -> Result<CellGeometry, LayoutError> {
        derive_geometry(self)
    }
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig::new(224, 8, Segmentation::CharLevel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellGeometry {
    pub cell_px: u32,
    pub grid_dim: u32,
}

impl CellGeometry {
    pub fn image_size(&self) -> u32 {
        self.cell_px * self.grid_dim
    }

    /// Top-left pixel of the cell at (row, col).
    pub fn cell_origin(&self, row: u32, col: u32) -> (u32, u32) {
        (col * self.cell_px, row * self.cell_px)
    }
}

pub fn derive_geometry(config: &LayoutConfig) -> Result<CellGeometry, LayoutError> {
    let LayoutConfig {
        image_size,
        grid_dim,
        cut_length,
        ..
    } = *config;
    if grid_dim == 0 {
        return Err(LayoutError::InvalidConfig("grid_dim must be >= 1".into()));
    }
    if image_size < grid_dim {
        return Err(LayoutError::InvalidConfig(format!(
            "image_size {image_size} is smaller than grid_dim {grid_dim}"
        )));
    }
    if image_size % grid_dim != 0 {
        return Err(LayoutError::NonDivisible {
            image_size,
            grid_dim,
        });
    }
    if u64::from(cut_length) != u64::from(grid_dim) * u64::from(grid_dim) {
        return Err(LayoutError::InvalidConfig(format!(
            "cut_length {cut_length} must equal grid_dim² = {}",
            u64::from(grid_dim) * u64::from(grid_dim)
        )));
    }
    Ok(CellGeometry {
        cell_px: image_size / grid_dim,
        grid_dim,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GlyphPlacement {
    pub grapheme: String,
    pub row: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LayoutPlan {
    pub placements: Vec<GlyphPlacement>,
    /// The input held more than fit in the grid.
    pub truncated: bool,
}

impl LayoutPlan {
    pub fn len(&self) -> usize {
        self.placements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }
}

/// Assign the tokens of `text` to grid cells.
pub fn plan_layout(text: &str, config: &LayoutConfig) -> Result<LayoutPlan, LayoutError> {
    let geom = derive_geometry(config)?;
    let tokens = segment(text, config.segmentation);
    Ok(match config.segmentation {
        Segmentation::CharLevel => plan_chars(tokens, geom.grid_dim),
        Segmentation::WordLevel => plan_words(&tokens, geom.grid_dim),
    })
}

fn plan_chars(tokens: Vec<String>, grid: u32) -> LayoutPlan {
    let cut = (grid as usize) * (grid as usize);
    let truncated = tokens.len() > cut;
    let placements = tokens
        .into_iter()
        .take(cut)
        .enumerate()
        .map(|(i, grapheme)| GlyphPlacement {
            grapheme,
            row: (i / grid as usize) as u32,
            col: (i % grid as usize) as u32,
        })
        .collect();
    LayoutPlan {
        placements,
        truncated,
    }
}

fn plan_words(words: &[String], grid: u32) -> LayoutPlan {
    let mut plan = LayoutPlan::default();
    let (mut row, mut col) = (0u32, 0u32);

    for word in words {
        let graphemes: Vec<&str> = word.graphemes(true).collect();
        let len = graphemes.len() as u32;
        let mut start = if col == 0 { 0 } else { col + 1 };

        if len <= grid {
            if start + len > grid {
                row += 1;
                start = 0;
            }
            if row >= grid {
                plan.truncated = true;
                break;
            }
            for (k, g) in graphemes.iter().enumerate() {
                plan.placements.push(GlyphPlacement {
                    grapheme: (*g).to_owned(),
                    row,
                    col: start + k as u32,
                });
            }
            col = start + len;
        } else {
            // Longer than a row: fill greedily and wrap mid-word.
            if start >= grid {
                row += 1;
                start = 0;
            }
            col = start;
            for g in graphemes {
                if col == grid {
                    row += 1;
                    col = 0;
                }
                if row >= grid {
                    plan.truncated = true;
                    return plan;
                }
                plan.placements.push(GlyphPlacement {
                    grapheme: g.to_owned(),
                    row,
                    col,
                });
                col += 1;
            }
        }
    }
    plan
}
