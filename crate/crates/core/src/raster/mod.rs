//! Rasterization of layout plans into grayscale grid images.
//!
//! Images are single-channel, black (0) background with white ink. Each
//! placement is drawn inside its own cell and composited with max-blend.

mod codec;
mod font;

use std::collections::HashMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::layout::{derive_geometry, LayoutConfig, LayoutError, LayoutPlan};

pub use codec::{decode_png, encode_png, encode_png_rgb};
pub use font::{tofu_bitmap, FontHandle, GlyphBitmap};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("font not found: {}", .0.display())]
    FontNotFound(PathBuf),
    #[error("cannot read font {}: {source}", path.display())]
    FontRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse font {0}")]
    FontParse(String),
    #[error("placement ({row}, {col}) lies outside a {grid_dim}x{grid_dim} grid")]
    GeometryMismatch { row: u32, col: u32, grid_dim: u32 },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("cannot decode PNG: {0}")]
    PngDecode(String),
}

/// A rendered square grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScImage {
    pub side: u32,
    pub pixels: Vec<u8>,
}

impl ScImage {
    pub fn blank(side: u32) -> Self {
        ScImage {
            side,
            pixels: vec![0; (side as usize) * (side as usize)],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.side + x) as usize]
    }

    /// Pixels scaled into [0, 1] as the classifier consumes them.
    pub fn to_unit_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&v| f64::from(v) / 255.0).collect()
    }
}

/// Draw every placement of `plan` into a fresh `image_size` square.
pub fn render(
    plan: &LayoutPlan,
    font: &FontHandle,
    config: &LayoutConfig,
) -> Result<ScImage, RasterError> {
    let geom = derive_geometry(config)?;
    let mut image = ScImage::blank(geom.image_size());
    let mut cache: HashMap<&str, GlyphBitmap> = HashMap::new();
    let side = image.side;

    for p in &plan.placements {
        if p.row >= geom.grid_dim || p.col >= geom.grid_dim {
            return Err(RasterError::GeometryMismatch {
                row: p.row,
                col: p.col,
                grid_dim: geom.grid_dim,
            });
        }
        let bm = cache
            .entry(p.grapheme.as_str())
            .or_insert_with(|| font.rasterize_glyph(&p.grapheme, geom.cell_px));
        let (x0, y0) = geom.cell_origin(p.row, p.col);
        for y in 0..bm.height {
            let row = &bm.coverage[(y * bm.width) as usize..((y + 1) * bm.width) as usize];
            let start = ((y0 + y) * side + x0) as usize;
            for (dst, &src) in image.pixels[start..start + bm.width as usize]
                .iter_mut()
                .zip(row)
            {
                *dst = (*dst).max(src);
            }
        }
    }
    Ok(image)
}

/// Layout and render in one step.
pub fn render_text(
    text: &str,
    font: &FontHandle,
    config: &LayoutConfig,
) -> Result<ScImage, RasterError> {
    let plan = crate::layout::plan_layout(text, config)?;
    render(&plan, font, config)
}
