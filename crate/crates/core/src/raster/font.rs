use std::fmt;
use std::path::Path;
use std::sync::Arc;

use ab_glyph::{point, Font, FontArc, GlyphId, PxScale};
use sha2::{Digest, Sha256};

use super::RasterError;
use crate::layout::is_whitespace_grapheme;

static BUNDLED_FONT: &[u8] = include_bytes!("../../assets/fonts/ScTestSans.ttf");

/// A parsed scalable font. Cloning is cheap and handles can be shared across
/// threads.
#[derive(Clone)]
pub struct FontHandle {
    font: FontArc,
    source: Arc<str>,
    sha256: Arc<str>,
}

impl fmt::Debug for FontHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FontHandle")
            .field("source", &self.source)
            .field("sha256", &self.sha256)
            .finish()
    }
}

/// Cell-sized coverage bitmap, row-major, 0 = no ink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphBitmap {
    pub width: u32,
    pub height: u32,
    pub coverage: Vec<u8>,
}

impl GlyphBitmap {
    pub fn blank(width: u32, height: u32) -> Self {
        GlyphBitmap {
            width,
            height,
            coverage: vec![0; (width * height) as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.coverage[(y * self.width + x) as usize]
    }

    pub fn is_blank(&self) -> bool {
        self.coverage.iter().all(|&v| v == 0)
    }

    fn blend(&mut self, x: i64, y: i64, v: u8) {
        if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
            return;
        }
        let px = &mut self.coverage[(y as u32 * self.width + x as u32) as usize];
        *px = (*px).max(v);
    }
}

/// Hollow square drawn for graphemes the font cannot render: 1 px stroke,
/// inset 2 px from the cell edge. Cells under 5 px get the stroke on the
/// border instead.
pub fn tofu_bitmap(cell_px: u32) -> GlyphBitmap {
    let mut bm = GlyphBitmap::blank(cell_px, cell_px);
    if cell_px == 0 {
        return bm;
    }
    let (lo, hi) = if cell_px >= 5 {
        (2, cell_px - 3)
    } else {
        (0, cell_px - 1)
    };
    for i in lo..=hi {
        for (x, y) in [(i, lo), (i, hi), (lo, i), (hi, i)] {
            bm.coverage[(y * cell_px + x) as usize] = 255;
        }
    }
    bm
}

// Zero-width joiners and variation selectors carry no ink of their own.
fn is_format_only(c: char) -> bool {
    matches!(c, '\u{200B}'..='\u{200D}' | '\u{2060}' | '\u{FE00}'..='\u{FE0F}' | '\u{E0100}'..='\u{E01EF}')
}

impl FontHandle {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                RasterError::FontNotFound(path.to_path_buf())
            } else {
                RasterError::FontRead {
                    path: path.to_path_buf(),
                    source: e,
                }
            }
        })?;
        Self::from_bytes(bytes, path.display().to_string())
    }

    pub fn from_bytes(bytes: Vec<u8>, source: impl Into<String>) -> Result<Self, RasterError> {
        let source = source.into();
        let sha256 = hex::encode(Sha256::digest(&bytes));
        let font = FontArc::try_from_vec(bytes)
            .map_err(|e| RasterError::FontParse(format!("{source}: {e}")))?;
        Ok(FontHandle {
            font,
            source: source.into(),
            sha256: sha256.into(),
        })
    }

    /// The test font shipped with the crate (Latin plus a few CJK characters).
    pub fn bundled() -> Self {
        Self::from_bytes(BUNDLED_FONT.to_vec(), "<bundled ScTestSans>")
            .expect("bundled font parses")
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Hex SHA-256 of the font file bytes.
    pub fn sha256(&self) -> &str {
        &self.sha256
    }

    fn inked_chars(grapheme: &str) -> impl Iterator<Item = char> + '_ {
        grapheme
            .chars()
            .filter(|c| !c.is_whitespace() && !is_format_only(*c))
    }

    /// Whether every inked scalar of the grapheme maps to a glyph.
    /// Whitespace counts as covered.
    pub fn has_glyph(&self, grapheme: &str) -> bool {
        if grapheme.is_empty() {
            return false;
        }
        if is_whitespace_grapheme(grapheme) {
            return true;
        }
        let mut any = false;
        for c in Self::inked_chars(grapheme) {
            if c.is_control() || self.font.glyph_id(c) == GlyphId(0) {
                return false;
            }
            any = true;
        }
        any
    }

    /// Rasterize one grapheme into a `cell_px` square.
    ///
    /// The em square is scaled to the cell, the base glyph's advance box is
    /// centered horizontally and the font ascent sits on the top edge. Ink
    /// outside the cell is clipped. Coverage is rounded half away from zero.
    pub fn rasterize_glyph(&self, grapheme: &str, cell_px: u32) -> GlyphBitmap {
        let mut bm = GlyphBitmap::blank(cell_px, cell_px);
        if cell_px == 0 || is_whitespace_grapheme(grapheme) {
            return bm;
        }
        if !self.has_glyph(grapheme) {
            return tofu_bitmap(cell_px);
        }

        let units_per_em = self.font.units_per_em().unwrap_or(1000.0);
        let px_per_unit = cell_px as f32 / units_per_em;
        let height_unscaled = self.font.ascent_unscaled() - self.font.descent_unscaled();
        let scale = PxScale::from(height_unscaled * px_per_unit);
        let baseline = self.font.ascent_unscaled() * px_per_unit;

        let mut chars = Self::inked_chars(grapheme);
        let Some(base) = chars.next() else {
            return bm;
        };
        let base_id = self.font.glyph_id(base);
        let advance = self.font.h_advance_unscaled(base_id) * px_per_unit;
        let origin = point((cell_px as f32 - advance) / 2.0, baseline);

        // Later scalars (combining marks) follow the pen like ordinary text;
        // zero-advance marks are designed to overhang the preceding glyph.
        let mut pen = origin;
        for id in std::iter::once(base_id).chain(chars.map(|c| self.font.glyph_id(c))) {
            let glyph = id.with_scale_and_position(scale, pen);
            pen.x += self.font.h_advance_unscaled(id) * px_per_unit;
            if let Some(outlined) = self.font.outline_glyph(glyph) {
                let bounds = outlined.px_bounds();
                let (bx, by) = (bounds.min.x as i64, bounds.min.y as i64);
                outlined.draw(|x, y, c| {
                    let v = (c.clamp(0.0, 1.0) * 255.0).round() as u8;
                    bm.blend(bx + i64::from(x), by + i64::from(y), v);
                });
            }
        }
        bm
    }
}
