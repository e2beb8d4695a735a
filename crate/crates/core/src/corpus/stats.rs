use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};
use crate::layout::{segment, Segmentation};

/// Text length summary in grapheme clusters (after char-level segmentation).
///
/// Percentiles use the lower nearest rank: `p(q) = sorted[floor((n-1)·q)]`,
/// so p50 is the lower median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub count: usize,
    pub mean: f64,
    pub median: usize,
    pub p50: usize,
    pub p90: usize,
    pub p99: usize,
    pub max: usize,
}

impl LengthStats {
    /// Summarize a set of lengths. Order of `lengths` does not matter.
    pub fn from_lengths(mut lengths: Vec<usize>) -> Result<Self, CorpusError> {
        if lengths.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        lengths.sort_unstable();
        let n = lengths.len();
        let pct = |q: usize| lengths[(n - 1) * q / 100];
        let total: u128 = lengths.iter().map(|&l| l as u128).sum();
        let median = pct(50);
        Ok(LengthStats {
            count: n,
            mean: total as f64 / n as f64,
            median,
            p50: median,
            p90: pct(90),
            p99: pct(99),
            max: lengths[n - 1],
        })
    }
}

pub fn text_length(text: &str) -> usize {
    segment(text, Segmentation::CharLevel).len()
}

pub fn stats(corpus: &Corpus) -> Result<LengthStats, CorpusError> {
    LengthStats::from_lengths(corpus.samples.iter().map(|s| text_length(&s.text)).collect())
}

pub const DEFAULT_GRID_CANDIDATES: [u32; 5] = [8, 14, 16, 28, 32];

/// Pick the smallest grid whose cut-length covers the median length, or the
/// largest candidate when none does. Returns `(grid_dim, cut_length)`.
pub fn suggest_cut_length(stats: &LengthStats, candidates: &[u32]) -> Option<(u32, u32)> {
    let mut sorted: Vec<u32> = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let grid = sorted
        .iter()
        .copied()
        .find(|&g| (g as usize) * (g as usize) >= stats.median)
        .or_else(|| sorted.last().copied())?;
    Some((grid, grid * grid))
}
