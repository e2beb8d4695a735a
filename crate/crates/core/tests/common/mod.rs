#![allow(dead_code)]

use proptest::prelude::*;
use superchars::layout::{plan_layout, segment, LayoutConfig, Segmentation};
use unicode_segmentation::UnicodeSegmentation;

/// Building blocks for random texts: ASCII, Latin-1, CJK covered by the test
/// font, a glyph the font lacks, combining marks, emoji and whitespace.
const PIECES: &[&str] = &[
    "a", "b", "z", "Q", "7", ".", ",", "é", "ß", "ñ", "你", "好", "超", "级", "字", "符", "。",
    "龍", "e\u{301}", "a\u{300}\u{323}", "👍", "👨\u{200d}👩\u{200d}👧", "\u{7}", " ", "  ",
    "\t", "\n", "\r\n", "\u{3000}", "hello", "world", "supercalifragilistic",
];

pub fn text_strategy(max_pieces: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(PIECES), 0..max_pieces).prop_map(|v| v.concat())
}

pub fn config_strategy() -> impl Strategy<Value = LayoutConfig> {
    (1u32..=16, 1u32..=4, prop::bool::ANY).prop_map(|(grid, cell, words)| {
        let seg = if words {
            Segmentation::WordLevel
        } else {
            Segmentation::CharLevel
        };
        LayoutConfig::new(grid * cell, grid, seg)
    })
}

/// Check every layout law for one (text, config) pair. Returns a
/// description of the first violation.
pub fn check_layout_laws(text: &str, config: &LayoutConfig) -> Result<(), String> {
    let plan = plan_layout(text, config).map_err(|e| e.to_string())?;
    let grid = config.grid_dim;
    let cut = config.cut_length as usize;

    if plan.len() > cut {
        return Err(format!("{} placements exceed cut_length {cut}", plan.len()));
    }
    let mut last: Option<u32> = None;
    for p in &plan.placements {
        if p.row >= grid || p.col >= grid {
            return Err(format!("cell ({}, {}) outside a {grid}x{grid} grid", p.row, p.col));
        }
        let idx = p.row * grid + p.col;
        if last.is_some_and(|l| idx <= l) {
            return Err(format!("cell ({}, {}) repeats or goes backwards", p.row, p.col));
        }
        last = Some(idx);
    }

    if plan_layout(text, config).map_err(|e| e.to_string())? != plan {
        return Err("plan differs between two calls".into());
    }

    match config.segmentation {
        Segmentation::CharLevel => {
            let tokens = segment(text, Segmentation::CharLevel);
            if plan.len() != tokens.len().min(cut) {
                return Err(format!(
                    "count law: {} placements for {} graphemes",
                    plan.len(),
                    tokens.len()
                ));
            }
            if plan.truncated != (tokens.len() > cut) {
                return Err("truncated flag disagrees with grapheme count".into());
            }
            if plan.placements.iter().zip(&tokens).any(|(p, t)| &p.grapheme != t) {
                return Err("placed graphemes are not the segmented text in order".into());
            }
            check_prefix_monotone(text, config, &plan)?;
        }
        Segmentation::WordLevel => check_no_split(text, grid, &plan)?,
    }
    Ok(())
}

fn check_prefix_monotone(
    text: &str,
    config: &LayoutConfig,
    full: &superchars::layout::LayoutPlan,
) -> Result<(), String> {
    let graphemes: Vec<&str> = text.graphemes(true).collect();
    for k in 0..=graphemes.len() {
        let prefix = graphemes[..k].concat();
        let p = plan_layout(&prefix, config).map_err(|e| e.to_string())?;
        if p.len() > full.len() || p.placements[..] != full.placements[..p.len()] {
            return Err(format!("plan of the {k}-grapheme prefix is not a prefix of the full plan"));
        }
        if p.truncated && !full.truncated {
            return Err(format!("{k}-grapheme prefix truncated but full text not"));
        }
    }
    Ok(())
}

fn check_no_split(
    text: &str,
    grid: u32,
    plan: &superchars::layout::LayoutPlan,
) -> Result<(), String> {
    let words = segment(text, Segmentation::WordLevel);
    let mut placed = plan.placements.iter();
    let mut prev_end: Option<(u32, u32)> = None;
    for word in &words {
        let gs: Vec<&str> = word.graphemes(true).collect();
        let cells: Vec<_> = placed.by_ref().take(gs.len()).collect();
        if cells.is_empty() {
            break;
        }
        if cells.iter().zip(&gs).any(|(p, g)| p.grapheme != *g) {
            return Err(format!("word {word:?} placed out of order"));
        }
        if gs.len() as u32 <= grid {
            if cells.len() != gs.len() {
                return Err(format!("short word {word:?} only partly placed"));
            }
            let row = cells[0].row;
            let col = cells[0].col;
            for (k, p) in cells.iter().enumerate() {
                if p.row != row || p.col != col + k as u32 {
                    return Err(format!("word {word:?} split across cells"));
                }
            }
        }
        if let Some((r, c)) = prev_end {
            let first = cells[0];
            if first.row == r && first.col != c + 2 {
                return Err(format!("word {word:?} not separated by exactly one cell"));
            }
        }
        let end = cells[cells.len() - 1];
        prev_end = Some((end.row, end.col));
    }
    if placed.next().is_some() {
        return Err("more placements than graphemes".into());
    }
    Ok(())
}

/// Random text assembled from the same pieces as [`text_strategy`].
pub fn random_text(rng: &mut superchars::classifier::Prng, max_pieces: u64) -> String {
    let n = rng.below(max_pieces + 1);
    (0..n)
        .map(|_| PIECES[rng.below(PIECES.len() as u64) as usize])
        .collect()
}

/// Direct six-loop 3x3 convolution with zero padding 1.
pub fn conv_oracle(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    kernels: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let f = bias.len();
    let mut out = vec![0.0; f * h * w];
    for fo in 0..f {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias[fo];
                for ci in 0..c {
                    for dy in 0..3 {
                        for dx in 0..3 {
                            let iy = y as i64 + dy as i64 - 1;
                            let ix = x as i64 + dx as i64 - 1;
                            if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                                continue;
                            }
                            acc += input[ci * h * w + iy as usize * w + ix as usize]
                                * kernels[((fo * c + ci) * 3 + dy) * 3 + dx];
                        }
                    }
                }
                out[(fo * h + y) * w + x] = acc;
            }
        }
    }
    out
}

/// Window-by-window 2x2 max.
pub fn maxpool_oracle(input: &[f64], (c, h, w): (usize, usize, usize)) -> Vec<f64> {
    let mut out = Vec::with_capacity(c * (h / 2) * (w / 2));
    for ch in 0..c {
        for oy in 0..h / 2 {
            for ox in 0..w / 2 {
                let mut m = f64::NEG_INFINITY;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    m = m.max(input[ch * h * w + (2 * oy + dy) * w + 2 * ox + dx]);
                }
                out.push(m);
            }
        }
    }
    out
}

/// Below this magnitude both gradients are treated as zero; the central
/// difference itself carries about 1e-11 of rounding noise at eps 1e-5.
pub const GRAD_FLOOR: f64 = 1e-7;

/// Largest relative error between analytic gradients and central finite
/// differences over every parameter of `model`, and how many parameters
/// were above [`GRAD_FLOOR`] and thus compared.
pub fn finite_difference_max_rel_error(
    model: &superchars::classifier::Model,
    input: &[f64],
    class: usize,
    eps: f64,
) -> (f64, usize) {
    let cache = model.forward_cached(input).unwrap();
    let (grads, _) = model.backward(&cache, class).unwrap();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    let mut compared = 0;
    let n_tensors = grads.0.len();
    for t in 0..n_tensors {
        for i in 0..grads.0[t].len() {
            let orig = probe.parameters().nth(t).unwrap().data()[i];
            probe.parameters_mut().nth(t).unwrap().data_mut()[i] = orig + eps;
            let up = probe.loss(input, class).unwrap();
            probe.parameters_mut().nth(t).unwrap().data_mut()[i] = orig - eps;
            let down = probe.loss(input, class).unwrap();
            probe.parameters_mut().nth(t).unwrap().data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.0[t].data()[i];
            let scale = analytic.abs().max(numeric.abs());
            if scale < GRAD_FLOOR {
                continue;
            }
            compared += 1;
            worst = worst.max((analytic - numeric).abs() / scale);
        }
    }
    (worst, compared)
}
