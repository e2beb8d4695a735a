//! Cut-length sweep: render the same corpus at several grid sizes, train an
//! identical model on each from the same seed, and compare held-out
//! accuracy.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classifier::{evaluate, init_model, train, Dataset, ModelConfig, TrainConfig};
use crate::corpus::{build_dataset, Corpus};
use crate::layout::{derive_geometry, plan_layout, LayoutConfig};
use crate::raster::FontHandle;
use crate::Error;

pub struct SweepSpec {
    pub train: Corpus,
    pub test: Corpus,
    pub grids: Vec<u32>,
    /// Image size, segmentation and font policy shared by every candidate.
    pub base_layout: LayoutConfig,
    pub font: FontHandle,
    pub out_dir: PathBuf,
    pub conv_channels: Vec<u32>,
    pub model_seed: u64,
    pub train_config: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub grid_dim: u32,
    pub cut_length: u32,
    pub cell_px: u32,
    pub train_samples: usize,
    pub test_samples: usize,
    /// Share of training texts that did not fit in the grid.
    pub truncated_fraction: f64,
    pub final_train_loss: f64,
    pub accuracy: f64,
}

impl SweepSpec {
    fn layout_for(&self, grid: u32) -> Result<LayoutConfig, Error> {
        let mut layout = self.base_layout.clone();
        layout.grid_dim = grid;
        layout.cut_length = grid.saturating_mul(grid);
        derive_geometry(&layout)?;
        Ok(layout)
    }
}

/// Run every candidate in order. `on_row` is called as each one finishes.
pub fn run_sweep(spec: &SweepSpec, mut on_row: impl FnMut(&SweepRow)) -> Result<Vec<SweepRow>, Error> {
    if spec.grids.len() < 2 {
        return Err(Error::Config("a sweep needs at least two grid candidates".into()));
    }
    if spec.train.num_classes != spec.test.num_classes {
        return Err(Error::Config("train and test corpora disagree on class count".into()));
    }
    // Validate every candidate up front so a bad one fails fast.
    let layouts = spec
        .grids
        .iter()
        .map(|&g| spec.layout_for(g))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::with_capacity(layouts.len());
    for layout in layouts {
        let dir = spec.out_dir.join(format!("grid{}", layout.grid_dim));
        build_dataset(&spec.train, &layout, &spec.font, &dir, "train")?;
        let manifest = build_dataset(&spec.test, &layout, &spec.font, &dir, "test")?;
        let train_set = Dataset::from_manifest(&manifest, &dir, "train")?;
        let test_set = Dataset::from_manifest(&manifest, &dir, "test")?;

        let model = init_model(ModelConfig {
            input_side: layout.image_size,
            num_classes: spec.train.num_classes,
            conv_channels: spec.conv_channels.clone(),
            seed: spec.model_seed,
        })?;
        let (model, log) = train(model, &train_set, &spec.train_config, |e| {
            log::info!(
                "grid {}: epoch {} loss {:.4} acc {:.4}",
                layout.grid_dim,
                e.epoch,
                e.loss,
                e.accuracy
            );
        })?;
        let eval = evaluate(&model, &test_set)?;

        let mut truncated = 0usize;
        for s in &spec.train.samples {
            if plan_layout(&s.text, &layout)?.truncated {
                truncated += 1;
            }
        }
        let row = SweepRow {
            grid_dim: layout.grid_dim,
            cut_length: layout.cut_length,
            cell_px: layout.image_size / layout.grid_dim,
            train_samples: train_set.len(),
            test_samples: test_set.len(),
            truncated_fraction: truncated as f64 / spec.train.len().max(1) as f64,
            final_train_loss: log.last().map_or(f64::NAN, |e| e.loss),
            accuracy: eval.accuracy,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

/// Fixed-width text rendering of the sweep results.
pub fn format_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>8} {:>10} {:>7} {:>9} {:>10} {:>10} {:>9}",
        "grid", "cut_length", "cell_px", "train", "truncated", "train_loss", "accuracy"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:>8} {:>10} {:>7} {:>9} {:>9.1}% {:>10.4} {:>8.2}%",
            format!("{0}x{0}", r.grid_dim),
            r.cut_length,
            r.cell_px,
            r.train_samples,
            100.0 * r.truncated_fraction,
            r.final_train_loss,
            100.0 * r.accuracy
        );
    }
    out
}
