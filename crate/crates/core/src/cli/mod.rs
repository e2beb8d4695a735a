//! The `superchars` command line.
//!
//! Settings come from flags, then the `--config` JSON file, then defaults.
//! Results go to stdout as JSON (JSON lines for training logs); diagnostics
//! go to stderr. Exit codes are listed in [`crate::exit`].

pub mod config;
pub mod sweep;

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::classifier::{
    evaluate, init_model, load_model, predict, save_model, train, Dataset,
};
use crate::corpus::{
    build_dataset_streaming, read_csv, suggest_cut_length, text_length, Corpus, CsvSamples,
    DatasetManifest, LengthStats, TextColumns, DEFAULT_GRID_CANDIDATES,
};
use crate::layout::{plan_layout, LayoutConfig, Segmentation};
use crate::raster::{encode_png, encode_png_rgb, render, FontHandle};
use crate::{exit, Error};

use config::{LayoutOverrides, ModelOverrides, RunConfig, TrainOverrides};
use sweep::{format_table, run_sweep, SweepSpec};

#[derive(Debug, Parser)]
#[command(
    name = "superchars",
    version,
    about = "Render text as glyph-grid images and classify them with a small CNN",
    after_help = "Every setting can also come from the --config JSON file; a flag always wins \
over the file, and the file wins over built-in defaults.\n\
Exit codes: 0 success, 1 I/O or data error, 2 config error, 3 font error, \
4 dataset/model mismatch."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one text to a PNG.
    Render(RenderArgs),
    /// Print length statistics of a CSV corpus and a suggested grid.
    Stats(StatsArgs),
    /// Render a CSV corpus into an image dataset with a manifest.
    Build(BuildArgs),
    /// Train a model on a rendered dataset.
    Train(TrainArgs),
    /// Evaluate a model on a rendered dataset split.
    Eval(EvalArgs),
    /// Classify one text.
    Predict(PredictArgs),
    /// Compare grid sizes (cut-lengths) by training one model per grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Default)]
pub struct LayoutFlags {
    /// Run config JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Font file (TrueType/OpenType). Defaults to the bundled test font.
    #[arg(long)]
    pub font: Option<PathBuf>,
    /// Image side in pixels.
    #[arg(long)]
    pub image_size: Option<u32>,
    /// Characters per row and rows per image.
    #[arg(long)]
    pub grid_dim: Option<u32>,
    /// Cell budget per image; must equal grid_dim².
    #[arg(long)]
    pub cut_length: Option<u32>,
    /// char_level or word_level.
    #[arg(long)]
    pub segmentation: Option<Segmentation>,
}

impl LayoutFlags {
    fn overrides(&self) -> LayoutOverrides {
        LayoutOverrides {
            image_size: self.image_size,
            grid_dim: self.grid_dim,
            cut_length: self.cut_length,
            segmentation: self.segmentation,
            font: self.font.clone(),
        }
    }

    fn resolve(&self, file: &RunConfig) -> Result<LayoutConfig, Error> {
        let mut ov = self.overrides();
        if ov.font.is_none() {
            ov.font = file.paths.font.clone();
        }
        file.layout.resolve(&ov)
    }
}

#[derive(Debug, Args, Default)]
pub struct TextInput {
    /// Text to render.
    #[arg(long, conflicts_with = "stdin")]
    pub text: Option<String>,
    /// Read the text from standard input.
    #[arg(long)]
    pub stdin: bool,
}

impl TextInput {
    fn read(&self) -> Result<String, Error> {
        if self.stdin {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|source| Error::Io {
                    path: "<stdin>".into(),
                    source,
                })?;
            Ok(s)
        } else {
            self.text
                .clone()
                .ok_or_else(|| Error::Config("give --text or --stdin".into()))
        }
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub input: TextInput,
    #[command(flatten)]
    pub layout: LayoutFlags,
    /// Output PNG path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write three identical channels instead of one.
    #[arg(long)]
    pub rgb: bool,
}

#[derive(Debug, Args, Default)]
pub struct CorpusFlags {
    /// Label-first CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Number of classes K; labels must lie in 1..=K.
    #[arg(long)]
    pub classes: Option<u32>,
    /// Text columns: "all" or 1-based column numbers like "2,3".
    #[arg(long)]
    pub columns: Option<String>,
}

impl CorpusFlags {
    fn resolve(&self, file: &RunConfig) -> Result<(PathBuf, u32, TextColumns), Error> {
        let csv = self
            .csv
            .clone()
            .or_else(|| file.paths.csv.clone())
            .ok_or_else(|| Error::Config("give --csv".into()))?;
        let k = self
            .classes
            .or(file.corpus.num_classes)
            .ok_or_else(|| Error::Config("give --classes".into()))?;
        if k < 2 {
            return Err(Error::Config("--classes must be at least 2".into()));
        }
        let columns = self
            .columns
            .as_deref()
            .or(file.corpus.columns.as_deref())
            .unwrap_or("all")
            .parse()?;
        Ok((csv, k, columns))
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusFlags,
    /// Run config JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Candidate grid dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub grids: Option<Vec<u32>>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub corpus: CorpusFlags,
    #[command(flatten)]
    pub layout: LayoutFlags,
    /// Output dataset directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Split name (subdirectory), e.g. train or test.
    #[arg(long, default_value = "train")]
    pub split: String,
}

#[derive(Debug, Args, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Seed for the per-epoch shuffle.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed for weight initialization.
    #[arg(long)]
    pub model_seed: Option<u64>,
    /// Conv block channel counts, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<u32>>,
}

impl TrainFlags {
    fn train_overrides(&self) -> TrainOverrides {
        TrainOverrides {
            learning_rate: self.lr,
            momentum: self.momentum,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    fn model_overrides(&self) -> ModelOverrides {
        ModelOverrides {
            conv_channels: self.channels.clone(),
            seed: self.model_seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest.json.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Where to write the trained .scm model.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    /// Split to train on.
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Also append the JSON-lines epoch log to this file.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Run config JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Split to evaluate.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Run config JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub input: TextInput,
    #[command(flatten)]
    pub layout: LayoutFlags,
    /// Skip the check that layout and font match the training dataset.
    #[arg(long)]
    pub allow_mismatch: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub corpus: CorpusFlags,
    /// Held-out CSV. Without it the last --holdout fraction of --csv is used.
    #[arg(long)]
    pub test_csv: Option<PathBuf>,
    /// Fraction of rows held out when --test-csv is absent.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    /// Grid dimensions to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "8,14,28")]
    pub grids: Vec<u32>,
    #[command(flatten)]
    pub layout: LayoutFlags,
    /// Output directory for datasets and the result tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Render(a) => cmd_render(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Build(a) => cmd_build(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn required(opt: Option<PathBuf>, fallback: Option<&PathBuf>, flag: &str) -> Result<PathBuf, Error> {
    opt.or_else(|| fallback.cloned())
        .ok_or_else(|| Error::Config(format!("give {flag}")))
}

pub fn load_font(layout: &LayoutConfig) -> Result<FontHandle, Error> {
    match &layout.font.path {
        Some(p) => Ok(FontHandle::load(p)?),
        None => Ok(FontHandle::bundled()),
    }
}

fn manifest_root(manifest: &Path) -> PathBuf {
    manifest
        .parent()
        .map(Path::to_path_buf)
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn load_split(manifest_path: &Path, split: &str) -> Result<(DatasetManifest, Dataset), Error> {
    let manifest = DatasetManifest::load(manifest_path)?;
    if !manifest.splits.contains_key(split) {
        let known: Vec<&str> = manifest.split_names().collect();
        return Err(Error::Config(format!(
            "manifest has no split {split:?} (available: {})",
            known.join(", ")
        )));
    }
    let data = Dataset::from_manifest(&manifest, &manifest_root(manifest_path), split)?;
    Ok((manifest, data))
}

fn cmd_render(a: RenderArgs) -> Result<(), Error> {
    let file = RunConfig::load_opt(a.layout.config.as_deref())?;
    let layout = a.layout.resolve(&file)?;
    let out = required(a.out, file.paths.out.as_ref(), "--out")?;
    let font = load_font(&layout)?;
    let text = a.input.read()?;
    let plan = plan_layout(&text, &layout)?;
    let image = render(&plan, &font, &layout)?;
    let bytes = if a.rgb {
        encode_png_rgb(&image)
    } else {
        encode_png(&image)
    };
    fs::write(&out, bytes).map_err(io_err(&out))?;
    print_json(&json!({
        "out": out,
        "image_size": layout.image_size,
        "placements": plan.len(),
        "truncated": plan.truncated,
    }));
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> Result<(), Error> {
    let file = RunConfig::load_opt(a.config.as_deref())?;
    let (csv, k, columns) = a.corpus.resolve(&file)?;
    let mut lengths = Vec::new();
    for sample in CsvSamples::open(&csv, k, columns)? {
        lengths.push(text_length(&sample?.text));
    }
    let stats = LengthStats::from_lengths(lengths)?;
    let grids = a.grids.unwrap_or_else(|| DEFAULT_GRID_CANDIDATES.to_vec());
    let suggested = suggest_cut_length(&stats, &grids)
        .ok_or_else(|| Error::Config("--grids is empty".into()))?;
    print_json(&json!({
        "stats": stats,
        "suggested": {"grid_dim": suggested.0, "cut_length": suggested.1},
    }));
    Ok(())
}

fn cmd_build(a: BuildArgs) -> Result<(), Error> {
    let file = RunConfig::load_opt(a.layout.config.as_deref())?;
    let (csv, k, columns) = a.corpus.resolve(&file)?;
    let layout = a.layout.resolve(&file)?;
    let out = required(a.out, file.paths.out.as_ref(), "--out")?;
    let font = load_font(&layout)?;
    let samples = CsvSamples::open(&csv, k, columns)?;
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let manifest = build_dataset_streaming(samples, k, &layout, &font, &out, &a.split)?;
    let path = out.join(crate::corpus::MANIFEST_FILE);
    print_json(&json!({
        "manifest": path,
        "split": a.split,
        "count": manifest.splits[&a.split].count,
        "config_hash": manifest.config_hash,
    }));
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<(), Error> {
    let file = RunConfig::load_opt(a.config.as_deref())?;
    let manifest_path = required(a.manifest, file.paths.manifest.as_ref(), "--manifest")?;
    let model_out = required(a.model_out, file.paths.model.as_ref(), "--model-out")?;
    let train_cfg = file.train.resolve(&a.train.train_overrides())?;
    let (manifest, data) = load_split(&manifest_path, &a.split)?;
    let model_cfg = file.model.resolve(
        &a.train.model_overrides(),
        manifest.layout.image_size,
        manifest.num_classes,
    )?;
    let model = init_model(model_cfg)?;

    let mut log_file = match &a.log {
        Some(p) => Some(fs::File::create(p).map_err(io_err(p))?),
        None => None,
    };
    let mut log_err = None;
    let (model, _) = train(model, &data, &train_cfg, |e| {
        let line = serde_json::to_string(e).expect("log record serializes");
        println!("{line}");
        if let (Some(f), Some(p)) = (log_file.as_mut(), a.log.as_ref()) {
            if let Err(source) = writeln!(f, "{line}") {
                log_err.get_or_insert(Error::Io {
                    path: p.clone(),
                    source,
                });
            }
        }
    })?;
    if let Some(e) = log_err {
        return Err(e);
    }
    save_model(&model, &model_out)?;
    eprintln!("model written to {}", model_out.display());
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<(), Error> {
    let file = RunConfig::load_opt(a.config.as_deref())?;
    let manifest_path = required(a.manifest, file.paths.manifest.as_ref(), "--manifest")?;
    let model_path = required(a.model, file.paths.model.as_ref(), "--model")?;
    let model = load_model(&model_path)?;
    let (_, data) = load_split(&manifest_path, &a.split)?;
    let eval = evaluate(&model, &data)?;
    print_json(&json!({
        "split": a.split,
        "accuracy": eval.accuracy,
        "correct": eval.correct,
        "total": eval.total,
        "confusion": eval.confusion,
    }));
    Ok(())
}

fn cmd_predict(a: PredictArgs) -> Result<(), Error> {
    let file = RunConfig::load_opt(a.layout.config.as_deref())?;
    let model_path = required(a.model, file.paths.model.as_ref(), "--model")?;
    let layout = a.layout.resolve(&file)?;
    let font = load_font(&layout)?;
    let model = load_model(&model_path)?;
    let text = a.input.read()?;
    let pred = predict(&model, &text, &layout, &font, a.allow_mismatch)?;
    print_json(&json!({
        "class": pred.class,
        "label": pred.class + 1,
        "probs": pred.probs,
    }));
    Ok(())
}

/// Split off the last `fraction` of rows as a held-out set.
pub fn holdout_split(mut corpus: Corpus, fraction: f64) -> Result<(Corpus, Corpus), Error> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config("--holdout must lie strictly between 0 and 1".into()));
    }
    let n_test = ((corpus.len() as f64) * fraction).ceil() as usize;
    if n_test == 0 || n_test >= corpus.len() {
        return Err(Error::Config(format!(
            "cannot hold out {fraction} of {} samples",
            corpus.len()
        )));
    }
    let test_samples = corpus.samples.split_off(corpus.len() - n_test);
    let test = Corpus {
        name: format!("{}-holdout", corpus.name),
        num_classes: corpus.num_classes,
        samples: test_samples,
    };
    Ok((corpus, test))
}

fn cmd_sweep(a: SweepArgs) -> Result<(), Error> {
    let file = RunConfig::load_opt(a.layout.config.as_deref())?;
    let (csv, k, columns) = a.corpus.resolve(&file)?;
    let out = required(a.out, file.paths.out.as_ref(), "--out")?;
    // Candidate grids replace the layout's grid; only image size,
    // segmentation and font carry over.
    let mut base_flags = a.layout.overrides();
    base_flags.grid_dim = Some(1);
    base_flags.cut_length = None;
    if base_flags.font.is_none() {
        base_flags.font = file.paths.font.clone();
    }
    let base_layout = file.layout.resolve(&base_flags)?;
    let font = load_font(&base_layout)?;

    let corpus = read_csv(&csv, k, columns.clone())?;
    let test_csv = a.test_csv.or_else(|| file.paths.test_csv.clone());
    let (train_corpus, test_corpus) = match test_csv {
        Some(p) => (corpus, read_csv(&p, k, columns)?),
        None => holdout_split(corpus, a.holdout)?,
    };
    let train_config = file.train.resolve(&a.train.train_overrides())?;
    let model_cfg = file
        .model
        .resolve(&a.train.model_overrides(), base_layout.image_size, k)?;

    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let spec = SweepSpec {
        train: train_corpus,
        test: test_corpus,
        grids: a.grids,
        base_layout,
        font,
        out_dir: out.clone(),
        conv_channels: model_cfg.conv_channels,
        model_seed: model_cfg.seed,
        train_config,
    };
    let rows = run_sweep(&spec, |r| {
        eprintln!(
            "grid {}x{}: accuracy {:.4}",
            r.grid_dim, r.grid_dim, r.accuracy
        );
    })?;
    let table = format_table(&rows);
    let json_rows = serde_json::to_string_pretty(&rows).expect("rows serialize");
    let json_path = out.join("sweep.json");
    fs::write(&json_path, format!("{json_rows}\n")).map_err(io_err(&json_path))?;
    let txt_path = out.join("sweep.txt");
    fs::write(&txt_path, &table).map_err(io_err(&txt_path))?;
    eprint!("{table}");
    print_json(&json!({ "rows": rows }));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledSample;

    #[test]
    fn help_lists_every_subcommand() {
        use clap::CommandFactory;
        let help = Cli::command().render_long_help().to_string();
        for cmd in ["render", "stats", "build", "train", "eval", "predict", "sweep"] {
            assert!(help.contains(cmd), "{cmd} missing from help");
        }
        Cli::command().debug_assert();
    }

    #[test]
    fn holdout_takes_the_tail() {
        let corpus = Corpus {
            name: "c".into(),
            num_classes: 2,
            samples: (0..10)
                .map(|i| LabeledSample {
                    class: i % 2,
                    text: i.to_string(),
                })
                .collect(),
        };
        let (train, test) = holdout_split(corpus.clone(), 0.2).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.samples[0].text, "8");
        assert!(holdout_split(corpus.clone(), 0.0).is_err());
        assert!(holdout_split(corpus, 1.0).is_err());
    }

    #[test]
    fn usage_errors_exit_with_config_code() {
        assert_eq!(main_with_args(["superchars", "render", "--bogus"]), exit::CONFIG);
        assert_eq!(main_with_args(["superchars", "--help"]), exit::OK);
    }
}
