use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Corpus, CorpusError, LabeledSample};
use crate::layout::{derive_geometry, LayoutConfig};
use crate::raster::{decode_png, encode_png, render_text, FontHandle, ScImage};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

// Samples rendered per parallel batch while streaming.
const RENDER_CHUNK: usize = 256;

/// Fingerprint binding rendered images to the exact geometry and font bytes
/// used. The font path is deliberately left out; only its content counts.
pub fn config_hash(layout: &LayoutConfig, font_sha256: &str) -> String {
    #[derive(Serialize)]
    struct Canonical<'a> {
        image_size: u32,
        grid_dim: u32,
        cut_length: u32,
        segmentation: crate::layout::Segmentation,
        size_policy: crate::layout::SizePolicy,
        font_sha256: &'a str,
    }
    let canonical = Canonical {
        image_size: layout.image_size,
        grid_dim: layout.grid_dim,
        cut_length: layout.cut_length,
        segmentation: layout.segmentation,
        size_policy: layout.font.size_policy,
        font_sha256,
    };
    let json = serde_json::to_vec(&canonical).expect("plain struct serializes");
    hex::encode(Sha256::digest(json))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub split: String,
    /// Relative to the manifest directory, `/`-separated.
    pub path: String,
    /// 1-based class label.
    pub label: u32,
}

impl ManifestEntry {
    pub fn class(&self) -> usize {
        self.label as usize - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SplitSummary {
    pub count: usize,
    /// Keyed by 1-based label.
    pub class_counts: BTreeMap<u32, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub layout: LayoutConfig,
    pub font_sha256: String,
    pub config_hash: String,
    pub num_classes: u32,
    pub splits: BTreeMap<String, SplitSummary>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| CorpusError::ManifestParse {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        if manifest.format_version != MANIFEST_VERSION {
            return Err(CorpusError::ManifestParse {
                path: path.to_path_buf(),
                reason: format!("unsupported manifest version {}", manifest.format_version),
            });
        }
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        fs::write(path, json).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn split_entries<'a>(&'a self, split: &'a str) -> impl Iterator<Item = &'a ManifestEntry> + 'a {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn split_names(&self) -> impl Iterator<Item = &str> {
        self.splits.keys().map(String::as_str)
    }

    /// Check counts against entries, and that every listed file exists and
    /// decodes to the configured size. `root` is the manifest directory.
    pub fn verify(&self, root: &Path) -> Result<(), CorpusError> {
        let mut recount: BTreeMap<String, SplitSummary> = BTreeMap::new();
        for e in &self.entries {
            if e.label == 0 || e.label > self.num_classes {
                return Err(CorpusError::Inconsistent(format!(
                    "entry {} has label {} outside 1..={}",
                    e.path, e.label, self.num_classes
                )));
            }
            let s = recount.entry(e.split.clone()).or_default();
            s.count += 1;
            *s.class_counts.entry(e.label).or_default() += 1;
        }
        if recount != self.splits {
            return Err(CorpusError::Inconsistent(
                "split counts do not match the entry list".into(),
            ));
        }
        for e in &self.entries {
            let img = load_image(root, e)?;
            if img.side != self.layout.image_size {
                return Err(CorpusError::Inconsistent(format!(
                    "{} is {}px, manifest says {}px",
                    e.path, img.side, self.layout.image_size
                )));
            }
        }
        Ok(())
    }
}

pub fn load_image(root: &Path, entry: &ManifestEntry) -> Result<ScImage, CorpusError> {
    let path = root.join(&entry.path);
    let bytes = fs::read(&path).map_err(|source| CorpusError::Io {
        path: path.clone(),
        source,
    })?;
    decode_png(&bytes).map_err(|e| CorpusError::Render(e.to_string()))
}

/// Render every sample of `corpus` into `out_dir/<split>/<label>/<index>.png`
/// and record them in `out_dir/manifest.json`.
pub fn build_dataset(
    corpus: &Corpus,
    config: &LayoutConfig,
    font: &FontHandle,
    out_dir: &Path,
    split: &str,
) -> Result<DatasetManifest, CorpusError> {
    build_dataset_streaming(
        corpus.samples.iter().cloned().map(Ok),
        corpus.num_classes,
        config,
        font,
        out_dir,
        split,
    )
}

/// Like [`build_dataset`] but pulls samples from an iterator so the corpus
/// never has to sit in memory. Images are rendered in parallel chunks; the
/// manifest is written once every image is on disk.
///
/// An existing manifest in `out_dir` is extended when its config hash and
/// class count agree; entries for `split` are replaced.
pub fn build_dataset_streaming<I>(
    samples: I,
    num_classes: u32,
    config: &LayoutConfig,
    font: &FontHandle,
    out_dir: &Path,
    split: &str,
) -> Result<DatasetManifest, CorpusError>
where
    I: IntoIterator<Item = Result<LabeledSample, CorpusError>>,
{
    derive_geometry(config).map_err(|e| CorpusError::Render(e.to_string()))?;
    validate_split_name(split)?;
    let hash = config_hash(config, font.sha256());
    let manifest_path = out_dir.join(MANIFEST_FILE);

    let mut manifest = if manifest_path.exists() {
        let existing = DatasetManifest::load(&manifest_path)?;
        if existing.config_hash != hash || existing.num_classes != num_classes {
            return Err(CorpusError::DatasetMismatch(format!(
                "{} was built with a different layout, font or class count",
                manifest_path.display()
            )));
        }
        existing
    } else {
        DatasetManifest {
            format_version: MANIFEST_VERSION,
            layout: config.clone(),
            font_sha256: font.sha256().to_owned(),
            config_hash: hash,
            num_classes,
            splits: BTreeMap::new(),
            entries: Vec::new(),
        }
    };

    let split_dir = out_dir.join(split);
    if manifest.splits.contains_key(split) && split_dir.exists() {
        fs::remove_dir_all(&split_dir).map_err(|source| CorpusError::Io {
            path: split_dir.clone(),
            source,
        })?;
    }
    manifest.entries.retain(|e| e.split != split);
    manifest.splits.remove(split);

    let mut summary = SplitSummary::default();
    let mut new_entries = Vec::new();
    let mut chunk: Vec<(usize, LabeledSample)> = Vec::with_capacity(RENDER_CHUNK);
    let mut index = 0usize;
    let mut iter = samples.into_iter();

    loop {
        chunk.clear();
        for sample in iter.by_ref().take(RENDER_CHUNK) {
            let sample = sample?;
            if sample.class >= num_classes {
                return Err(CorpusError::LabelOutOfRange {
                    line: 0,
                    label: i64::from(sample.label()),
                    num_classes,
                });
            }
            chunk.push((index, sample));
            index += 1;
        }
        if chunk.is_empty() {
            break;
        }
        let written: Vec<ManifestEntry> = chunk
            .par_iter()
            .map(|(i, sample)| write_sample(out_dir, split, *i, sample, font, config))
            .collect::<Result<_, _>>()?;
        for e in written {
            summary.count += 1;
            *summary.class_counts.entry(e.label).or_default() += 1;
            new_entries.push(e);
        }
    }

    if summary.count == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    manifest.entries.extend(new_entries);
    manifest.splits.insert(split.to_owned(), summary);
    manifest.save(&manifest_path)?;
    Ok(manifest)
}

fn write_sample(
    out_dir: &Path,
    split: &str,
    index: usize,
    sample: &LabeledSample,
    font: &FontHandle,
    config: &LayoutConfig,
) -> Result<ManifestEntry, CorpusError> {
    let image =
        render_text(&sample.text, font, config).map_err(|e| CorpusError::Render(e.to_string()))?;
    let label = sample.label();
    let rel = format!("{split}/{label}/{index}.png");
    let path: PathBuf = out_dir.join(split).join(label.to_string()).join(format!("{index}.png"));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(&path, encode_png(&image)).map_err(|source| CorpusError::Io { path, source })?;
    Ok(ManifestEntry {
        split: split.to_owned(),
        path: rel,
        label,
    })
}

fn validate_split_name(split: &str) -> Result<(), CorpusError> {
    let ok = !split.is_empty()
        && split != "."
        && split != ".."
        && split
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(CorpusError::InvalidSplit(split.to_owned()))
    }
}
