use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{Corpus, CorpusError, LabeledSample};

/// Which CSV columns hold text. Column numbers are 1-based and column 1 is
/// the label, so text columns start at 2.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum TextColumns {
    /// Every column after the label.
    #[default]
    All,
    Select(Vec<usize>),
}

impl std::str::FromStr for TextColumns {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "all" {
            return Ok(TextColumns::All);
        }
        let cols = s
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n >= 2)
                    .ok_or_else(|| {
                        CorpusError::InvalidColumns(format!(
                            "{c:?} is not a text column (use numbers >= 2, column 1 is the label)"
                        ))
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TextColumns::Select(cols))
    }
}

/// Streams labeled samples out of a label-first CSV file, one record at a
/// time.
pub struct CsvSamples<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    num_classes: u32,
    columns: TextColumns,
}

impl CsvSamples<File> {
    pub fn open(
        path: impl AsRef<Path>,
        num_classes: u32,
        columns: TextColumns,
    ) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_reader(file, num_classes, columns))
    }
}

impl<R: Read> CsvSamples<R> {
    pub fn from_reader(reader: R, num_classes: u32, columns: TextColumns) -> Self {
        let records = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader)
            .into_records();
        CsvSamples {
            records,
            num_classes,
            columns,
        }
    }

    fn parse(&self, record: &csv::StringRecord) -> Result<LabeledSample, CorpusError> {
        let line = record.position().map_or(0, |p| p.line());
        if record.len() < 2 {
            return Err(CorpusError::MalformedRow {
                line,
                reason: format!("expected at least 2 fields, found {}", record.len()),
            });
        }
        let raw = record[0].trim();
        let label: i64 = raw.parse().map_err(|_| CorpusError::MalformedRow {
            line,
            reason: format!("label {raw:?} is not an integer"),
        })?;
        if label < 1 || label > i64::from(self.num_classes) {
            return Err(CorpusError::LabelOutOfRange {
                line,
                label,
                num_classes: self.num_classes,
            });
        }
        let text = match &self.columns {
            TextColumns::All => record.iter().skip(1).collect::<Vec<_>>().join(" "),
            TextColumns::Select(cols) => {
                let mut parts = Vec::with_capacity(cols.len());
                for &c in cols {
                    let field = record.get(c - 1).ok_or_else(|| CorpusError::MalformedRow {
                        line,
                        reason: format!("missing text column {c}"),
                    })?;
                    parts.push(field);
                }
                parts.join(" ")
            }
        };
        Ok(LabeledSample {
            class: (label - 1) as u32,
            text,
        })
    }
}

impl<R: Read> Iterator for CsvSamples<R> {
    type Item = Result<LabeledSample, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        let record = match self.records.next()? {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Some(Err(CorpusError::MalformedRow {
                    line,
                    reason: e.to_string(),
                }));
            }
        };
        Some(self.parse(&record))
    }
}

/// Read a whole CSV corpus into memory.
pub fn read_csv(
    path: impl AsRef<Path>,
    num_classes: u32,
    columns: TextColumns,
) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let samples = CsvSamples::open(path, num_classes, columns)?.collect::<Result<Vec<_>, _>>()?;
    if samples.is_empty() {
        return Err(CorpusError::EmptyFile(path.to_path_buf()));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(Corpus {
        name,
        num_classes,
        samples,
    })
}
