//! Variant-tagged sample manifests written by the image-producing steps:
//! `sample_id,split,variant,pair,image_path,source_a,source_b`.

use std::path::{Path, PathBuf};

use morphforge_core::detectors::Variant;

use crate::error::{CliError, Result};
use crate::manifest::{csv_io, path_text, Split};

pub const SAMPLE_HEADER: [&str; 7] = [
    "sample_id",
    "split",
    "variant",
    "pair",
    "image_path",
    "source_a",
    "source_b",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRow {
    pub sample_id: String,
    pub split: Split,
    pub variant: Variant,
    /// Index of the pair within its split; `None` for genuine images.
    pub pair: Option<usize>,
    /// Relative to the work directory.
    pub image_path: PathBuf,
    pub source_a: String,
    /// Empty for genuine images.
    pub source_b: String,
}

impl SampleRow {
    /// Order used by feature files: variant, then pair, then id.
    pub fn sort_key(&self) -> (Variant, Option<usize>, &str) {
        (self.variant, self.pair, &self.sample_id)
    }
}

pub fn write_samples(path: &Path, rows: &[SampleRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(SAMPLE_HEADER).map_err(|e| csv_io(path, e))?;
    for r in rows {
        w.write_record([
            r.sample_id.as_str(),
            r.split.tag(),
            r.variant.tag(),
            &r.pair.map(|p| p.to_string()).unwrap_or_default(),
            &path_text(&r.image_path),
            &r.source_a,
            &r.source_b,
        ])
        .map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_samples(path: &Path) -> Result<Vec<SampleRow>> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let bad = |reason: String| CliError::Manifest {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let header = r.headers().map_err(|e| csv_io(path, e))?.clone();
    if header.iter().ne(SAMPLE_HEADER) {
        return Err(bad(format!("header must be `{}`", SAMPLE_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        let row = |reason: String| bad(format!("row {}: {reason}", i + 1));
        let pair = match &rec[3] {
            "" => None,
            p => Some(p.parse().map_err(|e| row(format!("pair `{p}`: {e}")))?),
        };
        rows.push(SampleRow {
            sample_id: rec[0].to_string(),
            split: rec[1].parse().map_err(row)?,
            variant: rec[2]
                .parse()
                .map_err(|e: morphforge_core::Error| row(e.to_string()))?,
            pair,
            image_path: PathBuf::from(&rec[4]),
            source_a: rec[5].to_string(),
            source_b: rec[6].to_string(),
        });
    }
    Ok(rows)
}
