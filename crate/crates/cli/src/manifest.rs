//! Image manifests: `id,image_path,landmarks_path,subject_id,gender,source_db,split`.
//! Paths are stored as written and resolved against the manifest's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, Result};

pub const MANIFEST_HEADER: [&str; 7] = [
    "id",
    "image_path",
    "landmarks_path",
    "subject_id",
    "gender",
    "source_db",
    "split",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    M,
    F,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
    Val,
    Unassigned,
}

impl Split {
    pub const ASSIGNED: [Split; 3] = [Split::Train, Split::Test, Split::Val];

    pub fn tag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Val => "val",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Split {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Split::ASSIGNED
            .into_iter()
            .chain([Split::Unassigned])
            .find(|v| v.tag() == s)
            .ok_or_else(|| format!("unknown split `{s}`"))
    }
}

impl Gender {
    pub fn tag(self) -> &'static str {
        match self {
            Gender::M => "m",
            Gender::F => "f",
            Gender::X => "x",
        }
    }
}

impl FromStr for Gender {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "m" => Ok(Gender::M),
            "f" => Ok(Gender::F),
            "x" => Ok(Gender::X),
            _ => Err(format!("unknown gender `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub image_path: PathBuf,
    pub landmarks_path: PathBuf,
    pub subject_id: String,
    pub gender: Gender,
    pub source_db: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths are resolved against.
    pub root: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, root: impl Into<PathBuf>) -> Result<Self> {
        let m = Self {
            entries,
            root: root.into(),
        };
        m.validate().map_err(|reason| CliError::Manifest {
            path: m.root.clone(),
            reason,
        })?;
        Ok(m)
    }

    /// Unique ids; each subject has one gender and one source database.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let mut ids = BTreeSet::new();
        let mut subjects: BTreeMap<&str, (Gender, &str)> = BTreeMap::new();
        for e in &self.entries {
            if e.id.is_empty() || e.subject_id.is_empty() {
                return Err("empty id or subject id".into());
            }
            if !ids.insert(e.id.as_str()) {
                return Err(format!("duplicate id `{}`", e.id));
            }
            let attrs = (e.gender, e.source_db.as_str());
            if *subjects.entry(&e.subject_id).or_insert(attrs) != attrs {
                return Err(format!(
                    "subject `{}` has inconsistent gender or source_db",
                    e.subject_id
                ));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Entries grouped by subject, both in id order.
    pub fn by_subject(&self) -> BTreeMap<&str, Vec<&ManifestEntry>> {
        let mut m: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
        for e in &self.entries {
            m.entry(&e.subject_id).or_default().push(e);
        }
        for v in m.values_mut() {
            v.sort_by(|a, b| a.id.cmp(&b.id));
        }
        m
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bad = |reason: String| CliError::Manifest {
            path: path.to_path_buf(),
            reason,
        };
        if !path.exists() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.iter().ne(MANIFEST_HEADER) {
            return Err(bad(format!(
                "header must be `{}`",
                MANIFEST_HEADER.join(",")
            )));
        }
        let mut entries = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let row = |reason: String| bad(format!("row {}: {reason}", i + 1));
            entries.push(ManifestEntry {
                id: rec[0].to_string(),
                image_path: PathBuf::from(&rec[1]),
                landmarks_path: PathBuf::from(&rec[2]),
                subject_id: rec[3].to_string(),
                gender: rec[4].parse().map_err(row)?,
                source_db: rec[5].to_string(),
                split: rec[6].parse().map_err(row)?,
            });
        }
        let m = Self {
            entries,
            root: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
        };
        m.validate().map_err(bad)?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(MANIFEST_HEADER)
            .map_err(|e| csv_io(path, e))?;
        for e in &self.entries {
            w.write_record([
                e.id.as_str(),
                &path_text(&e.image_path),
                &path_text(&e.landmarks_path),
                &e.subject_id,
                e.gender.tag(),
                &e.source_db,
                e.split.tag(),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }
}

/// Forward slashes regardless of platform, so manifests compare bytewise.
pub(crate) fn path_text(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
        .replacen("//", "/", 1)
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> CliError {
    CliError::Manifest {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}
