//! Morphing-attack detectors: texture and compression-artifact features plus
//! linear and decision-tree classifiers. Scores follow one convention
//! everywhere: higher means more attack-like.

mod bsif;
mod edge;
mod lbp;
mod linear;
mod model;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub use self::bsif::{
    bsif_codes, bsif_histogram, generate_bsif_bank, load_bsif_bank, BankSource, BsifFilterBank,
    BSIF_BITS, BSIF_FILTERS, BSIF_SIZE,
};
pub use self::edge::{
    dct8x8, dct_recompress, edge_feature_stats, harris_corner_count, idct8x8, quantization_table,
    sobel_edge_count, DEFAULT_EDGE_QUALITY, EDGE_THRESHOLD, HARRIS_K, HARRIS_THRESHOLD,
};
pub use self::lbp::{lbp_code, lbp_histogram, uniform_bin, LBP_BINS};
pub use self::linear::{train_linear, LinearConfig, LinearModel};
pub use self::model::{
    load_model, model_from_weight_file, model_to_weight_file, save_model, score, Model,
};
pub use self::tree::{train_tree, TreeConfig, TreeModel, TreeNode};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Lbp59,
    Bsif4096,
    EdgeFeat,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Lbp59, Scheme::Bsif4096, Scheme::EdgeFeat];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Lbp59 => "lbp59",
            Scheme::Bsif4096 => "bsif4096",
            Scheme::EdgeFeat => "edgefeat",
        }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(self) -> usize {
        match self {
            Scheme::Lbp59 => 59,
            Scheme::Bsif4096 => 4096,
            Scheme::EdgeFeat => 6,
        }
    }

    pub fn is_histogram(self) -> bool {
        self != Scheme::EdgeFeat
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature scheme `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    scheme: Scheme,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(scheme: Scheme, values: Vec<f64>) -> Result<Self> {
        if values.len() != scheme.len() {
            return Err(Error::Shape(format!(
                "{scheme} vectors have {} values, got {}",
                scheme.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite())
            || (scheme.is_histogram() && values.iter().any(|&v| v < 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "invalid {scheme} feature values"
            )));
        }
        Ok(Self { scheme, values })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    BonaFide,
    Attack,
}

impl Label {
    pub fn tag(self) -> &'static str {
        match self {
            Label::BonaFide => "bona_fide",
            Label::Attack => "attack",
        }
    }

    /// `+1` for attacks, `−1` for bona fide.
    pub fn sign(self) -> f64 {
        match self {
            Label::BonaFide => -1.0,
            Label::Attack => 1.0,
        }
    }
}

impl FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bona_fide" => Ok(Label::BonaFide),
            "attack" => Ok(Label::Attack),
            _ => Err(Error::InvalidArgument(format!("unknown label `{s}`"))),
        }
    }
}

/// Where a sample came from: genuine images or one of the morph variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Simple,
    Improved,
    Sharp,
    Hequ,
    ImpHequ,
    Genuine,
}

impl Variant {
    pub const MORPHS: [Variant; 5] = [
        Variant::Simple,
        Variant::Improved,
        Variant::Sharp,
        Variant::Hequ,
        Variant::ImpHequ,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Simple => "simple",
            Variant::Improved => "improved",
            Variant::Sharp => "sharp",
            Variant::Hequ => "hequ",
            Variant::ImpHequ => "imp_hequ",
            Variant::Genuine => "genuine",
        }
    }

    pub fn label(self) -> Label {
        if self == Variant::Genuine {
            Label::BonaFide
        } else {
            Label::Attack
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::MORPHS
            .into_iter()
            .chain([Variant::Genuine])
            .find(|v| v.tag() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: FeatureVector,
    pub label: Label,
    pub variant: Variant,
}

impl LabeledSample {
    /// The label is implied by the variant.
    pub fn new(features: FeatureVector, variant: Variant) -> Self {
        Self {
            features,
            label: variant.label(),
            variant,
        }
    }
}

/// Rows `scheme,label,variant,v0,...` without a header.
pub fn write_feature_csv(path: impl AsRef<Path>, samples: &[LabeledSample]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for s in samples {
        let mut row = vec![
            s.features.scheme.tag().to_string(),
            s.label.tag().to_string(),
            s.variant.tag().to_string(),
        ];
        row.extend(s.features.values.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_feature_csv(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let bad = |reason: String| Error::Decode {
            path: path.to_path_buf(),
            reason: format!("row {}: {reason}", line + 1),
        };
        if rec.len() < 3 {
            return Err(bad("too few columns".into()));
        }
        let scheme: Scheme = rec[0].parse().map_err(|e: Error| bad(e.to_string()))?;
        let label: Label = rec[1].parse().map_err(|e: Error| bad(e.to_string()))?;
        let variant: Variant = rec[2].parse().map_err(|e: Error| bad(e.to_string()))?;
        if variant.label() != label {
            return Err(bad(format!(
                "variant {variant} cannot carry label {}",
                label.tag()
            )));
        }
        let values = rec
            .iter()
            .skip(3)
            .map(|v| v.parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let features = FeatureVector::new(scheme, values).map_err(|e| bad(e.to_string()))?;
        out.push(LabeledSample {
            features,
            label,
            variant,
        });
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

/// Both labels present, one scheme throughout.
pub(crate) fn check_training_set(samples: &[LabeledSample]) -> Result<Scheme> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Training("no training samples".into()))?;
    let scheme = first.features.scheme();
    if samples.iter().any(|s| s.features.scheme() != scheme) {
        return Err(Error::Training("mixed feature schemes".into()));
    }
    let attacks = samples.iter().filter(|s| s.label == Label::Attack).count();
    if attacks == 0 || attacks == samples.len() {
        return Err(Error::Training("both classes are required".into()));
    }
    Ok(scheme)
}
