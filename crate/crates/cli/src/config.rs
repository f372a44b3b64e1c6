//! `key = value` run configuration. Unknown keys are fatal; every seed is
//! resolved to an explicit value before anything runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use morphforge_core::detectors::{Scheme, DEFAULT_EDGE_QUALITY};
use morphforge_core::evalkit::DEFAULT_APCER_TARGETS;
use morphforge_core::morphgen::{CloneInto, DEFAULT_ALPHA};
use morphforge_core::postprocess::{
    DEFAULT_SHARP_AMOUNT, DEFAULT_SHARP_SIGMA, DEFAULT_SHARP_THRESHOLD,
};
use morphforge_core::styletransfer::{DEFAULT_CONTENT_WEIGHT, DEFAULT_STYLE_WEIGHT};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classifier {
    Linear,
    Tree,
}

impl Classifier {
    pub fn tag(self) -> &'static str {
        match self {
            Classifier::Linear => "linear",
            Classifier::Tree => "tree",
        }
    }

    /// Linear models decide at a margin of 0, trees at a leaf attack
    /// fraction of one half.
    pub fn default_threshold(self) -> f64 {
        match self {
            Classifier::Linear => 0.0,
            Classifier::Tree => 0.5,
        }
    }
}

/// Which image the HEQU variants take their target histogram from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HequReference {
    A,
    B,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub synth_seed: u64,
    pub split_seed: u64,
    pub pair_seed: u64,
    pub net_seed: u64,
    pub bsif_seed: u64,
    pub linear_seed: u64,
    pub g12_seed: u64,

    pub synth_subjects: usize,
    pub synth_images_per_subject: usize,
    pub synth_size: usize,
    pub synth_databases: usize,
    pub synth_noise: f64,

    pub split_ratios: (f64, f64, f64),
    pub pairs_train: usize,
    pub pairs_test: usize,
    pub pairs_val: usize,

    pub alpha: f64,
    pub clone_into: CloneInto,
    pub crop_size: usize,

    pub net_weights: Option<PathBuf>,
    pub net_channels: Vec<usize>,
    pub net_convs_per_block: usize,
    pub content_layers: Option<Vec<String>>,
    pub style_layers: Option<Vec<String>>,
    pub content_weight: f64,
    pub style_weight: f64,
    pub opt_memory: usize,
    pub opt_max_iters: usize,
    pub opt_grad_tol: f64,
    pub opt_loss_rel_tol: f64,

    pub sharp_sigma: f64,
    pub sharp_amount: f64,
    pub sharp_threshold: f64,
    pub hequ_reference: HequReference,

    pub scheme: Scheme,
    pub bsif_bank: Option<PathBuf>,
    pub edge_quality: u8,

    pub classifier: Classifier,
    pub linear_lambda: f64,
    pub linear_epochs: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub threshold: Option<f64>,
    pub apcer_targets: Vec<f64>,

    pub mar_input: Option<PathBuf>,
    pub mar_threshold: f64,

    pub workers: usize,
}

const SEED_KEYS: [&str; 7] = [
    "synth_seed",
    "split_seed",
    "pair_seed",
    "net_seed",
    "bsif_seed",
    "linear_seed",
    "g12_seed",
];

pub const KEYS: &[&str] = &[
    "seed",
    "synth_seed",
    "split_seed",
    "pair_seed",
    "net_seed",
    "bsif_seed",
    "linear_seed",
    "g12_seed",
    "synth_subjects",
    "synth_images_per_subject",
    "synth_size",
    "synth_databases",
    "synth_noise",
    "split_train",
    "split_test",
    "split_val",
    "pairs_train",
    "pairs_test",
    "pairs_val",
    "alpha",
    "clone_into",
    "crop_size",
    "net_weights",
    "net_channels",
    "net_convs_per_block",
    "content_layers",
    "style_layers",
    "content_weight",
    "style_weight",
    "opt_memory",
    "opt_max_iters",
    "opt_grad_tol",
    "opt_loss_rel_tol",
    "sharp_sigma",
    "sharp_amount",
    "sharp_threshold",
    "hequ_reference",
    "scheme",
    "bsif_bank",
    "edge_quality",
    "classifier",
    "linear_lambda",
    "linear_epochs",
    "tree_max_depth",
    "tree_min_leaf",
    "threshold",
    "apcer_targets",
    "mar_input",
    "mar_threshold",
    "workers",
];

impl RunConfig {
    /// Defaults with every seed set to `seed`.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            synth_seed: seed,
            split_seed: seed,
            pair_seed: seed,
            net_seed: seed,
            bsif_seed: seed,
            linear_seed: seed,
            g12_seed: seed,
            synth_subjects: 120,
            synth_images_per_subject: 3,
            synth_size: 96,
            synth_databases: 1,
            synth_noise: 0.01,
            split_ratios: (0.7, 0.2, 0.1),
            pairs_train: 80,
            pairs_test: 24,
            pairs_val: 12,
            alpha: DEFAULT_ALPHA,
            clone_into: CloneInto::None,
            crop_size: 64,
            net_weights: None,
            net_channels: vec![4, 8],
            net_convs_per_block: 2,
            content_layers: None,
            style_layers: None,
            content_weight: DEFAULT_CONTENT_WEIGHT,
            style_weight: DEFAULT_STYLE_WEIGHT,
            opt_memory: 10,
            opt_max_iters: 20,
            opt_grad_tol: 1e-6,
            opt_loss_rel_tol: 1e-9,
            sharp_sigma: DEFAULT_SHARP_SIGMA,
            sharp_amount: DEFAULT_SHARP_AMOUNT,
            sharp_threshold: DEFAULT_SHARP_THRESHOLD,
            hequ_reference: HequReference::A,
            scheme: Scheme::Lbp59,
            bsif_bank: None,
            edge_quality: DEFAULT_EDGE_QUALITY,
            classifier: Classifier::Linear,
            linear_lambda: 1e-3,
            linear_epochs: 50,
            tree_max_depth: 12,
            tree_min_leaf: 2,
            threshold: None,
            apcer_targets: DEFAULT_APCER_TARGETS.to_vec(),
            mar_input: None,
            mar_threshold: 0.5,
            workers: 1,
        }
    }

    /// Parses config text. Relative paths resolve against `base`.
    /// `seed_override` replaces `seed`, and `seed` is required unless given.
    pub fn parse(text: &str, base: &Path, seed_override: Option<u64>) -> Result<Self> {
        let origin = base.to_path_buf();
        let bad = |reason: String| CliError::Config {
            path: origin.clone(),
            reason,
        };
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut unknown = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected `key = value`", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                unknown.push(k.to_string());
                continue;
            }
            if entries
                .insert(k.to_string(), (i + 1, v.to_string()))
                .is_some()
            {
                return Err(bad(format!("line {}: `{k}` set twice", i + 1)));
            }
        }
        if !unknown.is_empty() {
            return Err(CliError::UnknownKeys(unknown));
        }

        let seed = match (seed_override, entries.get("seed")) {
            (Some(s), _) => s,
            (None, Some((line, v))) => {
                parse_value(v).map_err(|e| bad(format!("line {line}: seed: {e}")))?
            }
            (None, None) => return Err(bad("`seed` is required (or pass --seed)".into())),
        };
        let mut cfg = Self::with_seed(seed);
        for (k, (line, v)) in &entries {
            if k == "seed" {
                continue;
            }
            cfg.set(k, v, base)
                .map_err(|e| bad(format!("line {line}: {k}: {e}")))?;
        }
        cfg.validate().map_err(bad)?;
        Ok(cfg)
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base, seed_override).map_err(|e| match e {
            CliError::Config { reason, .. } => CliError::Config {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }

    fn set(&mut self, key: &str, v: &str, base: &Path) -> std::result::Result<(), String> {
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "synth_seed" => self.synth_seed = parse_value(v)?,
            "split_seed" => self.split_seed = parse_value(v)?,
            "pair_seed" => self.pair_seed = parse_value(v)?,
            "net_seed" => self.net_seed = parse_value(v)?,
            "bsif_seed" => self.bsif_seed = parse_value(v)?,
            "linear_seed" => self.linear_seed = parse_value(v)?,
            "g12_seed" => self.g12_seed = parse_value(v)?,
            "synth_subjects" => self.synth_subjects = parse_value(v)?,
            "synth_images_per_subject" => self.synth_images_per_subject = parse_value(v)?,
            "synth_size" => self.synth_size = parse_value(v)?,
            "synth_databases" => self.synth_databases = parse_value(v)?,
            "synth_noise" => self.synth_noise = parse_value(v)?,
            "split_train" => self.split_ratios.0 = parse_value(v)?,
            "split_test" => self.split_ratios.1 = parse_value(v)?,
            "split_val" => self.split_ratios.2 = parse_value(v)?,
            "pairs_train" => self.pairs_train = parse_value(v)?,
            "pairs_test" => self.pairs_test = parse_value(v)?,
            "pairs_val" => self.pairs_val = parse_value(v)?,
            "alpha" => self.alpha = parse_value(v)?,
            "clone_into" => {
                self.clone_into = match v {
                    "none" => CloneInto::None,
                    "a" => CloneInto::A,
                    "b" => CloneInto::B,
                    _ => return Err(format!("expected none|a|b, got `{v}`")),
                }
            }
            "crop_size" => self.crop_size = parse_value(v)?,
            "net_weights" => self.net_weights = Some(path(v)),
            "net_channels" => self.net_channels = parse_list(v)?,
            "net_convs_per_block" => self.net_convs_per_block = parse_value(v)?,
            "content_layers" => self.content_layers = Some(parse_list(v)?),
            "style_layers" => self.style_layers = Some(parse_list(v)?),
            "content_weight" => self.content_weight = parse_value(v)?,
            "style_weight" => self.style_weight = parse_value(v)?,
            "opt_memory" => self.opt_memory = parse_value(v)?,
            "opt_max_iters" => self.opt_max_iters = parse_value(v)?,
            "opt_grad_tol" => self.opt_grad_tol = parse_value(v)?,
            "opt_loss_rel_tol" => self.opt_loss_rel_tol = parse_value(v)?,
            "sharp_sigma" => self.sharp_sigma = parse_value(v)?,
            "sharp_amount" => self.sharp_amount = parse_value(v)?,
            "sharp_threshold" => self.sharp_threshold = parse_value(v)?,
            "hequ_reference" => {
                self.hequ_reference = match v {
                    "a" => HequReference::A,
                    "b" => HequReference::B,
                    "uniform" => HequReference::Uniform,
                    _ => return Err(format!("expected a|b|uniform, got `{v}`")),
                }
            }
            "scheme" => self.scheme = parse_scheme(v)?,
            "bsif_bank" => self.bsif_bank = Some(path(v)),
            "edge_quality" => self.edge_quality = parse_value(v)?,
            "classifier" => {
                self.classifier = match v {
                    "linear" => Classifier::Linear,
                    "tree" => Classifier::Tree,
                    _ => return Err(format!("expected linear|tree, got `{v}`")),
                }
            }
            "linear_lambda" => self.linear_lambda = parse_value(v)?,
            "linear_epochs" => self.linear_epochs = parse_value(v)?,
            "tree_max_depth" => self.tree_max_depth = parse_value(v)?,
            "tree_min_leaf" => self.tree_min_leaf = parse_value(v)?,
            "threshold" => self.threshold = Some(parse_value(v)?),
            "apcer_targets" => self.apcer_targets = parse_list(v)?,
            "mar_input" => self.mar_input = Some(path(v)),
            "mar_threshold" => self.mar_threshold = parse_value(v)?,
            "workers" => self.workers = parse_value(v)?,
            _ => unreachable!("key list and setter disagree on `{key}`"),
        }
        Ok(())
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let finite = [
            ("alpha", self.alpha),
            ("content_weight", self.content_weight),
            ("style_weight", self.style_weight),
            ("opt_grad_tol", self.opt_grad_tol),
            ("opt_loss_rel_tol", self.opt_loss_rel_tol),
            ("sharp_sigma", self.sharp_sigma),
            ("sharp_amount", self.sharp_amount),
            ("sharp_threshold", self.sharp_threshold),
            ("linear_lambda", self.linear_lambda),
            ("mar_threshold", self.mar_threshold),
        ];
        if let Some((k, _)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return Err(format!("`{k}` must be finite"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err("`alpha` must lie in [0, 1]".into());
        }
        if !(self.synth_noise >= 0.0 && self.synth_noise.is_finite()) {
            return Err("`synth_noise` must be finite and non-negative".into());
        }
        if self.synth_images_per_subject == 0 || self.synth_databases == 0 || self.synth_size < 16 {
            return Err(
                "synthetic set needs ≥1 image and database per subject and size ≥ 16".into(),
            );
        }
        if self.crop_size < 8 {
            return Err("`crop_size` must be at least 8".into());
        }
        if self.net_channels.is_empty()
            || self.net_channels.contains(&0)
            || self.net_convs_per_block == 0
        {
            return Err("network needs ≥1 block, ≥1 conv per block and nonzero channels".into());
        }
        if self.workers == 0 {
            return Err("`workers` must be at least 1".into());
        }
        if self.apcer_targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err("`apcer_targets` must lie in [0, 1]".into());
        }
        if self.threshold.is_some_and(|t| !t.is_finite()) {
            return Err("`threshold` must be finite".into());
        }
        Ok(())
    }

    pub fn effective_threshold(&self) -> f64 {
        self.threshold
            .unwrap_or(self.classifier.default_threshold())
    }

    /// Every key with its resolved value, in key order. Seeds always appear.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            writeln!(s, "{k} = {v}").unwrap();
        };
        let join = |v: &[String]| v.join(",");
        let nums = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        put("seed", self.seed.to_string());
        let seeds = [
            self.synth_seed,
            self.split_seed,
            self.pair_seed,
            self.net_seed,
            self.bsif_seed,
            self.linear_seed,
            self.g12_seed,
        ];
        for (k, v) in SEED_KEYS.iter().zip(seeds) {
            put(k, v.to_string());
        }
        put("synth_subjects", self.synth_subjects.to_string());
        put(
            "synth_images_per_subject",
            self.synth_images_per_subject.to_string(),
        );
        put("synth_size", self.synth_size.to_string());
        put("synth_databases", self.synth_databases.to_string());
        put("synth_noise", self.synth_noise.to_string());
        put("split_train", self.split_ratios.0.to_string());
        put("split_test", self.split_ratios.1.to_string());
        put("split_val", self.split_ratios.2.to_string());
        put("pairs_train", self.pairs_train.to_string());
        put("pairs_test", self.pairs_test.to_string());
        put("pairs_val", self.pairs_val.to_string());
        put("alpha", self.alpha.to_string());
        put(
            "clone_into",
            match self.clone_into {
                CloneInto::None => "none",
                CloneInto::A => "a",
                CloneInto::B => "b",
            }
            .into(),
        );
        put("crop_size", self.crop_size.to_string());
        if let Some(p) = &self.net_weights {
            put("net_weights", p.display().to_string());
        }
        put(
            "net_channels",
            self.net_channels
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        put("net_convs_per_block", self.net_convs_per_block.to_string());
        if let Some(l) = &self.content_layers {
            put("content_layers", join(l));
        }
        if let Some(l) = &self.style_layers {
            put("style_layers", join(l));
        }
        put("content_weight", self.content_weight.to_string());
        put("style_weight", self.style_weight.to_string());
        put("opt_memory", self.opt_memory.to_string());
        put("opt_max_iters", self.opt_max_iters.to_string());
        put("opt_grad_tol", self.opt_grad_tol.to_string());
        put("opt_loss_rel_tol", self.opt_loss_rel_tol.to_string());
        put("sharp_sigma", self.sharp_sigma.to_string());
        put("sharp_amount", self.sharp_amount.to_string());
        put("sharp_threshold", self.sharp_threshold.to_string());
        put(
            "hequ_reference",
            match self.hequ_reference {
                HequReference::A => "a",
                HequReference::B => "b",
                HequReference::Uniform => "uniform",
            }
            .into(),
        );
        put("scheme", scheme_key(self.scheme).into());
        if let Some(p) = &self.bsif_bank {
            put("bsif_bank", p.display().to_string());
        }
        put("edge_quality", self.edge_quality.to_string());
        put("classifier", self.classifier.tag().into());
        put("linear_lambda", self.linear_lambda.to_string());
        put("linear_epochs", self.linear_epochs.to_string());
        put("tree_max_depth", self.tree_max_depth.to_string());
        put("tree_min_leaf", self.tree_min_leaf.to_string());
        put("threshold", self.effective_threshold().to_string());
        put("apcer_targets", nums(&self.apcer_targets));
        if let Some(p) = &self.mar_input {
            put("mar_input", p.display().to_string());
        }
        put("mar_threshold", self.mar_threshold.to_string());
        put("workers", self.workers.to_string());
        s
    }
}

fn parse_value<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| format!("`{v}`: {e}"))
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|p| parse_value(p.trim())).collect()
}

/// Short config names for the feature schemes.
pub fn scheme_key(s: Scheme) -> &'static str {
    match s {
        Scheme::Lbp59 => "lbp",
        Scheme::Bsif4096 => "bsif",
        Scheme::EdgeFeat => "edge",
    }
}

fn parse_scheme(v: &str) -> std::result::Result<Scheme, String> {
    Scheme::ALL
        .into_iter()
        .find(|s| scheme_key(*s) == v || s.tag() == v)
        .ok_or_else(|| format!("expected lbp|bsif|edge, got `{v}`"))
}
