//! Presentation-attack metrics (APCER, BPCER, DET sweeps, BPCER at fixed
//! APCER), morph acceptance rate, and report files.
//!
//! Scores are oriented so that higher means more attack-like; a sample is
//! classified as an attack when `score ≥ threshold`.

mod report;

use std::collections::BTreeMap;
use std::path::Path;

pub use self::report::{emit_report, render_det_svg, ReportPaths};

use crate::detectors::{Label, Variant};
use crate::error::{Error, Result};

/// Reporting grid of fixed APCER targets.
pub const DEFAULT_APCER_TARGETS: [f64; 3] = [0.10, 0.05, 0.01];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub bona_fide: Vec<f64>,
    pub attacks: BTreeMap<Variant, Vec<f64>>,
}

impl ScoreSet {
    pub fn push(&mut self, variant: Variant, score: f64) {
        if variant == Variant::Genuine {
            self.bona_fide.push(score);
        } else {
            self.attacks.entry(variant).or_default().push(score);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bona_fide.is_empty() {
            return Err(Error::Metric("no bona fide scores".into()));
        }
        if self.attacks.is_empty() || self.attacks.values().any(Vec::is_empty) {
            return Err(Error::Metric("no attack scores".into()));
        }
        if self
            .bona_fide
            .iter()
            .chain(self.attacks.values().flatten())
            .any(|s| !s.is_finite())
        {
            return Err(Error::Metric("non-finite score".into()));
        }
        Ok(())
    }

    fn variant(&self, v: Variant) -> Result<&[f64]> {
        self.attacks
            .get(&v)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Metric(format!("no scores for variant {v}")))
    }

    /// CSV with header `variant,label,score`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::Decode {
            path: path.to_path_buf(),
            reason: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["variant", "label", "score"]).map_err(err)?;
        let rows = self.bona_fide.iter().map(|s| (Variant::Genuine, s)).chain(
            self.attacks
                .iter()
                .flat_map(|(v, s)| s.iter().map(move |x| (*v, x))),
        );
        for (v, s) in rows {
            w.write_record([v.tag(), v.label().tag(), &s.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bad = |reason: String| Error::Decode {
            path: path.to_path_buf(),
            reason,
        };
        let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
        let mut set = ScoreSet::default();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 3 {
                return Err(bad(format!("expected 3 columns, got {}", rec.len())));
            }
            let variant: Variant = rec[0].parse().map_err(|e: Error| bad(e.to_string()))?;
            let label: Label = rec[1].parse().map_err(|e: Error| bad(e.to_string()))?;
            if variant.label() != label {
                return Err(bad(format!("variant {variant} with label {}", label.tag())));
            }
            let score: f64 = rec[2]
                .parse()
                .map_err(|e| bad(format!("score `{}`: {e}", &rec[2])))?;
            set.push(variant, score);
        }
        Ok(set)
    }
}

/// Fraction of attacks classified bona fide (`score < threshold`).
pub fn apcer(attack_scores: &[f64], threshold: f64) -> Result<f64> {
    if attack_scores.is_empty() {
        return Err(Error::Metric("no attack scores".into()));
    }
    Ok(
        attack_scores.iter().filter(|&&s| s < threshold).count() as f64
            / attack_scores.len() as f64,
    )
}

/// Fraction of bona fide samples classified attack (`score ≥ threshold`).
pub fn bpcer(bona_fide_scores: &[f64], threshold: f64) -> Result<f64> {
    if bona_fide_scores.is_empty() {
        return Err(Error::Metric("no bona fide scores".into()));
    }
    Ok(
        bona_fide_scores.iter().filter(|&&s| s >= threshold).count() as f64
            / bona_fide_scores.len() as f64,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub variant: Variant,
    /// Ascending threshold.
    pub points: Vec<DetPoint>,
}

/// One point per distinct score of the bona fide set and `variant`, plus a
/// final `+∞` point (everything classified bona fide).
pub fn det_curve(scores: &ScoreSet, variant: Variant) -> Result<DetCurve> {
    scores.validate()?;
    let attacks = scores.variant(variant)?;
    let mut thresholds: Vec<f64> = scores.bona_fide.iter().chain(attacks).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);

    let mut a = attacks.to_vec();
    let mut b = scores.bona_fide.clone();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut ia, mut ib) = (0, 0);
    let points = thresholds
        .into_iter()
        .map(|t| {
            while ia < a.len() && a[ia] < t {
                ia += 1;
            }
            while ib < b.len() && b[ib] < t {
                ib += 1;
            }
            DetPoint {
                threshold: t,
                apcer: ia as f64 / na,
                bpcer: (b.len() - ib) as f64 / nb,
            }
        })
        .collect();
    Ok(DetCurve { variant, points })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
    /// Some sweep point reached `apcer ≤ target`; otherwise this is the
    /// point of minimal APCER.
    pub achievable: bool,
}

/// Largest sweep threshold with `apcer ≤ target`.
pub fn bpcer_at_apcer(scores: &ScoreSet, variant: Variant, target: f64) -> Result<OperatingPoint> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::Metric(format!(
            "APCER target {target} outside (0, 1]"
        )));
    }
    let curve = det_curve(scores, variant)?;
    let best = curve.points.iter().rev().find(|p| p.apcer <= target);
    Ok(match best {
        Some(p) => OperatingPoint {
            threshold: p.threshold,
            apcer: p.apcer,
            bpcer: p.bpcer,
            achievable: true,
        },
        None => {
            let p = curve.points[0];
            OperatingPoint {
                threshold: p.threshold,
                apcer: p.apcer,
                bpcer: p.bpcer,
                achievable: false,
            }
        }
    })
}

/// Similarities of both contributing subjects' probes against one morph
/// (higher is a better match).
#[derive(Debug, Clone, PartialEq)]
pub struct MorphMatchRecord {
    pub morph_id: String,
    pub sim_a: f64,
    pub sim_b: f64,
}

/// Fraction of morphs accepted for both subjects.
pub fn mar(records: &[MorphMatchRecord], accept_threshold: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Metric("no match records".into()));
    }
    if records
        .iter()
        .any(|r| !r.sim_a.is_finite() || !r.sim_b.is_finite())
    {
        return Err(Error::Metric("non-finite similarity".into()));
    }
    let accepted = records
        .iter()
        .filter(|r| r.sim_a.min(r.sim_b) >= accept_threshold)
        .count();
    Ok(accepted as f64 / records.len() as f64)
}

/// CSV with header `morph_id,sim_a,sim_b`.
pub fn read_match_records(path: impl AsRef<Path>) -> Result<Vec<MorphMatchRecord>> {
    let path = path.as_ref();
    let bad = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 columns, got {}", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        out.push(MorphMatchRecord {
            morph_id: rec[0].to_string(),
            sim_a: num(&rec[1])?,
            sim_b: num(&rec[2])?,
        });
    }
    Ok(out)
}
