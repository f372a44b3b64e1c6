//! Subcommand implementations over a work directory.
//!
//! Layout under the work directory:
//! `manifest.csv`, `faces/`, `norm/` (aligned originals), `pairs.csv`,
//! `morphs/`, `traces/`, `samples_{morph,enhance,post}.csv`,
//! `enhance_summary.csv`, `features/`, `models/`, `reports/`.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use morphforge_core::detectors::{
    bsif_histogram, edge_feature_stats, generate_bsif_bank, lbp_histogram, load_bsif_bank,
    load_model, read_feature_csv, save_model, score, train_linear, train_tree, write_feature_csv,
    BsifFilterBank, FeatureVector, LabeledSample, LinearConfig, Model, Scheme, TreeConfig, Variant,
};
use morphforge_core::evalkit::{
    emit_report, mar as mar_rate, read_match_records, ReportPaths, ScoreSet,
};
use morphforge_core::imagekit::{
    load_image, normalize_face_to, save_image, to_grayscale, Image, LandmarkSet, Point,
};
use morphforge_core::morphgen::morph_parts;
use morphforge_core::postprocess::{equalize, histogram_match, unsharp_mask};
use morphforge_core::styletransfer::{
    build_net, enhance_morph, load_weights, ConvNet, Enhancement, LossConfig, OptimizerConfig,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{scheme_key, Classifier, HequReference, RunConfig};
use crate::error::{CliError, Result};
use crate::manifest::{Manifest, Split};
use crate::plan::{plan_pairs, split_dataset};
use crate::samples::{read_samples, write_samples, SampleRow};
use crate::synth::{generate, SynthConfig};

/// Training-set composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Genuine images and simple morphs only.
    G11,
    /// Half of the simple training morphs swapped for their improved
    /// counterparts.
    G12,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::G11 => "g11",
            Mode::G12 => "g12",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "g11" => Ok(Mode::G11),
            "g12" => Ok(Mode::G12),
            _ => Err(format!("unknown mode `{s}` (expected g11|g12)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.dir.join(rel)
    }

    fn subdir(&self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        std::fs::create_dir_all(&p).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    pub fn manifest(&self) -> PathBuf {
        self.path("manifest.csv")
    }

    pub fn features(&self, scheme: Scheme, split: Split) -> PathBuf {
        self.path(format!("features/{}_{split}.csv", scheme_key(scheme)))
    }

    pub fn model_stem(cfg: &RunConfig, mode: Mode) -> String {
        format!("{}_{}_{mode}", scheme_key(cfg.scheme), cfg.classifier.tag())
    }

    pub fn model(&self, cfg: &RunConfig, mode: Mode) -> PathBuf {
        self.path(format!("models/{}.cnwt", Self::model_stem(cfg, mode)))
    }

    pub fn reports(&self, cfg: &RunConfig, mode: Mode) -> ReportPaths {
        ReportPaths::in_dir(self.path("reports"), &Self::model_stem(cfg, mode))
    }

    pub fn write_effective_config(&self, cfg: &RunConfig) -> Result<()> {
        let p = self.path("config_effective.txt");
        std::fs::write(&p, cfg.to_text()).map_err(|e| CliError::io(&p, e))
    }
}

/// Applies `f` to every item on up to `workers` threads. Results keep input
/// order, so the worker count never changes what is written.
pub fn par_map<I: Sync, O: Send>(
    items: &[I],
    workers: usize,
    f: impl Fn(&I) -> Result<O> + Sync,
) -> Result<Vec<O>> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<O>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

pub fn synth(cfg: &RunConfig, ws: &Workspace) -> Result<PathBuf> {
    let m = generate(
        &SynthConfig {
            subjects: cfg.synth_subjects,
            images_per_subject: cfg.synth_images_per_subject,
            size: cfg.synth_size,
            databases: cfg.synth_databases,
            noise: cfg.synth_noise,
            seed: cfg.synth_seed,
        },
        &ws.dir,
    )?;
    let path = ws.manifest();
    m.save(&path)?;
    log::info!(
        "synth: {} images of {} subjects",
        m.entries.len(),
        cfg.synth_subjects
    );
    Ok(path)
}

/// Loads `manifest` (default: the work directory's), with paths made
/// absolute when it lives elsewhere.
fn load_manifest(ws: &Workspace, manifest: Option<&Path>) -> Result<Manifest> {
    let path = manifest
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ws.manifest());
    let mut m = Manifest::load(&path)?;
    let same = std::fs::canonicalize(&m.root).ok() == std::fs::canonicalize(&ws.dir).ok();
    if !same {
        for e in &mut m.entries {
            e.image_path = m.root.join(&e.image_path);
            e.landmarks_path = m.root.join(&e.landmarks_path);
        }
        m.root = ws.dir.clone();
    }
    Ok(m)
}

pub fn split(cfg: &RunConfig, ws: &Workspace, manifest: Option<&Path>) -> Result<PathBuf> {
    let m = load_manifest(ws, manifest)?;
    let out = split_dataset(&m, cfg.split_ratios, cfg.split_seed)?;
    let path = ws.manifest();
    out.save(&path)?;
    for s in Split::ASSIGNED {
        let n = out.entries.iter().filter(|e| e.split == s).count();
        log::info!("split: {s} has {n} images");
    }
    Ok(path)
}

/// Keeps normalized landmarks strictly inside the crop, so they can seed a
/// triangulation; the crop box is spanned by the outermost brow/mouth points,
/// which land on its border.
fn clamp_into(lm: &LandmarkSet, size: usize) -> LandmarkSet {
    let hi = size as f64 - 1.5;
    lm.map(|p| Point::new(p.x.clamp(0.5, hi), p.y.clamp(0.5, hi)))
}

fn pairs_wanted(cfg: &RunConfig, split: Split) -> usize {
    match split {
        Split::Train => cfg.pairs_train,
        Split::Test => cfg.pairs_test,
        Split::Val => cfg.pairs_val,
        Split::Unassigned => 0,
    }
}

fn norm_image(id: &str) -> String {
    format!("norm/{id}.png")
}

fn norm_landmarks(id: &str) -> String {
    format!("norm/{id}.lm")
}

/// Aligns every assigned image, plans pairs per split and writes aligned
/// simple morphs plus the morph sample manifest (genuine rows first).
pub fn morph(cfg: &RunConfig, ws: &Workspace, manifest: Option<&Path>) -> Result<PathBuf> {
    let m = load_manifest(ws, manifest)?;
    ws.subdir("norm")?;
    ws.subdir("morphs")?;
    let assigned: Vec<_> = m
        .entries
        .iter()
        .filter(|e| e.split != Split::Unassigned)
        .collect();
    if assigned.is_empty() {
        return Err(CliError::Split(
            "manifest has no assigned images; run `split` first".into(),
        ));
    }
    par_map(&assigned, cfg.workers, |e| {
        let img: Image<f64> = load_image(m.resolve(&e.image_path))?;
        let lm = LandmarkSet::load(m.resolve(&e.landmarks_path))?;
        let (crop, lm) = normalize_face_to(&img, &lm, cfg.crop_size)?;
        save_image(&crop, ws.path(norm_image(&e.id)))?;
        clamp_into(&lm, cfg.crop_size).save(ws.path(norm_landmarks(&e.id)))?;
        Ok(())
    })?;

    let mut rows: Vec<SampleRow> = assigned
        .iter()
        .map(|e| SampleRow {
            sample_id: e.id.clone(),
            split: e.split,
            variant: Variant::Genuine,
            pair: None,
            image_path: norm_image(&e.id).into(),
            source_a: e.id.clone(),
            source_b: String::new(),
        })
        .collect();
    let mut pairs_csv = String::from("split,pair,id_a,id_b\n");
    let mut jobs = Vec::new();
    for split in Split::ASSIGNED {
        let wanted = pairs_wanted(cfg, split);
        if wanted == 0 || !m.entries.iter().any(|e| e.split == split) {
            continue;
        }
        let plan = plan_pairs(&m, split, wanted, cfg.pair_seed)?;
        log::info!(
            "pairs: {split} has {} pairs, usage spread {}",
            plan.pairs.len(),
            plan.usage_spread()
        );
        for (k, (a, b)) in plan.pairs.into_iter().enumerate() {
            writeln!(pairs_csv, "{split},{k},{a},{b}").unwrap();
            jobs.push((split, k, a, b));
        }
    }
    write_text(&ws.path("pairs.csv"), &pairs_csv)?;

    let morphs = par_map(&jobs, cfg.workers, |(split, k, a, b)| {
        let load = |id: &str| -> Result<(Image<f64>, LandmarkSet)> {
            let e = m.get(id).expect("planned ids come from the manifest");
            Ok((
                load_image(m.resolve(&e.image_path))?,
                LandmarkSet::load(m.resolve(&e.landmarks_path))?,
            ))
        };
        let ((ia, la), (ib, lb)) = (load(a)?, load(b)?);
        // Morph the captures themselves, then align the result like any
        // genuine image.
        let parts = morph_parts(&ia, &la, &ib, &lb, cfg.alpha, cfg.clone_into)?;
        let (aligned, _) = normalize_face_to(&parts.result, &parts.landmarks, cfg.crop_size)?;
        let id = format!("{split}_{k:03}_simple");
        let rel = format!("morphs/{id}.png");
        save_image(&aligned, ws.path(&rel))?;
        Ok(SampleRow {
            sample_id: id,
            split: *split,
            variant: Variant::Simple,
            pair: Some(*k),
            image_path: rel.into(),
            source_a: a.clone(),
            source_b: b.clone(),
        })
    })?;
    rows.extend(morphs);
    let path = ws.path("samples_morph.csv");
    write_samples(&path, &rows)?;
    Ok(path)
}

pub fn build_network(cfg: &RunConfig) -> Result<ConvNet<f64>> {
    Ok(match &cfg.net_weights {
        Some(p) => load_weights(p)?,
        None => build_net(cfg.net_seed, 3, &cfg.net_channels, cfg.net_convs_per_block)?,
    })
}

pub fn loss_config(cfg: &RunConfig, net: &ConvNet<f64>) -> Result<LossConfig<f64>> {
    let defaults = LossConfig::for_net(net, cfg.content_weight, cfg.style_weight)?;
    let content = cfg
        .content_layers
        .clone()
        .unwrap_or(defaults.content_layers);
    let style = cfg.style_layers.clone().unwrap_or(defaults.style_layers);
    for l in content.iter().chain(&style) {
        net.layer_index(l)?;
    }
    let (cw, sw) = (
        vec![cfg.content_weight; content.len()],
        vec![cfg.style_weight; style.len()],
    );
    Ok(LossConfig::new(content, cw, style, sw)?)
}

pub fn optimizer_config(cfg: &RunConfig) -> OptimizerConfig<f64> {
    OptimizerConfig {
        memory: cfg.opt_memory,
        max_iters: cfg.opt_max_iters,
        grad_tol: cfg.opt_grad_tol,
        loss_rel_tol: cfg.opt_loss_rel_tol,
        ..OptimizerConfig::default()
    }
}

/// `iteration,loss` for every accepted iterate, starting at the input.
pub fn trace_csv(e: &Enhancement<f64>) -> String {
    let mut s = String::from("iteration,loss\n");
    for (i, l) in e.optimization.trace.iter().enumerate() {
        writeln!(s, "{i},{l:e}").unwrap();
    }
    s
}

/// Style-transfer enhancement of every simple morph toward the averaged
/// style of its two originals.
pub fn enhance(cfg: &RunConfig, ws: &Workspace) -> Result<PathBuf> {
    let rows = read_samples(&ws.path("samples_morph.csv"))?;
    let net = build_network(cfg)?;
    let loss_cfg = loss_config(cfg, &net)?;
    let opt = optimizer_config(cfg);
    ws.subdir("traces")?;
    let simple: Vec<&SampleRow> = rows
        .iter()
        .filter(|r| r.variant == Variant::Simple)
        .collect();
    let results = par_map(&simple, cfg.workers, |r| {
        let blended: Image<f64> = load_image(ws.path(&r.image_path))?;
        let a: Image<f64> = load_image(ws.path(norm_image(&r.source_a)))?;
        let b: Image<f64> = load_image(ws.path(norm_image(&r.source_b)))?;
        let e = enhance_morph(&blended, &a, &b, &net, &loss_cfg, &opt)?;
        let id = r.sample_id.replace("_simple", "_improved");
        let rel = format!("morphs/{id}.png");
        save_image(&e.image, ws.path(&rel))?;
        write_text(&ws.path(format!("traces/{id}.csv")), &trace_csv(&e))?;
        log::debug!(
            "enhance {id}: {} iterations, style {:e} -> {:e}",
            e.optimization.iterations,
            e.initial.style_total,
            e.last.style_total
        );
        let summary = format!(
            "{id},{},{},{:?},{:e},{:e},{:e},{:e}\n",
            e.optimization.iterations,
            e.optimization.evaluations,
            e.optimization.termination,
            e.initial.content_total,
            e.initial.style_total,
            e.last.content_total,
            e.last.style_total
        );
        Ok((
            SampleRow {
                sample_id: id,
                variant: Variant::Improved,
                image_path: rel.into(),
                ..(*r).clone()
            },
            summary,
        ))
    })?;
    let mut summary = String::from(
        "sample_id,iterations,evaluations,termination,initial_content,initial_style,final_content,final_style\n",
    );
    let mut out = Vec::with_capacity(results.len());
    for (row, line) in results {
        summary.push_str(&line);
        out.push(row);
    }
    write_text(&ws.path("enhance_summary.csv"), &summary)?;
    let path = ws.path("samples_enhance.csv");
    write_samples(&path, &out)?;
    Ok(path)
}

fn hequ(cfg: &RunConfig, ws: &Workspace, img: &Image<f64>, r: &SampleRow) -> Result<Image<f64>> {
    Ok(match cfg.hequ_reference {
        HequReference::Uniform => equalize(img)?,
        HequReference::A | HequReference::B => {
            let src = if cfg.hequ_reference == HequReference::A {
                &r.source_a
            } else {
                &r.source_b
            };
            let reference: Image<f64> = load_image(ws.path(norm_image(src)))?;
            histogram_match(img, &reference)?
        }
    })
}

/// Sharpened and histogram-adjusted simple morphs, and histogram-adjusted
/// improved morphs when those exist.
pub fn post(cfg: &RunConfig, ws: &Workspace) -> Result<PathBuf> {
    let mut inputs: Vec<SampleRow> = read_samples(&ws.path("samples_morph.csv"))?
        .into_iter()
        .filter(|r| r.variant == Variant::Simple)
        .collect();
    let enhanced = ws.path("samples_enhance.csv");
    if enhanced.exists() {
        inputs.extend(read_samples(&enhanced)?);
    } else {
        log::warn!("post: no improved morphs; skipping imp_hequ");
    }
    let produced = par_map(&inputs, cfg.workers, |r| {
        let img: Image<f64> = load_image(ws.path(&r.image_path))?;
        let stem = r
            .sample_id
            .rsplit_once('_')
            .map_or(r.sample_id.as_str(), |(s, _)| s);
        let variants: Vec<(Variant, Image<f64>)> = if r.variant == Variant::Simple {
            vec![
                (
                    Variant::Sharp,
                    unsharp_mask(&img, cfg.sharp_sigma, cfg.sharp_amount, cfg.sharp_threshold)?,
                ),
                (Variant::Hequ, hequ(cfg, ws, &img, r)?),
            ]
        } else {
            vec![(Variant::ImpHequ, hequ(cfg, ws, &img, r)?)]
        };
        variants
            .into_iter()
            .map(|(v, out)| {
                let id = format!("{stem}_{v}");
                let rel = format!("morphs/{id}.png");
                save_image(&out, ws.path(&rel))?;
                Ok(SampleRow {
                    sample_id: id,
                    variant: v,
                    image_path: rel.into(),
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let path = ws.path("samples_post.csv");
    write_samples(&path, &produced.into_iter().flatten().collect::<Vec<_>>())?;
    Ok(path)
}

/// A configured feature extractor.
pub enum Extractor {
    Lbp,
    Bsif(BsifFilterBank),
    Edge(u8),
}

impl Extractor {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Ok(match cfg.scheme {
            Scheme::Lbp59 => Extractor::Lbp,
            Scheme::Bsif4096 => Extractor::Bsif(match &cfg.bsif_bank {
                Some(p) => load_bsif_bank(p)?,
                None => generate_bsif_bank(cfg.bsif_seed),
            }),
            Scheme::EdgeFeat => Extractor::Edge(cfg.edge_quality),
        })
    }

    /// Texture schemes run on luma.
    pub fn extract(&self, img: &Image<f64>) -> Result<FeatureVector> {
        Ok(match self {
            Extractor::Lbp => lbp_histogram(&to_grayscale(img))?,
            Extractor::Bsif(bank) => bsif_histogram(&to_grayscale(img), bank)?,
            Extractor::Edge(q) => edge_feature_stats(img, *q)?,
        })
    }
}

/// One feature CSV per split over every sample manifest present, rows in
/// variant/pair order.
pub fn features(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    let mut rows = read_samples(&ws.path("samples_morph.csv"))?;
    for extra in ["samples_enhance.csv", "samples_post.csv"] {
        let p = ws.path(extra);
        if p.exists() {
            rows.extend(read_samples(&p)?);
        }
    }
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let ex = Extractor::from_config(cfg)?;
    ws.subdir("features")?;
    let mut written = Vec::new();
    for split in Split::ASSIGNED {
        let these: Vec<&SampleRow> = rows.iter().filter(|r| r.split == split).collect();
        if these.is_empty() {
            continue;
        }
        let samples = par_map(&these, cfg.workers, |r| {
            let img: Image<f64> = load_image(ws.path(&r.image_path))?;
            Ok(LabeledSample::new(ex.extract(&img)?, r.variant))
        })?;
        let path = ws.features(cfg.scheme, split);
        write_feature_csv(&path, &samples)?;
        written.push(path);
    }
    Ok(written)
}

/// Genuine samples plus the mode's morph mix. In `g12` the simple morphs
/// (in pair order) are matched to the improved ones by position; a seeded
/// half, rounded up, is replaced by the improved version.
pub fn select_training(
    samples: &[LabeledSample],
    mode: Mode,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    let of = |v: Variant| samples.iter().filter(move |s| s.variant == v).cloned();
    let mut out: Vec<LabeledSample> = of(Variant::Genuine).collect();
    let simple: Vec<LabeledSample> = of(Variant::Simple).collect();
    match mode {
        Mode::G11 => out.extend(simple),
        Mode::G12 => {
            let improved: Vec<LabeledSample> = of(Variant::Improved).collect();
            if improved.len() != simple.len() {
                return Err(CliError::MissingInput(PathBuf::from(format!(
                    "g12 needs one improved morph per simple morph ({} vs {})",
                    improved.len(),
                    simple.len()
                ))));
            }
            let mut idx: Vec<usize> = (0..simple.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let swap = simple.len().div_ceil(2);
            let mut use_improved = vec![false; simple.len()];
            for &i in &idx[..swap] {
                use_improved[i] = true;
            }
            for (i, s) in simple.into_iter().enumerate() {
                out.push(if use_improved[i] {
                    improved[i].clone()
                } else {
                    s
                });
            }
        }
    }
    Ok(out)
}

fn composition(samples: &[LabeledSample]) -> String {
    let mut s = String::from("variant,count\n");
    for v in Variant::MORPHS.into_iter().chain([Variant::Genuine]) {
        let n = samples.iter().filter(|x| x.variant == v).count();
        if n > 0 {
            writeln!(s, "{v},{n}").unwrap();
        }
    }
    s
}

pub fn train(cfg: &RunConfig, ws: &Workspace, mode: Mode) -> Result<PathBuf> {
    let train_path = ws.features(cfg.scheme, Split::Train);
    require(&train_path)?;
    let train = select_training(&read_feature_csv(&train_path)?, mode, cfg.g12_seed)?;
    let model = match cfg.classifier {
        Classifier::Linear => Model::Linear(train_linear(
            &train,
            &LinearConfig {
                lambda: cfg.linear_lambda,
                epochs: cfg.linear_epochs,
                seed: cfg.linear_seed,
            },
        )?),
        Classifier::Tree => {
            let val_path = ws.features(cfg.scheme, Split::Val);
            let prune = if val_path.exists() {
                select_training(
                    &read_feature_csv(&val_path)?,
                    mode,
                    cfg.g12_seed.wrapping_add(1),
                )?
            } else {
                Vec::new()
            };
            Model::Tree(train_tree(
                &train,
                &TreeConfig {
                    max_depth: cfg.tree_max_depth,
                    min_leaf: cfg.tree_min_leaf,
                },
                &prune,
            )?)
        }
    };
    ws.subdir("models")?;
    let path = ws.model(cfg, mode);
    save_model(&model, &path)?;
    write_text(
        &ws.path(format!(
            "models/{}_training.csv",
            Workspace::model_stem(cfg, mode)
        )),
        &composition(&train),
    )?;
    Ok(path)
}

/// Scores the test split and writes the score CSV, both tables and the DET
/// plot.
pub fn eval(cfg: &RunConfig, ws: &Workspace, mode: Mode) -> Result<ReportPaths> {
    let model_path = ws.model(cfg, mode);
    require(&model_path)?;
    let test_path = ws.features(cfg.scheme, Split::Test);
    require(&test_path)?;
    let model = load_model(&model_path)?;
    let mut scores = ScoreSet::default();
    for s in read_feature_csv(&test_path)? {
        scores.push(s.variant, score(&model, &s.features)?);
    }
    ws.subdir("reports")?;
    scores.write_csv(ws.path(format!(
        "reports/{}_scores.csv",
        Workspace::model_stem(cfg, mode)
    )))?;
    let paths = ws.reports(cfg, mode);
    emit_report(
        &scores,
        cfg.effective_threshold(),
        &cfg.apcer_targets,
        &paths,
    )?;
    Ok(paths)
}

/// MAR over the similarity records named by `mar_input`.
pub fn mar(cfg: &RunConfig, ws: &Workspace) -> Result<f64> {
    let input = cfg.mar_input.as_ref().ok_or_else(|| CliError::Config {
        path: ws.dir.clone(),
        reason: "`mar` needs `mar_input`".into(),
    })?;
    require(input)?;
    let records = read_match_records(input)?;
    let rate = mar_rate(&records, cfg.mar_threshold)?;
    ws.subdir("reports")?;
    write_text(
        &ws.path("reports/mar.csv"),
        &format!(
            "accept_threshold,records,mar\n{},{},{rate:.6}\n",
            cfg.mar_threshold,
            records.len()
        ),
    )?;
    Ok(rate)
}

/// Every step in order; without `manifest` the synthetic set is generated.
pub fn run_all(cfg: &RunConfig, ws: &Workspace, manifest: Option<&Path>) -> Result<()> {
    ws.write_effective_config(cfg)?;
    let source = match manifest {
        Some(p) => p.to_path_buf(),
        None => synth(cfg, ws)?,
    };
    split(cfg, ws, Some(&source))?;
    morph(cfg, ws, None)?;
    enhance(cfg, ws)?;
    post(cfg, ws)?;
    features(cfg, ws)?;
    for mode in [Mode::G11, Mode::G12] {
        train(cfg, ws, mode)?;
        eval(cfg, ws, mode)?;
    }
    Ok(())
}
