//! Procedural faces for desk-scale runs: smooth shaded blobs for skin, eyes,
//! brows, nose and mouth, a per-subject seeded texture, per-image pose,
//! lighting and sensor noise, and the matching landmarks.

use std::f64::consts::PI;
use std::path::Path;

use morphforge_core::imagekit::{save_image, Image, LandmarkSet, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{CliError, Result};
use crate::manifest::{Gender, Manifest, ManifestEntry, Split};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub subjects: usize,
    pub images_per_subject: usize,
    pub size: usize,
    pub databases: usize,
    /// Standard deviation of the per-capture Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

/// A subject's fixed appearance, in canonical (unposed) pixel coordinates.
#[derive(Debug, Clone)]
pub struct FaceParams {
    size: f64,
    center: (f64, f64),
    radii: (f64, f64),
    skin: [f64; 3],
    hair: [f64; 3],
    background: [f64; 3],
    lips: [f64; 3],
    iris: [f64; 3],
    eye_y: f64,
    eye_dx: f64,
    eye_r: f64,
    brow_y: f64,
    brow_len: f64,
    brow_w: f64,
    nose_y: f64,
    mouth_y: f64,
    mouth_w: f64,
    mouth_h: f64,
    /// `(fx, fy, phase, amplitude)` sinusoids, frequencies in cycles/px.
    texture: Vec<(f64, f64, f64, f64)>,
}

fn rgb(rng: &mut ChaCha8Rng, base: [f64; 3], spread: f64) -> [f64; 3] {
    let k = rng.gen_range(1.0 - spread..1.0 + spread);
    base.map(|c| (c * k * rng.gen_range(0.95..1.05)).clamp(0.0, 1.0))
}

impl FaceParams {
    pub fn random(rng: &mut ChaCha8Rng, size: usize, gender: Gender) -> Self {
        let s = size as f64;
        let narrow = if gender == Gender::F { 0.94 } else { 1.0 };
        let cx = s * rng.gen_range(0.48..0.52);
        let cy = s * rng.gen_range(0.50..0.54);
        let eye_y = cy - s * rng.gen_range(0.07..0.10);
        let texture = (0..8)
            .map(|_| {
                let period = rng.gen_range(2.2..5.0);
                let theta = rng.gen_range(0.0..PI);
                (
                    theta.cos() / period,
                    theta.sin() / period,
                    rng.gen_range(0.0..2.0 * PI),
                    rng.gen_range(0.008..0.018),
                )
            })
            .collect();
        Self {
            size: s,
            center: (cx, cy),
            radii: (
                s * rng.gen_range(0.30..0.35) * narrow,
                s * rng.gen_range(0.40..0.45),
            ),
            skin: rgb(rng, [0.78, 0.60, 0.48], 0.2),
            hair: rgb(rng, [0.25, 0.18, 0.12], 0.5),
            background: rgb(rng, [0.45, 0.50, 0.55], 0.25),
            lips: rgb(
                rng,
                if gender == Gender::F {
                    [0.72, 0.30, 0.32]
                } else {
                    [0.62, 0.38, 0.36]
                },
                0.1,
            ),
            iris: rgb(rng, [0.30, 0.25, 0.20], 0.4),
            eye_y,
            eye_dx: s * rng.gen_range(0.11..0.14),
            eye_r: s * rng.gen_range(0.032..0.042),
            brow_y: eye_y - s * rng.gen_range(0.06..0.08),
            brow_len: s * rng.gen_range(0.09..0.12),
            brow_w: s * rng.gen_range(0.012..0.02),
            nose_y: cy + s * rng.gen_range(0.04..0.07),
            mouth_y: cy + s * rng.gen_range(0.16..0.20),
            mouth_w: s * rng.gen_range(0.07..0.10),
            mouth_h: s * rng.gen_range(0.018..0.028),
            texture,
        }
    }

    fn brow_ends(&self, side: f64) -> (Point, Point) {
        let (cx, _) = self.center;
        let ex = cx + side * self.eye_dx;
        let inner = Point::new(ex - side * 0.45 * self.brow_len, self.brow_y);
        let outer = Point::new(
            ex + side * 0.55 * self.brow_len,
            self.brow_y + 0.2 * self.brow_len,
        );
        (inner, outer)
    }

    /// Canonical landmark positions.
    pub fn landmarks(&self) -> Vec<(&'static str, Point)> {
        let (cx, _) = self.center;
        let (li, lo) = self.brow_ends(-1.0);
        let (ri, ro) = self.brow_ends(1.0);
        vec![
            ("eye_left", Point::new(cx - self.eye_dx, self.eye_y)),
            ("eye_right", Point::new(cx + self.eye_dx, self.eye_y)),
            ("brow_l_inner", li),
            ("brow_l_outer", lo),
            ("brow_r_inner", ri),
            ("brow_r_outer", ro),
            ("nose_tip", Point::new(cx, self.nose_y)),
            ("mouth_left", Point::new(cx - self.mouth_w, self.mouth_y)),
            ("mouth_right", Point::new(cx + self.mouth_w, self.mouth_y)),
            ("mouth_top", Point::new(cx, self.mouth_y - self.mouth_h)),
            ("mouth_bottom", Point::new(cx, self.mouth_y + self.mouth_h)),
        ]
    }

    /// Color at canonical position `(u, v)`, before lighting and noise.
    fn shade(&self, u: f64, v: f64) -> [f64; 3] {
        let s = self.size;
        let (cx, cy) = self.center;
        let (rx, ry) = self.radii;
        let bg_k = 0.85 + 0.3 * v / s;
        let mut c = self.background.map(|b| b * bg_k);

        let d = ((u - cx) / rx).powi(2) + ((v - cy) / ry).powi(2);
        let face = soft(1.0 - d.sqrt(), 1.5 / rx);
        let shading = 1.0 - 0.18 * d;
        let skin = self.skin.map(|k| k * shading);
        mix(&mut c, skin, face);

        let hairline = cy - 0.55 * ry + 0.08 * ry * ((u - cx) / rx * 3.0).sin();
        let hair = face * soft(hairline - v, 2.0);
        mix(&mut c, self.hair, hair);

        let nose = (-((u - cx) / (0.02 * s)).powi(2)).exp()
            * soft(self.nose_y - v, 1.0)
            * soft(v - self.eye_y, 1.0);
        mix(&mut c, self.skin.map(|k| k * 0.75), 0.35 * nose);
        let nostril =
            (-(((u - cx) / (0.035 * s)).powi(2) + ((v - self.nose_y) / (0.012 * s)).powi(2))).exp();
        mix(&mut c, self.skin.map(|k| k * 0.6), 0.5 * nostril);

        for side in [-1.0, 1.0] {
            let ex = cx + side * self.eye_dx;
            let de =
                ((u - ex) / self.eye_r).powi(2) + ((v - self.eye_y) / (0.6 * self.eye_r)).powi(2);
            mix(
                &mut c,
                [0.93, 0.92, 0.90],
                soft(1.0 - de.sqrt(), 1.0 / self.eye_r),
            );
            let di = ((u - ex).powi(2) + (v - self.eye_y).powi(2)).sqrt() / (0.5 * self.eye_r);
            mix(&mut c, self.iris, soft(1.0 - di, 2.0 / self.eye_r));

            let (a, b) = self.brow_ends(side);
            let dist = segment_distance(Point::new(u, v), a, b);
            mix(
                &mut c,
                self.hair.map(|h| h * 0.8),
                soft(self.brow_w - dist, 1.0),
            );
        }

        let dm = ((u - cx) / self.mouth_w).powi(2) + ((v - self.mouth_y) / self.mouth_h).powi(2);
        mix(&mut c, self.lips, soft(1.0 - dm.sqrt(), 1.0 / self.mouth_w));
        let line =
            (-((v - self.mouth_y) / 0.8).powi(2)).exp() * soft(1.0 - dm.sqrt(), 1.0 / self.mouth_w);
        mix(&mut c, self.lips.map(|l| l * 0.5), 0.6 * line);

        let t: f64 = self
            .texture
            .iter()
            .map(|&(fx, fy, ph, a)| a * (2.0 * PI * (fx * u + fy * v) + ph).sin())
            .sum();
        c.map(|k| k + t)
    }
}

/// Smooth 0→1 ramp of `x` over a band `±width` around 0.
fn soft(x: f64, width: f64) -> f64 {
    let t = (x / width.max(1e-9) * 0.5 + 0.5).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn mix(c: &mut [f64; 3], top: [f64; 3], a: f64) {
    for k in 0..3 {
        c[k] = c[k] * (1.0 - a) + top[k] * a;
    }
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((p.x - a.x - t * dx).powi(2) + (p.y - a.y - t * dy).powi(2)).sqrt()
}

/// One capture of a subject: small rotation and shift, a lighting gain, and
/// Gaussian sensor noise.
pub fn render_face(
    params: &FaceParams,
    noise: f64,
    rng: &mut ChaCha8Rng,
) -> (Image<f64>, LandmarkSet) {
    let s = params.size;
    let angle = rng.gen_range(-4.0f64..4.0).to_radians();
    let shift = (
        rng.gen_range(-0.02..0.02) * s,
        rng.gen_range(-0.02..0.02) * s,
    );
    let gain = rng.gen_range(0.92..1.08);
    let noise = Normal::new(0.0, noise).expect("finite, non-negative sigma");
    let (cx, cy) = params.center;
    let (cos, sin) = (angle.cos(), angle.sin());
    let forward = |p: Point| {
        let (dx, dy) = (p.x - cx, p.y - cy);
        Point::new(
            cx + dx * cos - dy * sin + shift.0,
            cy + dx * sin + dy * cos + shift.1,
        )
    };
    let n = params.size as usize;
    let mut data = vec![0.0; 3 * n * n];
    for y in 0..n {
        for x in 0..n {
            let (dx, dy) = (x as f64 - shift.0 - cx, y as f64 - shift.1 - cy);
            let (u, v) = (cx + dx * cos + dy * sin, cy - dx * sin + dy * cos);
            let c = params.shade(u, v);
            for k in 0..3 {
                data[k * n * n + y * n + x] = (c[k] * gain + noise.sample(rng)).clamp(0.0, 1.0);
            }
        }
    }
    let img = Image::new(n, n, 3, data).expect("consistent raster");
    let lm = params
        .landmarks()
        .into_iter()
        .map(|(name, p)| (name.to_string(), forward(p)))
        .collect();
    (img, lm)
}

/// Renders the set into `dir/faces` and returns its manifest (rooted at
/// `dir`, every entry unassigned). Subjects alternate m/f and cycle through
/// `databases` source tags.
pub fn generate(cfg: &SynthConfig, dir: &Path) -> Result<Manifest> {
    let faces = dir.join("faces");
    std::fs::create_dir_all(&faces).map_err(|e| CliError::io(&faces, e))?;
    let mut entries = Vec::new();
    for i in 0..cfg.subjects {
        let gender = if i % 2 == 0 { Gender::M } else { Gender::F };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let params = FaceParams::random(&mut rng, cfg.size, gender);
        let subject = format!("s{i:03}");
        for k in 0..cfg.images_per_subject {
            let id = format!("{subject}_{k}");
            let (img, lm) = render_face(&params, cfg.noise, &mut rng);
            let (image_path, landmarks_path) =
                (format!("faces/{id}.png"), format!("faces/{id}.lm"));
            save_image(&img, dir.join(&image_path))?;
            lm.save(dir.join(&landmarks_path))?;
            entries.push(ManifestEntry {
                id,
                image_path: image_path.into(),
                landmarks_path: landmarks_path.into(),
                subject_id: subject.clone(),
                gender,
                source_db: format!("synth{}", i % cfg.databases),
                split: Split::Unassigned,
            });
        }
    }
    Manifest::new(entries, dir)
}
