//! Acceptance criteria, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line (run with `--nocapture` to see them).

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use morphforge::manifest::Gender;
use morphforge::pipeline::{self, Mode, Workspace};
use morphforge::synth::{render_face, FaceParams};
use morphforge::RunConfig;
use morphforge_core::detectors::{
    bsif_histogram, generate_bsif_bank, lbp_histogram, Variant, BSIF_BITS, BSIF_SIZE, LBP_BINS,
};
use morphforge_core::evalkit::{
    apcer, bpcer, bpcer_at_apcer, det_curve, mar, MorphMatchRecord, ScoreSet,
};
use morphforge_core::imagekit::{Image, LandmarkSet};
use morphforge_core::morphgen::{blend, make_simple_morph, seamless_clone, CloneInto, CloneMask};
use morphforge_core::styletransfer::{
    build_net, build_test_net, enhance_morph, gram, lbfgsb_minimize, loss_and_grad, style_target,
    Bounds, Enhancement, FeatureMap, FeatureMaps, LossConfig, OptimizerConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed of the end-to-end run.
const E2E_SEED: u64 = 1;

fn criterion(n: u32, name: &str, body: impl FnOnce() -> Result<String, String>) {
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    match outcome {
        Ok(detail) => println!("PASS criterion {n:>2} ({name}): {detail}"),
        Err(why) => {
            println!("FAIL criterion {n:>2} ({name}): {why}");
            panic!("criterion {n} failed: {why}");
        }
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_image(seed: u64, w: usize, h: usize, c: usize) -> Image<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(w, h, c, |_, _, _| rng.gen()).unwrap()
}

/// Smooth base plus a sum of seeded sinusoids; different seeds give
/// different textures.
fn textured_image(seed: u64, size: usize) -> Image<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            let period = rng.gen_range(2.5..8.0);
            let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
            (
                angle.cos() * std::f64::consts::TAU / period,
                angle.sin() * std::f64::consts::TAU / period,
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.03..0.08),
            )
        })
        .collect();
    let tint: [f64; 3] = [
        rng.gen_range(0.4..0.6),
        rng.gen_range(0.35..0.55),
        rng.gen_range(0.3..0.5),
    ];
    Image::from_fn(size, size, 3, |c, x, y| {
        let (fx, fy) = (x as f64, y as f64);
        let base = tint[c] + 0.1 * ((fx + fy) / (2.0 * size as f64) - 0.5);
        let tex: f64 = waves
            .iter()
            .map(|&(kx, ky, ph, amp)| amp * (kx * fx + ky * fy + ph).sin())
            .sum();
        (base + tex).clamp(0.0, 1.0)
    })
    .unwrap()
}

#[test]
fn criterion_01_style_gradient_check() {
    criterion(1, "style-loss gradient check", || {
        let start = Instant::now();
        let net = build_test_net::<f64>(7, &[4, 4]).map_err(|e| e.to_string())?;
        let layers: Vec<String> = net
            .conv_blocks()
            .into_iter()
            .map(|b| b[0].clone())
            .collect();
        let cfg = LossConfig::new(vec![], vec![], layers.clone(), vec![1.0; layers.len()])
            .map_err(|e| e.to_string())?;
        let img = random_image(1, 16, 16, 3);
        let content = FeatureMaps::default();
        let style = style_target(&net, &random_image(2, 16, 16, 3), &layers).unwrap();
        let eval = |im: &Image<f64>| loss_and_grad(&net, im, &content, &style, &cfg).unwrap();
        let e = eval(&img);
        let h = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let k = rng.gen_range(0..img.data().len());
            let probe = |delta: f64| {
                let mut d = img.data().to_vec();
                d[k] += delta;
                eval(&img.with_data(d).unwrap()).loss
            };
            let numeric = (probe(h) - probe(-h)) / (2.0 * h);
            let analytic = e.grad.data()[k];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-12);
            worst = worst.max(rel);
        }
        let elapsed = start.elapsed();
        ensure(worst < 1e-3, || format!("max relative error {worst:e}"))?;
        ensure(elapsed < Duration::from_secs(10), || {
            format!("took {elapsed:?}")
        })?;
        Ok(format!("max relative error {worst:.2e} in {elapsed:.2?}"))
    });
}

#[test]
fn criterion_02_box_constrained_quadratic() {
    criterion(2, "optimizer on boxed quadratic", || {
        let objective = |x: &[f64]| {
            let f = x.iter().map(|v| (v - 2.0).powi(2)).sum();
            Ok((f, x.iter().map(|v| 2.0 * (v - 2.0)).collect()))
        };
        let cfg = OptimizerConfig {
            max_iters: 200,
            bounds: Bounds::Uniform {
                lower: 0.0,
                upper: 1.0,
            },
            ..OptimizerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut max_iters = 0;
        for run in 0..10 {
            let x0: Vec<f64> = if run == 0 {
                vec![0.0; 100]
            } else {
                (0..100).map(|_| rng.gen_range(-1.0..3.0)).collect()
            };
            let m = lbfgsb_minimize(objective, &x0, &cfg).map_err(|e| e.to_string())?;
            let err = m.x.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
            ensure(err <= 1e-6, || format!("run {run}: ∞-norm error {err:e}"))?;
            ensure(m.iterations <= 200, || {
                format!("run {run}: {} iterations", m.iterations)
            })?;
            ensure(m.trace.windows(2).all(|w| w[1] <= w[0]), || {
                format!("run {run}: trace increases")
            })?;
            max_iters = max_iters.max(m.iterations);
        }
        Ok(format!(
            "10 starts converged to 1 within 1e-6, at most {max_iters} iterations"
        ))
    });
}

#[test]
fn criterion_03_enhancement_fixed_point() {
    criterion(3, "enhancement fixed point", || {
        let net = build_test_net::<f64>(3, &[4, 8]).unwrap();
        let cfg = LossConfig::default_for(&net).unwrap();
        let img = textured_image(9, 32);
        let out = enhance_morph(&img, &img, &img, &net, &cfg, &OptimizerConfig::default())
            .map_err(|e| e.to_string())?;
        ensure(out.optimization.iterations == 0, || {
            format!("{} iterations", out.optimization.iterations)
        })?;
        let same = out
            .image
            .data()
            .iter()
            .zip(img.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, || "output differs from input".into())?;
        Ok("0 iterations, output bit-identical".into())
    });
}

fn enhancement_run() -> (Enhancement<f64>, Duration) {
    let start = Instant::now();
    let a = textured_image(41, 64);
    let b = textured_image(42, 64);
    let blended = blend(&a, &b, 0.5).unwrap();
    let net = build_net::<f64>(1, 3, &[4, 8], 2).unwrap();
    let cfg = LossConfig::default_for(&net).unwrap();
    let opt = OptimizerConfig {
        max_iters: 50,
        grad_tol: 0.0,
        loss_rel_tol: 0.0,
        ..OptimizerConfig::default()
    };
    let out = enhance_morph(&blended, &a, &b, &net, &cfg, &opt).unwrap();
    (out, start.elapsed())
}

#[test]
fn criterion_04_enhancement_effect() {
    criterion(4, "enhancement effect", || {
        let (out, elapsed) = enhancement_run();
        let (s0, s1) = (out.initial.style_total, out.last.style_total);
        ensure(
            out.optimization.trace.windows(2).all(|w| w[1] <= w[0]),
            || "total loss increased".into(),
        )?;
        ensure(s1 <= 0.5 * s0, || format!("style loss {s0:e} -> {s1:e}"))?;
        ensure(elapsed < Duration::from_secs(120), || {
            format!("took {elapsed:?}")
        })?;
        Ok(format!(
            "style loss {s0:.3e} -> {s1:.3e} ({:.1}%) after {} iterations in {elapsed:.2?}",
            100.0 * s1 / s0,
            out.optimization.iterations
        ))
    });
}

#[test]
fn criterion_05_gram_oracle() {
    criterion(5, "Gram oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for set in 0..20 {
            let f = FeatureMap {
                n: 3,
                width: 4,
                height: 1,
                data: (0..12)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect::<Vec<f64>>(),
            };
            let fm = FeatureMaps {
                maps: [("l".to_string(), f.clone())].into(),
            };
            let g = gram(&fm, "l").unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let mut s = 0.0;
                    for k in 0..4 {
                        s += f.data[i * 4 + k] * f.data[j * 4 + k];
                    }
                    ensure((g.at(i, j) - s).abs() < 1e-6, || {
                        format!("set {set} ({i},{j}): {} vs {s}", g.at(i, j))
                    })?;
                }
            }
        }
        Ok("20 random 3x4 sets match the double loop within 1e-6".into())
    });
}

fn is_uniform(p: u32) -> bool {
    (0..8)
        .filter(|&i| ((p >> i) & 1) != ((p >> ((i + 1) % 8)) & 1))
        .count()
        <= 2
}

fn lbp_oracle(img: &Image<f64>) -> Vec<f64> {
    let uniform: Vec<u32> = (0..256).filter(|&p| is_uniform(p)).collect();
    let (w, h) = (img.width(), img.height());
    let mut counts = vec![0u64; LBP_BINS];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let c = img.get(0, x, y);
            let mut p = 0u32;
            for b in 0..8 {
                // East first, counter-clockwise with y pointing down.
                let angle = b as f64 * std::f64::consts::FRAC_PI_4;
                let nx = (x as f64 + angle.cos()).round() as usize;
                let ny = (y as f64 - angle.sin()).round() as usize;
                if img.get(0, nx, ny) >= c {
                    p |= 1 << b;
                }
            }
            let bin = uniform.iter().position(|&u| u == p).unwrap_or(58);
            counts[bin] += 1;
        }
    }
    let total = ((w - 2) * (h - 2)) as f64;
    counts.iter().map(|&c| c as f64 / total).collect()
}

#[test]
fn criterion_06_lbp_bsif_oracles() {
    criterion(6, "LBP/BSIF oracles", || {
        let uniform = (0..256).filter(|&p| is_uniform(p)).count();
        ensure(uniform == 58, || format!("{uniform} uniform patterns"))?;
        ensure(LBP_BINS == 59 && BSIF_BITS == 4096, || "bin counts".into())?;
        let bank = generate_bsif_bank(6);
        let r = BSIF_SIZE / 2;
        for k in 0..10 {
            // Quantized samples make LBP ties common.
            let mut rng = ChaCha8Rng::seed_from_u64(600 + k);
            let img = Image::from_fn(16, 16, 1, |_, _, _| f64::from(rng.gen_range(0u8..8)) / 7.0)
                .unwrap();

            let lbp = lbp_histogram(&img).unwrap();
            ensure(lbp.values() == lbp_oracle(&img).as_slice(), || {
                format!("image {k}: LBP mismatch")
            })?;
            let sum: f64 = lbp.values().iter().sum();
            ensure((sum - 1.0).abs() < 1e-9, || {
                format!("image {k}: LBP sums to {sum}")
            })?;

            let mut counts = vec![0u64; BSIF_BITS];
            for y in r..16 - r {
                for x in r..16 - r {
                    let c = img.get(0, x, y);
                    let mut code = 0usize;
                    for (bit, f) in bank.filters().iter().enumerate() {
                        let mut resp = 0.0;
                        for i in 0..BSIF_SIZE {
                            for j in 0..BSIF_SIZE {
                                resp +=
                                    f[i * BSIF_SIZE + j] * (img.get(0, x + j - r, y + i - r) - c);
                            }
                        }
                        if resp > 0.0 {
                            code |= 1 << bit;
                        }
                    }
                    counts[code] += 1;
                }
            }
            let total = ((16 - 2 * r) * (16 - 2 * r)) as f64;
            let oracle: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
            let bsif = bsif_histogram(&img, &bank).unwrap();
            ensure(bsif.values() == oracle.as_slice(), || {
                format!("image {k}: BSIF mismatch")
            })?;
            let sum: f64 = bsif.values().iter().sum();
            ensure((sum - 1.0).abs() < 1e-9, || {
                format!("image {k}: BSIF sums to {sum}")
            })?;
        }
        Ok("10 random 16x16 images match exactly; 58 uniform patterns; 59 and 4096 bins".into())
    });
}

fn face(seed: u64, gender: Gender) -> (Image<f64>, LandmarkSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = FaceParams::random(&mut rng, 64, gender);
    render_face(&params, 0.01, &mut rng)
}

#[test]
fn criterion_07_morph_identities() {
    criterion(7, "morph identities", || {
        let (img, lm) = face(70, Gender::F);
        let self_morph = make_simple_morph(&img, &lm, &img, &lm, 0.5, CloneInto::None)
            .map_err(|e| e.to_string())?;
        let d_self = self_morph.max_abs_diff(&img);
        ensure(d_self <= 1.0 / 255.0, || {
            format!("self-morph differs by {d_self}")
        })?;

        let (a, lm_a) = face(71, Gender::M);
        let (b, lm_b) = face(72, Gender::M);
        let mut worst: f64 = 0.0;
        for alpha in [0.25, 0.5, 0.7] {
            let ab = make_simple_morph(&a, &lm_a, &b, &lm_b, alpha, CloneInto::None).unwrap();
            let ba = make_simple_morph(&b, &lm_b, &a, &lm_a, 1.0 - alpha, CloneInto::None).unwrap();
            worst = worst.max(ab.max_abs_diff(&ba));
            let plain = blend(&a, &b, alpha)
                .unwrap()
                .max_abs_diff(&blend(&b, &a, 1.0 - alpha).unwrap());
            worst = worst.max(plain);
        }
        ensure(worst <= 1e-6, || format!("symmetry error {worst:e}"))?;
        Ok(format!(
            "self-morph error {d_self:.2e}, symmetry error {worst:.2e}"
        ))
    });
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn rect_mask(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> CloneMask {
    let inside = (0..w * h)
        .map(|i| (x0..=x1).contains(&(i % w)) && (y0..=y1).contains(&(i / w)))
        .collect();
    CloneMask::new(w, h, inside).unwrap()
}

#[test]
fn criterion_08_poisson_clone() {
    criterion(8, "Poisson clone", || {
        let img = random_image(80, 24, 20, 3);
        let mask = rect_mask(24, 20, 3, 3, 18, 15);
        let self_err = seamless_clone(&img, &img, &mask)
            .unwrap()
            .max_abs_diff(&img);
        ensure(self_err < 1e-3, || format!("self-clone error {self_err:e}"))?;

        // 5×5 with the 3×3 interior unknown; mid-range values keep the
        // solution away from the clamp.
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let src = Image::from_fn(5, 5, 1, |_, _, _| rng.gen_range(0.4..0.6)).unwrap();
        let dst = Image::from_fn(5, 5, 1, |_, _, _| rng.gen_range(0.4..0.6)).unwrap();
        let mask = rect_mask(5, 5, 1, 1, 3, 3);
        let cg = seamless_clone(&src, &dst, &mask).unwrap();
        let cells: Vec<(usize, usize)> = (1..4).flat_map(|y| (1..4).map(move |x| (x, y))).collect();
        let mut a = vec![vec![0.0; 9]; 9];
        let mut b = vec![0.0; 9];
        for (k, &(x, y)) in cells.iter().enumerate() {
            a[k][k] = 4.0;
            for (nx, ny) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
                b[k] += src.get(0, x, y) - src.get(0, nx, ny);
                match cells.iter().position(|&c| c == (nx, ny)) {
                    Some(j) => a[k][j] = -1.0,
                    None => b[k] += dst.get(0, nx, ny),
                }
            }
        }
        let direct = dense_solve(a, b);
        let mut dense_err: f64 = 0.0;
        for (k, &(x, y)) in cells.iter().enumerate() {
            dense_err = dense_err.max((cg.get(0, x, y) - direct[k].clamp(0.0, 1.0)).abs());
        }
        ensure(dense_err < 1e-6, || {
            format!("CG vs dense error {dense_err:e}")
        })?;

        let src = random_image(82, 30, 24, 3);
        let dst = random_image(83, 30, 24, 3);
        let mask = rect_mask(30, 24, 4, 5, 22, 17);
        let out = seamless_clone(&src, &dst, &mask).unwrap();
        for c in 0..3 {
            for y in 0..24 {
                for x in 0..30 {
                    if !mask.is_inside(x, y) {
                        ensure(
                            out.get(c, x, y).to_bits() == dst.get(c, x, y).to_bits(),
                            || format!("outside pixel ({x},{y}) changed"),
                        )?;
                    }
                }
            }
        }
        Ok(format!(
            "self-clone {self_err:.1e}, CG vs dense {dense_err:.1e}, outside bit-identical"
        ))
    });
}

#[test]
fn criterion_09_metrics() {
    criterion(9, "metrics", || {
        let third = 1.0 / 3.0;
        ensure(apcer(&[0.9, 0.2, 0.7], 0.5).unwrap() == third, || {
            "apcer example".into()
        })?;
        ensure(apcer(&[0.9, 0.2, 0.7], 0.2).unwrap() == 0.0, || {
            "apcer at min".into()
        })?;
        ensure(apcer(&[0.9, 0.2, 0.7], 0.91).unwrap() == 1.0, || {
            "apcer above max".into()
        })?;
        ensure(bpcer(&[0.1, 0.4], 0.5).unwrap() == 0.0, || {
            "bpcer all below".into()
        })?;
        ensure(bpcer(&[0.1, 0.6], 0.5).unwrap() == 0.5, || {
            "bpcer example".into()
        })?;
        ensure(bpcer(&[0.5], 0.5).unwrap() == 1.0, || {
            "tie counts as attack".into()
        })?;

        let set = |bona: &[f64], attacks: &[f64]| ScoreSet {
            bona_fide: bona.to_vec(),
            attacks: [(Variant::Simple, attacks.to_vec())].into(),
        };
        let op =
            bpcer_at_apcer(&set(&[0.3, 0.2], &[0.9, 0.8, 0.1]), Variant::Simple, 0.34).unwrap();
        ensure(op.apcer == third && op.bpcer == 0.0, || {
            format!("bpcer_at_apcer example gave {op:?}")
        })?;

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for k in 0..100 {
            let bona: Vec<f64> = (0..rng.gen_range(1..30))
                .map(|_| rng.gen_range(-2.0..1.0))
                .collect();
            let att: Vec<f64> = (0..rng.gen_range(1..30))
                .map(|_| rng.gen_range(-1.0..2.0))
                .collect();
            let s = set(&bona, &att);
            let curve = det_curve(&s, Variant::Simple).unwrap();
            let monotone = curve.points.windows(2).all(|w| {
                w[0].threshold < w[1].threshold
                    && w[0].apcer <= w[1].apcer
                    && w[0].bpcer >= w[1].bpcer
            });
            ensure(monotone, || format!("set {k}: DET not monotone"))?;
            for target in [0.10, 0.05, 0.01] {
                let op = bpcer_at_apcer(&s, Variant::Simple, target).unwrap();
                let achievable = curve.points.iter().any(|p| p.apcer <= target);
                ensure(op.achievable == achievable, || {
                    format!("set {k}: achievable flag at {target}")
                })?;
                if achievable {
                    ensure(op.apcer <= target, || {
                        format!("set {k}: apcer {} > {target}", op.apcer)
                    })?;
                }
            }
        }

        let rec = |a: f64, b: f64| MorphMatchRecord {
            morph_id: String::new(),
            sim_a: a,
            sim_b: b,
        };
        ensure(
            mar(&[rec(0.8, 0.9), rec(0.8, 0.4), rec(0.2, 0.9)], 0.5).unwrap() == third,
            || "mar example".into(),
        )?;
        ensure(
            mar(&[rec(0.8, 0.9), rec(0.6, 0.7)], 0.5).unwrap() == 1.0,
            || "mar all accepted".into(),
        )?;
        ensure(
            mar(&[rec(0.1, 0.9), rec(0.6, 0.2)], 0.5).unwrap() == 0.0,
            || "mar min rule".into(),
        )?;
        Ok("hand examples exact; 100 DET sets monotone; targets honored".into())
    });
}

fn default_row(path: &Path) -> BTreeMap<String, f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    let row = r.records().next().unwrap().unwrap();
    header
        .iter()
        .zip(row.iter())
        .map(|(k, v)| (k.to_string(), v.parse().unwrap()))
        .collect()
}

fn end_to_end(dir: &Path) -> Duration {
    let start = Instant::now();
    let cfg = RunConfig::with_seed(E2E_SEED);
    pipeline::run_all(&cfg, &Workspace::new(dir).unwrap(), None).unwrap();
    start.elapsed()
}

#[test]
fn criterion_10_end_to_end_g11_g12() {
    criterion(10, "end-to-end g11/g12", || {
        let dir = tempfile::tempdir().unwrap();
        let elapsed = end_to_end(dir.path());
        let cfg = RunConfig::with_seed(E2E_SEED);
        ensure(cfg.synth_subjects >= 60, || "too few subjects".into())?;
        let ws = Workspace::new(dir.path()).unwrap();
        let g11 = default_row(&ws.reports(&cfg, Mode::G11).default_csv);
        let g12 = default_row(&ws.reports(&cfg, Mode::G12).default_csv);
        let (bpcer, simple) = (g11["bpcer"], g11["apcer_simple"]);
        let (imp11, imp12) = (g11["apcer_improved"], g12["apcer_improved"]);
        let summary = format!(
            "g11 BPCER {bpcer:.3}, APCER simple {simple:.3}, improved {imp11:.3}; g12 improved {imp12:.3}; {elapsed:.1?}"
        );
        ensure(bpcer <= 0.2, || format!("g11 BPCER too high: {summary}"))?;
        ensure(simple <= 0.2, || {
            format!("g11 APCER(simple) too high: {summary}")
        })?;
        ensure(imp12 <= imp11, || format!("g12 did not help: {summary}"))?;
        ensure(elapsed < Duration::from_secs(300), || {
            format!("too slow: {summary}")
        })?;
        Ok(summary)
    });
}

fn csv_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

#[test]
fn criterion_11_determinism() {
    criterion(11, "determinism", || {
        let trace = |e: &Enhancement<f64>| pipeline::trace_csv(e).into_bytes();
        let (a, _) = enhancement_run();
        let (b, _) = enhancement_run();
        ensure(trace(&a) == trace(&b), || {
            "enhancement traces differ".into()
        })?;
        ensure(a.image.data() == b.image.data(), || {
            "enhanced images differ".into()
        })?;

        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        end_to_end(d1.path());
        end_to_end(d2.path());
        let (f1, f2) = (csv_files(d1.path()), csv_files(d2.path()));
        ensure(!f1.is_empty() && f1.keys().eq(f2.keys()), || {
            "different CSV sets".into()
        })?;
        for (name, bytes) in &f1 {
            ensure(&f2[name] == bytes, || format!("{} differs", name.display()))?;
        }
        Ok(format!(
            "enhancement trace and {} pipeline CSVs byte-identical",
            f1.len()
        ))
    });
}
