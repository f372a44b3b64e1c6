use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{apcer, bpcer, bpcer_at_apcer, det_curve, DetCurve, ScoreSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    /// BPCER and per-variant APCER at the default threshold.
    pub default_csv: PathBuf,
    /// BPCER per variant at each APCER target.
    pub targets_csv: PathBuf,
    pub det_svg: PathBuf,
}

impl ReportPaths {
    pub fn in_dir(dir: impl AsRef<Path>, stem: &str) -> Self {
        let dir = dir.as_ref();
        Self {
            default_csv: dir.join(format!("{stem}_default.csv")),
            targets_csv: dir.join(format!("{stem}_bpcer_at_apcer.csv")),
            det_svg: dir.join(format!("{stem}_det.svg")),
        }
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes the default-threshold table, the BPCER@APCER table and the DET
/// plot. Variant columns follow the variant order.
pub fn emit_report(
    scores: &ScoreSet,
    default_threshold: f64,
    targets: &[f64],
    paths: &ReportPaths,
) -> Result<()> {
    scores.validate()?;
    let variants: Vec<_> = scores.attacks.keys().copied().collect();

    let mut a = String::from("threshold,bpcer");
    for v in &variants {
        write!(a, ",apcer_{v}").unwrap();
    }
    write!(
        a,
        "\n{default_threshold},{:.6}",
        bpcer(&scores.bona_fide, default_threshold)?
    )
    .unwrap();
    for v in &variants {
        write!(a, ",{:.6}", apcer(&scores.attacks[v], default_threshold)?).unwrap();
    }
    a.push('\n');

    let mut b = String::from("apcer_target");
    for v in &variants {
        write!(b, ",bpcer_{v}").unwrap();
    }
    b.push('\n');
    for &t in targets {
        write!(b, "{t}").unwrap();
        for &v in &variants {
            let op = bpcer_at_apcer(scores, v, t)?;
            write!(b, ",{:.6}", op.bpcer).unwrap();
        }
        b.push('\n');
    }

    let curves = variants
        .iter()
        .map(|&v| det_curve(scores, v))
        .collect::<Result<Vec<_>>>()?;

    write(&paths.default_csv, &a)?;
    write(&paths.targets_csv, &b)?;
    write(&paths.det_svg, &render_det_svg(&curves))
}

const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];
const FLOOR: f64 = 1e-4;

/// DET plot: APCER on x, BPCER on y, both log₁₀ and clipped to `[1e-4, 1]`.
pub fn render_det_svg(curves: &[DetCurve]) -> String {
    let (w, h, left, top, size) = (560.0, 480.0, 70.0, 20.0, 400.0);
    let project = |v: f64| (v.max(FLOOR).log10() - FLOOR.log10()) / -FLOOR.log10();
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{size}" height="{size}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let label = format!("1e-{}", 4 - k);
        let x = left + frac * size;
        let y = top + size - frac * size;
        writeln!(
            s,
            r##"<line x1="{x}" y1="{top}" x2="{x}" y2="{}" stroke="#ddd"/><text x="{x}" y="{}" text-anchor="middle">{label}</text>"##,
            top + size,
            top + size + 15.0
        )
        .unwrap();
        writeln!(
            s,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{label}</text>"##,
            left + size,
            left - 5.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">APCER</text>"#,
        left + size / 2.0,
        top + size + 35.0
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">BPCER</text>"#,
        top + size / 2.0,
        top + size / 2.0
    )
    .unwrap();
    for (i, c) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = c
            .points
            .iter()
            .map(|p| {
                format!(
                    "{:.2},{:.2}",
                    left + project(p.apcer) * size,
                    top + size - project(p.bpcer) * size
                )
            })
            .collect();
        writeln!(
            s,
            r#"<polyline class="det" data-variant="{v}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" "),
            v = c.variant
        )
        .unwrap();
        let ly = top + 15.0 + 16.0 * i as f64;
        writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            left + size + 10.0,
            left + size + 30.0,
            left + size + 35.0,
            ly + 4.0,
            c.variant
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
