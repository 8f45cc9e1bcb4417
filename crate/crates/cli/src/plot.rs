//! Static SVG charts from a run directory's CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use symphony_sim::experiment::{read_rows, ExperimentError};
use symphony_sim::metrics::{cdf, OverlapRow, SummaryRow};

const W: f64 = 720.0;
const H: f64 = 420.0;
const PAD: f64 = 56.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn nice_max(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&m| m >= v)
        .unwrap_or(10.0 * mag)
}

fn chart(title: &str, x_label: &str, y_label: &str, series: &[Series], step: bool) -> String {
    let x_max = nice_max(
        series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.0))
            .fold(0.0, f64::max),
    );
    let y_max = nice_max(
        series
            .iter()
            .flat_map(|s| s.points.iter().map(|p| p.1))
            .fold(0.0, f64::max),
    );
    let sx = |x: f64| PAD + x / x_max * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - y / y_max * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#,
        W / 2.0
    );
    let _ = writeln!(
        s,
        r#"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{0}" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let (x, y) = (sx(f * x_max), sy(f * y_max));
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
            H - PAD + 16.0,
            fmt_tick(f * x_max),
            PAD - 6.0,
            y + 4.0,
            fmt_tick(f * y_max)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{PAD}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/>"##,
            W - PAD
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{y_label}</text>"#,
        H / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        let mut prev_y = None;
        for (j, &(x, y)) in ser.points.iter().enumerate() {
            if step {
                if let Some(py) = prev_y {
                    let _ = write!(d, "L{:.1},{:.1} ", sx(x), sy(py));
                }
                prev_y = Some(y);
            }
            let _ = write!(d, "{}{:.1},{:.1} ", if j == 0 { "M" } else { "L" }, sx(x), sy(y));
        }
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD - 120.0,
            PAD + 14.0 * i as f64,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn write(path: PathBuf, text: String) -> Result<PathBuf, ExperimentError> {
    std::fs::write(&path, text).map_err(|e| ExperimentError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    Ok(path)
}

/// Writes the overlap timeline and the max-overlap and CCT CDFs into `out`.
pub fn plot_dir(dir: &Path, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    std::fs::create_dir_all(out).map_err(|e| ExperimentError::Io {
        path: out.display().to_string(),
        msg: e.to_string(),
    })?;
    let overlap: Vec<OverlapRow> = read_rows(&dir.join("overlap.csv"))?;
    let summary: Vec<SummaryRow> = read_rows(&dir.join("summary.csv"))?;

    let mut by_run: BTreeMap<(u32, u32), Vec<(f64, f64)>> = BTreeMap::new();
    for r in &overlap {
        by_run
            .entry((r.run_id, r.job_id))
            .or_default()
            .push((r.t_ns as f64 / 1e6, r.overlap as f64));
    }
    let timeline: Vec<Series> = by_run
        .into_iter()
        .take(PALETTE.len())
        .map(|((run, job), points)| Series {
            label: format!("run {run} job {job}"),
            points,
        })
        .collect();

    let max_ov: Vec<f64> = summary.iter().map(|r| r.max_overlap as f64).collect();
    let cct: Vec<f64> = summary
        .iter()
        .filter_map(|r| r.cct_ns)
        .map(|v| v as f64 / 1e6)
        .collect();

    Ok(vec![
        write(
            out.join("overlap.svg"),
            chart("Step overlap", "time (ms)", "distinct steps in flight", &timeline, true),
        )?,
        write(
            out.join("max_overlap_cdf.svg"),
            chart(
                "Max step overlap",
                "max overlap",
                "CDF",
                &[Series {
                    label: "all runs".into(),
                    points: cdf(&max_ov),
                }],
                true,
            ),
        )?,
        write(
            out.join("cct_cdf.svg"),
            chart(
                "Collective completion time",
                "CCT (ms)",
                "CDF",
                &[Series {
                    label: "all runs".into(),
                    points: cdf(&cct),
                }],
                true,
            ),
        )?,
    ])
}
