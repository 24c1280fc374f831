use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::Mode;
use super::slope::{fit_slope, Column, SlopeFit};
use super::table::{ResultRow, ResultTable};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputFormats {
    pub csv: bool,
    pub svg: bool,
    pub summary: bool,
}

impl Default for OutputFormats {
    fn default() -> Self {
        OutputFormats { csv: true, svg: true, summary: true }
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 70.0;

/// One panel per (mode, σ) in train mode and per mode otherwise; one series per target.
fn panels(table: &ResultTable) -> BTreeMap<(Mode, Option<u64>), Vec<ResultRow>> {
    let mut out: BTreeMap<(Mode, Option<u64>), Vec<ResultRow>> = BTreeMap::new();
    for r in &table.rows {
        let sigma = (r.mode == Mode::Train).then(|| r.sigma.to_bits());
        out.entry((r.mode, sigma)).or_default().push(r.clone());
    }
    out
}

fn panel_name(mode: Mode, sigma: Option<u64>) -> String {
    match sigma {
        Some(bits) => format!("{}_sigma{}", mode.as_str(), f64::from_bits(bits)),
        None => mode.as_str().to_string(),
    }
}

fn axis_labels(mode: Mode) -> (&'static str, &'static str) {
    match mode {
        Mode::Train => ("n_train", "test MSE"),
        Mode::Approximate => ("#T", "squared L2 error"),
        Mode::Compile => ("#T", "K (nonzero parameters)"),
    }
}

/// Per-target fits within a panel; targets with too few points are skipped.
fn panel_fits(rows: &[ResultRow]) -> Vec<SlopeFit> {
    let mut names: Vec<&str> = rows.iter().map(|r| r.target.as_str()).collect();
    names.dedup();
    names
        .into_iter()
        .filter_map(|name| {
            let sub = ResultTable::new(rows.iter().filter(|r| r.target == name).cloned().collect());
            fit_slope(&sub, Column::X, Column::Metric, &[Column::Target]).ok()?.into_iter().next()
        })
        .filter(|f| f.slope.is_finite())
        .collect()
}

/// Log-log scatter of trial means with the fitted line and a ±1 std band.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, fits: &[SlopeFit]) -> String {
    let pts = fits.iter().flat_map(|f| f.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, m, s, _) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        let lo = if m - s > 0.0 { m - s } else { m };
        y0 = y0.min(lo);
        y1 = y1.max(m + s);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (1.0, 10.0, 1.0, 10.0);
    }
    let (lx0, lx1) = (x0.log10().floor(), x1.log10().ceil().max(x0.log10().floor() + 1.0));
    let (ly0, ly1) = (y0.log10().floor(), y1.log10().ceil().max(y0.log10().floor() + 1.0));
    let px = |x: f64| MARGIN + (x.log10() - lx0) / (lx1 - lx0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y.log10().max(ly0) - ly0) / (ly1 - ly0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="30" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, escape(title));
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(s, r#"<rect x="{l}" y="{t}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, r - l, b - t);
    for k in lx0 as i32..=lx1 as i32 {
        let x = px(10f64.powi(k));
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{b}" x2="{x:.2}" y2="{:.1}" stroke="black"/>"#, b + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle" font-size="12">1e{k}</text>"#, b + 20.0);
    }
    for k in ly0 as i32..=ly1 as i32 {
        let y = py(10f64.powi(k));
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{y:.2}" x2="{l}" y2="{y:.2}" stroke="black"/>"#, l - 5.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.2}" text-anchor="end" font-size="12">1e{k}</text>"#, l - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, H - 25.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 20 {:.1})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (i, f) in fits.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let mut band: Vec<String> = f.points.iter().map(|&(x, m, sd, _)| format!("{:.2},{:.2}", px(x), py(m + sd))).collect();
        band.extend(f.points.iter().rev().map(|&(x, m, sd, _)| format!("{:.2},{:.2}", px(x), py(if m - sd > 0.0 { m - sd } else { y0 }))));
        let _ = writeln!(s, r#"<polygon points="{}" fill="{c}" fill-opacity="0.15" stroke="none"/>"#, band.join(" "));
        let line = |x: f64| (f.intercept + f.slope * x.ln()).exp();
        let (a, z) = (f.points[0].0, f.points[f.points.len() - 1].0);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-width="2"/>"#,
            px(a),
            py(line(a)),
            px(z),
            py(line(z))
        );
        for &(x, m, _, _) in &f.points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{c}"/>"#, px(x), py(m));
        }
        let label = format!("{} slope {:.3}", f.group.join(" "), f.slope);
        let ly = t + 20.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" font-size="12" fill="{c}">{}</text>"#, r - 180.0, escape(&label));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Plain-text slope report, one line per (panel, target).
fn summary(table: &ResultTable) -> String {
    let mut s = String::new();
    let failed = table.rows.iter().filter(|r| r.failed()).count();
    let secs: f64 = table.rows.iter().map(|r| r.seconds).sum();
    let _ = writeln!(s, "rows {} failed {} compute seconds {:.1}", table.len(), failed, secs);
    for ((mode, sigma), rows) in panels(table) {
        for f in panel_fits(&rows) {
            let _ = writeln!(
                s,
                "{} {} slope {:.4} stderr {:.4} intercept {:.4} points {}",
                panel_name(mode, sigma),
                f.group.join(" "),
                f.slope,
                f.stderr,
                f.intercept,
                f.points.len()
            );
        }
    }
    s
}

/// Write results.csv, one SVG per panel and summary.txt into `dir`.
pub fn emit_outputs(table: &ResultTable, dir: &Path, formats: OutputFormats) -> Result<Vec<PathBuf>> {
    if table.is_empty() {
        return Err(Error::InsufficientData("empty result table".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    if formats.csv {
        put("results.csv".into(), table.to_csv()?)?;
    }
    if formats.svg {
        for ((mode, sigma), rows) in panels(table) {
            let name = panel_name(mode, sigma);
            let (xl, yl) = axis_labels(mode);
            put(format!("{name}.svg"), render_svg(&name, xl, yl, &panel_fits(&rows)))?;
        }
    }
    if formats.summary {
        put("summary.txt".into(), summary(table))?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let mut rows = Vec::new();
        for (i, target) in ["onedisc", "threedisc"].into_iter().enumerate() {
            for k in 4..=8 {
                for trial in 0..3 {
                    let x = (1u32 << k) as f64;
                    rows.push(ResultRow {
                        mode: Mode::Train,
                        target: target.into(),
                        x,
                        sigma: 0.1,
                        trial,
                        metric: (1.0 + i as f64) / x * (1.0 + 0.2 * trial as f64),
                        seconds: 1.0,
                        seed: trial as u64,
                    });
                }
            }
        }
        ResultTable::new(rows)
    }

    #[test]
    fn writes_files_byte_stably() {
        let dir = tempfile::tempdir().unwrap();
        let a = emit_outputs(&table(), dir.path(), OutputFormats::default()).unwrap();
        let names: Vec<String> = a.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
        assert_eq!(names, ["results.csv", "train_sigma0.1.svg", "summary.txt"]);
        let first: Vec<Vec<u8>> = a.iter().map(|p| std::fs::read(p).unwrap()).collect();
        emit_outputs(&table(), dir.path(), OutputFormats::default()).unwrap();
        let second: Vec<Vec<u8>> = a.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        let summary = String::from_utf8(first[2].clone()).unwrap();
        assert!(summary.contains("onedisc slope -1.0000"), "{summary}");
    }

    #[test]
    fn empty_table_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_outputs(&ResultTable::default(), dir.path(), OutputFormats::default()).is_err());
    }
}
