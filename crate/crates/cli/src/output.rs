//! Deterministic file output: CSV tables, JSON documents and small SVG plots.
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! reader never sees a partial file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Fixed 12-decimal rendering; negative zero prints as zero.
pub fn format_number(x: f64) -> String {
    let s = format!("{x:.12}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&x| format_number(x)))?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    write_atomic(path, &table.to_csv()?)
}

/// Single-record CSV from string cells.
pub fn record_csv(headers: &[&str], cells: &[String]) -> Result<Vec<u8>> {
    ensure!(
        headers.len() == cells.len(),
        "header/record length mismatch"
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers)?;
    w.write_record(cells)?;
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Debug, Clone)]
pub struct PlotSpec<'a> {
    pub title: &'a str,
    pub x: &'a str,
    /// At most two columns.
    pub series: &'a [&'a str],
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const COLORS: [&str; 2] = ["#1f77b4", "#d62728"];
const TICKS: usize = 5;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Line plot of one or two columns against `spec.x`.
pub fn render_svg(table: &Table, spec: &PlotSpec) -> Result<String> {
    if table.rows.is_empty() {
        bail!("cannot plot an empty table");
    }
    ensure!(
        (1..=2).contains(&spec.series.len()),
        "a plot takes one or two series, got {}",
        spec.series.len()
    );
    let col = |name: &str| {
        table
            .column(name)
            .with_context(|| format!("no column named {name}"))
    };
    let xi = col(spec.x)?;
    let series = spec
        .series
        .iter()
        .map(|s| col(s))
        .collect::<Result<Vec<_>>>()?;

    let xs: Vec<f64> = table.rows.iter().map(|r| r[xi]).collect();
    if spec.log_x {
        ensure!(
            xs.iter().all(|&x| x > 0.0),
            "log axis needs positive x values"
        );
    }
    let tx = |x: f64| if spec.log_x { x.log10() } else { x };
    let (x0, x1) = range(xs.iter().map(|&x| tx(x)));
    let (y0, y1) = range(
        table
            .rows
            .iter()
            .flat_map(|r| series.iter().map(move |&c| r[c])),
    );

    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (tx(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )?;
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(spec.title)
    )?;
    writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )?;

    for k in 0..TICKS {
        let f = k as f64 / (TICKS - 1) as f64;
        let xv = x0 + f * (x1 - x0);
        let label = if spec.log_x { 10f64.powf(xv) } else { xv };
        let sx = MARGIN_L + f * pw;
        writeln!(
            svg,
            r#"<line class="tick" x1="{sx:.1}" y1="{:.1}" x2="{sx:.1}" y2="{:.1}" stroke="black"/>"#,
            MARGIN_T + ph,
            MARGIN_T + ph + 5.0
        )?;
        writeln!(
            svg,
            r#"<text x="{sx:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            MARGIN_T + ph + 18.0,
            tick_label(label)
        )?;
        let yv = y0 + f * (y1 - y0);
        let sy = MARGIN_T + ph - f * ph;
        writeln!(
            svg,
            r#"<line class="tick" x1="{:.1}" y1="{sy:.1}" x2="{MARGIN_L}" y2="{sy:.1}" stroke="black"/>"#,
            MARGIN_L - 5.0
        )?;
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#,
            MARGIN_L - 8.0,
            sy + 4.0,
            tick_label(yv)
        )?;
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 10.0,
        escape(spec.x_label)
    )?;
    writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {:.1})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(spec.y_label)
    )?;

    for (k, (&c, name)) in series.iter().zip(spec.series).enumerate() {
        let points: Vec<String> = table
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r[xi]), py(r[c])))
            .collect();
        writeln!(
            svg,
            r#"<polyline class="series" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            COLORS[k],
            points.join(" ")
        )?;
        let ly = MARGIN_T + 16.0 + 16.0 * k as f64;
        let lx = MARGIN_L + pw - 120.0;
        writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}" font-size="11">{}</text></g>"#,
            lx + 20.0,
            COLORS[k],
            lx + 26.0,
            ly + 4.0,
            escape(name)
        )?;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
            s[1..].to_string()
        } else {
            s
        }
    }
}

pub fn write_svg(path: &Path, table: &Table, spec: &PlotSpec) -> Result<()> {
    write_atomic(path, render_svg(table, spec)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_is_fixed_and_has_no_negative_zero() {
        assert_eq!(format_number(0.25), "0.250000000000");
        assert_eq!(format_number(-0.0), "0.000000000000");
        assert_eq!(format_number(-1e-15), "0.000000000000");
        assert_eq!(format_number(-0.5), "-0.500000000000");
        assert_eq!(format_number(1000.0), "1000.000000000000");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0, -0.0]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "a,b\n1.000000000000,0.000000000000\n");
    }

    #[test]
    fn empty_table_is_not_plotted() {
        let t = Table::new(&["x", "y"]);
        let spec = PlotSpec {
            title: "t",
            x: "x",
            series: &["y"],
            x_label: "x",
            y_label: "y",
            log_x: false,
        };
        assert!(render_svg(&t, &spec).is_err());
    }

    #[test]
    fn too_many_series_is_an_error() {
        let mut t = Table::new(&["x", "a", "b", "c"]);
        t.push(vec![0.0, 1.0, 2.0, 3.0]);
        let spec = PlotSpec {
            title: "t",
            x: "x",
            series: &["a", "b", "c"],
            x_label: "x",
            y_label: "y",
            log_x: false,
        };
        assert!(render_svg(&t, &spec).is_err());
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
