//! Quick-look SVG line charts from any CSV with numeric columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::output::write_atomic;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: String,
    /// Column holding a symmetric error bar for each point.
    pub err: Option<String>,
    /// Columns whose joint value selects the series of a row.
    pub group_by: Vec<String>,
    pub title: String,
    pub log_x: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(x, y, err)`; `err` is 0 without an error column.
    pub points: Vec<(f64, f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Reads the series described by `spec`. Rows with an empty y (for example
/// diverged runs) are skipped.
pub fn read_series(csv_path: &Path, spec: &PlotSpec) -> Result<Vec<Series>> {
    let malformed = |detail: String| Error::MalformedCsv {
        path: csv_path.to_path_buf(),
        detail,
    };
    let csv_err = |source| Error::Csv {
        path: csv_path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(csv_path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| malformed(format!("no column `{name}`")))
    };
    let xi = column(&spec.x)?;
    let yi = column(&spec.y)?;
    let ei = spec.err.as_deref().map(column).transpose()?;
    let gi = spec.group_by.iter().map(|g| column(g)).collect::<Result<Vec<_>>>()?;

    let mut groups: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let num = |i: usize| -> Result<Option<f64>> {
            let raw = record[i].trim();
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse()
                .map(Some)
                .map_err(|_| malformed(format!("row {}: `{raw}` is not a number", line + 1)))
        };
        let (Some(x), Some(y)) = (num(xi)?, num(yi)?) else {
            continue;
        };
        let e = match ei {
            Some(i) => num(i)?.unwrap_or(0.0),
            None => 0.0,
        };
        let label = gi.iter().map(|&i| &record[i]).collect::<Vec<_>>().join(" ");
        groups.entry(label).or_default().push((x, y, e));
    }
    let series: Vec<Series> = groups
        .into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label, points }
        })
        .collect();
    if series.is_empty() {
        return Err(malformed("no plottable rows".into()));
    }
    Ok(series)
}

/// Renders a standalone SVG document.
pub fn render_svg(series: &[Series], spec: &PlotSpec) -> Result<String> {
    let tx = |x: f64| if spec.log_x { x.log10() } else { x };
    let pts = || series.iter().flat_map(|s| &s.points);
    if spec.log_x && pts().any(|p| p.0 <= 0.0) {
        return Err(Error::config("log_x needs positive x values"));
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, e) in pts() {
        x0 = x0.min(tx(x));
        x1 = x1.max(tx(x));
        y0 = y0.min(y - e);
        y1 = y1.max(y + e);
    }
    if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
        return Err(Error::config("nothing finite to plot"));
    }
    if x1 == x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 == y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| MARGIN + (tx(x) - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.title)
    );
    let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{l} {t} L{l} {b} L{r} {b}" fill="none" stroke="black"/>"#
    );
    for (v, anchor_x, anchor_y, align) in [
        (y0, l - 6.0, b, "end"),
        (y1, l - 6.0, t + 4.0, "end"),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{anchor_x}" y="{anchor_y}" text-anchor="{align}">{}</text>"#,
            tick(v)
        );
    }
    let xlabel = |v: f64| tick(if spec.log_x { 10f64.powf(v) } else { v });
    let _ = writeln!(svg, r#"<text x="{l}" y="{}" text-anchor="middle">{}</text>"#, b + 18.0, xlabel(x0));
    let _ = writeln!(svg, r#"<text x="{r}" y="{}" text-anchor="middle">{}</text>"#, b + 18.0, xlabel(x1));
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(&spec.x)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&spec.y)
    );

    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y, _)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        for &(x, y, e) in s.points.iter().filter(|p| p.2 > 0.0) {
            let _ = writeln!(
                svg,
                r#"<line class="errorbar" x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="{color}"/>"#,
                px(x),
                py(y - e),
                py(y + e)
            );
        }
        if !s.label.is_empty() {
            let ly = t + 16.0 * k as f64;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{}</text>"#,
                r,
                escape(&s.label)
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Reads `csv_path`, renders it and writes `out`. Nothing is written when
/// the CSV has no plottable rows.
pub fn emit_plot(csv_path: &Path, spec: &PlotSpec, out: &Path) -> Result<()> {
    let series = read_series(csv_path, spec)?;
    let svg = render_svg(&series, spec)?;
    write_atomic(out, svg.as_bytes())
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
