//! SVG line charts and heatmaps rendered from metric CSVs.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::metrics::MetricTable;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChartKind {
    Line,
    Heatmap,
}

/// How one metric CSV is drawn.
#[derive(Debug, Clone, Copy)]
pub struct ChartSpec {
    pub table: &'static str,
    pub key_columns: usize,
    pub kind: ChartKind,
    /// Key column on the x axis (line) or down the rows (heatmap).
    pub x: usize,
    /// Key column naming the series (line) or the heatmap columns.
    pub series: usize,
    pub value: &'static str,
    pub title: &'static str,
}

pub const CHARTS: [ChartSpec; 8] = [
    ChartSpec { table: "ethnic_frequency_by_decade", key_columns: 2, kind: ChartKind::Line, x: 0, series: 1, value: "fraction", title: "Actor share by decade" },
    ChartSpec { table: "relative_face_size", key_columns: 2, kind: ChartKind::Line, x: 0, series: 1, value: "mean_relative_size", title: "Relative face size by decade" },
    ChartSpec { table: "center_distance", key_columns: 2, kind: ChartKind::Line, x: 0, series: 1, value: "mean_distance", title: "Distance to poster center by decade" },
    ChartSpec { table: "unique_actor_buckets", key_columns: 2, kind: ChartKind::Line, x: 0, series: 1, value: "fraction", title: "Actor share by unique actors per movie" },
    ChartSpec { table: "conditional_given_largest", key_columns: 2, kind: ChartKind::Heatmap, x: 0, series: 1, value: "probability", title: "Category given the largest face" },
    ChartSpec { table: "genre_race_distribution", key_columns: 2, kind: ChartKind::Heatmap, x: 0, series: 1, value: "fraction", title: "Category share per genre" },
    ChartSpec { table: "race_genre_distribution", key_columns: 2, kind: ChartKind::Heatmap, x: 0, series: 1, value: "share", title: "Genre share per category" },
    ChartSpec { table: "rank_race_ratio", key_columns: 2, kind: ChartKind::Heatmap, x: 0, series: 1, value: "fraction", title: "Category share per cast rank" },
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Distinct values of a key column in first-seen order.
fn ordered_keys(t: &MetricTable, col: usize) -> Vec<String> {
    let mut seen = BTreeSet::new();
    t.rows
        .iter()
        .filter(|r| seen.insert(r.keys[col].clone()))
        .map(|r| r.keys[col].clone())
        .collect()
}

fn value_of(t: &MetricTable, spec: &ChartSpec, x: &str, s: &str) -> Option<f64> {
    let c = t.column(spec.value)?;
    t.rows
        .iter()
        .find(|r| r.keys[spec.x] == x && r.keys[spec.series] == s)
        .and_then(|r| r.values[c])
}

fn header(out: &mut String, w: f64, h: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(title));
}

pub fn line_chart(t: &MetricTable, spec: &ChartSpec) -> String {
    let xs = ordered_keys(t, spec.x);
    let series = ordered_keys(t, spec.series);
    let values: Vec<f64> = t.column(spec.value).map_or(vec![], |c| t.rows.iter().filter_map(|r| r.values[c]).collect());
    let y_max = values.iter().copied().fold(0.0, f64::max).max(1e-9);
    let y_max = if y_max <= 1.0 { 1.0 } else { y_max };
    let (pw, ph) = (WIDTH - 2.0 * MARGIN - 100.0, HEIGHT - 2.0 * MARGIN);
    let px = |i: usize| MARGIN + if xs.len() > 1 { pw * i as f64 / (xs.len() - 1) as f64 } else { pw / 2.0 };
    let py = |v: f64| MARGIN + ph * (1.0 - v / y_max);

    let mut out = String::new();
    header(&mut out, WIDTH, HEIGHT, spec.title);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = MARGIN + ph,
        r = MARGIN + pw
    );
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.2}</text>"#,
            MARGIN - 6.0,
            py(v) + 4.0,
            v
        );
    }
    for (i, x) in xs.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            px(i),
            MARGIN + ph + 16.0,
            esc(x)
        );
    }
    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let pts: Vec<String> = xs
            .iter()
            .enumerate()
            .filter_map(|(i, x)| value_of(t, spec, x, s).map(|v| format!("{:.1},{:.1}", px(i), py(v))))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" "));
            for p in &pts {
                let (x, y) = p.split_once(',').unwrap();
                let _ = writeln!(out, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = MARGIN + 16.0 * si as f64;
        let lx = MARGIN + pw + 16.0;
        let _ = writeln!(out, r#"<rect x="{lx:.1}" y="{:.1}" width="10" height="10" fill="{color}"/>"#, ly - 9.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, lx + 14.0, esc(s));
    }
    out.push_str("</svg>\n");
    out
}

pub fn heatmap(t: &MetricTable, spec: &ChartSpec) -> String {
    let rows = ordered_keys(t, spec.x);
    let cols = ordered_keys(t, spec.series);
    let cell = 44.0;
    let left = 130.0;
    let top = 90.0;
    let w = left + cell * cols.len() as f64 + 20.0;
    let h = top + cell * rows.len() as f64 + 20.0;
    let mut out = String::new();
    header(&mut out, w.max(320.0), h, spec.title);
    for (j, c) in cols.iter().enumerate() {
        let x = left + cell * (j as f64 + 0.5);
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="start" transform="rotate(-45 {x:.1} {:.1})">{}</text>"#,
            top - 6.0,
            top - 6.0,
            esc(c)
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell / 2.0 + 4.0,
            esc(r)
        );
        for (j, c) in cols.iter().enumerate() {
            let x = left + cell * j as f64;
            let v = value_of(t, spec, r, c);
            let shade = v.map_or(255, |v| 255 - (v.clamp(0.0, 1.0) * 200.0).round() as u8);
            let _ = writeln!(
                out,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\" stroke=\"#ccc\"/>"
            );
            if let Some(v) = v {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.2}</text>"#,
                    x + cell / 2.0,
                    y + cell / 2.0 + 4.0
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn render(t: &MetricTable, spec: &ChartSpec) -> String {
    match spec.kind {
        ChartKind::Line => line_chart(t, spec),
        ChartKind::Heatmap => heatmap(t, spec),
    }
}

/// Render every known chart whose CSV exists in `metrics_dir`; returns the written paths.
pub fn render_report(metrics_dir: &Path, plots_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(plots_dir).map_err(|e| Error::io(plots_dir, e))?;
    let mut written = Vec::new();
    for spec in &CHARTS {
        let csv = metrics_dir.join(format!("{}.csv", spec.table));
        if !csv.exists() {
            tracing::warn!(table = spec.table, "metric CSV missing, chart skipped");
            continue;
        }
        let table = MetricTable::read_csv(&csv, spec.key_columns)?;
        let out = plots_dir.join(format!("{}.svg", spec.table));
        write_atomic(&out, render(&table, spec).as_bytes())?;
        written.push(out);
    }
    Ok(written)
}
