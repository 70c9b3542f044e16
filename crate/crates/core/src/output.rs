//! Trace CSV, metrics JSON and SVG plots.
//!
//! CSV columns, in order:
//!
//! | column | unit |
//! |---|---|
//! | `t_s` | s |
//! | `waypoint_index` | |
//! | `goal_n_m`, `goal_e_m` | m |
//! | `centre_n_m`, `centre_e_m` | m |
//! | `centre_error_m` | m |
//! | `entropy_bit_m` | bit·m |
//!
//! followed, for every airship `k`, by `a{k}_role`, `a{k}_n_m`, `a{k}_e_m`,
//! `a{k}_d_m`, `a{k}_yaw_rad`, `a{k}_u_mps`, `a{k}_v_mps`, `a{k}_r_radps`,
//! `a{k}_u_ref_mps`, `a{k}_r_ref_radps`, `a{k}_mode`, `a{k}_beta_rad` and
//! `a{k}_error_m`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::guidance::Mode;
use crate::metrics::MetricsSummary;
use crate::sim::{AirshipRecord, Role, StepRecord, Trace};
use crate::state::Vec3;

const SHARED_COLUMNS: [&str; 8] =
    ["t_s", "waypoint_index", "goal_n_m", "goal_e_m", "centre_n_m", "centre_e_m", "centre_error_m", "entropy_bit_m"];
const AIRSHIP_COLUMNS: [&str; 13] =
    ["role", "n_m", "e_m", "d_m", "yaw_rad", "u_mps", "v_mps", "r_radps", "u_ref_mps", "r_ref_radps", "mode", "beta_rad", "error_m"];

pub fn csv_header(airships: usize) -> Vec<String> {
    let mut header: Vec<String> = SHARED_COLUMNS.iter().map(|c| c.to_string()).collect();
    for k in 0..airships {
        header.extend(AIRSHIP_COLUMNS.iter().map(|c| format!("a{k}_{c}")));
    }
    header
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_owned(), source }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_error(path, source),
        other => Error::Trace { path: path.to_owned(), message: format!("{other:?}") },
    }
}

fn record_fields(r: &StepRecord) -> Vec<String> {
    let mut fields = vec![
        r.t.to_string(),
        r.waypoint_index.to_string(),
        r.goal.n.to_string(),
        r.goal.e.to_string(),
        r.centre.n.to_string(),
        r.centre.e.to_string(),
        r.centre_error.to_string(),
        r.entropy.to_string(),
    ];
    for a in &r.airships {
        fields.extend([
            a.role.as_str().to_string(),
            a.position.n.to_string(),
            a.position.e.to_string(),
            a.position.d.to_string(),
            a.yaw.to_string(),
            a.u.to_string(),
            a.v.to_string(),
            a.r.to_string(),
            a.u_ref.to_string(),
            a.r_ref.to_string(),
            a.mode.as_str().to_string(),
            a.sideslip.to_string(),
            a.error.to_string(),
        ]);
    }
    fields
}

/// Writes the trace as CSV: one header row and one row per record.
pub fn write_csv(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(csv_header(trace.airship_count())).map_err(|e| csv_error(path, e))?;
    for r in &trace.records {
        w.write_record(record_fields(r)).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Reads a trace written by [`write_csv`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let bad = |message: String| Error::Trace { path: path.to_owned(), message };
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let extra = header.len().checked_sub(SHARED_COLUMNS.len()).ok_or_else(|| bad("header too short".into()))?;
    if extra % AIRSHIP_COLUMNS.len() != 0 {
        return Err(bad(format!("{} columns do not match the trace layout", header.len())));
    }
    let airships = extra / AIRSHIP_COLUMNS.len();
    let expected = csv_header(airships);
    if let Some((k, (got, want))) = header.iter().zip(&expected).enumerate().find(|(_, (g, w))| g != w) {
        return Err(bad(format!("column {k} is `{got}`, expected `{want}`")));
    }

    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let at = |k: usize| -> Result<f64> {
            row[k].parse().map_err(|_| bad(format!("row {}: column `{}` is not a number: `{}`", line + 1, expected[k], &row[k])))
        };
        let airship = |k: usize| -> Result<AirshipRecord> {
            let base = SHARED_COLUMNS.len() + k * AIRSHIP_COLUMNS.len();
            let role: Role = row[base].parse().map_err(|m| bad(format!("row {}: {m}", line + 1)))?;
            let mode: Mode = row[base + 10].parse().map_err(|m| bad(format!("row {}: {m}", line + 1)))?;
            Ok(AirshipRecord {
                role,
                position: Vec3::new(at(base + 1)?, at(base + 2)?, at(base + 3)?),
                yaw: at(base + 4)?,
                u: at(base + 5)?,
                v: at(base + 6)?,
                r: at(base + 7)?,
                u_ref: at(base + 8)?,
                r_ref: at(base + 9)?,
                mode,
                sideslip: at(base + 11)?,
                error: at(base + 12)?,
            })
        };
        records.push(StepRecord {
            t: at(0)?,
            waypoint_index: row[1].parse().map_err(|_| bad(format!("row {}: bad waypoint_index `{}`", line + 1, &row[1])))?,
            goal: Vec3::planar(at(2)?, at(3)?),
            centre: Vec3::planar(at(4)?, at(5)?),
            centre_error: at(6)?,
            entropy: at(7)?,
            airships: (0..airships).map(airship).collect::<Result<_>>()?,
        });
    }
    let dt = if records.len() > 1 { records[1].t - records[0].t } else { 0.0 };
    Ok(Trace { dt, records })
}

pub fn write_metrics(summary: &MetricsSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(summary).expect("metrics serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Simulated seconds between airship glyphs on the trajectory plot.
pub const MARKER_INTERVAL_S: f64 = 20.0;

const WIDTH: f64 = 800.0;
const MAP_HEIGHT: f64 = 600.0;
const PANEL_HEIGHT: f64 = 240.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Linear map from data to pixels.
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi - lo > 1e-9 { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
        Self { lo, hi, px_lo, px_hi }
    }

    fn px(&self, x: f64) -> f64 {
        self.px_lo + (x - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, style: &str) {
    let coords: Vec<String> = points.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    if coords.len() > 1 {
        let _ = writeln!(out, r#"<polyline points="{}" {style}/>"#, coords.join(" "));
    }
}

/// Renders the trace as an SVG 1.1 document: the North-East map with one
/// trajectory per airship and a glyph every [`MARKER_INTERVAL_S`], then a
/// panel with per-airship errors and the swarm entropy over time.
pub fn render_svg(trace: &Trace) -> String {
    let n = trace.airship_count();
    let height = MAP_HEIGHT + PANEL_HEIGHT + MARGIN;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{height}" fill="white"/>"#);

    if trace.records.is_empty() {
        let _ = writeln!(out, r#"<text x="{MARGIN}" y="{MARGIN}">empty trace</text>"#);
        out.push_str("</svg>\n");
        return out;
    }

    // map: east to the right, north up, equal scale on both axes
    let (e_lo, e_hi) = bounds(trace.records.iter().flat_map(|r| r.airships.iter().map(|a| a.position.e).chain([r.goal.e])));
    let (n_lo, n_hi) = bounds(trace.records.iter().flat_map(|r| r.airships.iter().map(|a| a.position.n).chain([r.goal.n])));
    let span = (e_hi - e_lo).max(n_hi - n_lo).max(1.0) * 1.05;
    let (e_mid, n_mid) = ((e_lo + e_hi) / 2.0, (n_lo + n_hi) / 2.0);
    let size = (WIDTH - 2.0 * MARGIN).min(MAP_HEIGHT - 2.0 * MARGIN);
    let x0 = (WIDTH - size) / 2.0;
    let east = Axis::new(e_mid - span / 2.0, e_mid + span / 2.0, x0, x0 + size);
    let north = Axis::new(n_mid - span / 2.0, n_mid + span / 2.0, MARGIN + size, MARGIN);
    let scale = size / span;

    let _ = writeln!(out, r#"<g id="map">"#);
    let _ = writeln!(out, r##"<rect x="{x0:.2}" y="{MARGIN:.2}" width="{size:.2}" height="{size:.2}" fill="none" stroke="#999"/>"##);
    let _ = writeln!(out, r#"<text x="{x0:.2}" y="{:.2}">North-East trajectories ({span:.0} m across)</text>"#, MARGIN - 8.0);
    polyline(
        &mut out,
        trace.records.iter().map(|r| (east.px(r.goal.e), north.px(r.goal.n))),
        r##"fill="none" stroke="#555" stroke-dasharray="4,3""##,
    );
    for k in 0..n {
        let colour = PALETTE[k % PALETTE.len()];
        polyline(
            &mut out,
            trace.records.iter().map(|r| (east.px(r.airships[k].position.e), north.px(r.airships[k].position.n))),
            &format!(r#"fill="none" stroke="{colour}" stroke-width="1.5""#),
        );
    }
    let _ = writeln!(out, r#"<g id="markers">"#);
    let mut next_marker = 0.0;
    for r in &trace.records {
        if r.t + 1e-9 < next_marker {
            continue;
        }
        next_marker += MARKER_INTERVAL_S;
        for (k, a) in r.airships.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let (x, y) = (east.px(a.position.e), north.px(a.position.n));
            // glyph length of 8 m, at least 6 px
            let len = (8.0 * scale).max(6.0);
            let (s, c) = a.yaw.sin_cos();
            let tip = (x + len * s, y - len * c);
            let left = (x - 0.4 * len * c - 0.5 * len * s, y - 0.4 * len * s + 0.5 * len * c);
            let right = (x + 0.4 * len * c - 0.5 * len * s, y + 0.4 * len * s + 0.5 * len * c);
            let _ = writeln!(
                out,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{colour}" fill-opacity="0.6"><title>airship {k} at t = {} s</title></polygon>"#,
                tip.0, tip.1, left.0, left.1, right.0, right.1, r.t
            );
        }
    }
    let _ = writeln!(out, "</g>\n</g>");

    // error and entropy panel
    let top = MAP_HEIGHT;
    let bottom = MAP_HEIGHT + PANEL_HEIGHT - 30.0;
    let (t_lo, t_hi) = bounds(trace.records.iter().map(|r| r.t));
    let (_, err_hi) = bounds(trace.records.iter().flat_map(|r| r.airships.iter().map(|a| a.error)));
    let (s_lo, s_hi) = bounds(trace.records.iter().map(|r| r.entropy));
    let time = Axis::new(t_lo, t_hi, MARGIN, WIDTH - MARGIN);
    let error = Axis::new(0.0, err_hi.max(1.0), bottom, top);
    let entropy = Axis::new(s_lo.min(0.0), s_hi, bottom, top);
    let _ = writeln!(out, r#"<g id="errors">"#);
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#999"/>"##,
        WIDTH - 2.0 * MARGIN,
        bottom - top
    );
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN:.2}" y="{:.2}">error to goal or slot, 0 to {:.1} m; dashed: entropy {:.1} to {:.1} bit m; t {:.0} to {:.0} s</text>"#,
        top - 6.0,
        err_hi.max(1.0),
        s_lo.min(0.0),
        s_hi,
        t_lo,
        t_hi
    );
    for k in 0..n {
        let colour = PALETTE[k % PALETTE.len()];
        polyline(
            &mut out,
            trace.records.iter().map(|r| (time.px(r.t), error.px(r.airships[k].error))),
            &format!(r#"fill="none" stroke="{colour}""#),
        );
    }
    polyline(
        &mut out,
        trace.records.iter().map(|r| (time.px(r.t), entropy.px(r.entropy))),
        r##"fill="none" stroke="#000" stroke-dasharray="6,3""##,
    );
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| io_error(path, e))?;
    file.write_all(render_svg(trace).as_bytes()).map_err(|e| io_error(path, e))
}
