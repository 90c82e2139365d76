//! CSV, JSON and SVG files exchanged by the command-line tool.
//!
//! Data CSV: a header row, one numeric column per feature, and optionally a
//! final column named `label`. Floats are written in shortest round-trip
//! form so that write-then-read is exact.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{MercatError, Result};
use crate::geometry::{SphereEmbedding, SpherePoint};
use crate::trainer::IterationRecord;

pub const LABEL_COLUMN: &str = "label";

fn io_err(path: &Path, e: impl std::fmt::Display) -> MercatError {
    MercatError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| io_err(path, e))
}

fn create(path: &Path) -> Result<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    File::create(path).map_err(|e| io_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> MercatError {
    match e.position() {
        Some(pos) => MercatError::Parse {
            row: (pos.line() as usize).saturating_sub(1),
            column: 0,
            message: e.to_string(),
        },
        None => io_err(path, e),
    }
}

fn parse_cell(cell: &str, row: usize, column: usize) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| MercatError::Parse {
        row,
        column,
        message: format!("'{cell}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(MercatError::Parse {
            row,
            column,
            message: format!("'{cell}' is not finite"),
        });
    }
    Ok(v)
}

pub fn read_data_csv(path: &Path) -> Result<DataMatrix> {
    read_data(open(path)?, path)
}

/// Parses data CSV from any reader; `path` only labels errors.
pub fn read_data(reader: impl Read, path: &Path) -> Result<DataMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let has_label = headers.iter().next_back() == Some(LABEL_COLUMN);
    let d = headers.len() - usize::from(has_label);
    if d == 0 {
        return Err(MercatError::Parse {
            row: 0,
            column: 1,
            message: "no numeric columns".into(),
        });
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let row = i + 1;
        for (j, cell) in record.iter().take(d).enumerate() {
            values.push(parse_cell(cell, row, j + 1)?);
        }
        if has_label {
            labels.push(record.get(d).unwrap_or_default().to_string());
        }
        n += 1;
    }
    if n < 3 {
        return Err(MercatError::InvalidInput(format!(
            "{}: need at least 3 rows, found {n}",
            path.display()
        )));
    }
    let x = DataMatrix::new(values, n, d)?;
    if has_label {
        x.with_labels(labels)
    } else {
        Ok(x)
    }
}

pub fn write_data_csv(path: &Path, x: &DataMatrix) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(format_data(x).as_bytes())
        .map_err(|e| io_err(path, e))
}

pub fn format_data(x: &DataMatrix) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..x.d()).map(|j| format!("x{j}")).collect();
    if x.labels().is_some() {
        header.push(LABEL_COLUMN.into());
    }
    wtr.write_record(&header).expect("in-memory write");
    for (i, row) in x.rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = x.labels() {
            rec.push(l[i].clone());
        }
        wtr.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// Embedding CSV: `index,phi,theta,x,y,z` plus `label` when given.
pub fn format_embedding(y: &SphereEmbedding, labels: Option<&[String]>) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index", "phi", "theta", "x", "y", "z"];
    if labels.is_some() {
        header.push(LABEL_COLUMN);
    }
    wtr.write_record(&header).expect("in-memory write");
    for (i, p) in y.points.iter().enumerate() {
        let v = p.to_unit_vector();
        let mut rec = vec![
            i.to_string(),
            p.phi.to_string(),
            p.theta.to_string(),
            v.x.to_string(),
            v.y.to_string(),
            v.z.to_string(),
        ];
        if let Some(l) = labels {
            rec.push(l[i].clone());
        }
        wtr.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub fn write_embedding_csv(
    path: &Path,
    y: &SphereEmbedding,
    labels: Option<&[String]>,
) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(format_embedding(y, labels).as_bytes())
        .map_err(|e| io_err(path, e))
}

/// Reads `phi` and `theta` (and `label` if present) by column name.
pub fn read_embedding_csv(path: &Path) -> Result<(SphereEmbedding, Option<Vec<String>>)> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let col: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let (Some(&phi), Some(&theta)) = (col.get("phi"), col.get("theta")) else {
        return Err(MercatError::Parse {
            row: 0,
            column: 0,
            message: "embedding header needs 'phi' and 'theta' columns".into(),
        });
    };
    let label = col.get(LABEL_COLUMN).copied();
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let cell = |c: usize| record.get(c).unwrap_or_default();
        points.push(SpherePoint::new(
            parse_cell(cell(phi), i + 1, phi + 1)?,
            parse_cell(cell(theta), i + 1, theta + 1)?,
        ));
        if let Some(c) = label {
            labels.push(cell(c).to_string());
        }
    }
    let y = SphereEmbedding::new(points)
        .map_err(|e| MercatError::InvalidInput(format!("{}: {e}", path.display())))?;
    Ok((y, label.map(|_| labels)))
}

pub fn write_loss_trace_csv(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    let mut s = String::from("iteration,learning_rate,loss,mean_square,triple_count,dropped\n");
    for r in trace {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.iteration,
            r.learning_rate,
            r.loss.value,
            r.loss.mean_square,
            r.loss.triple_count,
            r.loss.dropped
        );
    }
    create(path)?
        .write_all(s.as_bytes())
        .map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create(path)?
        .write_all(text.as_bytes())
        .map_err(|e| io_err(path, e))
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name; replaying them reruns the command.
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub version: String,
    pub wall_time: f64,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| io_err(path, e))?;
        write_text(path, &(json + "\n"))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut s = String::new();
        open(path)?
            .read_to_string(&mut s)
            .map_err(|e| io_err(path, e))?;
        serde_json::from_str(&s).map_err(|e| MercatError::Parse {
            row: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// Manifest path for an output file: `out.csv` -> `out.csv.manifest.json`.
pub fn manifest_path(out: &Path) -> std::path::PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Static scatter plot; one colour per distinct label in order of first
/// appearance, with a legend.
pub fn scatter_svg(points: &[(f64, f64)], labels: Option<&[String]>) -> String {
    const W: f64 = 800.0;
    const H: f64 = 600.0;
    const PAD: f64 = 20.0;
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let sx = (x1 - x0).max(1e-12);
    let sy = (y1 - y0).max(1e-12);
    // one scale for both axes keeps the projection conformal on screen
    let scale = ((W - 2.0 * PAD) / sx).min((H - 2.0 * PAD) / sy);

    let mut order: Vec<&str> = Vec::new();
    if let Some(ls) = labels {
        for l in ls {
            if !order.contains(&l.as_str()) {
                order.push(l);
            }
        }
    }
    let colour = |i: usize| -> &str {
        match labels {
            Some(ls) => {
                PALETTE[order.iter().position(|o| *o == ls[i]).unwrap_or(0) % PALETTE.len()]
            }
            None => PALETTE[0],
        }
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for (i, &(x, y)) in points.iter().enumerate() {
        let px = PAD + (x - x0) * scale;
        let py = H - PAD - (y - y0) * scale;
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.3}" cy="{py:.3}" r="2" fill="{}" fill-opacity="0.7"/>"#,
            colour(i)
        );
    }
    for (k, l) in order.iter().enumerate() {
        let y = PAD + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{y}" r="4" fill="{}"/><text x="{}" y="{}" font-size="12" font-family="sans-serif">{}</text>"#,
            W - 120.0,
            PALETTE[k % PALETTE.len()],
            W - 110.0,
            y + 4.0,
            xml_escape(l)
        );
    }
    s.push_str("</svg>\n");
    s
}
