// SPDX-License-Identifier: MIT OR Apache-2.0

//! File formats: panel CSV and JSON, truth JSON, logit tables and constraint
//! lists. Stream and time indices in files are 1-based.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CrocError, Result};
use crate::model::{ChangepointConfig, ConstraintSet, StreamPanel};

/// Reads an `n x K` CSV panel (one row per time index, one column per
/// stream). With `header`, the first line is skipped.
pub fn read_panel_csv_from<R: Read>(reader: R, header: bool) -> Result<StreamPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field.parse::<f64>().map_err(|_| {
                    CrocError::invalid(format!(
                        "row {}, column {}: cannot parse {field:?} as a number",
                        line + 1,
                        col + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    StreamPanel::from_rows(&rows)
}

pub fn read_panel_csv(path: &Path, header: bool) -> Result<StreamPanel> {
    read_panel_csv_from(BufReader::new(File::open(path)?), header)
}

pub fn write_panel_csv_to<W: Write>(writer: W, panel: &StreamPanel, header: bool) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().from_writer(writer);
    if header {
        wtr.write_record((1..=panel.num_streams()).map(|k| format!("s{k}")))?;
    }
    for i in 0..panel.n() {
        wtr.write_record((0..panel.num_streams()).map(|k| panel.get(i, k).to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_panel_csv(path: &Path, panel: &StreamPanel, header: bool) -> Result<()> {
    write_panel_csv_to(BufWriter::new(File::create(path)?), panel, header)
}

/// JSON container; `values` holds `n` rows of `K` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelJson {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub values: Vec<Vec<f64>>,
}

impl PanelJson {
    pub fn from_panel(panel: &StreamPanel) -> Self {
        Self {
            n: panel.n(),
            k: panel.num_streams(),
            values: panel.rows(),
        }
    }

    pub fn into_panel(self) -> Result<StreamPanel> {
        if self.values.len() != self.n {
            return Err(CrocError::DimensionMismatch(format!(
                "declared n = {} but {} rows supplied",
                self.n,
                self.values.len()
            )));
        }
        if let Some(row) = self.values.iter().position(|r| r.len() != self.k) {
            return Err(CrocError::DimensionMismatch(format!(
                "declared K = {} but row {} has {} entries",
                self.k,
                row + 1,
                self.values[row].len()
            )));
        }
        StreamPanel::from_rows(&self.values)
    }
}

pub fn read_panel_json(path: &Path) -> Result<StreamPanel> {
    let parsed: PanelJson = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    parsed.into_panel()
}

pub fn write_panel_json(path: &Path, panel: &StreamPanel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &PanelJson::from_panel(panel))?;
    w.flush()?;
    Ok(())
}

/// Reads a panel, choosing JSON for a `.json` extension and CSV otherwise.
pub fn read_panel(path: &Path, header: bool) -> Result<StreamPanel> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("json") => read_panel_json(path),
        _ => read_panel_csv(path, header),
    }
}

/// Ground truth for a simulated panel. `xi` are pre-change lengths and
/// `k_star` is the 1-based root stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub xi: Vec<usize>,
    pub k_star: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_root: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_other: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
}

impl Truth {
    pub fn from_config(xi: &ChangepointConfig) -> Result<Self> {
        let root = xi
            .unique_argmin()
            .ok_or_else(|| CrocError::TiedArgmin(xi.to_string()))?;
        Ok(Self {
            xi: xi.as_slice().to_vec(),
            k_star: root + 1,
            pre_means: None,
            post_means: None,
            delta_root: None,
            delta_other: None,
            rho: None,
            groups: None,
        })
    }

    pub fn config(&self) -> ChangepointConfig {
        ChangepointConfig::new(self.xi.clone())
    }

    /// 0-based root stream.
    pub fn root(&self) -> Result<usize> {
        if self.k_star == 0 || self.k_star > self.xi.len() {
            return Err(CrocError::invalid(format!(
                "k_star = {} outside 1..={}",
                self.k_star,
                self.xi.len()
            )));
        }
        Ok(self.k_star - 1)
    }
}

pub fn read_truth(path: &Path) -> Result<Truth> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_truth(path: &Path, truth: &Truth) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, truth)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct LogitRow {
    stream: usize,
    index: usize,
    logit: f64,
}

/// Reads a long-format logit table (`stream,index,logit`, header required)
/// into an `n x K` panel. Every cell must appear exactly once.
pub fn read_logits_from<R: Read>(reader: R, n: usize, k: usize) -> Result<StreamPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = vec![f64::NAN; n * k];
    let mut seen = vec![false; n * k];
    for rec in rdr.deserialize::<LogitRow>() {
        let row = rec?;
        if row.stream == 0 || row.stream > k || row.index == 0 || row.index > n {
            return Err(CrocError::invalid(format!(
                "logit entry (stream {}, index {}) outside the {n}x{k} panel",
                row.stream, row.index
            )));
        }
        let cell = (row.stream - 1) * n + row.index - 1;
        if std::mem::replace(&mut seen[cell], true) {
            return Err(CrocError::invalid(format!(
                "duplicate logit entry for stream {}, index {}",
                row.stream, row.index
            )));
        }
        values[cell] = row.logit;
    }
    if let Some(cell) = seen.iter().position(|s| !s) {
        return Err(CrocError::invalid(format!(
            "logit table is missing stream {}, index {}",
            cell / n + 1,
            cell % n + 1
        )));
    }
    StreamPanel::from_stream_major(n, k, values)
}

pub fn read_logits(path: &Path, n: usize, k: usize) -> Result<StreamPanel> {
    read_logits_from(BufReader::new(File::open(path)?), n, k)
}

pub fn write_logits_to<W: Write>(writer: W, logits: &StreamPanel) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["stream", "index", "logit"])?;
    for k in 0..logits.num_streams() {
        for (i, v) in logits.stream(k).iter().enumerate() {
            wtr.write_record([(k + 1).to_string(), (i + 1).to_string(), v.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a constraint set stored as a JSON list of configurations.
pub fn read_constraint_file(path: &Path, n: usize, k: usize) -> Result<ConstraintSet> {
    let configs: Vec<ChangepointConfig> =
        serde_json::from_reader(BufReader::new(File::open(path)?))?;
    ConstraintSet::from_configs(n, k, configs)
}

pub fn write_constraint_file(path: &Path, set: &ConstraintSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, set.configs())?;
    w.flush()?;
    Ok(())
}
