//! CSV and JSON persistence of pipeline artifacts.
//!
//! Tabular data is CSV with a header row; metadata goes into a JSON sidecar
//! next to the CSV (same stem, `.json` extension). Floats are written in
//! shortest round-trip form, so reading a file back reproduces every value
//! bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::centrality::WalkConfig;
use crate::error::{Error, Result};
use crate::features::{ColumnRange, FeatureMatrix};
use crate::sir::{SimulationRecord, TargetMeta, TargetTable};

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))
}

fn parse_f64(path: &Path, line: usize, field: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("not a number: {field:?}"),
    })
}

pub fn write_records(path: &Path, records: &[SimulationRecord]) -> Result<()> {
    let mut w = writer(path)?;
    for r in records {
        w.serialize(r).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<SimulationRecord>> {
    reader(path)?
        .deserialize()
        .map(|r| r.map_err(|e| Error::csv(path, e)))
        .collect()
}

/// Writes `node,label,peak_target,time_target` plus the metadata sidecar.
pub fn write_targets(path: &Path, targets: &TargetTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["node", "label", "peak_target", "time_target"])
        .map_err(|e| Error::csv(path, e))?;
    for u in 0..targets.node_count() {
        w.write_record([
            u.to_string(),
            targets.labels[u].clone(),
            targets.peak[u].to_string(),
            targets.time[u].to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), &targets.meta)
}

pub fn read_targets(path: &Path) -> Result<TargetTable> {
    let meta: TargetMeta = read_json(&sidecar_path(path))?;
    let mut labels = Vec::new();
    let mut peak = Vec::new();
    let mut time = Vec::new();
    for (i, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i + 2;
        if rec.len() < 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "expected node,label,peak_target,time_target".into(),
            });
        }
        labels.push(rec[1].to_string());
        peak.push(parse_f64(path, line, &rec[2])?);
        time.push(parse_f64(path, line, &rec[3])?);
    }
    Ok(TargetTable {
        labels,
        peak,
        time,
        time_norm: meta.time_norm,
        meta,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumnMeta {
    pub name: String,
    pub raw_min: f64,
    pub raw_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub columns: Vec<FeatureColumnMeta>,
    pub walk: Option<WalkConfig>,
    pub random_seed: Option<u64>,
    pub constant_columns: Vec<String>,
}

/// Writes `label,<feature columns...>` plus the metadata sidecar.
pub fn write_features(path: &Path, labels: &[String], m: &FeatureMatrix, sidecar: &FeatureSidecar) -> Result<()> {
    if labels.len() != m.rows() {
        return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), m.rows())));
    }
    let mut w = writer(path)?;
    let mut header = vec!["label".to_string()];
    header.extend(m.names().iter().cloned());
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for (r, label) in labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(m.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), sidecar)
}

pub fn feature_sidecar(m: &FeatureMatrix, walk: Option<WalkConfig>, random_seed: Option<u64>, constant: &[String]) -> FeatureSidecar {
    FeatureSidecar {
        columns: m
            .names()
            .iter()
            .zip(m.ranges())
            .map(|(name, r)| FeatureColumnMeta {
                name: name.clone(),
                raw_min: r.min,
                raw_max: r.max,
            })
            .collect(),
        walk,
        random_seed,
        constant_columns: constant.to_vec(),
    }
}

/// Reads a feature CSV. A leading `label` column is returned separately; raw
/// ranges come from the sidecar when present.
pub fn read_features(path: &Path) -> Result<(Vec<String>, FeatureMatrix)> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let has_label = header.get(0) == Some("label");
    let first = usize::from(has_label);
    let names: Vec<String> = header.iter().skip(first).map(str::to_string).collect();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        labels.push(if has_label { rec[0].to_string() } else { rows.to_string() });
        for field in rec.iter().skip(first) {
            values.push(parse_f64(path, line, field)?);
        }
        rows += 1;
    }
    let sidecar = sidecar_path(path);
    let ranges = if sidecar.exists() {
        let meta: FeatureSidecar = read_json(&sidecar)?;
        names
            .iter()
            .map(|n| {
                meta.columns
                    .iter()
                    .find(|c| &c.name == n)
                    .map(|c| ColumnRange {
                        min: c.raw_min,
                        max: c.raw_max,
                    })
                    .ok_or_else(|| Error::MissingColumn(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..names.len())
            .map(|c| {
                let col: Vec<f64> = (0..rows).map(|r| values[r * names.len() + c]).collect();
                crate::features::column_range(&col)
            })
            .collect()
    };
    let m = FeatureMatrix::new(names, rows, values, ranges)?;
    Ok((labels, m))
}
