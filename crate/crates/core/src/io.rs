//! File formats: data/labels CSV, experiment metadata JSON, tensor JSON,
//! ROC CSV. All numeric text is written in shortest round-trip form, so
//! every writer/reader pair is lossless at full f64 precision.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::Value;

use crate::data::DataMatrix;
use crate::datagen::{ExperimentDataset, ExperimentMeta};
use crate::detect::{RocCurve, RocPoint};
use crate::error::{data, Result};
use crate::tensor::SymmetricTensor;

/// Write a data matrix as CSV with header `m1..mn`.
pub fn write_data_csv<W: Write>(writer: W, x: &DataMatrix) -> Result<()> {
    let header: Vec<String> = (1..=x.n()).map(|i| format!("m{i}")).collect();
    write_data_csv_with_header(writer, x, &header)
}

/// Write a data matrix as CSV under the given column names.
pub fn write_data_csv_with_header<W: Write>(
    writer: W,
    x: &DataMatrix,
    header: &[String],
) -> Result<()> {
    if header.len() != x.n() {
        return Err(data(format!(
            "{} header names for {} columns",
            header.len(),
            x.n()
        )));
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for r in 0..x.t() {
        let row: Vec<String> = (0..x.n()).map(|c| x.matrix()[(r, c)].to_string()).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a numeric CSV with one header row into a data matrix.
pub fn read_data_csv<R: Read>(reader: R) -> Result<DataMatrix> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let n = csv.headers()?.len();
    if n == 0 {
        return Err(data("data CSV has an empty header"));
    }
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                data(format!(
                    "unparsable value {field:?} at row {}, column {}",
                    i + 2,
                    c + 1
                ))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(data("data CSV contains no rows"));
    }
    DataMatrix::new(DMatrix::from_row_slice(rows, n, &values))
}

/// Write labels as one `0`/`1` line per row, no header.
pub fn write_labels_csv<W: Write>(mut writer: W, labels: &[u8]) -> Result<()> {
    for l in labels {
        writeln!(writer, "{l}")?;
    }
    Ok(())
}

/// Read a single-column 0/1 label file.
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "0" => out.push(0),
            "1" => out.push(1),
            other => {
                return Err(data(format!(
                    "label line {} must be 0 or 1, got {other:?}",
                    i + 1
                )))
            }
        }
    }
    if out.is_empty() {
        return Err(data("label file contains no labels"));
    }
    Ok(out)
}

pub fn write_meta_json<W: Write>(writer: W, meta: &ExperimentMeta) -> Result<()> {
    serde_json::to_writer_pretty(writer, meta)?;
    Ok(())
}

pub fn read_meta_json<R: Read>(reader: R) -> Result<ExperimentMeta> {
    Ok(serde_json::from_reader(reader)?)
}

/// Write `data.csv`, `labels.csv` and `meta.json` for a generated dataset
/// into the given directory (created if missing).
pub fn write_dataset(dir: &Path, ds: &ExperimentDataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_data_csv(std::fs::File::create(dir.join("data.csv"))?, &ds.data)?;
    write_labels_csv(std::fs::File::create(dir.join("labels.csv"))?, &ds.labels)?;
    write_meta_json(std::fs::File::create(dir.join("meta.json"))?, &ds.meta)?;
    Ok(())
}

/// Tensor as JSON: `{order, dim, entries: [[i₁..i_d, value], …]}` with
/// 1-based non-decreasing multi-indices, one entry per stored value.
pub fn tensor_to_json(t: &SymmetricTensor) -> Value {
    let mut entries: Vec<Value> = Vec::with_capacity(SymmetricTensor::unique_count(
        t.order(),
        t.dim(),
    ));
    t.for_each_unique(|idx, v| {
        let mut entry: Vec<Value> = idx.iter().map(|&i| Value::from(i as u64 + 1)).collect();
        entry.push(Value::from(v));
        entries.push(Value::Array(entry));
    });
    serde_json::json!({
        "order": t.order(),
        "dim": t.dim(),
        "entries": entries,
    })
}

/// Inverse of [`tensor_to_json`]; requires every unique entry to be present
/// exactly once.
pub fn tensor_from_json(v: &Value) -> Result<SymmetricTensor> {
    let order = v
        .get("order")
        .and_then(Value::as_u64)
        .ok_or_else(|| data("tensor JSON missing integer `order`"))? as usize;
    let dim = v
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| data("tensor JSON missing integer `dim`"))? as usize;
    let entries = v
        .get("entries")
        .and_then(Value::as_array)
        .ok_or_else(|| data("tensor JSON missing `entries` array"))?;
    let mut tensor = SymmetricTensor::zeros(order, dim)?;
    let expected = SymmetricTensor::unique_count(order, dim);
    if entries.len() != expected {
        return Err(data(format!(
            "tensor JSON has {} entries, expected {expected}",
            entries.len()
        )));
    }
    let mut idx = vec![0usize; order];
    for entry in entries {
        let parts = entry
            .as_array()
            .ok_or_else(|| data("tensor entry must be an array"))?;
        if parts.len() != order + 1 {
            return Err(data(format!(
                "tensor entry must hold {} indices and a value",
                order
            )));
        }
        for (slot, part) in idx.iter_mut().zip(parts) {
            let i = part
                .as_u64()
                .ok_or_else(|| data("tensor index must be a positive integer"))?
                as usize;
            if i < 1 || i > dim {
                return Err(data(format!("tensor index {i} outside 1..={dim}")));
            }
            *slot = i;
        }
        if idx.windows(2).any(|w| w[0] > w[1]) {
            return Err(data("tensor multi-indices must be non-decreasing"));
        }
        let value = parts[order]
            .as_f64()
            .ok_or_else(|| data("tensor value must be a number"))?;
        tensor.set(&idx, value);
    }
    Ok(tensor)
}

/// ROC CSV: header `beta,fpr,tpr`, one row per point, and a final
/// `auc,<value>` footer record.
pub fn write_roc_csv<W: Write>(writer: W, curve: &RocCurve) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    w.write_record(["beta", "fpr", "tpr"])?;
    for p in &curve.points {
        w.write_record([p.param.to_string(), p.fpr.to_string(), p.tpr.to_string()])?;
    }
    w.write_record(["auc", &curve.auc.to_string()])?;
    w.flush()?;
    Ok(())
}

/// Read back a ROC CSV written by [`write_roc_csv`].
pub fn read_roc_csv<R: Read>(reader: R) -> Result<RocCurve> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let mut points = Vec::new();
    let mut auc = None;
    for record in csv.records() {
        let record = record?;
        if record.get(0) == Some("auc") {
            auc = Some(
                record
                    .get(1)
                    .unwrap_or("")
                    .parse()
                    .map_err(|_| data("unparsable AUC footer"))?,
            );
            continue;
        }
        let field = |i: usize| -> Result<f64> {
            record
                .get(i)
                .unwrap_or("")
                .parse()
                .map_err(|_| data(format!("unparsable ROC field {:?}", record.get(i))))
        };
        points.push(RocPoint {
            param: field(0)?,
            fpr: field(1)?,
            tpr: field(2)?,
        });
    }
    let auc = auc.ok_or_else(|| data("ROC CSV missing auc footer"))?;
    Ok(RocCurve { points, auc })
}
