//! Dataset CSV: UTF-8, header `f_<name>,...,class`, one observation per row.
//! Leading `#` lines are comments.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use camolab_core::{ClassSet, Dataset, DeviceClass, FeatureSchema};
use ndarray::Array2;

use crate::{HarnessError, Result};

pub const FEATURE_PREFIX: &str = "f_";
pub const CLASS_COLUMN: &str = "class";

pub fn header(schema: &FeatureSchema) -> Vec<String> {
    let mut h: Vec<String> = schema.names().map(|n| format!("{FEATURE_PREFIX}{n}")).collect();
    h.push(CLASS_COLUMN.to_string());
    h
}

/// Writes `ds` with `comments` as leading `#` lines. Values use the shortest
/// representation that parses back to the same bits.
pub fn write_dataset<W: Write>(out: W, comments: &[String], ds: &Dataset) -> std::io::Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(ds.schema()))?;
    let mut row = Vec::with_capacity(ds.schema().len() + 1);
    for (x, c) in ds.features().outer_iter().zip(ds.labels()) {
        row.clear();
        row.extend(x.iter().map(|v| v.to_string()));
        row.push(ds.classes().label(*c).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset, checking the header against `schema`, every value
/// against its range and every label against `classes`. `source` names the
/// input in error messages.
pub fn read_dataset<R: Read>(input: R, source: &str, schema: Arc<FeatureSchema>, classes: Arc<ClassSet>) -> Result<Dataset> {
    let parse = |line: u64, column: usize, message: String| HarnessError::Parse { path: source.to_string(), line, column, message };
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let head = match records.next() {
        None => return Err(parse(1, 1, "empty file: no header".into())),
        Some(rec) => rec.map_err(|e| csv_error(source, e))?,
    };
    let head_line = head.position().map(|p| p.line()).unwrap_or(1);
    let want = header(&schema);
    if head.len() != want.len() {
        return Err(parse(head_line, head.len().min(want.len()) + 1, format!("header has {} columns, expected {}", head.len(), want.len())));
    }
    if let Some((j, (got, w))) = head.iter().zip(&want).enumerate().find(|(_, (g, w))| g.trim() != w.as_str()) {
        return Err(parse(head_line, j + 1, format!("header column `{got}`, expected `{w}`")));
    }

    let k = schema.len();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_error(source, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != k + 1 {
            return Err(parse(line, rec.len().min(k + 1), format!("row has {} fields, expected {}", rec.len(), k + 1)));
        }
        for (j, (field, f)) in rec.iter().zip(schema.features()).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| parse(line, j + 1, format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse(line, j + 1, format!("`{field}` is not finite")));
            }
            if v < f.min || v > f.max {
                return Err(parse(line, j + 1, format!("{} = {v} outside [{}, {}]", f.name, f.min, f.max)));
            }
            values.push(v);
        }
        let label = rec[k].trim();
        let class = classes.lookup(label).ok_or_else(|| {
            HarnessError::Validation(format!("{source}: line {line}: unknown class label `{label}`"))
        })?;
        labels.push(DeviceClass(class.0));
    }
    if labels.is_empty() {
        return Err(parse(head_line + 1, 1, "no data rows".into()));
    }
    let features = Array2::from_shape_vec((labels.len(), k), values).expect("row lengths checked");
    Ok(Dataset::new(schema, classes, features, labels)?)
}

fn csv_error(source: &str, e: csv::Error) -> HarnessError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source_err) => HarnessError::Io { path: source.to_string(), source: source_err },
        other => HarnessError::Parse { path: source.to_string(), line, column: 0, message: format!("{other:?}") },
    }
}

/// Reads a dataset file.
pub fn load_dataset(path: &Path, schema: Arc<FeatureSchema>, classes: Arc<ClassSet>) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_dataset(std::io::BufReader::new(file), &path.display().to_string(), schema, classes)
}
