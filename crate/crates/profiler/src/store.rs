//! Signature corpora as CSV: `device_id,class,amplitude_attenuation,
//! phase_shift,frequency_offset,arrival_angle,csi_0,...,csi_{C-1}`.
//! Lines starting with `#` are comments.

use std::io::{Read, Write};

use crate::signal::RfSignature;
use crate::{ProfilerError, Result};

const PROFILED_COLUMNS: [&str; 4] = ["amplitude_attenuation", "phase_shift", "frequency_offset", "arrival_angle"];

/// One stored observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureRecord {
    pub device_id: u32,
    pub class: String,
    pub signature: RfSignature,
}

pub fn header(csi_len: usize) -> Vec<String> {
    let mut h = vec!["device_id".to_string(), "class".to_string()];
    h.extend(PROFILED_COLUMNS.iter().map(|s| s.to_string()));
    h.extend((0..csi_len).map(|k| format!("csi_{k}")));
    h
}

/// Writes records; `comments` become leading `#` lines.
pub fn write_signatures<W: Write>(out: W, comments: &[String], records: &[SignatureRecord]) -> Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let csi_len = records.first().map(|r| r.signature.csi.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(csi_len))?;
    for r in records {
        if r.signature.csi.len() != csi_len {
            return Err(ProfilerError::Validation("records disagree on CSI length".into()));
        }
        let mut row = vec![r.device_id.to_string(), r.class.clone()];
        row.extend(r.signature.to_vec().iter().map(|v| v.to_string()));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_signatures<R: Read>(input: R) -> Result<Vec<SignatureRecord>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).has_headers(true).from_reader(input);
    let head: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let csi_len = head.len().saturating_sub(2 + PROFILED_COLUMNS.len());
    if head != header(csi_len) {
        return Err(ProfilerError::Parse { line: 1, message: format!("unexpected header; want {}", header(csi_len).join(",")) });
    }
    let mut records = Vec::new();
    for row in r.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| ProfilerError::Parse { line, message };
        let device_id = row[0].trim().parse::<u32>().map_err(|e| bad(format!("device_id: {e}")))?;
        let class = row[1].to_string();
        let mut values = Vec::with_capacity(row.len() - 2);
        for (j, field) in row.iter().enumerate().skip(2) {
            let v = field.trim().parse::<f64>().map_err(|e| bad(format!("column {}: {e}", j + 1)))?;
            if !v.is_finite() {
                return Err(bad(format!("column {}: non-finite value", j + 1)));
            }
            values.push(v);
        }
        let signature = RfSignature {
            amplitude_attenuation: values[0],
            phase_shift: values[1],
            frequency_offset: values[2],
            arrival_angle: values[3],
            csi: values[4..].to_vec(),
        };
        records.push(SignatureRecord { device_id, class, signature });
    }
    Ok(records)
}
