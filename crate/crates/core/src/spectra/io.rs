//! Wide spectra CSV (`wavenumber,<sample_id>_<replicate>,...`) and the QC sidecar.

use std::io::{Read, Write};

use super::qc::{QcCheck, QcRecord};
use super::{QcStatus, Spectrum, Stage};
use crate::error::{Error, Result};

fn format_err(detail: impl Into<String>) -> Error {
    Error::Format { what: "spectra CSV", detail: detail.into() }
}

/// Splits a column header into sample id and replicate index.
pub fn parse_column(header: &str) -> Result<(String, usize)> {
    let (id, rep) = header
        .rsplit_once('_')
        .ok_or_else(|| format_err(format!("column `{header}` is not <sample_id>_<replicate>")))?;
    let rep = rep
        .parse::<usize>()
        .map_err(|_| format_err(format!("column `{header}` has a non-integer replicate")))?;
    if id.is_empty() {
        return Err(format_err(format!("column `{header}` has an empty sample id")));
    }
    Ok((id.to_string(), rep))
}

pub fn read_spectra<R: Read>(reader: R, stage: Stage) -> Result<Vec<Spectrum>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(str::trim) != Some("wavenumber") {
        return Err(format_err("first column must be `wavenumber`"));
    }
    let columns: Vec<(String, usize)> = headers.iter().skip(1).map(parse_column).collect::<Result<_>>()?;
    let mut axis = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        if row.len() != columns.len() + 1 {
            return Err(format_err(format!("row {} has {} fields", line + 2, row.len())));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format_err(format!("row {}: `{s}` is not a number", line + 2)))
        };
        axis.push(parse(&row[0])?);
        for (j, v) in row.iter().skip(1).enumerate() {
            values[j].push(parse(v)?);
        }
    }
    columns
        .into_iter()
        .zip(values)
        .map(|((id, rep), y)| Spectrum::with_stage(id, rep, axis.clone(), y, stage))
        .collect()
}

pub fn write_spectra<W: Write>(writer: W, spectra: &[Spectrum]) -> Result<()> {
    let Some(first) = spectra.first() else {
        return Err(format_err("no spectra to write"));
    };
    let grid = first.wavenumbers();
    if let Some(bad) = spectra.iter().find(|s| !s.same_grid(grid)) {
        return Err(Error::GridMismatch(format!("{} differs from {}", bad.sample_id(), first.sample_id())));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["wavenumber".to_string()];
    header.extend(spectra.iter().map(|s| format!("{}_{}", s.sample_id(), s.replicate())));
    w.write_record(&header)?;
    for (i, x) in grid.iter().enumerate() {
        let mut row = Vec::with_capacity(spectra.len() + 1);
        row.push(format_f64(*x));
        row.extend(spectra.iter().map(|s| format_f64(s.intensities()[i])));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<spectra>", e))?;
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_qc<W: Write>(writer: W, records: &[QcRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sample_id", "replicate", "stage", "qc", "divergence_score", "replaced_indices"])?;
    for r in records {
        let replaced: Vec<String> = r.replaced_indices.iter().map(usize::to_string).collect();
        w.write_record([
            r.sample_id.clone(),
            r.replicate.to_string(),
            r.stage.as_str().to_string(),
            r.qc.as_str().to_string(),
            format_f64(r.divergence_score),
            replaced.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<qc>", e))?;
    Ok(())
}

pub fn read_qc<R: Read>(reader: R) -> Result<Vec<QcRecord>> {
    let bad = |d: String| Error::Format { what: "QC CSV", detail: d };
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 6 {
            return Err(bad(format!("expected 6 fields, got {}", row.len())));
        }
        let replaced = if row[5].is_empty() {
            Vec::new()
        } else {
            row[5]
                .split(';')
                .map(|v| v.parse().map_err(|_| bad(format!("bad index `{v}`"))))
                .collect::<Result<_>>()?
        };
        let qc = QcStatus::parse(&row[3]).ok_or_else(|| bad(format!("unknown qc `{}`", &row[3])))?;
        out.push(QcRecord {
            sample_id: row[0].to_string(),
            replicate: row[1].parse().map_err(|_| bad(format!("bad replicate `{}`", &row[1])))?,
            stage: Stage::parse(&row[2]).ok_or_else(|| bad(format!("unknown stage `{}`", &row[2])))?,
            qc,
            divergence_score: row[4].parse().map_err(|_| bad(format!("bad score `{}`", &row[4])))?,
            replaced_indices: replaced,
            flagged_by: (qc == QcStatus::FlaggedDivergent).then_some(QcCheck::Condition),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_parsing() {
        assert_eq!(parse_column("P0001_3").unwrap(), ("P0001".to_string(), 3));
        assert_eq!(parse_column("a_b_12").unwrap(), ("a_b".to_string(), 12));
        assert!(parse_column("nounderscore").is_err());
        assert!(parse_column("P1_x").is_err());
    }

    #[test]
    fn spectra_round_trip() {
        let x: Vec<f64> = (0..6).map(|i| 400.0 + 0.1 * i as f64).collect();
        let a = Spectrum::new("P1", 0, x.clone(), vec![0.1, 1.0 / 3.0, 2.5, -1e-7, 7.0, 8.0]).unwrap();
        let b = Spectrum::new("P1", 1, x, vec![1.0; 6]).unwrap();
        let mut buf = Vec::new();
        write_spectra(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("wavenumber,P1_0,P1_1\n"));
        let back = read_spectra(buf.as_slice(), Stage::Raw).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn qc_round_trip() {
        let r = QcRecord {
            sample_id: "P9".into(),
            replicate: 2,
            stage: Stage::Normalized,
            qc: QcStatus::FlaggedDivergent,
            divergence_score: 4.25,
            replaced_indices: vec![3, 17],
            flagged_by: Some(QcCheck::Condition),
        };
        let mut buf = Vec::new();
        write_qc(&mut buf, std::slice::from_ref(&r)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sample_id,replicate,stage,qc,divergence_score,replaced_indices\n"));
        assert!(text.contains("P9,2,normalized,flagged_divergent,4.25,3;17"));
        assert_eq!(read_qc(buf.as_slice()).unwrap(), vec![r]);
    }
}
