//! Raw beats as CSV: one beat per row, the integer label (0 normal,
//! 1 ST shift) followed by a fixed number of samples. A header row is
//! optional. Simulated fiducials travel in a separate row-aligned file.

use std::path::Path;

use qcfd_core::beat::{BeatLabel, Fiducials, RawBeat};

use crate::error::{io, CliError, Result};

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::data(path, e.to_string()))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::data(path, e.to_string()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::data(path, e.to_string())
}

/// Parse a beats file; rows are numbered from 1 in error messages, header
/// included. Fiducials are absent on every returned beat.
pub fn load_beats_csv(path: &Path) -> Result<Vec<RawBeat>> {
    let mut width = None;
    let mut beats = Vec::new();
    for (i, rec) in reader(path)?.into_records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| CliError::row(path, row, e.to_string()))?;
        let label_cell = rec.get(0).unwrap_or("").trim();
        let Ok(code) = label_cell.parse::<i64>() else {
            if row == 1 {
                continue;
            }
            return Err(CliError::row(
                path,
                row,
                format!("label '{label_cell}' is not an integer"),
            ));
        };
        let label = usize::try_from(code)
            .ok()
            .and_then(BeatLabel::from_index)
            .ok_or_else(|| CliError::row(path, row, format!("unknown label {code}")))?;
        let n = rec.len() - 1;
        match width {
            None if n == 0 => return Err(CliError::row(path, row, "no samples")),
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(CliError::row(
                    path,
                    row,
                    format!("{n} samples, expected {w}"),
                ));
            }
            Some(_) => {}
        }
        let samples = rec
            .iter()
            .skip(1)
            .enumerate()
            .map(|(j, cell)| {
                cell.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        CliError::row(
                            path,
                            row,
                            format!("column {}: '{cell}' is not a finite number", j + 2),
                        )
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        beats.push(RawBeat {
            samples,
            label,
            fiducials: None,
        });
    }
    if beats.is_empty() {
        return Err(CliError::data(path, "no beats"));
    }
    Ok(beats)
}

/// Write beats with a header row; values use the shortest exact decimal
/// form, so reloading is lossless.
pub fn write_beats_csv(path: &Path, beats: &[RawBeat]) -> Result<()> {
    let width = beats.first().map_or(0, |b| b.samples.len());
    let mut w = writer(path)?;
    let mut header = vec!["label".to_string()];
    header.extend((0..width).map(|i| format!("x{i}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for b in beats {
        let mut rec = vec![b.label.index().to_string()];
        rec.extend(b.samples.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn write_fiducials_csv(path: &Path, beats: &[RawBeat]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["qrs_start", "qrs_end", "st_end"])
        .map_err(csv_err(path))?;
    for b in beats {
        let rec = match &b.fiducials {
            Some(f) => [f.qrs.start, f.qrs.end, f.st.end].map(|v| v.to_string()),
            None => [String::new(), String::new(), String::new()],
        };
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

/// Attach fiducials from a file written by [`write_fiducials_csv`].
pub fn attach_fiducials(path: &Path, beats: &mut [RawBeat]) -> Result<()> {
    let mut rows = reader(path)?.into_records();
    rows.next();
    let mut count = 0;
    for (i, rec) in rows.enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| CliError::row(path, row, e.to_string()))?;
        let beat = beats
            .get_mut(i)
            .ok_or_else(|| CliError::row(path, row, "more fiducial rows than beats"))?;
        count += 1;
        if rec.iter().all(|c| c.trim().is_empty()) {
            beat.fiducials = None;
            continue;
        }
        let v: Vec<usize> = rec
            .iter()
            .map(|c| c.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| {
                CliError::row(path, row, "fiducials must be three non-negative integers")
            })?;
        let [qs, qe, se] = v[..] else {
            return Err(CliError::row(
                path,
                row,
                "expected qrs_start,qrs_end,st_end",
            ));
        };
        if !(qs < qe && qe < se && se <= beat.samples.len()) {
            return Err(CliError::row(
                path,
                row,
                "fiducial windows out of order or out of range",
            ));
        }
        beat.fiducials = Some(Fiducials {
            qrs: qs..qe,
            st: qe..se,
        });
    }
    if count != beats.len() {
        return Err(CliError::data(
            path,
            format!("{count} fiducial rows for {} beats", beats.len()),
        ));
    }
    Ok(())
}
