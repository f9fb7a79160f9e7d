//! A set of tri-modal samples on disk: `t`, `f`, `s` and `labels`
//! TensorFiles plus `fiducials` (`[n, 3]`, `-1` where absent).

use std::path::Path;

use qcfd_core::beat::{BeatLabel, Fiducials};
use qcfd_core::dsp::TriModalSample;

use crate::error::{io, CliError, Result};
use crate::tensor::TensorFile;

pub const FILES: [&str; 5] = [
    "t.tensor",
    "f.tensor",
    "s.tensor",
    "labels.tensor",
    "fiducials.tensor",
];

pub fn write_samples(dir: &Path, samples: &[TriModalSample]) -> Result<()> {
    if samples.is_empty() {
        return Err(CliError::data(dir, "refusing to write an empty sample set"));
    }
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for (m, name) in ["t", "f", "s"].iter().enumerate() {
        let rows: Vec<&[f64]> = samples.iter().map(|s| s.modality(m)).collect();
        TensorFile::from_rows(name, &rows)?.write(&dir.join(FILES[m]))?;
    }
    let labels = samples.iter().map(|s| s.label.index() as f32).collect();
    TensorFile::new("labels", vec![samples.len()], labels)?.write(&dir.join(FILES[3]))?;
    let fid = samples
        .iter()
        .flat_map(|s| match &s.fiducials {
            Some(f) => [f.qrs.start as f32, f.qrs.end as f32, f.st.end as f32],
            None => [-1.0; 3],
        })
        .collect();
    TensorFile::new("fiducials", vec![samples.len(), 3], fid)?.write(&dir.join(FILES[4]))
}

fn index(path: &Path, v: f32) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 16_777_216.0 {
        Ok(v as usize)
    } else {
        Err(CliError::data(path, format!("{v} is not an index")))
    }
}

pub fn read_samples(dir: &Path) -> Result<Vec<TriModalSample>> {
    let mut parts = Vec::with_capacity(3);
    for name in &FILES[..3] {
        parts.push(TensorFile::read(&dir.join(name))?.rows()?);
    }
    let labels_path = dir.join(FILES[3]);
    let labels = TensorFile::read(&labels_path)?;
    let fid_path = dir.join(FILES[4]);
    let fid = TensorFile::read(&fid_path)?;
    let n = labels.data.len();
    if labels.shape != [n] || parts.iter().any(|p| p.len() != n) || fid.shape != [n, 3] {
        return Err(CliError::data(dir, "tensor row counts disagree"));
    }
    let mut s_rows = parts.pop().unwrap_or_default().into_iter();
    let mut f_rows = parts.pop().unwrap_or_default().into_iter();
    let mut t_rows = parts.pop().unwrap_or_default().into_iter();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let label =
            BeatLabel::from_index(index(&labels_path, labels.data[i])?).ok_or_else(|| {
                CliError::data(&labels_path, format!("unknown label {}", labels.data[i]))
            })?;
        let row = &fid.data[3 * i..3 * i + 3];
        let fiducials = if row.iter().all(|&v| v == -1.0) {
            None
        } else {
            let [a, b, c] = [row[0], row[1], row[2]].map(|v| index(&fid_path, v));
            let (a, b, c) = (a?, b?, c?);
            Some(Fiducials {
                qrs: a..b,
                st: b..c,
            })
        };
        out.push(TriModalSample {
            t: t_rows.next().unwrap_or_default(),
            f: f_rows.next().unwrap_or_default(),
            s: s_rows.next().unwrap_or_default(),
            label,
            fiducials,
        });
    }
    if out.is_empty() {
        return Err(CliError::data(dir, "empty sample set"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qcfd_core::beat::{make_dataset, SimProfile};
    use qcfd_core::dsp::{to_trimodal, DspProfile};

    #[test]
    fn narrowed_samples_round_trip_exactly() {
        let p = DspProfile::desk();
        let mut samples: Vec<TriModalSample> = make_dataset(2, &SimProfile::default(), 1)
            .unwrap()
            .iter()
            .map(|b| to_trimodal(b, &p).unwrap())
            .collect();
        samples[1].fiducials = None;
        let narrow = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = f64::from(*x as f32));
        for s in samples.iter_mut() {
            narrow(&mut s.t);
            narrow(&mut s.f);
            narrow(&mut s.s);
        }
        let dir = tempfile::tempdir().unwrap();
        write_samples(dir.path(), &samples).unwrap();
        assert_eq!(read_samples(dir.path()).unwrap(), samples);
    }
}
