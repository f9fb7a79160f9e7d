//! Evaluation output: `report.json` (the full report with the resolved
//! config), `scores.csv` in the Table II layout, per-statistic histograms
//! and the joint RMS/P2P point cloud.

use std::path::Path;

use qcfd_core::eval::{score_row, EvalReport, MorphologyStats, RawMetrics};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io, CliError, Result};

/// Files written by [`write_report`], in order.
pub const MANIFEST: [&str; 6] = [
    "report.json",
    "scores.csv",
    "morph_hist_p2p.csv",
    "morph_hist_rms.csv",
    "morph_hist_entropy.csv",
    "joint_rms_p2p.csv",
];

/// Name of the reference row in score tables.
pub const REAL_ROW: &str = "real";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub config_hash: String,
    pub config: RunConfig,
    /// Config hash of the checkpoint that supplied the reference models.
    pub model_config_hash: Option<String>,
    pub report: EvalReport,
}

/// One row of `scores.csv`; the real row carries only `sigma2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub model: String,
    pub sigma2: Option<f64>,
    pub delta: Option<f64>,
    pub c_ratio: Option<f64>,
    pub e_rms: Option<f64>,
    pub r_sigma: Option<f64>,
    pub rho_delta: Option<f64>,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
}

impl ScoreLine {
    fn real(sigma2: f64) -> Self {
        Self {
            model: REAL_ROW.into(),
            sigma2: Some(sigma2),
            delta: None,
            c_ratio: None,
            e_rms: None,
            r_sigma: None,
            rho_delta: None,
            gamma: None,
            kappa: None,
        }
    }
}

/// Score lines for `rows` against the first of them.
pub fn score_table(sigma2_real: f64, rows: &[(String, RawMetrics)]) -> Vec<ScoreLine> {
    let mut out = vec![ScoreLine::real(sigma2_real)];
    if let Some((_, base)) = rows.first() {
        for (name, raw) in rows {
            let s = score_row(raw, sigma2_real, base);
            out.push(ScoreLine {
                model: name.clone(),
                sigma2: Some(raw.sigma2),
                delta: Some(raw.delta),
                c_ratio: Some(raw.c_ratio),
                e_rms: Some(raw.e_rms),
                r_sigma: s.r_sigma,
                rho_delta: s.rho_delta,
                gamma: s.gamma,
                kappa: s.kappa,
            });
        }
    }
    out
}

pub fn write_score_lines<W: std::io::Write>(
    out: W,
    lines: &[ScoreLine],
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for l in lines {
        w.serialize(l)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_score_lines(path: &Path) -> Result<Vec<ScoreLine>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::data(path, e.to_string()))?;
    r.deserialize()
        .enumerate()
        .map(|(i, rec)| rec.map_err(|e| CliError::row(path, i + 2, e.to_string())))
        .collect()
}

#[derive(Debug, Deserialize)]
struct RawLine {
    model: String,
    sigma2: Option<f64>,
    delta: Option<f64>,
    c_ratio: Option<f64>,
    e_rms: Option<f64>,
}

/// Read a raw-metrics table (`model,sigma2,delta,c_ratio,e_rms`; other
/// columns ignored). The `real` row gives the reference variance; the
/// first other row is the baseline.
pub fn read_raw_metrics(path: &Path) -> Result<(f64, Vec<(String, RawMetrics)>)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::data(path, e.to_string()))?;
    let mut sigma2_real = None;
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<RawLine>().enumerate() {
        let row = i + 2;
        let l = rec.map_err(|e| CliError::row(path, row, e.to_string()))?;
        if l.model.eq_ignore_ascii_case(REAL_ROW) {
            let v = l
                .sigma2
                .ok_or_else(|| CliError::row(path, row, "real row needs sigma2"))?;
            if sigma2_real.replace(v).is_some() {
                return Err(CliError::row(path, row, "second real row"));
            }
            continue;
        }
        let need = |v: Option<f64>, what: &str| {
            v.ok_or_else(|| CliError::row(path, row, format!("missing {what}")))
        };
        rows.push((
            l.model.clone(),
            RawMetrics {
                sigma2: need(l.sigma2, "sigma2")?,
                delta: need(l.delta, "delta")?,
                c_ratio: need(l.c_ratio, "c_ratio")?,
                e_rms: need(l.e_rms, "e_rms")?,
            },
        ));
    }
    let sigma2_real = sigma2_real.ok_or_else(|| CliError::data(path, "no 'real' row"))?;
    if rows.is_empty() {
        return Err(CliError::data(path, "no model rows"));
    }
    Ok((sigma2_real, rows))
}

#[derive(Debug, Serialize)]
struct HistLine<'a> {
    set: &'a str,
    bin: usize,
    lo: f64,
    hi: f64,
    count: usize,
}

#[derive(Debug, Serialize)]
struct JointLine<'a> {
    set: &'a str,
    index: usize,
    rms: f64,
    p2p: f64,
}

/// Equal-width counts over `[lo, hi]`; the last bin is closed.
fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let b = if width > 0.0 {
            ((v - lo) / width) as usize
        } else {
            0
        };
        counts[b.min(bins - 1)] += 1;
    }
    counts
}

fn named_sets(report: &EvalReport) -> Vec<(&str, &[MorphologyStats])> {
    let mut sets = vec![(REAL_ROW, report.real_morphology.as_slice())];
    sets.extend(
        report
            .sets
            .iter()
            .map(|s| (s.name.as_str(), s.morphology.as_slice())),
    );
    sets
}

fn write_hist(
    path: &Path,
    report: &EvalReport,
    bins: usize,
    stat: fn(&MorphologyStats) -> f64,
) -> Result<()> {
    let sets = named_sets(report);
    let all = sets.iter().flat_map(|(_, m)| m.iter().map(stat));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let width = (hi - lo) / bins as f64;
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::data(path, e.to_string()))?;
    for (set, m) in &sets {
        let values: Vec<f64> = m.iter().map(stat).collect();
        for (bin, count) in histogram(&values, lo, hi, bins).into_iter().enumerate() {
            let line = HistLine {
                set,
                bin,
                lo: lo + bin as f64 * width,
                hi: if bin + 1 == bins {
                    hi
                } else {
                    lo + (bin + 1) as f64 * width
                },
                count,
            };
            w.serialize(line)
                .map_err(|e| CliError::data(path, e.to_string()))?;
        }
    }
    w.flush().map_err(io(path))
}

/// Write every file in [`MANIFEST`] into `dir`.
pub fn write_report(doc: &ReportDocument, dir: &Path, hist_bins: usize) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let report = &doc.report;
    let json = dir.join(MANIFEST[0]);
    let text =
        serde_json::to_string_pretty(doc).map_err(|e| CliError::data(&json, e.to_string()))?;
    std::fs::write(&json, text).map_err(io(&json))?;

    let scores = dir.join(MANIFEST[1]);
    let rows: Vec<(String, RawMetrics)> = report
        .sets
        .iter()
        .map(|s| (s.name.clone(), s.raw))
        .collect();
    let file = std::fs::File::create(&scores).map_err(io(&scores))?;
    write_score_lines(file, &score_table(report.sigma2_real, &rows))
        .map_err(|e| CliError::data(&scores, e.to_string()))?;

    let stats: [fn(&MorphologyStats) -> f64; 3] = [|m| m.p2p, |m| m.rms, |m| m.spectral_entropy];
    for (name, stat) in MANIFEST[2..5].iter().zip(stats) {
        write_hist(&dir.join(name), report, hist_bins, stat)?;
    }

    let joint = dir.join(MANIFEST[5]);
    let mut w =
        csv::Writer::from_path(&joint).map_err(|e| CliError::data(&joint, e.to_string()))?;
    for (set, m) in named_sets(report) {
        for (index, s) in m.iter().enumerate() {
            w.serialize(JointLine {
                set,
                index,
                rms: s.rms,
                p2p: s.p2p,
            })
            .map_err(|e| CliError::data(&joint, e.to_string()))?;
        }
    }
    w.flush().map_err(io(&joint))
}
