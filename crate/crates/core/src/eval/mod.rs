//! Evaluation of synthetic sets against real data: embedding variance,
//! plausibility gap, complementarity retention, morphology statistics and
//! the normalised scores relative to a baseline model.

pub mod reference;

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::dsp::spectrum::{power_spectrum, Taper};
use crate::dsp::{canonical_order, DspProfile, TriModalSample};
use crate::error::{domain, Error, Result};
use crate::info::{cfd_stats, BinningSpec, CfdStats};

pub use reference::{ReferenceConfig, ReferenceModels};

/// Probability floor applied before renormalising predictive distributions.
pub const PROB_FLOOR: f64 = 1e-9;

/// Mean over dimensions of the population variance across samples.
pub fn embedding_variance(embeddings: &[Vec<f64>]) -> Result<f64> {
    if embeddings.len() < 2 {
        return Err(domain("embedding variance needs at least two samples"));
    }
    let dim = embeddings[0].len();
    if dim == 0 || embeddings.iter().any(|e| e.len() != dim) {
        return Err(domain("embeddings must share a positive dimension"));
    }
    let n = embeddings.len() as f64;
    let mut total = 0.0;
    for d in 0..dim {
        let mean = embeddings.iter().map(|e| e[d]).sum::<f64>() / n;
        total += embeddings
            .iter()
            .map(|e| (e[d] - mean).powi(2))
            .sum::<f64>()
            / n;
    }
    Ok(total / dim as f64)
}

fn floored(p: &[f64]) -> Vec<f64> {
    let q: Vec<f64> = p.iter().map(|&v| v.max(PROB_FLOOR)).collect();
    let s: f64 = q.iter().sum();
    q.into_iter().map(|v| v / s).collect()
}

/// `KL(p || q)` in nats after flooring both at [`PROB_FLOOR`]; never negative.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let p = floored(p);
    let q = floored(q);
    let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum();
    kl.max(0.0)
}

/// Mean predictive class distribution over a set.
pub fn mean_prediction(models: &ReferenceModels, samples: &[TriModalSample]) -> Result<[f64; 2]> {
    if samples.is_empty() {
        return Err(Error::EmptySplit("prediction set"));
    }
    let mut acc = [0.0; 2];
    for s in canonical_order(samples) {
        let p = models.predict(s)?;
        acc[0] += p[0];
        acc[1] += p[1];
    }
    let n = samples.len() as f64;
    Ok([acc[0] / n, acc[1] / n])
}

/// `KL(mean C(real) || mean C(gen))`.
pub fn plausibility_gap(
    models: &ReferenceModels,
    real: &[TriModalSample],
    gen: &[TriModalSample],
) -> Result<f64> {
    Ok(kl_divergence(
        &mean_prediction(models, real)?,
        &mean_prediction(models, gen)?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MorphologyStats {
    pub p2p: f64,
    pub rms: f64,
    pub spectral_entropy: f64,
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Shannon entropy of the normalised `k`-bin power spectrum divided by
/// `ln k`. Frames are untapered so a constant keeps all its power in the
/// DC bin; a silent signal has entropy 0.
pub fn spectral_entropy(x: &[f64], window: usize, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(domain("spectral entropy needs at least two bins"));
    }
    let p = power_spectrum(x, window, k, Taper::Rectangular)?;
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Ok(0.0);
    }
    let h: f64 = p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let q = v / total;
            -q * q.ln()
        })
        .sum();
    Ok((h / (k as f64).ln()).clamp(0.0, 1.0))
}

/// P2P, RMS and spectral entropy of a time-domain signal, the spectrum
/// taken with the profile's window and bin count.
pub fn morphology_stats(t: &[f64], profile: &DspProfile) -> Result<MorphologyStats> {
    if t.is_empty() {
        return Err(domain("morphology needs a non-empty signal"));
    }
    let (lo, hi) = t
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let window = profile.window.min(t.len());
    let k = profile.k.min(window / 2 + 1);
    Ok(MorphologyStats {
        p2p: hi - lo,
        rms: rms(t),
        spectral_entropy: spectral_entropy(t, window, k)?,
    })
}

fn mean_rms(samples: &[TriModalSample]) -> f64 {
    let ordered = canonical_order(samples);
    ordered.iter().map(|s| rms(&s.t)).sum::<f64>() / samples.len() as f64
}

/// `100 |mean rms(gen) - mean rms(real)| / mean rms(real)`.
pub fn rms_energy_error(real: &[TriModalSample], gen: &[TriModalSample]) -> Result<f64> {
    if real.is_empty() || gen.is_empty() {
        return Err(domain("RMS energy error needs non-empty sets"));
    }
    let r = mean_rms(real);
    if !(r > 0.0) {
        return Err(domain("real mean RMS is zero"));
    }
    Ok(100.0 * (mean_rms(gen) - r).abs() / r)
}

/// Raw per-model metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RawMetrics {
    pub sigma2: f64,
    pub delta: f64,
    pub c_ratio: f64,
    pub e_rms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormalizedScores {
    pub r_sigma: f64,
    pub rho_delta: f64,
    pub gamma: f64,
    pub kappa: f64,
}

fn ratio(num: f64, den: f64, what: &'static str) -> Result<f64> {
    if den == 0.0 || !den.is_finite() {
        Err(Error::DegenerateBaseline(what))
    } else {
        Ok(num / den)
    }
}

/// Scores of `model` relative to `baseline`.
pub fn normalized_scores(
    model: &RawMetrics,
    sigma2_real: f64,
    baseline: &RawMetrics,
) -> Result<NormalizedScores> {
    Ok(NormalizedScores {
        r_sigma: ratio(
            model.sigma2 - sigma2_real,
            baseline.sigma2 - sigma2_real,
            "baseline embedding variance equals the real one",
        )?,
        rho_delta: ratio(
            baseline.delta - model.delta,
            baseline.delta,
            "baseline plausibility gap is zero",
        )?,
        gamma: ratio(
            model.c_ratio,
            baseline.c_ratio,
            "baseline complementarity ratio is zero",
        )?,
        kappa: ratio(model.e_rms, baseline.e_rms, "baseline RMS error is zero")?,
    })
}

/// Normalised scores where each entry is reported on its own: 0 when its
/// numerator is exactly 0, absent when only its denominator is.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreRow {
    pub r_sigma: Option<f64>,
    pub rho_delta: Option<f64>,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
}

pub fn score_row(model: &RawMetrics, sigma2_real: f64, baseline: &RawMetrics) -> ScoreRow {
    let entry = |num: f64, den: f64| {
        if num == 0.0 {
            Some(0.0)
        } else if den == 0.0 || !den.is_finite() {
            None
        } else {
            Some(num / den)
        }
    };
    ScoreRow {
        r_sigma: entry(model.sigma2 - sigma2_real, baseline.sigma2 - sigma2_real),
        rho_delta: entry(baseline.delta - model.delta, baseline.delta),
        gamma: entry(model.c_ratio, baseline.c_ratio),
        kappa: entry(model.e_rms, baseline.e_rms),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MorphologySummary {
    pub mean: MorphologyStats,
    pub sd: MorphologyStats,
}

fn summarize(stats: &[MorphologyStats]) -> MorphologySummary {
    let n = stats.len() as f64;
    let mean = MorphologyStats {
        p2p: stats.iter().map(|s| s.p2p).sum::<f64>() / n,
        rms: stats.iter().map(|s| s.rms).sum::<f64>() / n,
        spectral_entropy: stats.iter().map(|s| s.spectral_entropy).sum::<f64>() / n,
    };
    let sd = MorphologyStats {
        p2p: (stats
            .iter()
            .map(|s| (s.p2p - mean.p2p).powi(2))
            .sum::<f64>()
            / n)
            .sqrt(),
        rms: (stats
            .iter()
            .map(|s| (s.rms - mean.rms).powi(2))
            .sum::<f64>()
            / n)
            .sqrt(),
        spectral_entropy: (stats
            .iter()
            .map(|s| (s.spectral_entropy - mean.spectral_entropy).powi(2))
            .sum::<f64>()
            / n)
            .sqrt(),
    };
    MorphologySummary { mean, sd }
}

/// Everything computed for one named set (or the real reference).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SetReport {
    pub name: String,
    pub size: usize,
    pub raw: RawMetrics,
    pub cfd: CfdStats,
    pub scores: ScoreRow,
    pub summary: MorphologySummary,
    /// Per-sample statistics in canonical sample order; `(rms, p2p)` pairs
    /// form the joint point cloud.
    pub morphology: Vec<MorphologyStats>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub real_size: usize,
    pub sigma2_real: f64,
    pub real_cfd: CfdStats,
    pub real_summary: MorphologySummary,
    pub real_morphology: Vec<MorphologyStats>,
    /// Name of the set the scores are normalised against.
    pub baseline: String,
    pub sets: Vec<SetReport>,
}

fn embeddings(models: &ReferenceModels, ordered: &[&TriModalSample]) -> Result<Vec<Vec<f64>>> {
    ordered.iter().map(|s| models.embed(s)).collect()
}

fn morphology(ordered: &[&TriModalSample], profile: &DspProfile) -> Result<Vec<MorphologyStats>> {
    ordered
        .iter()
        .map(|s| morphology_stats(&s.t, profile))
        .collect()
}

/// Score every synthetic set against `real`. The first set is the
/// baseline. All reductions run in canonical sample order, so the report
/// does not depend on the order samples are supplied in.
pub fn evaluate(
    models: &ReferenceModels,
    real: &[TriModalSample],
    synth_sets: &[(String, Vec<TriModalSample>)],
    spec: &BinningSpec,
    profile: &DspProfile,
) -> Result<EvalReport> {
    if real.is_empty() {
        return Err(Error::EmptySplit("real evaluation set"));
    }
    if synth_sets.is_empty() {
        return Err(domain("evaluation needs at least one synthetic set"));
    }
    if let Some((name, _)) = synth_sets.iter().find(|(_, s)| s.is_empty()) {
        return Err(domain(alloc::format!("synthetic set '{name}' is empty")));
    }
    let real_ordered = canonical_order(real);
    let sigma2_real = embedding_variance(&embeddings(models, &real_ordered)?)?;
    let real_cfd = cfd_stats(real, spec)?;
    if real_cfd.c_tfs == 0.0 {
        return Err(Error::DegenerateBaseline("real complementarity is zero"));
    }
    let real_pred = mean_prediction(models, real)?;
    let real_morphology = morphology(&real_ordered, profile)?;

    let mut sets = Vec::with_capacity(synth_sets.len());
    for (name, samples) in synth_sets {
        let ordered = canonical_order(samples);
        let cfd = cfd_stats(samples, spec)?;
        let raw = RawMetrics {
            sigma2: embedding_variance(&embeddings(models, &ordered)?)?,
            delta: kl_divergence(&real_pred, &mean_prediction(models, samples)?),
            c_ratio: cfd.c_tfs / real_cfd.c_tfs,
            e_rms: rms_energy_error(real, samples)?,
        };
        let morph = morphology(&ordered, profile)?;
        sets.push(SetReport {
            name: name.clone(),
            size: samples.len(),
            raw,
            cfd,
            scores: ScoreRow {
                r_sigma: None,
                rho_delta: None,
                gamma: None,
                kappa: None,
            },
            summary: summarize(&morph),
            morphology: morph,
        });
    }
    let baseline = sets[0].raw;
    for s in sets.iter_mut() {
        s.scores = score_row(&s.raw, sigma2_real, &baseline);
    }
    Ok(EvalReport {
        real_size: real.len(),
        sigma2_real,
        real_cfd,
        real_summary: summarize(&real_morphology),
        real_morphology,
        baseline: synth_sets[0].0.clone(),
        sets,
    })
}
