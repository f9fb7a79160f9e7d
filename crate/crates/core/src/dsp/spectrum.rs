use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

use super::fft::dft;
use crate::error::{domain, Result};

/// Periodic Hann window; shifted copies at 50% overlap sum to exactly one.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taper {
    Hann,
    Rectangular,
}

fn check_frame_args(len: usize, window: usize, k: usize) -> Result<()> {
    if window < 2 || window > len {
        return Err(domain(format!("window {window} must be in [2, {len}]")));
    }
    if k == 0 || k > window / 2 + 1 {
        return Err(domain(format!(
            "K = {k} must be in [1, {}]",
            window / 2 + 1
        )));
    }
    Ok(())
}

/// Start offsets of the frames of length `window` at hop `window / 2`.
pub fn frame_starts(len: usize, window: usize) -> impl Iterator<Item = usize> {
    let hop = (window / 2).max(1);
    let count = if len >= window {
        (len - window) / hop + 1
    } else {
        0
    };
    (0..count).map(move |i| i * hop)
}

/// Per-frame DFT of the tapered frames.
pub fn frame_spectra(x: &[f64], window: usize, taper: Taper) -> Vec<Vec<Complex64>> {
    let w = match taper {
        Taper::Hann => hann(window),
        Taper::Rectangular => vec![1.0; window],
    };
    frame_starts(x.len(), window)
        .map(|start| {
            let frame: Vec<Complex64> = x[start..start + window]
                .iter()
                .zip(&w)
                .map(|(&v, &wv)| Complex64::new(v * wv, 0.0))
                .collect();
            dft(&frame)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogSpectrum {
    pub bins: Vec<f64>,
    /// Bin spacing in Hz (`fs / window`).
    pub resolution: f64,
}

/// Frame-averaged `ln(1 + |X_k|)` over Hann frames at 50% overlap, first
/// `k` bins.
pub fn stft_logmag(x: &[f64], fs: f64, window: usize, k: usize) -> Result<LogSpectrum> {
    check_frame_args(x.len(), window, k)?;
    let spectra = frame_spectra(x, window, Taper::Hann);
    let mut bins = vec![0.0; k];
    for spec in &spectra {
        for (b, v) in bins.iter_mut().zip(spec) {
            *b += v.norm().ln_1p();
        }
    }
    let frames = spectra.len() as f64;
    for b in bins.iter_mut() {
        *b /= frames;
    }
    Ok(LogSpectrum {
        bins,
        resolution: fs / window as f64,
    })
}

/// Frame-averaged power `|X_k|^2` over the first `k` bins.
pub fn power_spectrum(x: &[f64], window: usize, k: usize, taper: Taper) -> Result<Vec<f64>> {
    check_frame_args(x.len(), window, k)?;
    let spectra = frame_spectra(x, window, taper);
    let mut p = vec![0.0; k];
    for spec in &spectra {
        for (b, v) in p.iter_mut().zip(spec) {
            *b += v.norm_sqr();
        }
    }
    let frames = spectra.len() as f64;
    for b in p.iter_mut() {
        *b /= frames;
    }
    Ok(p)
}
