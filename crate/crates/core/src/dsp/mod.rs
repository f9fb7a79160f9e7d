//! Tri-modal front end: band-passed, baseline-corrected time series (T),
//! frame-averaged log-magnitude spectrum (F) and Morlet scalogram (S), all
//! derived from the same beat.

pub mod cwt;
pub mod fft;
pub mod filter;
pub mod spectrum;

use alloc::vec::Vec;
use core::cmp::Ordering;

use num_traits::Float;

use crate::beat::{BeatLabel, Fiducials, RawBeat};
use crate::error::{domain, Result};

pub use cwt::{morlet_scalogram, Scalogram};
pub use fft::{dft, idft};
pub use filter::bandpass_filter;
pub use spectrum::{stft_logmag, LogSpectrum};

/// Shapes and constants of the front end.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DspProfile {
    pub fs: f64,
    /// Length of T.
    pub n: usize,
    /// STFT window; hop is half of it.
    pub window: usize,
    /// Number of retained spectrum bins (length of F).
    pub k: usize,
    /// Scalogram rows.
    pub h: usize,
    /// Scalogram columns.
    pub w: usize,
    pub band: (f64, f64),
    pub cwt_band: (f64, f64),
    /// Moving-median baseline window in seconds.
    pub baseline_window: f64,
}

impl DspProfile {
    pub fn desk() -> Self {
        Self {
            fs: 250.0,
            n: 256,
            window: 64,
            k: 32,
            h: 16,
            w: 64,
            band: (0.5, 40.0),
            cwt_band: (1.0, 40.0),
            baseline_window: 0.4,
        }
    }

    pub fn full(fs: f64, k: usize, h: usize, w: usize) -> Self {
        Self {
            fs,
            n: 1000,
            window: 256,
            k,
            h,
            w,
            band: (0.5, 40.0),
            cwt_band: (1.0, 40.0),
            baseline_window: 0.4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0) || self.n == 0 {
            return Err(domain("profile needs fs > 0 and N > 0"));
        }
        if self.window < 2 || self.window > self.n {
            return Err(domain("profile window must be in [2, N]"));
        }
        if self.k == 0 || self.k > self.window / 2 + 1 {
            return Err(domain("profile K must be in [1, window/2 + 1]"));
        }
        if self.h < 2 || self.w < 2 || self.w > self.n {
            return Err(domain("profile needs H, W >= 2 and W <= N"));
        }
        if !(self.band.0 > 0.0 && self.band.0 < self.band.1 && self.band.1 < self.fs / 2.0) {
            return Err(domain("profile band must satisfy 0 < lo < hi < fs/2"));
        }
        if !(self.cwt_band.0 > 0.0 && self.cwt_band.0 < self.cwt_band.1) {
            return Err(domain("profile CWT band must satisfy 0 < lo < hi"));
        }
        if !(self.baseline_window > 0.0) {
            return Err(domain("baseline window must be positive"));
        }
        Ok(())
    }

    /// Flattened length of the (T, F, S) triple.
    pub fn sample_dims(&self) -> [usize; 3] {
        [self.n, self.k, self.h * self.w]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeDomainSignal {
    pub samples: Vec<f64>,
    pub fs: f64,
}

/// One aligned (T, F, S) triple. `s` is the flattened `H x W` grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TriModalSample {
    pub t: Vec<f64>,
    pub f: Vec<f64>,
    pub s: Vec<f64>,
    pub label: BeatLabel,
    pub fiducials: Option<Fiducials>,
}

impl TriModalSample {
    pub fn modality(&self, m: usize) -> &[f64] {
        match m {
            0 => &self.t,
            1 => &self.f,
            _ => &self.s,
        }
    }

    pub fn modalities(&self) -> [&[f64]; 3] {
        [&self.t, &self.f, &self.s]
    }

    /// Concatenation `t ++ f ++ s`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.t.len() + self.f.len() + self.s.len());
        v.extend_from_slice(&self.t);
        v.extend_from_slice(&self.f);
        v.extend_from_slice(&self.s);
        v
    }

    /// Total order on contents, used to make set-level reductions
    /// independent of sample order.
    pub fn content_cmp(&self, other: &Self) -> Ordering {
        fn lex(a: &[f64], b: &[f64]) -> Ordering {
            for (x, y) in a.iter().zip(b) {
                match x.total_cmp(y) {
                    Ordering::Equal => continue,
                    o => return o,
                }
            }
            a.len().cmp(&b.len())
        }
        self.label
            .cmp(&other.label)
            .then_with(|| lex(&self.t, &other.t))
            .then_with(|| lex(&self.f, &other.f))
            .then_with(|| lex(&self.s, &other.s))
    }
}

/// Samples sorted by [`TriModalSample::content_cmp`].
pub fn canonical_order(samples: &[TriModalSample]) -> Vec<&TriModalSample> {
    let mut v: Vec<&TriModalSample> = samples.iter().collect();
    v.sort_by(|a, b| a.content_cmp(b));
    v
}

/// Centered running median; the window shrinks at the edges.
pub fn moving_median(x: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut buf = Vec::with_capacity(window + 1);
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            buf.clear();
            buf.extend_from_slice(&x[lo..hi]);
            buf.sort_by(f64::total_cmp);
            let m = buf.len();
            if m % 2 == 1 {
                buf[m / 2]
            } else {
                0.5 * (buf[m / 2 - 1] + buf[m / 2])
            }
        })
        .collect()
}

/// Band-pass, subtract the moving-median baseline, scale to unit peak and
/// pad with zeros or truncate to `profile.n`.
pub fn preprocess_time(beat: &RawBeat, profile: &DspProfile) -> Result<TimeDomainSignal> {
    if beat.samples.is_empty() {
        return Err(domain("empty beat"));
    }
    let filtered = bandpass_filter(&beat.samples, profile.fs, profile.band.0, profile.band.1)?;
    let half = (profile.baseline_window * profile.fs / 2.0).round() as usize;
    let baseline = moving_median(&filtered, 2 * half + 1);
    let mut x: Vec<f64> = filtered.iter().zip(&baseline).map(|(a, b)| a - b).collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        for v in x.iter_mut() {
            *v /= peak;
        }
    }
    x.resize(profile.n, 0.0);
    Ok(TimeDomainSignal {
        samples: x,
        fs: profile.fs,
    })
}

pub fn to_trimodal(beat: &RawBeat, profile: &DspProfile) -> Result<TriModalSample> {
    profile.validate()?;
    let t = preprocess_time(beat, profile)?;
    let f = stft_logmag(&t.samples, profile.fs, profile.window, profile.k)?;
    let s = morlet_scalogram(
        &t.samples,
        profile.fs,
        profile.h,
        profile.w,
        profile.cwt_band,
    )?;
    Ok(TriModalSample {
        t: t.samples,
        f: f.bins,
        s: s.grid,
        label: beat.label,
        fiducials: beat.fiducials.clone(),
    })
}
