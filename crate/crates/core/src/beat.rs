//! Parametric sum-of-Gaussians ECG beat simulator.
//!
//! A beat is the sum of five Gaussian lobes (P, Q, R, S, T) plus a constant
//! shift over the ST segment. Two classes share one prototype and differ only
//! in that shift, which gives labelled data with exactly known QRS and ST
//! windows.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use num_traits::Float;
use rand::{Rng as _, RngCore};
use rand_distr::{Distribution, Normal};

use crate::error::{domain, Error, Result};
use crate::rng;

/// One Gaussian lobe: amplitude, center (s) and width (s).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Wave {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Wave {
    pub const fn new(amplitude: f64, center: f64, width: f64) -> Self {
        Self {
            amplitude,
            center,
            width,
        }
    }

    fn at(&self, t: f64) -> f64 {
        let u = (t - self.center) / self.width;
        self.amplitude * (-0.5 * u * u).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BeatParams {
    /// Lobes in P, Q, R, S, T order.
    pub waves: [Wave; 5],
    pub st_offset: f64,
    pub fs: f64,
    pub duration: f64,
}

pub const P: usize = 0;
pub const Q: usize = 1;
pub const R: usize = 2;
pub const S: usize = 3;
pub const T: usize = 4;

impl BeatParams {
    /// Desk prototype: 250 Hz, 1.024 s, 256 samples.
    pub fn desk(st_offset: f64) -> Self {
        Self {
            waves: [
                Wave::new(0.15, 0.200, 0.025),
                Wave::new(-0.10, 0.330, 0.010),
                Wave::new(1.00, 0.360, 0.012),
                Wave::new(-0.20, 0.390, 0.010),
                Wave::new(0.30, 0.620, 0.050),
            ],
            st_offset,
            fs: 250.0,
            duration: 1.024,
        }
    }

    /// Number of samples, after checking every parameter invariant.
    pub fn validate(&self) -> Result<usize> {
        if !(self.fs > 0.0 && self.fs.is_finite() && self.duration > 0.0) {
            return Err(domain("fs and duration must be positive"));
        }
        let n = self.fs * self.duration;
        let len = n.round();
        if (n - len).abs() > 1e-9 || len < 1.0 {
            return Err(domain(format!(
                "fs*duration = {n} is not a positive integer"
            )));
        }
        for (i, w) in self.waves.iter().enumerate() {
            if !(w.width > 0.0) || !w.amplitude.is_finite() || !w.center.is_finite() {
                return Err(domain(format!("wave {i} has invalid shape")));
            }
        }
        if !(self.waves[P].center >= 0.0) {
            return Err(domain("P center must be non-negative"));
        }
        for i in 1..5 {
            if !(self.waves[i - 1].center < self.waves[i].center) {
                return Err(domain("wave centers must be strictly increasing P<Q<R<S<T"));
            }
        }
        if !(self.waves[T].center < self.duration) {
            return Err(domain("T center must lie inside the beat"));
        }
        if !self.st_offset.is_finite() {
            return Err(domain("st_offset must be finite"));
        }
        Ok(len as usize)
    }

    /// Noise-free value of the Gaussian sum at sample `n` (no ST shift).
    pub fn lobes_at(&self, n: usize) -> f64 {
        let t = n as f64 / self.fs;
        self.waves.iter().map(|w| w.at(t)).sum()
    }

    /// Upper bound on |d/dt| of the lobe sum: sum of |a| / (b * sqrt(e)).
    pub fn slope_bound(&self) -> f64 {
        let sqrt_e = core::f64::consts::E.sqrt();
        self.waves
            .iter()
            .map(|w| w.amplitude.abs() / (w.width * sqrt_e))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BeatLabel {
    Normal,
    StShift,
}

impl BeatLabel {
    pub const ALL: [BeatLabel; 2] = [BeatLabel::Normal, BeatLabel::StShift];

    pub fn index(self) -> usize {
        match self {
            BeatLabel::Normal => 0,
            BeatLabel::StShift => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(BeatLabel::Normal),
            1 => Some(BeatLabel::StShift),
            _ => None,
        }
    }
}

/// Per-beat jitter: relative amplitude and width spread, absolute
/// per-lobe center spread and a common timing shift of the whole beat, both
/// in seconds. All draws are uniform on `[-scale, scale]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JitterScales {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub shift: f64,
}

impl Default for JitterScales {
    fn default() -> Self {
        Self {
            amplitude: 0.10,
            center: 0.004,
            width: 0.10,
            shift: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatClass {
    pub label: BeatLabel,
    pub prototype: BeatParams,
    pub jitter: JitterScales,
}

impl BeatClass {
    /// Draw a jittered copy of the prototype.
    pub fn jittered(&self, rng: &mut impl RngCore) -> Result<BeatParams> {
        let mut p = self.prototype;
        let shift = self.jitter.shift * rng.random_range(-1.0..=1.0);
        for w in p.waves.iter_mut() {
            w.center += shift;
            w.amplitude *= 1.0 + self.jitter.amplitude * rng.random_range(-1.0..=1.0);
            w.center += self.jitter.center * rng.random_range(-1.0..=1.0);
            w.width *= 1.0 + self.jitter.width * rng.random_range(-1.0..=1.0);
        }
        p.validate()?;
        fiducial_windows(&p)?;
        Ok(p)
    }
}

/// QRS and ST index windows, half-open, with `qrs.end == st.start`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fiducials {
    pub qrs: Range<usize>,
    pub st: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBeat {
    pub samples: Vec<f64>,
    pub label: BeatLabel,
    pub fiducials: Option<Fiducials>,
}

/// Windows from +/- two lobe widths around Q..S and up to the start of T.
pub fn fiducial_windows(params: &BeatParams) -> Result<Fiducials> {
    let len = params.validate()?;
    let fs = params.fs;
    let w = &params.waves;
    let idx = |t: f64| (t * fs).round();
    let qrs_start = idx(w[Q].center - 2.0 * w[Q].width);
    let qrs_end = idx(w[S].center + 2.0 * w[S].width);
    let st_end = idx(w[T].center - 2.0 * w[T].width);
    if qrs_start < 0.0 || qrs_end <= qrs_start {
        return Err(Error::DegenerateMorphology(format!(
            "QRS window [{qrs_start}, {qrs_end}) is empty or starts before the beat"
        )));
    }
    if st_end <= qrs_end {
        return Err(Error::DegenerateMorphology(format!(
            "ST window [{qrs_end}, {st_end}) is empty"
        )));
    }
    if st_end > len as f64 {
        return Err(Error::DegenerateMorphology(format!(
            "ST window ends at {st_end}, past the beat length {len}"
        )));
    }
    Ok(Fiducials {
        qrs: qrs_start as usize..qrs_end as usize,
        st: qrs_end as usize..st_end as usize,
    })
}

/// Render one beat. Noise is zero-mean Gaussian with `noise_sd`, drawn from
/// a stream seeded by `seed`; identical inputs give identical bits.
pub fn synthesize_beat(params: &BeatParams, noise_sd: f64, seed: u64) -> Result<RawBeat> {
    let len = params.validate()?;
    let fid = fiducial_windows(params)?;
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(domain("noise standard deviation must be finite and >= 0"));
    }
    let mut samples: Vec<f64> = (0..len).map(|n| params.lobes_at(n)).collect();
    for v in &mut samples[fid.st.clone()] {
        *v += params.st_offset;
    }
    if noise_sd > 0.0 {
        let mut r = rng::seeded(seed);
        let noise = Normal::new(0.0, noise_sd).map_err(|_| domain("noise sd"))?;
        for v in samples.iter_mut() {
            *v += noise.sample(&mut r);
        }
    }
    let label = if params.st_offset == 0.0 {
        BeatLabel::Normal
    } else {
        BeatLabel::StShift
    };
    Ok(RawBeat {
        samples,
        label,
        fiducials: Some(fid),
    })
}

/// Simulator profile: shared prototype, the class-defining ST shift, jitter
/// and sensor noise.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimProfile {
    pub prototype: BeatParams,
    pub st_offset: f64,
    pub jitter: JitterScales,
    pub noise_sd: f64,
}

impl Default for SimProfile {
    fn default() -> Self {
        Self {
            prototype: BeatParams::desk(0.0),
            st_offset: 0.15,
            jitter: JitterScales::default(),
            noise_sd: 0.02,
        }
    }
}

impl SimProfile {
    pub fn class(&self, label: BeatLabel) -> BeatClass {
        let mut prototype = self.prototype;
        prototype.st_offset = match label {
            BeatLabel::Normal => 0.0,
            BeatLabel::StShift => self.st_offset,
        };
        BeatClass {
            label,
            prototype,
            jitter: self.jitter,
        }
    }
}

/// `2 * n_per_class` beats, alternating Normal / StShift.
pub fn make_dataset(n_per_class: usize, profile: &SimProfile, seed: u64) -> Result<Vec<RawBeat>> {
    if n_per_class == 0 {
        return Err(domain("n_per_class must be >= 1"));
    }
    if profile.st_offset == 0.0 {
        return Err(domain("st_offset must be nonzero so the classes differ"));
    }
    let classes = [
        profile.class(BeatLabel::Normal),
        profile.class(BeatLabel::StShift),
    ];
    let mut r = rng::seeded(seed);
    let mut out = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        for class in &classes {
            let params = class.jittered(&mut r)?;
            let noise_seed = r.next_u64();
            let mut beat = synthesize_beat(&params, profile.noise_sd, noise_seed)?;
            beat.label = class.label;
            out.push(beat);
        }
    }
    Ok(out)
}
