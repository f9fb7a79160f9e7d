//! Zero-phase Butterworth band-pass: a second-order high-pass and a
//! second-order low-pass (order 4 overall), run forward then backward.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};

use num_traits::Float;

use crate::error::{domain, Result};

/// Direct-form II transposed biquad, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn butterworth(fs: f64, fc: f64, highpass: bool) -> Self {
        let k = (PI * fc / fs).tan();
        let q = FRAC_1_SQRT_2;
        let norm = 1.0 / (1.0 + k / q + k * k);
        let a = [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm];
        let b = if highpass {
            [norm, -2.0 * norm, norm]
        } else {
            let b0 = k * k * norm;
            [b0, 2.0 * b0, b0]
        };
        Self { b, a }
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that makes a constant input `x0` a steady state.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let y = self.dc_gain() * x0;
        [y - self.b[0] * x0, self.b[2] * x0 - self.a[1] * y]
    }

    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z[0];
            z[0] = self.b[1] * input - self.a[0] * y + z[1];
            z[1] = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn butterworth_bandpass(fs: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi && hi < fs / 2.0) {
            return Err(domain(format!(
                "band [{lo}, {hi}] Hz must satisfy 0 < lo < hi < fs/2 = {}",
                fs / 2.0
            )));
        }
        Ok(Self {
            sections: alloc::vec![
                Biquad::butterworth(fs, lo, true),
                Biquad::butterworth(fs, hi, false),
            ],
        })
    }

    /// One causal pass, each section started in the steady state of a
    /// constant input equal to the first sample it sees.
    fn pass(&self, x: &mut [f64]) {
        for s in &self.sections {
            let x0 = x.first().copied().unwrap_or(0.0);
            let z = s.steady_state(x0);
            s.run(x, z);
        }
    }

    /// Forward-backward filtering with odd-reflection padding at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = (3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        for i in (1..=pad).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=pad {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        self.pass(&mut ext);
        ext.reverse();
        self.pass(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

pub fn bandpass_filter(x: &[f64], fs: f64, lo: f64, hi: f64) -> Result<Vec<f64>> {
    Ok(SosFilter::butterworth_bandpass(fs, lo, hi)?.filtfilt(x))
}
