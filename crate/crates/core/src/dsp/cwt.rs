//! Morlet scalogram by direct convolution.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

use crate::error::{domain, Result};

/// Morlet center frequency (radians per unit of the wavelet argument).
pub const OMEGA0: f64 = 6.0;

/// Min-max normalised `|CWT|`, `h` rows (scales) by `w` columns (time).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scalogram {
    /// Row-major `h * w`.
    pub grid: Vec<f64>,
    pub h: usize,
    pub w: usize,
    /// Scale of each row in samples, ascending.
    pub scales: Vec<f64>,
}

impl Scalogram {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.grid[r * self.w..(r + 1) * self.w]
    }
}

/// `psi(u) = pi^(-1/4) exp(i omega0 u) exp(-u^2 / 2)`.
pub fn morlet(u: f64) -> Complex64 {
    let env = PI.powf(-0.25) * (-0.5 * u * u).exp();
    Complex64::new(env * (OMEGA0 * u).cos(), env * (OMEGA0 * u).sin())
}

/// Scale (in samples) whose pseudo-frequency is `f` Hz.
pub fn scale_for_frequency(f: f64, fs: f64) -> f64 {
    OMEGA0 * fs / (2.0 * PI * f)
}

pub fn pseudo_frequency(scale: f64, fs: f64) -> f64 {
    OMEGA0 * fs / (2.0 * PI * scale)
}

/// `h` scales, log-spaced so pseudo-frequencies run from `f_hi` down to `f_lo`.
pub fn log_scales(h: usize, fs: f64, f_lo: f64, f_hi: f64) -> Vec<f64> {
    let s_min = scale_for_frequency(f_hi, fs);
    let s_max = scale_for_frequency(f_lo, fs);
    let ratio = (s_max / s_min).ln();
    (0..h)
        .map(|i| s_min * (ratio * i as f64 / (h - 1) as f64).exp())
        .collect()
}

/// Time index sampled by column `j`.
pub fn column_time(j: usize, n: usize, w: usize) -> usize {
    j * n / w
}

/// `|sum_n x[n] conj(psi((n - tau)/s)) / sqrt(s)|` at `h` log-spaced scales
/// covering `[f_lo, f_hi]` Hz and `w` uniformly spaced times, then min-max
/// normalised (an all-equal grid maps to zeros).
pub fn morlet_scalogram(
    x: &[f64],
    fs: f64,
    h: usize,
    w: usize,
    band: (f64, f64),
) -> Result<Scalogram> {
    let n = x.len();
    if h < 2 || w < 2 || w > n {
        return Err(domain(format!(
            "scalogram needs h, w >= 2 and w <= N (h={h}, w={w}, N={n})"
        )));
    }
    if !(band.0 > 0.0 && band.0 < band.1) {
        return Err(domain("scalogram band must satisfy 0 < lo < hi"));
    }
    let scales = log_scales(h, fs, band.0, band.1);
    let mut grid = vec![0.0; h * w];
    // kernel[lag + n - 1] = conj(psi(lag / s)) / sqrt(s), lag in (-n, n)
    let mut kernel = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for (r, &s) in scales.iter().enumerate() {
        let norm = 1.0 / s.sqrt();
        for (i, k) in kernel.iter_mut().enumerate() {
            let lag = i as f64 - (n as f64 - 1.0);
            *k = morlet(lag / s).conj() * norm;
        }
        for j in 0..w {
            let tau = column_time(j, n, w);
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, &v) in x.iter().enumerate() {
                acc += kernel[m + n - 1 - tau] * v;
            }
            grid[r * w + j] = acc.norm();
        }
    }
    min_max_normalize(&mut grid);
    Ok(Scalogram { grid, h, w, scales })
}

pub(crate) fn min_max_normalize(v: &mut [f64]) {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    let span = hi - lo;
    if !(span > 0.0) {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    for x in v.iter_mut() {
        *x = ((*x - lo) / span).clamp(0.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_signal_zero_grid() {
        let s = morlet_scalogram(&[0.0; 256], 250.0, 16, 64, (1.0, 40.0)).unwrap();
        assert!(s.grid.iter().all(|&v| v == 0.0));
        assert_eq!(s.grid.len(), 16 * 64);
    }

    #[test]
    fn shape_errors() {
        assert!(morlet_scalogram(&[0.0; 32], 250.0, 1, 8, (1.0, 40.0)).is_err());
        assert!(morlet_scalogram(&[0.0; 32], 250.0, 4, 64, (1.0, 40.0)).is_err());
    }

    #[test]
    fn scales_cover_band() {
        let s = log_scales(16, 250.0, 1.0, 40.0);
        assert!((pseudo_frequency(s[0], 250.0) - 40.0).abs() < 1e-9);
        assert!((pseudo_frequency(s[15], 250.0) - 1.0).abs() < 1e-9);
        assert!(s.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn entries_in_unit_interval() {
        let x: Vec<f64> = (0..256)
            .map(|n| ((n * 7919) % 101) as f64 / 50.0 - 1.0)
            .collect();
        let s = morlet_scalogram(&x, 250.0, 16, 64, (1.0, 40.0)).unwrap();
        assert!(s.grid.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
