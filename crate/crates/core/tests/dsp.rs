use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qcfd_core::beat::{make_dataset, SimProfile};
use qcfd_core::dsp::cwt::{log_scales, morlet_scalogram, pseudo_frequency};
use qcfd_core::dsp::fft::{dft, idft};
use qcfd_core::dsp::spectrum::{frame_spectra, frame_starts, hann, stft_logmag, Taper};
use qcfd_core::dsp::{to_trimodal, DspProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in x.iter().enumerate() {
                let ang = -2.0 * PI * (k * j) as f64 / n as f64;
                acc += v * Complex64::new(ang.cos(), ang.sin());
            }
            acc
        })
        .collect()
}

fn random_complex(n: usize, seed: u64) -> Vec<Complex64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect()
}

#[test]
fn dft_matches_naive_summation_on_length_17() {
    for seed in 0..5 {
        let x = random_complex(17, seed);
        let fast = dft(&x);
        let slow = naive_dft(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn dft_matches_naive_on_assorted_lengths() {
    for n in [1, 2, 3, 4, 5, 8, 12, 16, 31, 64, 100] {
        let x = random_complex(n, n as u64);
        for (a, b) in dft(&x).iter().zip(&naive_dft(&x)) {
            assert!((a - b).norm() < 1e-9, "n={n}");
        }
    }
}

#[test]
fn frame_parseval() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let x: Vec<f64> = (0..256).map(|_| r.random_range(-1.0..1.0)).collect();
    let window = 64;
    let w = hann(window);
    let spectra = frame_spectra(&x, window, Taper::Hann);
    for (spec, start) in spectra.iter().zip(frame_starts(x.len(), window)) {
        let frame: Vec<Complex64> = x[start..start + window]
            .iter()
            .zip(&w)
            .map(|(v, wv)| Complex64::new(v * wv, 0.0))
            .collect();
        let oracle = naive_dft(&frame);
        let lhs: f64 = oracle.iter().map(|v| v.norm_sqr()).sum();
        let rhs: f64 = frame.iter().map(|v| v.norm_sqr()).sum::<f64>() * window as f64;
        assert!((lhs - rhs).abs() <= 1e-8 * rhs);
        let ours: f64 = spec.iter().map(|v| v.norm_sqr()).sum();
        assert!((ours - lhs).abs() <= 1e-8 * lhs);
    }
}

#[test]
fn hann_half_overlap_sums_to_one() {
    let window = 64;
    let len = 512;
    let w = hann(window);
    let mut acc = vec![0.0; len];
    for start in frame_starts(len, window) {
        for (i, v) in w.iter().enumerate() {
            acc[start + i] += v;
        }
    }
    // interior samples are covered by two frames
    for v in &acc[window / 2..len - window / 2] {
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }
}

fn cwt_oracle(x: &[f64], fs: f64, h: usize, w: usize, band: (f64, f64)) -> Vec<f64> {
    let n = x.len();
    let scales = log_scales(h, fs, band.0, band.1);
    let mut grid = Vec::with_capacity(h * w);
    for &s in &scales {
        for j in 0..w {
            let tau = (j * n / w) as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for (m, &v) in x.iter().enumerate() {
                let u = (m as f64 - tau) / s;
                let psi = Complex64::new((6.0 * u).cos(), (6.0 * u).sin())
                    * (PI.powf(-0.25) * (-0.5 * u * u).exp());
                acc += psi.conj() * v / s.sqrt();
            }
            grid.push(acc.norm());
        }
    }
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    grid.iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

#[test]
fn impulse_peaks_at_its_column_in_every_row() {
    let p = DspProfile::desk();
    let n0 = 100;
    let mut x = vec![0.0; p.n];
    x[n0] = 1.0;
    let s = morlet_scalogram(&x, p.fs, p.h, p.w, p.cwt_band).unwrap();
    let oracle = cwt_oracle(&x, p.fs, p.h, p.w, p.cwt_band);
    for (a, b) in s.grid.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-9);
    }
    let nearest = (0..p.w)
        .min_by_key(|&j| (j * p.n / p.w).abs_diff(n0))
        .unwrap();
    for r in 0..p.h {
        let row = s.row(r);
        let arg = (0..p.w).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
        assert_eq!(arg, nearest, "row {r}");
    }
}

#[test]
fn eight_hz_tone_lands_on_nearest_row() {
    let p = DspProfile::desk();
    let x: Vec<f64> = (0..p.n)
        .map(|n| (2.0 * PI * 8.0 * n as f64 / p.fs).sin())
        .collect();
    let s = morlet_scalogram(&x, p.fs, p.h, p.w, p.cwt_band).unwrap();
    let oracle = cwt_oracle(&x, p.fs, p.h, p.w, p.cwt_band);
    for (a, b) in s.grid.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-9);
    }
    let energy: Vec<f64> = (0..p.h)
        .map(|r| s.row(r).iter().map(|v| v * v).sum())
        .collect();
    let arg = (0..p.h)
        .max_by(|&a, &b| energy[a].total_cmp(&energy[b]))
        .unwrap();
    let nearest = (0..p.h)
        .min_by(|&a, &b| {
            let da = (pseudo_frequency(s.scales[a], p.fs) - 8.0).abs();
            let db = (pseudo_frequency(s.scales[b], p.fs) - 8.0).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    assert_eq!(arg, nearest);
}

#[test]
fn simulated_beats_respect_output_ranges() {
    let p = DspProfile::desk();
    let beats = make_dataset(8, &SimProfile::default(), 3).unwrap();
    for b in &beats {
        let s = to_trimodal(b, &p).unwrap();
        assert_eq!((s.t.len(), s.f.len(), s.s.len()), (256, 32, 16 * 64));
        assert!(s.t.iter().all(|v| v.abs() <= 1.0));
        assert!(s.f.iter().all(|v| *v >= 0.0 && v.is_finite()));
        assert!(s.s.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(s.label, b.label);
        assert_eq!(s.fiducials, b.fiducials);
        assert_eq!(to_trimodal(b, &p).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dft_round_trip(v in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..80)) {
        let x: Vec<Complex64> = v.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let back = idft(&dft(&x));
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn scalogram_in_unit_interval(v in prop::collection::vec(-5.0f64..5.0, 64..=64)) {
        let s = morlet_scalogram(&v, 250.0, 4, 16, (1.0, 40.0)).unwrap();
        prop_assert!(s.grid.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn log_spectrum_nonnegative_and_deterministic(v in prop::collection::vec(-5.0f64..5.0, 128..=128)) {
        let a = stft_logmag(&v, 250.0, 64, 32).unwrap();
        let b = stft_logmag(&v, 250.0, 64, 32).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.bins.iter().all(|x| *x >= 0.0 && x.is_finite()));
    }
}
