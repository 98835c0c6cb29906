//! Sampled signals, the six synthetic benchmark cases and white-noise injection.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TfmdError};

/// A uniformly sampled, real-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    fs: f64,
}

impl Signal {
    /// Wraps `samples` taken at `fs` Hz. Rejects empty or non-finite data.
    pub fn new(samples: Vec<f64>, fs: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(TfmdError::invalid(
                "signal must contain at least one sample",
            ));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(TfmdError::invalid(format!(
                "sampling frequency must be positive, got {fs}"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(TfmdError::invalid(format!("sample {i} is not finite")));
        }
        Ok(Signal { samples, fs })
    }

    pub fn zeros(len: usize, fs: f64) -> Result<Self> {
        Signal::new(vec![0.0; len], fs)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; a `Signal` holds at least one sample.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Signal {
        Signal {
            samples: self.samples.iter().map(|v| v * c).collect(),
            fs: self.fs,
        }
    }

    /// Sample instants `n / fs`.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let fs = self.fs;
        (0..self.samples.len()).map(move |n| n as f64 / fs)
    }
}

/// One synthetic benchmark signal together with the modes it was built from.
#[derive(Debug, Clone)]
pub struct GroundTruthCase {
    pub case_id: u8,
    pub composite: Signal,
    pub constituents: Vec<Signal>,
    pub duration_s: f64,
    pub fs: f64,
}

impl GroundTruthCase {
    pub fn name(&self) -> &'static str {
        case_name(self.case_id).unwrap_or("unknown")
    }

    pub fn n_constituents(&self) -> usize {
        self.constituents.len()
    }
}

pub const CASE_IDS: [u8; 6] = [1, 2, 3, 4, 5, 6];

pub fn case_name(case_id: u8) -> Option<&'static str> {
    Some(match case_id {
        1 => "Frequency-Separated Chirps",
        2 => "Sinusoidal FM Signals",
        3 => "Four Components Mix",
        4 => "Low-Frequency Chirp and AM Tone",
        5 => "Generalized Nonlinear Signal",
        6 => "Two Simple Tones",
        _ => return None,
    })
}

/// Closed interval indicator.
fn indicator(t: f64, a: f64, b: f64) -> f64 {
    if t >= a && t <= b {
        1.0
    } else {
        0.0
    }
}

/// Cosine-tapered (Tukey) window with taper fraction `alpha`, evaluated at
/// absolute time `t` and supported on `[start, end]`.
pub fn tukey(t: f64, start: f64, end: f64, alpha: f64) -> f64 {
    if t < start || t > end {
        return 0.0;
    }
    let u = (t - start) / (end - start);
    if alpha <= 0.0 {
        return 1.0;
    }
    let half = alpha / 2.0;
    if u < half {
        0.5 * (1.0 + (2.0 * PI / alpha * (u - half)).cos())
    } else if u > 1.0 - half {
        0.5 * (1.0 + (2.0 * PI / alpha * (u - 1.0 + half)).cos())
    } else {
        1.0
    }
}

fn sample_fn(len: usize, fs: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..len).map(|n| f(n as f64 / fs)).collect()
}

/// Builds benchmark case `case_id` (1..=6) sampled at `fs`.
///
/// Cases 1-4 and 6 last one second, case 5 lasts three seconds.
pub fn generate_case(case_id: u8, fs: f64) -> Result<GroundTruthCase> {
    if case_name(case_id).is_none() {
        return Err(TfmdError::invalid(format!(
            "unknown case id {case_id}, expected 1..=6"
        )));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(TfmdError::invalid(format!(
            "sampling frequency must be positive, got {fs}"
        )));
    }
    let duration_s = if case_id == 5 { 3.0 } else { 1.0 };
    let len = (duration_s * fs).round() as usize;
    if len == 0 {
        return Err(TfmdError::invalid(
            "sampling frequency too low for a non-empty case",
        ));
    }
    let tau = 2.0 * PI;

    let parts: Vec<Vec<f64>> = match case_id {
        1 => vec![
            sample_fn(len, fs, |t| (tau * (20.0 * t + 25.0 * t * t)).cos()),
            sample_fn(len, fs, |t| {
                0.9 * (tau * (130.0 * t + 25.0 * t.powi(3))).cos()
            }),
        ],
        2 => vec![
            sample_fn(len, fs, |t| {
                1.2 * (tau * 100.0 * t + 15.0 * (tau * 2.0 * t).sin()).cos()
            }),
            sample_fn(len, fs, |t| {
                (tau * 250.0 * t + 5.0 * (tau * 5.0 * t).sin()).cos()
            }),
        ],
        3 => vec![
            sample_fn(len, fs, |t| (tau * (10.0 * t + 15.0 * t * t)).cos()),
            sample_fn(len, fs, |t| 0.9 * (tau * 100.0 * t).sin()),
            sample_fn(len, fs, |t| {
                let s = t - 0.1;
                1.1 * indicator(t, 0.0, 0.7) * (tau * 350.0 * s + 5.0 * (tau * 6.0 * s).sin()).cos()
            }),
            sample_fn(len, fs, |t| {
                1.2 * indicator(t, 0.6, 0.9) * tukey(t, 0.6, 0.9, 0.25) * (tau * 200.0 * t).sin()
            }),
        ],
        4 => vec![
            sample_fn(len, fs, |t| (tau * (20.0 * t + 30.0 * t * t)).cos()),
            sample_fn(len, fs, |t| {
                1.1 * (0.8 + 0.4 * (tau * 2.0 * t).cos()) * (tau * 200.0 * t).sin()
            }),
        ],
        5 => {
            let mut parts = vec![
                sample_fn(len, fs, |t| {
                    (tau * (170.0 * t + 20.0 * t * t + 3.0 * (3.0 * PI * t).cos())).cos()
                }),
                sample_fn(len, fs, |t| {
                    indicator(t, 0.0, 1.5) * (tau * (75.0 * t + 20.0 * t * t)).cos()
                }),
                sample_fn(len, fs, |t| {
                    indicator(t, 1.0, 3.0)
                        * (tau * (10.0 * t + 20.0 * t * t + 3.0 * (3.0 * PI * t).cos())).cos()
                }),
            ];
            for cds_id in 4..=7 {
                parts.push(synthesize_cds_component(cds_id, fs, len)?.into_samples());
            }
            parts
        }
        6 => vec![
            sample_fn(len, fs, |t| (tau * 100.0 * t).sin()),
            sample_fn(len, fs, |t| 0.8 * (tau * 200.0 * t).sin()),
        ],
        _ => unreachable!(),
    };

    let mut composite = vec![0.0; len];
    for part in &parts {
        for (acc, v) in composite.iter_mut().zip(part) {
            *acc += v;
        }
    }
    let constituents = parts
        .into_iter()
        .map(|p| Signal::new(p, fs))
        .collect::<Result<Vec<_>>>()?;

    Ok(GroundTruthCase {
        case_id,
        composite: Signal::new(composite, fs)?,
        constituents,
        duration_s,
        fs,
    })
}

/// Frequency band `[lo, hi)` on which CDS component `cds_id` is non-zero.
pub fn cds_band(cds_id: u8, fs: f64) -> Result<(f64, f64)> {
    let lo = match cds_id {
        4 => fs / 4.0,
        5 => 3.0 * fs / 10.0,
        6 => 7.0 * fs / 20.0,
        7 => 4.0 * fs / 10.0,
        _ => return Err(TfmdError::invalid(format!("CDS id {cds_id} outside 4..=7"))),
    };
    Ok((lo, fs / 2.0))
}

/// Closed-form complex spectral definition of CDS component `cds_id` at `f`
/// (inside its band; the band restriction is applied by the caller).
pub fn cds_value(cds_id: u8, f: f64) -> Result<Complex64> {
    let phase = match cds_id {
        4 => 0.4 * f + 2.0 * (2.0 * PI * f / 100.0).cos(),
        5 => 0.8 * f + 0.0005 * f * f,
        6 => 1.8 * f + 2.0 * (2.0 * PI * f / 100.0).cos(),
        7 => 2.2 * f + 0.0005 * f * f,
        _ => return Err(TfmdError::invalid(format!("CDS id {cds_id} outside 4..=7"))),
    };
    Ok(Complex64::from_polar(30.0, -2.0 * PI * phase))
}

/// Length-`len` DFT-ordered spectrum of CDS component `cds_id` on the grid
/// `f_m = m fs / len`, conjugate-mirrored onto negative frequencies.
pub fn cds_spectrum(cds_id: u8, fs: f64, len: usize) -> Result<Vec<Complex64>> {
    let (lo, hi) = cds_band(cds_id, fs)?;
    if len < 2 {
        return Err(TfmdError::invalid(
            "CDS synthesis needs at least two samples",
        ));
    }
    let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
    for m in 1..len.div_ceil(2) {
        let f = m as f64 * fs / len as f64;
        if f >= lo && f < hi {
            let v = cds_value(cds_id, f)?;
            spectrum[m] = v;
            spectrum[len - m] = v.conj();
        }
    }
    Ok(spectrum)
}

/// Real time-domain signal whose DFT equals [`cds_spectrum`].
pub fn synthesize_cds_component(cds_id: u8, fs: f64, len: usize) -> Result<Signal> {
    let mut buf = cds_spectrum(cds_id, fs, len)?;
    let ifft = FftPlanner::new().plan_fft_inverse(len);
    ifft.process(&mut buf);
    let scale = 1.0 / len as f64;
    let max_imag = buf.iter().map(|c| (c.im * scale).abs()).fold(0.0, f64::max);
    if max_imag >= 1e-9 {
        return Err(TfmdError::NumericalDegeneracy(format!(
            "CDS synthesis left imaginary residue {max_imag:e}"
        )));
    }
    Signal::new(buf.iter().map(|c| c.re * scale).collect(), fs)
}

/// Target input SNR and RNG seed for additive white Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub target_snr_db: f64,
    pub seed: u64,
}

/// Adds white Gaussian noise scaled so the realized SNR equals the target.
pub fn add_awgn(signal: &Signal, spec: NoiseSpec) -> Result<Signal> {
    if !spec.target_snr_db.is_finite() {
        return Err(TfmdError::invalid("target SNR must be finite"));
    }
    let signal_energy = signal.energy();
    if signal_energy == 0.0 {
        return Err(TfmdError::invalid(
            "cannot set an SNR for a zero-energy signal",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise: Vec<f64> = (0..signal.len())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let noise_energy: f64 = noise.iter().map(|v| v * v).sum();
    if noise_energy == 0.0 {
        return Err(TfmdError::NumericalDegeneracy(
            "drawn noise vector is all zeros".into(),
        ));
    }
    let target_ratio = 10f64.powf(spec.target_snr_db / 10.0);
    let scale = (signal_energy / (noise_energy * target_ratio)).sqrt();
    let samples = signal
        .samples()
        .iter()
        .zip(&noise)
        .map(|(x, n)| x + scale * n)
        .collect();
    Signal::new(samples, signal.fs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let arg = -2.0 * PI * ((k * i) % n) as f64 / n as f64;
                        Complex64::from_polar(v, arg)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn signal_rejects_bad_input() {
        assert!(Signal::new(vec![], 1.0).is_err());
        assert!(Signal::new(vec![1.0], 0.0).is_err());
        assert!(Signal::new(vec![1.0, f64::NAN], 1.0).is_err());
    }

    #[test]
    fn constituent_counts() {
        let expected = [2, 2, 4, 2, 7, 2];
        for (id, n) in CASE_IDS.iter().zip(expected) {
            let case = generate_case(*id, 1000.0).unwrap();
            assert_eq!(case.n_constituents(), n, "case {id}");
            let len = if *id == 5 { 3000 } else { 1000 };
            assert_eq!(case.composite.len(), len);
        }
    }

    #[test]
    fn composite_is_sum_of_constituents() {
        for id in CASE_IDS {
            let case = generate_case(id, 1000.0).unwrap();
            let peak = case
                .composite
                .samples()
                .iter()
                .fold(0.0f64, |a, v| a.max(v.abs()));
            for n in 0..case.composite.len() {
                let sum: f64 = case.constituents.iter().map(|c| c.samples()[n]).sum();
                assert!((case.composite.samples()[n] - sum).abs() <= 1e-12 * peak);
            }
        }
    }

    #[test]
    fn case_six_values() {
        let case = generate_case(6, 1000.0).unwrap();
        assert_eq!(case.composite.samples()[0], 0.0);
        let x = &case.constituents;
        let s = (2.0 * PI * 100.0 * 3.0 / 1000.0).sin();
        assert!((x[0].samples()[3] - s).abs() < 1e-15);
        let s = 0.8 * (2.0 * PI * 200.0 * 3.0 / 1000.0).sin();
        assert!((x[1].samples()[3] - s).abs() < 1e-15);
    }

    #[test]
    fn case_one_starts_at_amplitude() {
        let case = generate_case(1, 1000.0).unwrap();
        assert_eq!(case.constituents[0].samples()[0], 1.0);
        assert_eq!(case.constituents[1].samples()[0], 0.9);
    }

    #[test]
    fn case_three_burst_is_time_limited() {
        let case = generate_case(3, 1000.0).unwrap();
        let burst = case.constituents[3].samples();
        for (n, v) in burst.iter().enumerate() {
            let t = n as f64 / 1000.0;
            if !(0.6..=0.9).contains(&t) {
                assert_eq!(*v, 0.0, "n = {n}");
            }
        }
        assert!(burst[750].abs() > 0.0 || burst[751].abs() > 0.0);
        let fm = case.constituents[2].samples();
        assert!(fm[701..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unknown_case_rejected() {
        assert!(matches!(
            generate_case(0, 1000.0),
            Err(TfmdError::InvalidArgument(_))
        ));
        assert!(matches!(
            generate_case(9, 1000.0),
            Err(TfmdError::InvalidArgument(_))
        ));
    }

    #[test]
    fn tukey_shape() {
        assert_eq!(tukey(0.6, 0.6, 0.9, 0.25), 0.0);
        assert!(tukey(0.9, 0.6, 0.9, 0.25).abs() < 1e-15);
        assert_eq!(tukey(0.75, 0.6, 0.9, 0.25), 1.0);
        // Flat region spans [0.6375, 0.8625].
        assert_eq!(tukey(0.64, 0.6, 0.9, 0.25), 1.0);
        assert_eq!(tukey(0.86, 0.6, 0.9, 0.25), 1.0);
        assert!(tukey(0.62, 0.6, 0.9, 0.25) < 1.0);
        assert_eq!(tukey(0.5, 0.6, 0.9, 0.25), 0.0);
    }

    #[test]
    fn cds4_spectrum_magnitude() {
        let sig = synthesize_cds_component(4, 1000.0, 3000).unwrap();
        let spec = dft(sig.samples());
        for (m, c) in spec.iter().enumerate().take(1500) {
            let f = m as f64 / 3.0;
            if f >= 250.0 {
                assert!((c.norm() - 30.0).abs() < 1e-9, "m = {m}: {}", c.norm());
            } else {
                assert!(c.norm() < 1e-9 * 30.0, "m = {m}: {}", c.norm());
            }
        }
        // Nyquist is excluded by the half-open band.
        assert!(spec[1500].norm() < 1e-9 * 30.0);
    }

    #[test]
    fn cds_inverse_is_real() {
        // Direct inverse DFT of the constructed spectrum as an independent route.
        let spec = cds_spectrum(5, 1000.0, 3000).unwrap();
        let n = spec.len();
        let stride = 7;
        for t in (0..n).step_by(stride) {
            let v: Complex64 = spec
                .iter()
                .enumerate()
                .map(|(m, c)| {
                    c * Complex64::from_polar(1.0, 2.0 * PI * ((m * t) % n) as f64 / n as f64)
                })
                .sum::<Complex64>()
                / n as f64;
            assert!(v.im.abs() < 1e-9, "t = {t}: {}", v.im);
        }
        let sig = synthesize_cds_component(5, 1000.0, 3000).unwrap();
        assert_eq!(sig.len(), 3000);
    }

    #[test]
    fn cds7_parseval() {
        let sig = synthesize_cds_component(7, 1000.0, 3000).unwrap();
        let spec = dft(sig.samples());
        let time_energy = sig.energy();
        let freq_energy: f64 = spec.iter().map(|c| c.norm_sqr()).sum::<f64>() / 3000.0;
        assert!((time_energy - freq_energy).abs() <= 1e-9 * time_energy);
        let constructed: f64 = cds_spectrum(7, 1000.0, 3000)
            .unwrap()
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            / 3000.0;
        assert!((time_energy - constructed).abs() <= 1e-9 * time_energy);
    }

    #[test]
    fn cds_components_are_band_limited() {
        for id in 4..=7 {
            let sig = synthesize_cds_component(id, 1000.0, 3000).unwrap();
            let (lo, _) = cds_band(id, 1000.0).unwrap();
            let spec = dft(sig.samples());
            for (m, c) in spec.iter().enumerate().take(1501) {
                let f = m as f64 / 3.0;
                if f < lo || m == 1500 {
                    assert!(c.norm() < 1e-9 * 30.0, "cds {id} m {m}");
                }
            }
        }
    }

    #[test]
    fn cds_id_validated() {
        assert!(synthesize_cds_component(3, 1000.0, 3000).is_err());
        assert!(synthesize_cds_component(8, 1000.0, 3000).is_err());
    }

    #[test]
    fn awgn_hits_target_snr() {
        let case = generate_case(4, 1000.0).unwrap();
        let x = &case.composite;
        for (snr, ratio) in [(20.0, 100.0), (0.0, 1.0)] {
            let noisy = add_awgn(
                x,
                NoiseSpec {
                    target_snr_db: snr,
                    seed: 3,
                },
            )
            .unwrap();
            let noise_energy: f64 = noisy
                .samples()
                .iter()
                .zip(x.samples())
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            let realized = x.energy() / noise_energy;
            assert!((realized - ratio).abs() <= 1e-9 * ratio, "{realized}");
        }
    }

    #[test]
    fn awgn_is_deterministic() {
        let x = generate_case(6, 1000.0).unwrap().composite;
        let spec = NoiseSpec {
            target_snr_db: 10.0,
            seed: 42,
        };
        let a = add_awgn(&x, spec).unwrap();
        let b = add_awgn(&x, spec).unwrap();
        assert_eq!(a, b);
        let c = add_awgn(&x, NoiseSpec { seed: 43, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn awgn_rejects_degenerate_inputs() {
        let zero = Signal::zeros(100, 1000.0).unwrap();
        assert!(add_awgn(
            &zero,
            NoiseSpec {
                target_snr_db: 10.0,
                seed: 1
            }
        )
        .is_err());
        let x = generate_case(6, 1000.0).unwrap().composite;
        assert!(add_awgn(
            &x,
            NoiseSpec {
                target_snr_db: f64::INFINITY,
                seed: 1
            }
        )
        .is_err());
    }

    proptest::proptest! {
        #[test]
        fn awgn_snr_exact_for_any_seed(seed in proptest::num::u64::ANY, snr in -10.0f64..50.0) {
            let x = generate_case(1, 1000.0).unwrap().composite;
            let noisy = add_awgn(&x, NoiseSpec { target_snr_db: snr, seed }).unwrap();
            let noise_energy: f64 =
                noisy.samples().iter().zip(x.samples()).map(|(a, b)| (a - b).powi(2)).sum();
            let realized = 10.0 * (x.energy() / noise_energy).log10();
            let target = 10f64.powf(snr / 10.0);
            let ratio = x.energy() / noise_energy;
            proptest::prop_assert!((ratio - target).abs() <= 1e-9 * target, "{} vs {}", realized, snr);
        }
    }
}
