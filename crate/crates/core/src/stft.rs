//! Gaussian-windowed STFT on a centered frequency axis and its least-squares
//! overlap-add inverse.
//!
//! Rows of an [`StftGrid`] are ordered by ascending frequency
//! `F(r) = (r - dc_row) * fs / N` for 0-based row `r`, so the DC row sits at
//! `dc_row = floor(N / 2)` and, for even `N`, row 0 holds `-fs/2`. Frame `m`
//! covers samples `m*R .. m*R + Lw`; partial frames at the tail are dropped.
//! Phases are measured relative to the start of each frame.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TfmdError};
use crate::signals::Signal;

/// Minimum summed squared window accepted by the inverse transform.
pub const NOLA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_len: usize,
    pub gaussian_alpha: f64,
    pub hop: usize,
    pub fft_size: usize,
    pub fs: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_len: 128,
            gaussian_alpha: 2.5,
            hop: 13,
            fft_size: 256,
            fs: 1000.0,
        }
    }
}

impl StftConfig {
    pub fn with_fs(mut self, fs: f64) -> Self {
        self.fs = fs;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.gaussian_alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let StftConfig {
            window_len,
            gaussian_alpha,
            hop,
            fft_size,
            fs,
        } = *self;
        if window_len < 2 {
            return Err(TfmdError::invalid(format!(
                "window length must be >= 2, got {window_len}"
            )));
        }
        if hop == 0 || hop > window_len {
            return Err(TfmdError::invalid(format!(
                "hop must satisfy 0 < hop <= window length, got hop {hop} for window {window_len}"
            )));
        }
        if fft_size < window_len {
            return Err(TfmdError::invalid(format!(
                "FFT size {fft_size} is smaller than window length {window_len}"
            )));
        }
        if !(gaussian_alpha.is_finite() && gaussian_alpha > 0.0) {
            return Err(TfmdError::invalid(format!(
                "Gaussian alpha must be positive, got {gaussian_alpha}"
            )));
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(TfmdError::invalid(format!(
                "sampling frequency must be positive, got {fs}"
            )));
        }
        Ok(())
    }

    /// Index of the zero-frequency row in the full grid (0-based).
    pub fn dc_row(&self) -> usize {
        self.fft_size / 2
    }

    /// Number of non-negative-frequency rows, `ceil(N / 2)`.
    pub fn n_pos(&self) -> usize {
        self.fft_size.div_ceil(2)
    }

    /// Frames produced for a signal of `signal_len` samples.
    pub fn n_frames(&self, signal_len: usize) -> usize {
        if signal_len < self.window_len {
            0
        } else {
            (signal_len - self.window_len) / self.hop + 1
        }
    }

    /// Frequency in Hz of full-grid row `row`.
    pub fn row_frequency(&self, row: usize) -> f64 {
        (row as f64 - self.dc_row() as f64) * self.fs / self.fft_size as f64
    }

    /// Time in seconds of the center of frame `frame`.
    pub fn frame_center(&self, frame: usize) -> f64 {
        ((frame * self.hop) as f64 + (self.window_len - 1) as f64 / 2.0) / self.fs
    }

    pub fn window(&self) -> Result<Vec<f64>> {
        gaussian_window(self.window_len, self.gaussian_alpha)
    }
}

/// Symmetric Gaussian window `exp(-0.5 * (alpha * d / h)^2)` where `d` is
/// the offset from the window center and `h = (len - 1) / 2`.
pub fn gaussian_window(len: usize, alpha: f64) -> Result<Vec<f64>> {
    if len < 2 {
        return Err(TfmdError::invalid(format!(
            "window length must be >= 2, got {len}"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(TfmdError::invalid(format!(
            "Gaussian alpha must be positive, got {alpha}"
        )));
    }
    let half = (len - 1) as f64 / 2.0;
    Ok((0..len)
        .map(|n| {
            let r = alpha * (n as f64 - half) / half;
            (-0.5 * r * r).exp()
        })
        .collect())
}

/// Full centered-frequency STFT coefficients, `N x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct StftGrid {
    pub coeffs: Array2<Complex64>,
    pub config: StftConfig,
    pub signal_len: usize,
}

impl StftGrid {
    pub fn n_frames(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn dc_row(&self) -> usize {
        self.config.dc_row()
    }

    /// Copy of the grid with every coefficient replaced by `f(row, frame, value)`.
    pub fn map_coeffs(&self, f: impl Fn(usize, usize, Complex64) -> Complex64) -> StftGrid {
        let mut coeffs = self.coeffs.clone();
        for ((r, m), c) in coeffs.indexed_iter_mut() {
            *c = f(r, m, *c);
        }
        StftGrid {
            coeffs,
            config: self.config,
            signal_len: self.signal_len,
        }
    }

    /// Largest `|S[mirror(r)] - conj(S[r])|` over rows that have a mirror.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.config.fft_size;
        let dc = self.dc_row();
        let mut worst = 0.0f64;
        for r in 0..n {
            let mirror = 2 * dc as isize - r as isize;
            if mirror < 0 || mirror >= n as isize {
                continue;
            }
            let mirror = mirror as usize;
            for m in 0..self.n_frames() {
                let d = (self.coeffs[[mirror, m]] - self.coeffs[[r, m]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// Non-negative-frequency rows of an [`StftGrid`]; row 0 is DC.
#[derive(Debug, Clone, PartialEq)]
pub struct PosFreqGrid {
    pub coeffs: Array2<Complex64>,
    pub config: StftConfig,
}

impl PosFreqGrid {
    pub fn magnitudes(&self) -> Array2<f64> {
        self.coeffs.mapv(|c| c.norm())
    }

    pub fn row_frequency(&self, row: usize) -> f64 {
        row as f64 * self.config.fs / self.config.fft_size as f64
    }
}

/// Forward STFT. The windowed frame is zero-padded to `fft_size` and the
/// standard DFT output is rotated into centered order.
pub fn stft(signal: &Signal, config: &StftConfig) -> Result<StftGrid> {
    config.validate()?;
    if (signal.fs() - config.fs).abs() > 1e-9 * config.fs {
        return Err(TfmdError::invalid(format!(
            "signal sampled at {} Hz but STFT configured for {} Hz",
            signal.fs(),
            config.fs
        )));
    }
    let len = signal.len();
    if len < config.window_len {
        return Err(TfmdError::invalid(format!(
            "signal length {len} is shorter than the window length {}",
            config.window_len
        )));
    }
    let n = config.fft_size;
    let frames = config.n_frames(len);
    let dc = config.dc_row();
    let window = config.window()?;
    let fft = FftPlanner::new().plan_fft_forward(n);
    let x = signal.samples();

    let mut coeffs = Array2::<Complex64>::zeros((n, frames));
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..frames {
        let start = m * config.hop;
        buf.fill(Complex64::new(0.0, 0.0));
        for (i, w) in window.iter().enumerate() {
            buf[i] = Complex64::new(x[start + i] * w, 0.0);
        }
        fft.process(&mut buf);
        // Frequency bin q lands in row (q + dc) mod n.
        for (q, v) in buf.iter().enumerate() {
            coeffs[[(q + dc) % n, m]] = *v;
        }
    }
    Ok(StftGrid {
        coeffs,
        config: *config,
        signal_len: len,
    })
}

pub fn extract_pos_freq(grid: &StftGrid) -> PosFreqGrid {
    let dc = grid.dc_row();
    let n_pos = grid.config.n_pos();
    let coeffs = grid
        .coeffs
        .slice(ndarray::s![dc..dc + n_pos, ..])
        .to_owned();
    PosFreqGrid {
        coeffs,
        config: grid.config,
    }
}

/// Least-squares overlap-add inverse, trimmed or zero-padded to `target_len`.
pub fn istft(grid: &StftGrid, target_len: usize) -> Result<Signal> {
    istft_with_residue(grid, target_len).map(|(s, _)| s)
}

/// Like [`istft`], also returning the largest imaginary part seen in the
/// reconstructed samples before the real part was taken.
pub fn istft_with_residue(grid: &StftGrid, target_len: usize) -> Result<(Signal, f64)> {
    let config = &grid.config;
    config.validate()?;
    let n = config.fft_size;
    if grid.coeffs.nrows() != n {
        return Err(TfmdError::invalid(format!(
            "grid has {} rows but FFT size is {n}",
            grid.coeffs.nrows()
        )));
    }
    if target_len == 0 {
        return Err(TfmdError::invalid("target length must be positive"));
    }
    let frames = grid.n_frames();
    let window = config.window()?;
    let lw = config.window_len;
    let dc = config.dc_row();
    let covered = if frames == 0 {
        0
    } else {
        (frames - 1) * config.hop + lw
    };

    let mut acc = vec![Complex64::new(0.0, 0.0); covered];
    let mut denom = vec![0.0f64; covered];
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let scale = 1.0 / n as f64;
    for m in 0..frames {
        for (q, slot) in buf.iter_mut().enumerate() {
            *slot = grid.coeffs[[(q + dc) % n, m]];
        }
        ifft.process(&mut buf);
        let start = m * config.hop;
        for (i, w) in window.iter().enumerate() {
            acc[start + i] += buf[i] * (scale * w);
            denom[start + i] += w * w;
        }
    }

    let mut out = vec![0.0; target_len];
    let mut max_imag = 0.0f64;
    for (i, (a, d)) in acc.iter().zip(&denom).enumerate() {
        if *d < NOLA_EPS {
            return Err(TfmdError::NumericalDegeneracy(format!(
                "overlap-add denominator {d:e} at sample {i} violates NOLA"
            )));
        }
        if i < target_len {
            let v = a / *d;
            out[i] = v.re;
            max_imag = max_imag.max(v.im.abs());
        }
    }
    Ok((Signal::new(out, config.fs)?, max_imag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freq: f64, len: usize, fs: f64) -> Signal {
        Signal::new(
            (0..len)
                .map(|n| (2.0 * PI * freq * n as f64 / fs).cos())
                .collect(),
            fs,
        )
        .unwrap()
    }

    /// Explicit windowed sum at frequency `F(row)` with frame-local time.
    fn oracle_coeff(x: &[f64], config: &StftConfig, row: usize, frame: usize) -> Complex64 {
        let w = gaussian_window(config.window_len, config.gaussian_alpha).unwrap();
        let f = config.row_frequency(row);
        let start = frame * config.hop;
        (0..config.window_len)
            .map(|i| {
                let arg = -2.0 * PI * f * i as f64 / config.fs;
                Complex64::from_polar(x[start + i] * w[i], arg)
            })
            .sum()
    }

    #[test]
    fn gaussian_endpoints_and_symmetry() {
        let w = gaussian_window(128, 2.5).unwrap();
        let edge = (-0.5f64 * 2.5 * 2.5).exp();
        assert!((w[0] - edge).abs() < 1e-15);
        assert!((edge - 0.043937).abs() < 1e-6);
        for n in 0..128 {
            assert_eq!(w[n], w[127 - n]);
        }
        let odd = gaussian_window(9, 3.0).unwrap();
        assert_eq!(odd[4], 1.0);
        for n in 0..9 {
            assert_eq!(odd[n], odd[8 - n]);
        }
    }

    #[test]
    fn gaussian_widens_with_smaller_alpha() {
        let narrow = gaussian_window(128, 2.5).unwrap();
        let wide = gaussian_window(128, 2.0).unwrap();
        for n in 0..128 {
            assert!(wide[n] > narrow[n], "n = {n}");
        }
    }

    #[test]
    fn gaussian_rejects_bad_params() {
        assert!(gaussian_window(1, 2.5).is_err());
        assert!(gaussian_window(16, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(StftConfig::default().validate().is_ok());
        let bad = [
            StftConfig {
                hop: 0,
                ..Default::default()
            },
            StftConfig {
                hop: 129,
                ..Default::default()
            },
            StftConfig {
                fft_size: 64,
                ..Default::default()
            },
            StftConfig {
                gaussian_alpha: -1.0,
                ..Default::default()
            },
            StftConfig {
                fs: 0.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn frame_count_and_shape() {
        let x = tone(100.0, 1000, 1000.0);
        let grid = stft(&x, &StftConfig::default()).unwrap();
        assert_eq!(grid.n_frames(), (1000 - 128) / 13 + 1);
        assert_eq!(grid.coeffs.nrows(), 256);
        assert!(matches!(
            stft(&tone(1.0, 100, 1000.0), &StftConfig::default()),
            Err(TfmdError::InvalidArgument(_))
        ));
    }

    #[test]
    fn dc_input_concentrates_in_dc_row() {
        let config = StftConfig::default();
        let x = Signal::new(vec![1.0; 600], 1000.0).unwrap();
        let grid = stft(&x, &config).unwrap();
        let wsum: f64 = config.window().unwrap().iter().sum();
        for m in 0..grid.n_frames() {
            assert!((grid.coeffs[[128, m]].norm() - wsum).abs() < 1e-10);
            let col_max = (0..256)
                .map(|r| grid.coeffs[[r, m]].norm())
                .fold(0.0, f64::max);
            assert_eq!(col_max, grid.coeffs[[128, m]].norm());
        }
    }

    #[test]
    fn matches_direct_windowed_sum() {
        let config = StftConfig::default();
        // 125 Hz is bin 32 for N = 256 at 1 kHz.
        let x = tone(125.0, 400, 1000.0);
        let grid = stft(&x, &config).unwrap();
        for m in [0, 5, grid.n_frames() - 1] {
            for row in (0..256).step_by(5).chain([96, 160]) {
                let expect = oracle_coeff(x.samples(), &config, row, m);
                assert!(
                    (grid.coeffs[[row, m]] - expect).norm() < 1e-9,
                    "row {row} frame {m}"
                );
            }
            let peak = (0..256)
                .max_by(|&a, &b| {
                    grid.coeffs[[a, m]]
                        .norm()
                        .total_cmp(&grid.coeffs[[b, m]].norm())
                })
                .unwrap();
            assert!(peak == 128 + 32 || peak == 128 - 32, "peak row {peak}");
            assert!((grid.coeffs[[160, m]].norm() - grid.coeffs[[96, m]].norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn odd_fft_size_layout() {
        let config = StftConfig {
            window_len: 4,
            hop: 2,
            fft_size: 5,
            gaussian_alpha: 2.0,
            fs: 5.0,
        };
        assert_eq!(config.dc_row(), 2);
        assert_eq!(config.n_pos(), 3);
        let x = Signal::new(vec![0.3, -1.0, 2.0, 0.5, 0.1, -0.7], 5.0).unwrap();
        let grid = stft(&x, &config).unwrap();
        for row in 0..5 {
            for m in 0..grid.n_frames() {
                let expect = oracle_coeff(x.samples(), &config, row, m);
                assert!((grid.coeffs[[row, m]] - expect).norm() < 1e-12);
            }
        }
        let pos = extract_pos_freq(&grid);
        assert_eq!(pos.coeffs.nrows(), 3);
        for k in 0..3 {
            assert_eq!(pos.coeffs.row(k), grid.coeffs.row(k + 2));
        }
    }

    #[test]
    fn pos_freq_rows() {
        let config = StftConfig::default();
        let grid = stft(&tone(50.0, 500, 1000.0), &config).unwrap();
        let pos = extract_pos_freq(&grid);
        assert_eq!(pos.coeffs.nrows(), 128);
        assert_eq!(pos.row_frequency(0), 0.0);
        assert_eq!(config.row_frequency(128), 0.0);
        assert_eq!(pos.row_frequency(127), 127.0 * 1000.0 / 256.0);
        assert_eq!(pos.coeffs.row(0), grid.coeffs.row(128));
        assert_eq!(pos.coeffs.row(127), grid.coeffs.row(255));
        assert_eq!(config.row_frequency(0), -500.0);
    }

    #[test]
    fn conjugate_symmetric_for_real_input() {
        let x = Signal::new(
            (0..700)
                .map(|n| ((n * 37 % 101) as f64 / 50.0) - 1.0)
                .collect(),
            1000.0,
        )
        .unwrap();
        let grid = stft(&x, &StftConfig::default()).unwrap();
        assert!(grid.conjugate_asymmetry() < 1e-10);
    }

    #[test]
    fn round_trip_identity() {
        let config = StftConfig::default();
        let x = Signal::new(
            (0..1000)
                .map(|n| (n as f64 * 0.37).sin() + 0.2 * (n as f64 * 0.051).cos())
                .collect(),
            1000.0,
        )
        .unwrap();
        let grid = stft(&x, &config).unwrap();
        let (y, imag) = istft_with_residue(&grid, 1000).unwrap();
        let covered = (grid.n_frames() - 1) * config.hop + config.window_len;
        for n in 0..covered {
            assert!((y.samples()[n] - x.samples()[n]).abs() < 1e-9, "n = {n}");
        }
        assert!(y.samples()[covered..].iter().all(|v| *v == 0.0));
        assert!(imag < 1e-9);
    }

    #[test]
    fn zero_grid_gives_zero_signal() {
        let config = StftConfig::default();
        let grid = StftGrid {
            coeffs: Array2::zeros((256, 20)),
            config,
            signal_len: 400,
        };
        let y = istft(&grid, 400).unwrap();
        assert!(y.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn target_len_trims_and_pads() {
        let config = StftConfig::default();
        let x = tone(40.0, 500, 1000.0);
        let grid = stft(&x, &config).unwrap();
        assert_eq!(istft(&grid, 300).unwrap().len(), 300);
        let long = istft(&grid, 800).unwrap();
        assert_eq!(long.len(), 800);
        assert!(long.samples()[500..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn nola_violation_is_reported() {
        // Window edges underflow to zero and frames tile without overlap.
        let config = StftConfig {
            window_len: 64,
            hop: 64,
            fft_size: 64,
            gaussian_alpha: 80.0,
            fs: 1000.0,
        };
        let x = tone(10.0, 256, 1000.0);
        let grid = stft(&x, &config).unwrap();
        assert!(matches!(
            istft(&grid, 256),
            Err(TfmdError::NumericalDegeneracy(_))
        ));
    }

    proptest::proptest! {
        #[test]
        fn stft_is_linear(
            xs in proptest::collection::vec(-1.0f64..1.0, 300),
            ys in proptest::collection::vec(-1.0f64..1.0, 300),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let config = StftConfig::default();
            let x = Signal::new(xs.clone(), 1000.0).unwrap();
            let y = Signal::new(ys.clone(), 1000.0).unwrap();
            let z = Signal::new(xs.iter().zip(&ys).map(|(p, q)| a * p + b * q).collect(), 1000.0).unwrap();
            let gx = stft(&x, &config).unwrap();
            let gy = stft(&y, &config).unwrap();
            let gz = stft(&z, &config).unwrap();
            let scale = gz.coeffs.iter().map(|c| c.norm()).fold(1e-300, f64::max);
            for ((cz, cx), cy) in gz.coeffs.iter().zip(&gx.coeffs).zip(&gy.coeffs) {
                proptest::prop_assert!((cz - (cx * a + cy * b)).norm() <= 1e-10 * scale);
            }
        }

        #[test]
        fn stft_scales_exactly_by_powers_of_two(
            xs in proptest::collection::vec(-1.0f64..1.0, 200),
            e in -8i32..8,
        ) {
            let c = 2f64.powi(e);
            let config = StftConfig::default();
            let x = Signal::new(xs, 1000.0).unwrap();
            let g1 = stft(&x, &config).unwrap();
            let g2 = stft(&x.scaled(c), &config).unwrap();
            for (p, q) in g1.coeffs.iter().zip(&g2.coeffs) {
                proptest::prop_assert_eq!(*p * c, *q);
            }
        }
    }
}
