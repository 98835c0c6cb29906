//! The end-to-end decomposition pipeline and its prior-informed variant.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TfmdError};
use crate::segmentation::{
    adaptive_threshold, extend_symmetric, initial_mask, label_components, retained_labels, smooth,
    BinaryMask, FilterParams, LabeledComponents,
};
use crate::signals::Signal;
use crate::stft::{extract_pos_freq, istft_with_residue, stft, StftConfig, StftGrid};

/// Largest imaginary residue tolerated in a reconstructed mode.
pub const MAX_IMAG_RESIDUE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TfmdParams {
    pub stft: StftConfig,
    pub filter: FilterParams,
    /// Smoothing kernel extent along frequency.
    pub smooth_rows: usize,
    /// Smoothing kernel extent along time.
    pub smooth_cols: usize,
}

impl Default for TfmdParams {
    fn default() -> Self {
        TfmdParams {
            stft: StftConfig::default(),
            filter: FilterParams::default(),
            smooth_rows: 3,
            smooth_cols: 3,
        }
    }
}

impl TfmdParams {
    /// Benchmark defaults for `case_id`: case 5 uses a wider window (alpha 2.0).
    pub fn for_case(case_id: u8) -> Self {
        let mut p = TfmdParams::default();
        if case_id == 5 {
            p.stft.gaussian_alpha = 2.0;
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.filter.validate()?;
        if self.smooth_rows.is_multiple_of(2) || self.smooth_cols.is_multiple_of(2) {
            return Err(TfmdError::invalid(format!(
                "smoothing kernel must have odd dimensions, got {}x{}",
                self.smooth_rows, self.smooth_cols
            )));
        }
        Ok(())
    }
}

/// Intermediate quantities of one segmentation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub tau: f64,
    pub n_components: usize,
    /// Size of every labeled component, by label.
    pub pixel_counts: Vec<usize>,
    pub size_threshold: usize,
    /// Labels kept by the size filter, in mode order.
    pub retained_labels: Vec<u32>,
    pub grid_cells: usize,
    pub max_imag_residue: f64,
}

#[derive(Debug, Clone)]
pub struct DecompositionResult {
    pub modes: Vec<Signal>,
    /// Full-grid masks, one per mode.
    pub masks: Vec<BinaryMask>,
    pub masked_grids: Vec<StftGrid>,
    pub total: Signal,
    pub diagnostics: Diagnostics,
    /// Thresholded mask over the non-negative-frequency grid.
    pub initial_mask: BinaryMask,
    pub labels: LabeledComponents,
    /// The STFT actually used for extraction, with `fs` taken from the input.
    pub config: StftConfig,
}

impl DecompositionResult {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }
}

/// Sum of per-segment, max-normalized magnitude spectrograms.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpectrogram {
    pub values: Array2<f64>,
    pub segment_count: usize,
    /// Segments whose spectrogram was identically zero and so contributed nothing.
    pub skipped_segments: usize,
}

impl PriorSpectrogram {
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(TfmdError::invalid("prior spectrogram is empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(TfmdError::invalid(
                "prior values must be finite and non-negative",
            ));
        }
        Ok(PriorSpectrogram {
            values,
            segment_count: 1,
            skipped_segments: 0,
        })
    }
}

/// Multiplies every coefficient by its mask bit.
pub fn apply_mask(grid: &StftGrid, mask: &BinaryMask) -> Result<StftGrid> {
    if mask.dim() != grid.coeffs.dim() {
        return Err(TfmdError::invalid(format!(
            "mask shape {:?} does not match grid shape {:?}",
            mask.dim(),
            grid.coeffs.dim()
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    Ok(grid.map_coeffs(|r, m, c| if mask.bits[[r, m]] { c } else { zero }))
}

/// Element-wise sum of `modes`, each of which must have `len` samples at `fs`.
pub fn reconstruct_total(modes: &[Signal], len: usize, fs: f64) -> Result<Signal> {
    let mut total = vec![0.0; len];
    for (i, mode) in modes.iter().enumerate() {
        if mode.len() != len {
            return Err(TfmdError::invalid(format!(
                "mode {i} has {} samples, expected {len}",
                mode.len()
            )));
        }
        if mode.fs() != fs {
            return Err(TfmdError::invalid(format!(
                "mode {i} sampled at {} Hz, expected {fs}",
                mode.fs()
            )));
        }
        for (acc, v) in total.iter_mut().zip(mode.samples()) {
            *acc += v;
        }
    }
    Signal::new(total, fs)
}

/// Decomposes `signal` into modes found on its own spectrogram.
pub fn decompose(signal: &Signal, params: &TfmdParams) -> Result<DecompositionResult> {
    let config = params.stft.with_fs(signal.fs());
    let params = TfmdParams {
        stft: config,
        ..*params
    };
    params.validate()?;
    let grid = stft(signal, &config)?;
    let magnitudes = extract_pos_freq(&grid).magnitudes();
    segment_and_reconstruct(&grid, &magnitudes, &params)
}

/// Decomposes `signal` using masks derived from `prior` instead of the
/// signal's own spectrogram. Extraction still uses the signal's STFT.
pub fn decompose_with_prior(
    signal: &Signal,
    prior: &PriorSpectrogram,
    params: &TfmdParams,
) -> Result<DecompositionResult> {
    let config = params.stft.with_fs(signal.fs());
    let params = TfmdParams {
        stft: config,
        ..*params
    };
    params.validate()?;
    let grid = stft(signal, &config)?;
    let expected = (config.n_pos(), grid.n_frames());
    if prior.values.dim() != expected {
        return Err(TfmdError::invalid(format!(
            "prior shape {:?} does not match target grid {:?}",
            prior.values.dim(),
            expected
        )));
    }
    segment_and_reconstruct(&grid, &prior.values, &params)
}

/// Builds the prior from equally long segments sampled at the same rate.
pub fn build_prior(segments: &[Signal], config: &StftConfig) -> Result<PriorSpectrogram> {
    let first = segments
        .first()
        .ok_or_else(|| TfmdError::invalid("no segments given"))?;
    let (len, fs) = (first.len(), first.fs());
    if let Some(i) = segments.iter().position(|s| s.len() != len || s.fs() != fs) {
        return Err(TfmdError::invalid(format!(
            "segment {i} differs in length or sampling rate from segment 0"
        )));
    }
    let config = config.with_fs(fs);
    let shape = (config.n_pos(), config.n_frames(len));
    let mut values = Array2::<f64>::zeros(shape);
    let mut skipped = 0;
    for seg in segments {
        let mags = extract_pos_freq(&stft(seg, &config)?).magnitudes();
        let peak = mags.iter().copied().fold(0.0, f64::max);
        if peak == 0.0 {
            skipped += 1;
            continue;
        }
        values.zip_mut_with(&mags, |acc, m| *acc += m / peak);
    }
    Ok(PriorSpectrogram {
        values,
        segment_count: segments.len(),
        skipped_segments: skipped,
    })
}

fn segment_and_reconstruct(
    grid: &StftGrid,
    magnitudes: &Array2<f64>,
    params: &TfmdParams,
) -> Result<DecompositionResult> {
    let config = grid.config;
    let smoothed = smooth(magnitudes, params.smooth_rows, params.smooth_cols)?;
    let tau = adaptive_threshold(&smoothed, params.filter.c_thresh)?;
    let initial = initial_mask(&smoothed, tau);
    let labels = label_components(&initial);
    let grid_cells = magnitudes.len();
    let kept = retained_labels(&labels, &params.filter, grid_cells);

    let masks = kept
        .iter()
        .map(|&l| extend_symmetric(&labels.component_mask(l), config.fft_size))
        .collect::<Result<Vec<_>>>()?;
    let masked_grids = masks
        .iter()
        .map(|m| apply_mask(grid, m))
        .collect::<Result<Vec<_>>>()?;

    let len = grid.signal_len;
    let reconstructed = masked_grids
        .par_iter()
        .map(|g| istft_with_residue(g, len))
        .collect::<Result<Vec<_>>>()?;
    let max_imag_residue = reconstructed.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    if max_imag_residue >= MAX_IMAG_RESIDUE {
        return Err(TfmdError::NumericalDegeneracy(format!(
            "reconstructed mode has imaginary residue {max_imag_residue:e}"
        )));
    }
    let modes: Vec<Signal> = reconstructed.into_iter().map(|(s, _)| s).collect();
    let total = reconstruct_total(&modes, len, config.fs)?;

    let diagnostics = Diagnostics {
        tau,
        n_components: labels.n_components,
        pixel_counts: labels.pixel_counts.clone(),
        size_threshold: params.filter.size_threshold(grid_cells),
        retained_labels: kept,
        grid_cells,
        max_imag_residue,
    };
    Ok(DecompositionResult {
        modes,
        masks,
        masked_grids,
        total,
        diagnostics,
        initial_mask: initial,
        labels,
        config,
    })
}
