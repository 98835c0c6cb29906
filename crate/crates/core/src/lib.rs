//! Time-frequency mode decomposition (TFMD).
//!
//! A multicomponent signal is transformed with a Gaussian-windowed STFT, the
//! non-negative-frequency magnitude spectrogram is smoothed, thresholded and
//! segmented with 8-connected component labeling, and every sufficiently
//! large region becomes a binary mask. Each mask (mirrored onto the negative
//! frequencies) selects STFT coefficients that are inverted back to a
//! time-domain mode.
//!
//! ```
//! use tfmd::{decompose, generate_case, TfmdParams};
//!
//! let case = generate_case(6, 1000.0).unwrap();
//! let result = decompose(&case.composite, &TfmdParams::default()).unwrap();
//! assert_eq!(result.n_modes(), 2);
//! ```

pub mod decomposition;
pub mod error;
pub mod evaluation;
pub mod export;
pub mod segmentation;
pub mod signals;
pub mod stft;

pub use decomposition::{
    build_prior, decompose, decompose_with_prior, reconstruct_total, DecompositionResult,
    Diagnostics, PriorSpectrogram, TfmdParams,
};
pub use error::{Result, TfmdError};
pub use evaluation::{
    match_modes, output_snr, relative_l2, run_experiment1, run_experiment2, ExperimentRecord,
    MatchResult,
};
pub use segmentation::{BinaryMask, FilterParams, LabeledComponents, SmoothedSpectrogram};
pub use signals::{add_awgn, generate_case, GroundTruthCase, NoiseSpec, Signal};
pub use stft::{extract_pos_freq, gaussian_window, istft, stft, PosFreqGrid, StftConfig, StftGrid};
