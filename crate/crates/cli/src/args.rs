use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tfmd::TfmdParams;

#[derive(Debug, Parser)]
#[command(
    name = "tfmd",
    version,
    about = "STFT-based time-frequency mode decomposition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a benchmark case: composite, constituents and a JSON sidecar.
    Synth {
        /// Case number, 1 to 6.
        #[arg(value_parser = clap::value_parser!(u8).range(1..=6))]
        case: u8,
        /// Sampling rate in Hz.
        #[arg(long, default_value_t = 1000.0)]
        fs: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Decompose a signal CSV into modes.
    Decompose {
        /// Input CSV with a `time_s,value` header.
        input: PathBuf,
        /// Sampling rate in Hz; inferred from the time column when omitted.
        #[arg(long)]
        fs: Option<f64>,
        /// Prior spectrogram CSV (from `tfmd prior`) used to derive the masks.
        #[arg(long)]
        prior: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
        /// Also write the initial mask, the label matrix and CSV copies of every mask.
        #[arg(long)]
        export_masks: bool,
        /// Also write the non-negative-frequency magnitude spectrogram.
        #[arg(long)]
        export_spectrogram: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Build a prior spectrogram from equally long signal segments.
    Prior {
        /// Segment CSVs.
        #[arg(required = true)]
        segments: Vec<PathBuf>,
        #[arg(long)]
        fs: Option<f64>,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Reproduce experiment 1 (noise-free) or 2 (noise sweep).
    Experiment {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        /// Cases to run, e.g. `1,4..6`.
        #[arg(long, default_value = "1..6", value_parser = parse_cases)]
        cases: List<u8>,
        /// Input SNRs in dB for experiment 2.
        #[arg(long, visible_alias = "snr", default_value = "5,10,15,20,25,30,35,40", value_parser = parse_snrs)]
        snrs: List<f64>,
        /// Noise seeds for experiment 2, e.g. `1..10` (inclusive).
        #[arg(long, visible_alias = "seed", default_value = "1..10", value_parser = parse_seeds)]
        seeds: List<u64>,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, env = "TFMD_DEFAULT_OUT", default_value = "tfmd-out")]
    pub out: PathBuf,
}

/// Overrides on top of the default parameters.
#[derive(Debug, Args, Default, Clone)]
pub struct ParamArgs {
    /// Window length in samples.
    #[arg(long)]
    pub window_len: Option<usize>,
    /// Gaussian window shape parameter.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Hop size in samples.
    #[arg(long)]
    pub hop: Option<usize>,
    /// FFT size in bins.
    #[arg(long)]
    pub fft_size: Option<usize>,
    /// Smoothing kernel extent along frequency (odd).
    #[arg(long)]
    pub smooth_u: Option<usize>,
    /// Smoothing kernel extent along time (odd).
    #[arg(long)]
    pub smooth_v: Option<usize>,
    /// Threshold constant.
    #[arg(long)]
    pub c_thresh: Option<f64>,
    /// Absolute minimum component size in pixels.
    #[arg(long)]
    pub p_abs: Option<usize>,
    /// Minimum component size as a fraction of the grid.
    #[arg(long)]
    pub p_rel: Option<f64>,
}

impl ParamArgs {
    pub fn apply(&self, mut p: TfmdParams) -> TfmdParams {
        if let Some(v) = self.window_len {
            p.stft.window_len = v;
        }
        if let Some(v) = self.alpha {
            p.stft.gaussian_alpha = v;
        }
        if let Some(v) = self.hop {
            p.stft.hop = v;
        }
        if let Some(v) = self.fft_size {
            p.stft.fft_size = v;
        }
        if let Some(v) = self.smooth_u {
            p.smooth_rows = v;
        }
        if let Some(v) = self.smooth_v {
            p.smooth_cols = v;
        }
        if let Some(v) = self.c_thresh {
            p.filter.c_thresh = v;
        }
        if let Some(v) = self.p_abs {
            p.filter.p_abs = v;
        }
        if let Some(v) = self.p_rel {
            p.filter.p_rel = v;
        }
        p
    }
}

/// Parses `a,b,c..d` lists of integers where `c..d` is inclusive.
fn parse_int_list(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo.trim().parse().map_err(|e| format!("{part:?}: {e}"))?;
            let hi: u64 = hi.trim().parse().map_err(|e| format!("{part:?}: {e}"))?;
            if lo > hi {
                return Err(format!("empty range {part:?}"));
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|e| format!("{part:?}: {e}"))?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

/// A comma-separated list given as one argument. Wrapped so clap does not
/// treat the field as a repeated flag.
#[derive(Debug, Clone, PartialEq)]
pub struct List<T>(pub Vec<T>);

fn parse_seeds(s: &str) -> Result<List<u64>, String> {
    parse_int_list(s).map(List)
}

fn parse_cases(s: &str) -> Result<List<u8>, String> {
    parse_int_list(s)?
        .into_iter()
        .map(|c| match c {
            1..=6 => Ok(c as u8),
            _ => Err(format!("case {c} does not exist (expected 1..6)")),
        })
        .collect::<Result<_, _>>()
        .map(List)
}

fn parse_snrs(s: &str) -> Result<List<f64>, String> {
    let out: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if out.is_empty() || out.iter().any(|v| !v.is_finite()) {
        return Err("expected a comma-separated list of finite SNRs".into());
    }
    Ok(List(out))
}
