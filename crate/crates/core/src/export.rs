//! On-disk formats: signal CSV, matrix CSV, PGM masks, the decomposition
//! manifest and experiment tables. Everything renders to `String` so output
//! is byte-identical across runs.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), which
//! round-trips any `f64`.

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::decomposition::{DecompositionResult, PriorSpectrogram, TfmdParams};
use crate::error::{Result, TfmdError};
use crate::evaluation::{ExperimentRecord, SnrSummary};
use crate::segmentation::{BinaryMask, LabeledComponents};
use crate::signals::Signal;
use crate::stft::StftConfig;

/// Relative tolerance on sample spacing when reading a signal CSV.
pub const UNIFORM_DT_TOL: f64 = 1e-9;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Two-column `time_s,value` CSV with a header line.
pub fn signal_to_csv(signal: &Signal) -> String {
    let mut out = String::with_capacity(signal.len() * 48);
    out.push_str("time_s,value\n");
    for (t, v) in signal.times().zip(signal.samples()) {
        let _ = writeln!(out, "{},{}", fmt_f64(t), fmt_f64(*v));
    }
    out
}

/// Parses a `time,value` CSV. The first line is a header. The sampling
/// rate is `fs` when given, otherwise derived from the time column, which
/// must be uniformly spaced to within [`UNIFORM_DT_TOL`].
pub fn signal_from_csv(text: &str, fs: Option<f64>) -> Result<Signal> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(t), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(TfmdError::Parse(format!(
                "line {}: expected two columns",
                lineno + 1
            )));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| TfmdError::Parse(format!("line {}: {e}: {s:?}", lineno + 1)))
        };
        times.push(parse(t)?);
        values.push(parse(v)?);
    }
    if values.is_empty() {
        return Err(TfmdError::Parse("no samples found".into()));
    }
    let derived = if times.len() >= 2 {
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TfmdError::invalid(
                "time column must be strictly increasing",
            ));
        }
        for (i, w) in times.windows(2).enumerate() {
            let step = w[1] - w[0];
            if ((step - dt) / dt).abs() > UNIFORM_DT_TOL {
                return Err(TfmdError::invalid(format!(
                    "non-uniform sampling at row {}: step {step:e} vs mean {dt:e}",
                    i + 2
                )));
            }
        }
        Some(1.0 / dt)
    } else {
        None
    };
    let fs = fs
        .or(derived)
        .ok_or_else(|| TfmdError::invalid("cannot infer sampling rate from a single sample"))?;
    Signal::new(values, fs)
}

/// Real matrix with a header row of column times and a leading column of
/// row frequencies.
pub fn matrix_to_csv(values: &Array2<f64>, row_freqs: &[f64], col_times: &[f64]) -> String {
    let mut out = String::new();
    out.push_str("freq_hz");
    for t in col_times {
        let _ = write!(out, ",{}", fmt_f64(*t));
    }
    out.push('\n');
    for (r, row) in values.rows().into_iter().enumerate() {
        out.push_str(&fmt_f64(row_freqs[r]));
        for v in row {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`matrix_to_csv`]: `(row_freqs, col_times, values)`.
pub fn matrix_from_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)> {
    let parse = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| TfmdError::Parse(format!("{e}: {s:?}")))
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| TfmdError::Parse("empty matrix file".into()))?;
    let col_times = header
        .split(',')
        .skip(1)
        .map(parse)
        .collect::<Result<Vec<_>>>()?;
    let mut row_freqs = Vec::new();
    let mut data = Vec::new();
    for line in lines {
        let mut fields = line.split(',');
        row_freqs.push(parse(fields.next().unwrap_or(""))?);
        let row = fields.map(parse).collect::<Result<Vec<_>>>()?;
        if row.len() != col_times.len() {
            return Err(TfmdError::Parse(format!(
                "row {} has {} values, header has {}",
                row_freqs.len(),
                row.len(),
                col_times.len()
            )));
        }
        data.extend(row);
    }
    let values = Array2::from_shape_vec((row_freqs.len(), col_times.len()), data)
        .map_err(|e| TfmdError::Parse(e.to_string()))?;
    Ok((row_freqs, col_times, values))
}

/// Frequencies of the non-negative rows and frame-center times for `config`.
pub fn pos_grid_axes(config: &StftConfig, frames: usize) -> (Vec<f64>, Vec<f64>) {
    let freqs = (0..config.n_pos())
        .map(|k| k as f64 * config.fs / config.fft_size as f64)
        .collect();
    let times = (0..frames).map(|m| config.frame_center(m)).collect();
    (freqs, times)
}

/// Plain PGM (`P2`, maxval 1). Image rows follow matrix rows, so the
/// lowest frequency is the top line.
pub fn mask_to_pgm(mask: &BinaryMask) -> String {
    let (h, w) = mask.dim();
    let mut out = format!("P2\n{w} {h}\n1\n");
    for row in mask.bits.rows() {
        let line: Vec<&str> = row.iter().map(|b| if *b { "1" } else { "0" }).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn mask_from_pgm(text: &str) -> Result<BinaryMask> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(TfmdError::Parse("not a plain PGM (P2) file".into()));
    }
    let mut num = || -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| TfmdError::Parse("truncated PGM".into()))?
            .parse::<usize>()
            .map_err(|e| TfmdError::Parse(e.to_string()))
    };
    let (w, h, maxval) = (num()?, num()?, num()?);
    if maxval != 1 {
        return Err(TfmdError::Parse(format!("expected maxval 1, got {maxval}")));
    }
    let mut bits = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        bits.push(num()? != 0);
    }
    Ok(BinaryMask {
        bits: Array2::from_shape_vec((h, w), bits).map_err(|e| TfmdError::Parse(e.to_string()))?,
    })
}

fn int_matrix_csv<T: std::fmt::Display>(rows: impl Iterator<Item = Vec<T>>) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(ToString::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// 0/1 CSV matrix without headers.
pub fn mask_to_csv(mask: &BinaryMask) -> String {
    int_matrix_csv(
        mask.bits
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|b| u8::from(*b)).collect()),
    )
}

pub fn labels_to_csv(labels: &LabeledComponents) -> String {
    int_matrix_csv(labels.labels.rows().into_iter().map(|r| r.to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub index: usize,
    /// Component label in the labeled-components matrix.
    pub label: u32,
    /// Size of the component on the non-negative-frequency grid.
    pub pixels: usize,
    pub energy: f64,
    pub csv: String,
    pub mask_pgm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorInfo {
    pub path: String,
    pub segment_count: usize,
    pub skipped_segments: usize,
}

/// `manifest.json` written next to a decomposition's mode files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub input: String,
    pub signal_len: usize,
    pub fs: f64,
    pub params: TfmdParams,
    pub prior: Option<PriorInfo>,
    pub n_modes: usize,
    pub tau: f64,
    pub n_components: usize,
    pub pixel_counts: Vec<usize>,
    pub size_threshold: usize,
    pub grid_shape: [usize; 2],
    pub max_imag_residue: f64,
    pub modes: Vec<ModeEntry>,
    pub total_csv: String,
    pub spectrogram_csv: Option<String>,
}

impl Manifest {
    pub fn from_result(input: &str, result: &DecompositionResult, params: &TfmdParams) -> Manifest {
        let d = &result.diagnostics;
        let modes = result
            .modes
            .iter()
            .zip(&d.retained_labels)
            .enumerate()
            .map(|(i, (mode, &label))| ModeEntry {
                index: i + 1,
                label,
                pixels: result.labels.pixel_counts[(label - 1) as usize],
                energy: mode.energy(),
                csv: format!("mode_{}.csv", i + 1),
                mask_pgm: format!("mask_{}.pgm", i + 1),
            })
            .collect();
        Manifest {
            format_version: 1,
            input: input.to_string(),
            signal_len: result.total.len(),
            fs: result.config.fs,
            params: TfmdParams {
                stft: result.config,
                ..*params
            },
            prior: None,
            n_modes: result.n_modes(),
            tau: d.tau,
            n_components: d.n_components,
            pixel_counts: d.pixel_counts.clone(),
            size_threshold: d.size_threshold,
            grid_shape: [result.labels.labels.nrows(), result.labels.labels.ncols()],
            max_imag_residue: d.max_imag_residue,
            modes,
            total_csv: "total.csv".into(),
            spectrogram_csv: None,
        }
    }

    pub fn with_prior(mut self, path: &str, prior: &PriorSpectrogram) -> Self {
        self.prior = Some(PriorInfo {
            path: path.to_string(),
            segment_count: prior.segment_count,
            skipped_segments: prior.skipped_segments,
        });
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Overall table: one row per case.
pub fn table1_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from("case,n_g,n_f,e_rel_total,e_rel_avg\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.case_id,
            r.n_g,
            r.n_f,
            fmt_f64(r.e_rel_total),
            fmt_opt(r.e_rel_avg)
        );
    }
    out
}

/// Per-mode table: errors for ground-truth modes `j = 1..=7`.
pub fn table2_csv(records: &[ExperimentRecord]) -> String {
    let width = records
        .iter()
        .map(|r| r.per_mode_errors.len())
        .max()
        .unwrap_or(0)
        .max(7);
    let mut out = String::from("case");
    for j in 1..=width {
        let _ = write!(out, ",e_rel_{j}");
    }
    out.push('\n');
    for r in records {
        out.push_str(&r.case_id.to_string());
        for j in 0..width {
            let _ = write!(
                out,
                ",{}",
                fmt_opt(r.per_mode_errors.get(j).copied().flatten())
            );
        }
        out.push('\n');
    }
    out
}

/// One row per record, for plotting.
pub fn records_long_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(
        "case,input_snr_db,seed,n_g,n_f,e_rel_total,e_rel_avg,snr_out_db,per_mode_errors,failure\n",
    );
    for r in records {
        let per_mode: Vec<String> = r.per_mode_errors.iter().map(|e| fmt_opt(*e)).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.case_id,
            fmt_opt(r.input_snr_db),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.n_g,
            r.n_f,
            fmt_f64(r.e_rel_total),
            fmt_opt(r.e_rel_avg),
            fmt_f64(r.snr_out_db),
            per_mode.join(";"),
            r.failure.as_deref().unwrap_or("").replace([',', '\n'], " ")
        );
    }
    out
}

/// Per (case, SNR) medians in the layout of the noise-sweep table.
pub fn summary_csv(summary: &[SnrSummary]) -> String {
    let mut out = String::from(
        "case,input_snr_db,trials,n_g,n_f_median,n_f_correct,e_rel_total_median,e_rel_total_iqr,\
         e_rel_avg_median,e_rel_avg_iqr,snr_out_db_median,snr_out_db_iqr\n",
    );
    for s in summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            s.case_id,
            fmt_f64(s.input_snr_db),
            s.trials,
            s.n_g,
            s.median_n_f,
            s.n_f_correct,
            fmt_opt(s.median_e_rel_total),
            fmt_opt(s.iqr_e_rel_total),
            fmt_opt(s.median_e_rel_avg),
            fmt_opt(s.iqr_e_rel_avg),
            fmt_opt(s.median_snr_out_db),
            fmt_opt(s.iqr_snr_out_db),
        );
    }
    out
}

/// Human-readable overall table.
pub fn render_table1(records: &[ExperimentRecord]) -> String {
    let mut out = String::from("Case   N_g   N_f   E_rel,total   E_rel,avg\n");
    for r in records {
        let avg = r
            .e_rel_avg
            .map(|v| format!("{v:.2e}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:>4}  {:>4}  {:>4}   {:>11.2e}   {:>9}",
            r.case_id, r.n_g, r.n_f, r.e_rel_total, avg
        );
    }
    out
}

pub fn render_summary(summary: &[SnrSummary]) -> String {
    let mut out =
        String::from("Case  SNR_in   N_g  N_f(med)  N_f ok   E_rel,total   E_rel,avg   SNR_out\n");
    let f = |v: Option<f64>| v.map(|v| format!("{v:.2e}")).unwrap_or_else(|| "-".into());
    for s in summary {
        let _ = writeln!(
            out,
            "{:>4}  {:>6.1}  {:>4}  {:>8}  {:>3}/{:<3}  {:>11}   {:>9}   {:>7}",
            s.case_id,
            s.input_snr_db,
            s.n_g,
            s.median_n_f,
            s.n_f_correct,
            s.trials,
            f(s.median_e_rel_total),
            f(s.median_e_rel_avg),
            s.median_snr_out_db
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    out
}
