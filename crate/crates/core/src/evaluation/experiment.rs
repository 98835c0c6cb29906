use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::match_modes;
use super::metrics::{output_snr, relative_l2};
use crate::decomposition::{decompose, TfmdParams};
use crate::error::Result;
use crate::signals::{add_awgn, generate_case, GroundTruthCase, NoiseSpec, Signal, CASE_IDS};

/// Input SNRs swept by the noise-robustness experiment, in dB.
pub const DEFAULT_SNRS: [f64; 8] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];

/// Outcome of decomposing one case under one noise condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub case_id: u8,
    /// `None` for noise-free runs.
    pub input_snr_db: Option<f64>,
    pub seed: Option<u64>,
    pub n_g: usize,
    pub n_f: usize,
    pub e_rel_total: f64,
    /// Mean of the matched per-mode errors; `None` if nothing was matched.
    pub e_rel_avg: Option<f64>,
    /// One entry per ground-truth mode.
    pub per_mode_errors: Vec<Option<f64>>,
    pub snr_out_db: f64,
    /// Set when the run failed; metric fields are then meaningless.
    pub failure: Option<String>,
}

fn evaluate(
    case: &GroundTruthCase,
    input: &Signal,
    params: &TfmdParams,
    input_snr_db: Option<f64>,
    seed: Option<u64>,
) -> Result<ExperimentRecord> {
    let result = decompose(input, params)?;
    let matched = match_modes(&case.constituents, &result.modes)?;
    let e_rel_total = relative_l2(&case.composite, &result.total)?;
    let snr_out_db = output_snr(&case.composite, &result.total)?;
    Ok(ExperimentRecord {
        case_id: case.case_id,
        input_snr_db,
        seed,
        n_g: case.n_constituents(),
        n_f: result.n_modes(),
        e_rel_total,
        e_rel_avg: matched.mean_error(),
        per_mode_errors: matched.per_mode_errors,
        snr_out_db,
        failure: None,
    })
}

fn failed(
    case_id: u8,
    n_g: usize,
    input_snr_db: Option<f64>,
    seed: Option<u64>,
    msg: String,
) -> ExperimentRecord {
    ExperimentRecord {
        case_id,
        input_snr_db,
        seed,
        n_g,
        n_f: 0,
        e_rel_total: f64::NAN,
        e_rel_avg: None,
        per_mode_errors: vec![None; n_g],
        snr_out_db: f64::NAN,
        failure: Some(msg),
    }
}

/// Noise-free decomposition of all six benchmark cases.
///
/// `params_for` chooses the parameters per case; pass
/// [`TfmdParams::for_case`] for the benchmark configuration.
pub fn run_experiment1<F>(params_for: F) -> Vec<ExperimentRecord>
where
    F: Fn(u8) -> TfmdParams + Sync,
{
    CASE_IDS
        .par_iter()
        .map(|&id| {
            let outcome = generate_case(id, 1000.0)
                .and_then(|case| evaluate(&case, &case.composite, &params_for(id), None, None));
            outcome.unwrap_or_else(|e| {
                failed(id, expected_constituents(id), None, None, e.to_string())
            })
        })
        .collect()
}

fn expected_constituents(case_id: u8) -> usize {
    generate_case(case_id, 1000.0).map_or(0, |c| c.n_constituents())
}

/// Noisy decomposition of `cases` at every input SNR and seed. Metrics are
/// computed against the clean composite and clean constituents. Records are
/// ordered by (case, SNR, seed) as given.
pub fn run_experiment2<F>(
    params_for: F,
    cases: &[u8],
    snrs: &[f64],
    seeds: &[u64],
) -> Vec<ExperimentRecord>
where
    F: Fn(u8) -> TfmdParams + Sync,
{
    let clean: Vec<(u8, Result<GroundTruthCase>)> = cases
        .iter()
        .map(|&id| (id, generate_case(id, 1000.0)))
        .collect();
    let jobs: Vec<(usize, f64, u64)> = (0..clean.len())
        .flat_map(|c| {
            snrs.iter()
                .flat_map(move |&s| seeds.iter().map(move |&seed| (c, s, seed)))
        })
        .collect();
    jobs.par_iter()
        .map(|&(c, snr, seed)| {
            let (id, case) = &clean[c];
            let case = match case {
                Ok(case) => case,
                Err(e) => return failed(*id, 0, Some(snr), Some(seed), e.to_string()),
            };
            add_awgn(
                &case.composite,
                NoiseSpec {
                    target_snr_db: snr,
                    seed,
                },
            )
            .and_then(|noisy| evaluate(case, &noisy, &params_for(*id), Some(snr), Some(seed)))
            .unwrap_or_else(|e| {
                failed(
                    *id,
                    case.n_constituents(),
                    Some(snr),
                    Some(seed),
                    e.to_string(),
                )
            })
        })
        .collect()
}

/// Linear-interpolation quantile (`q` in `[0, 1]`) of the finite values.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Per (case, SNR) aggregate over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrSummary {
    pub case_id: u8,
    pub input_snr_db: f64,
    pub trials: usize,
    pub n_g: usize,
    /// Trials whose mode count equalled the ground truth.
    pub n_f_correct: usize,
    pub median_n_f: f64,
    pub median_e_rel_total: Option<f64>,
    pub iqr_e_rel_total: Option<f64>,
    pub median_e_rel_avg: Option<f64>,
    pub iqr_e_rel_avg: Option<f64>,
    pub median_snr_out_db: Option<f64>,
    pub iqr_snr_out_db: Option<f64>,
}

fn iqr(values: &[f64]) -> Option<f64> {
    Some(quantile(values, 0.75)? - quantile(values, 0.25)?)
}

/// Groups noisy records by (case, SNR), sorted ascending.
pub fn summarize_experiment2(records: &[ExperimentRecord]) -> Vec<SnrSummary> {
    let mut keys: Vec<(u8, f64)> = records
        .iter()
        .filter_map(|r| r.input_snr_db.map(|s| (r.case_id, s)))
        .collect();
    keys.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keys.dedup();
    keys.into_iter()
        .map(|(case_id, snr)| {
            let group: Vec<&ExperimentRecord> = records
                .iter()
                .filter(|r| r.case_id == case_id && r.input_snr_db == Some(snr))
                .collect();
            let totals: Vec<f64> = group.iter().map(|r| r.e_rel_total).collect();
            let avgs: Vec<f64> = group.iter().filter_map(|r| r.e_rel_avg).collect();
            let snr_out: Vec<f64> = group.iter().map(|r| r.snr_out_db).collect();
            let n_f: Vec<f64> = group.iter().map(|r| r.n_f as f64).collect();
            SnrSummary {
                case_id,
                input_snr_db: snr,
                trials: group.len(),
                n_g: group.first().map_or(0, |r| r.n_g),
                n_f_correct: group
                    .iter()
                    .filter(|r| r.failure.is_none() && r.n_f == r.n_g)
                    .count(),
                median_n_f: quantile(&n_f, 0.5).unwrap_or(0.0),
                median_e_rel_total: quantile(&totals, 0.5),
                iqr_e_rel_total: iqr(&totals),
                median_e_rel_avg: quantile(&avgs, 0.5),
                iqr_e_rel_avg: iqr(&avgs),
                median_snr_out_db: quantile(&snr_out, 0.5),
                iqr_snr_out_db: iqr(&snr_out),
            }
        })
        .collect()
}
