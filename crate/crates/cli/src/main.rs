mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use serde_json::json;
use tfmd::evaluation::summarize_experiment2;
use tfmd::export::{
    labels_to_csv, mask_to_csv, mask_to_pgm, matrix_from_csv, matrix_to_csv, pos_grid_axes,
    records_long_csv, render_summary, render_table1, signal_from_csv, signal_to_csv, summary_csv,
    table1_csv, table2_csv, Manifest,
};
use tfmd::{
    build_prior, decompose, decompose_with_prior, extract_pos_freq, generate_case, run_experiment1,
    run_experiment2, stft, PriorSpectrogram, Signal, TfmdError, TfmdParams,
};

use args::{Cli, Command, ParamArgs};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Io(PathBuf, std::io::Error),
    Lib(TfmdError),
}

impl From<TfmdError> for CliError {
    fn from(e: TfmdError) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(..) => 2,
            CliError::Lib(e) => match e {
                TfmdError::InvalidArgument(_) | TfmdError::Parse(_) => 1,
                TfmdError::NumericalDegeneracy(_) => 3,
                TfmdError::Io(_) | TfmdError::Json(_) => 2,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(path, e))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))
}

fn to_json(value: serde_json::Value) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(&value).map_err(TfmdError::from)?;
    s.push('\n');
    Ok(s)
}

fn read_signal(path: &Path, fs: Option<f64>) -> CliResult<Signal> {
    signal_from_csv(&read(path)?, fs)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn checked_params(args: &ParamArgs, base: TfmdParams) -> CliResult<TfmdParams> {
    let p = args.apply(base);
    p.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(p)
}

fn cmd_synth(case_id: u8, fs: f64, out: &Path) -> CliResult<()> {
    let case = generate_case(case_id, fs)?;
    create_dir(out)?;
    write(out, "composite.csv", &signal_to_csv(&case.composite))?;
    let mut files = vec!["composite.csv".to_string()];
    for (j, c) in case.constituents.iter().enumerate() {
        let name = format!("constituent_{}.csv", j + 1);
        write(out, &name, &signal_to_csv(c))?;
        files.push(name);
    }
    let sidecar = json!({
        "case_id": case.case_id,
        "name": case.name(),
        "fs": case.fs,
        "duration_s": case.duration_s,
        "n_samples": case.composite.len(),
        "n_constituents": case.n_constituents(),
        "files": files,
    });
    write(out, "case.json", &to_json(sidecar)?)?;
    println!(
        "case {} ({}): {} files written to {}",
        case.case_id,
        case.name(),
        files.len(),
        out.display()
    );
    Ok(())
}

/// Reads a prior written by `tfmd prior`, picking up segment counts from
/// the JSON sidecar if one sits next to it.
fn read_prior(path: &Path) -> CliResult<PriorSpectrogram> {
    let (_, _, values) = matrix_from_csv(&read(path)?)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut prior = PriorSpectrogram::from_values(values)?;
    let sidecar = path.with_extension("json");
    if sidecar.exists() {
        let info: serde_json::Value = serde_json::from_str(&read(&sidecar)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", sidecar.display())))?;
        if let Some(n) = info["segment_count"].as_u64() {
            prior.segment_count = n as usize;
        }
        if let Some(n) = info["skipped_segments"].as_u64() {
            prior.skipped_segments = n as usize;
        }
    }
    Ok(prior)
}

struct DecomposeArgs<'a> {
    input: &'a Path,
    fs: Option<f64>,
    prior: Option<&'a Path>,
    params: &'a ParamArgs,
    export_masks: bool,
    export_spectrogram: bool,
    out: &'a Path,
}

fn cmd_decompose(a: DecomposeArgs) -> CliResult<()> {
    let signal = read_signal(a.input, a.fs)?;
    let params = checked_params(a.params, TfmdParams::default())?;
    let prior = a.prior.map(read_prior).transpose()?;
    let result = match &prior {
        Some(p) => decompose_with_prior(&signal, p, &params)?,
        None => decompose(&signal, &params)?,
    };

    create_dir(a.out)?;
    let mut manifest = Manifest::from_result(&a.input.display().to_string(), &result, &params);
    if let (Some(path), Some(p)) = (a.prior, &prior) {
        manifest = manifest.with_prior(&path.display().to_string(), p);
    }
    for (entry, (mode, mask)) in manifest
        .modes
        .iter()
        .zip(result.modes.iter().zip(&result.masks))
    {
        write(a.out, &entry.csv, &signal_to_csv(mode))?;
        write(a.out, &entry.mask_pgm, &mask_to_pgm(mask))?;
        if a.export_masks {
            write(
                a.out,
                &format!("mask_{}.csv", entry.index),
                &mask_to_csv(mask),
            )?;
        }
    }
    write(a.out, &manifest.total_csv, &signal_to_csv(&result.total))?;
    if a.export_masks {
        write(
            a.out,
            "initial_mask.pgm",
            &mask_to_pgm(&result.initial_mask),
        )?;
        write(a.out, "labels.csv", &labels_to_csv(&result.labels))?;
    }
    if a.export_spectrogram {
        let grid = stft(&signal, &result.config)?;
        let (freqs, times) = pos_grid_axes(&result.config, grid.n_frames());
        let mags = extract_pos_freq(&grid).magnitudes();
        write(
            a.out,
            "spectrogram.csv",
            &matrix_to_csv(&mags, &freqs, &times),
        )?;
        manifest.spectrogram_csv = Some("spectrogram.csv".into());
    }
    write(a.out, "manifest.json", &manifest.to_json()?)?;
    println!(
        "{} mode(s) from {} components (tau = {:.6e}); results in {}",
        manifest.n_modes,
        manifest.n_components,
        manifest.tau,
        a.out.display()
    );
    Ok(())
}

fn cmd_prior(
    segments: &[PathBuf],
    fs: Option<f64>,
    params: &ParamArgs,
    out: &Path,
) -> CliResult<()> {
    let params = checked_params(params, TfmdParams::default())?;
    let signals = segments
        .iter()
        .map(|p| read_signal(p, fs))
        .collect::<CliResult<Vec<_>>>()?;
    let prior = build_prior(&signals, &params.stft)?;
    let config = params.stft.with_fs(signals[0].fs());
    let (freqs, times) = pos_grid_axes(&config, prior.values.ncols());
    create_dir(out)?;
    write(
        out,
        "prior.csv",
        &matrix_to_csv(&prior.values, &freqs, &times),
    )?;
    let sidecar = json!({
        "segments": segments.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "segment_count": prior.segment_count,
        "skipped_segments": prior.skipped_segments,
        "shape": [prior.values.nrows(), prior.values.ncols()],
        "stft": config,
    });
    write(out, "prior.json", &to_json(sidecar)?)?;
    println!(
        "prior from {} segment(s), {} skipped; written to {}",
        prior.segment_count,
        prior.skipped_segments,
        out.join("prior.csv").display()
    );
    Ok(())
}

fn cmd_experiment(
    which: u8,
    cases: &[u8],
    snrs: &[f64],
    seeds: &[u64],
    params: &ParamArgs,
    out: &Path,
) -> CliResult<()> {
    // Validate overrides once up front; per-case defaults are applied below.
    checked_params(params, TfmdParams::default())?;
    let params_for = |id: u8| params.apply(TfmdParams::for_case(id));
    create_dir(out)?;
    match which {
        1 => {
            let records: Vec<_> = run_experiment1(params_for)
                .into_iter()
                .filter(|r| cases.contains(&r.case_id))
                .collect();
            write(out, "experiment1.csv", &table1_csv(&records))?;
            write(out, "experiment1_modes.csv", &table2_csv(&records))?;
            write(out, "experiment1_long.csv", &records_long_csv(&records))?;
            write(out, "experiment1_summary.json", &to_json(json!(records))?)?;
            print!("{}", render_table1(&records));
        }
        2 => {
            let records = run_experiment2(params_for, cases, snrs, seeds);
            let summary = summarize_experiment2(&records);
            write(out, "experiment2.csv", &summary_csv(&summary))?;
            write(out, "experiment2_long.csv", &records_long_csv(&records))?;
            write(out, "experiment2_summary.json", &to_json(json!(summary))?)?;
            print!("{}", render_summary(&summary));
        }
        _ => return Err(CliError::Usage(format!("unknown experiment {which}"))),
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth { case, fs, out } => cmd_synth(*case, *fs, &out.out),
        Command::Decompose {
            input,
            fs,
            prior,
            params,
            export_masks,
            export_spectrogram,
            out,
        } => cmd_decompose(DecomposeArgs {
            input,
            fs: *fs,
            prior: prior.as_deref(),
            params,
            export_masks: *export_masks,
            export_spectrogram: *export_spectrogram,
            out: &out.out,
        }),
        Command::Prior {
            segments,
            fs,
            params,
            out,
        } => cmd_prior(segments, *fs, params, &out.out),
        Command::Experiment {
            which,
            cases,
            snrs,
            seeds,
            params,
            out,
        } => cmd_experiment(*which, &cases.0, &snrs.0, &seeds.0, params, &out.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
