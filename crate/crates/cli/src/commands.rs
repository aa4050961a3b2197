use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use log::info;
use memwall::csa::CsaConfig;
use memwall::harness::{
    compare_models, curves_to_csv, parametric_sweep, run_study_set, ComparisonReport, StudyModel, StudyReport,
    StudySpec, SweepAxis, SweepSpec,
};
use memwall::io::{
    generate_synthetic, load_measurements, read_report, report_kind, write_measurements, write_report, Format,
    MeasurementTable, ReportKind, SyntheticSpec,
};
use memwall::model::{
    amdahl_speedup, proposed_evaluate, speedups_from_measurements, AmdahlParams, Branch, Config, ModelParams,
    DEFAULT_K_MAX,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::svg::{LineChart, Series};
use crate::{Common, Failure, FormatArg};

/// How a measurement table is read.
#[derive(Debug, Clone, Args)]
pub struct TableInput {
    /// Measurement table (CSV or JSON).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Input format; inferred from the file extension when omitted.
    #[arg(long, value_enum)]
    pub input_format: Option<FormatArg>,
    /// Memory frequency in MHz. Required for CSV; overrides the value embedded in JSON.
    #[arg(long)]
    pub mem_freq_mhz: Option<u32>,
}

/// Annealing settings for the analytical models.
#[derive(Debug, Clone, Args)]
pub struct FitOptions {
    /// Number of coupled annealers.
    #[arg(long, default_value_t = 10)]
    pub annealers: usize,
    /// Iterations per fit.
    #[arg(long, default_value_t = 30_000)]
    pub iters: usize,
    /// Upper bound of the frequency-sensitivity parameter k.
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub k_max: f64,
}

impl FitOptions {
    fn csa(&self, seed: u64) -> CsaConfig {
        CsaConfig {
            num_annealers: self.annealers,
            max_iterations: self.iters,
            seed,
            record_trace: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub table: TableInput,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Only fit this application.
    #[arg(long)]
    pub application: Option<String>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictModel {
    Proposed,
    Amdahl,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    /// Parameter file: `{"f":..,"k":..,"m1":..,"m2":..}` or a comparison report from `fit`.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Row of a comparison report to use; the first row when omitted.
    #[arg(long)]
    pub application: Option<String>,
    #[arg(long, value_enum, default_value = "proposed")]
    pub model: PredictModel,
    /// Core counts, e.g. `1,2,4` or `1-24`.
    #[arg(long, default_value = "1,2,4,8,16,32,64")]
    pub cores: String,
    /// CPU-to-memory frequency ratios.
    #[arg(long, default_value = "1,2,3")]
    pub phi: String,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Cores,
    Phi,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Variable along each curve.
    #[arg(long, value_enum, default_value = "cores")]
    pub axis: AxisArg,
    /// Grid overrides; the defaults depend on the axis.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub m1: Option<String>,
    #[arg(long)]
    pub m2: Option<String>,
    #[arg(long)]
    pub cores: Option<String>,
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    pub k_max: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Also draw the curves as an SVG line chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Logarithmic horizontal axis in the chart.
    #[arg(long)]
    pub log_x: bool,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub table: TableInput,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Training-set sizes; powers of two from 4 to 256 below the sample count by default.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Repetitions per training size.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Models to evaluate.
    #[arg(long, default_value = "amdahl,proposed,krr,tree")]
    pub models: String,
    /// Cross-validation folds for the KRR grid search.
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Record wall-clock time per model. Makes the report non-reproducible.
    #[arg(long)]
    pub timing: bool,
    #[arg(long, value_enum, default_value = "json")]
    pub format: FormatArg,
    /// Per-size CSV written next to a JSON report. Defaults to the output path with a
    /// `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Median MSE against training size as an SVG chart (log-log).
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "synthetic")]
    pub application: String,
    #[arg(long, default_value_t = 0.99)]
    pub f: f64,
    #[arg(long, default_value_t = 0.5)]
    pub k: f64,
    #[arg(long, default_value_t = 0.05)]
    pub m1: f64,
    #[arg(long, default_value_t = 0.4)]
    pub m2: f64,
    #[arg(long, default_value_t = 1000)]
    pub mem_freq_mhz: u32,
    /// CPU frequencies in MHz.
    #[arg(long, default_value = "1200-2500:100")]
    pub freqs: String,
    /// Core counts.
    #[arg(long, default_value = "1-24")]
    pub cores: String,
    /// Single-core time in seconds at the reference frequency.
    #[arg(long, default_value_t = 100.0)]
    pub base_time: f64,
    /// Reference frequency in MHz; the highest frequency when omitted.
    #[arg(long)]
    pub reference_freq_mhz: Option<u32>,
    /// Relative standard deviation of the multiplicative noise on each time.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub common: Common,
    /// Study or comparison report in JSON.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Machine-readable output instead of the text summary.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(|e| Failure::Io { path: path.to_path_buf(), message: e.to_string() })
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match output {
        Some(path) => write_file(path, bytes),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| Failure::Io { path: PathBuf::from("<stdout>"), message: e.to_string() }),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| memwall::Error::Serialization(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Parses `a,b,c`. Integer lists also accept `lo-hi` and `lo-hi:step` ranges.
fn parse_list<T: FromStr>(flag: &str, text: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| Failure::Usage(format!("--{flag}: cannot parse '{s}'"))))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| if v.is_empty() { Err(Failure::Usage(format!("--{flag} is empty"))) } else { Ok(v) })
}

fn parse_int_list(flag: &str, text: &str) -> Result<Vec<u32>, Failure> {
    let bad = |s: &str| Failure::Usage(format!("--{flag}: cannot parse '{s}'"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once('-') {
            None => out.push(item.parse().map_err(|_| bad(item))?),
            Some((lo, rest)) => {
                let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
                let lo: u32 = lo.parse().map_err(|_| bad(item))?;
                let hi: u32 = hi.parse().map_err(|_| bad(item))?;
                let step: usize = step.parse().map_err(|_| bad(item))?;
                if lo > hi || step == 0 {
                    return Err(bad(item));
                }
                out.extend((lo..=hi).step_by(step));
            }
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage(format!("--{flag} is empty")));
    }
    Ok(out)
}

fn load_table(input: &TableInput) -> Result<MeasurementTable, Failure> {
    let format = match input.input_format {
        Some(f) => f.into(),
        None if input.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => Format::Json,
        None => Format::Csv,
    };
    if format == Format::Csv && input.mem_freq_mhz.is_none() {
        return Err(Failure::Usage("CSV input needs --mem-freq-mhz".into()));
    }
    let bytes = read_file(&input.input)?;
    let table = load_measurements(bytes.as_slice(), format, input.mem_freq_mhz)?;
    info!("loaded {} rows for {} application(s)", table.rows.len(), table.applications().len());
    Ok(table)
}

/// Splits a table into per-application speedup sets, in order of first appearance.
fn applications(
    table: &MeasurementTable,
    only: Option<&str>,
) -> Result<Vec<(String, Vec<memwall::model::SpeedupSample>)>, Failure> {
    let names: Vec<String> = match only {
        Some(name) if table.applications().contains(&name) => vec![name.to_string()],
        Some(name) => {
            return Err(
                memwall::Error::Schema { row: None, message: format!("no rows for application '{name}'") }.into()
            )
        }
        None => table.applications().into_iter().map(String::from).collect(),
    };
    names
        .into_iter()
        .map(|name| {
            let samples = speedups_from_measurements(&table.for_application(&name))?;
            Ok((name, samples))
        })
        .collect()
}

pub fn fit(args: FitArgs) -> Result<(), Failure> {
    let table = load_table(&args.table)?;
    let sets = applications(&table, args.application.as_deref())?;
    let config = args.fit.csa(args.common.seed);
    config.validate()?;
    let rows = sets
        .par_iter()
        .map(|(name, samples)| {
            let row = compare_models(name, samples, &config, args.fit.k_max)?;
            info!("{name}: amdahl mse {:e}, proposed mse {:e}", row.amdahl_mse, row.proposed_mse);
            Ok(row)
        })
        .collect::<Result<Vec<_>, memwall::Error>>()?;
    let report = ComparisonReport {
        seed: args.common.seed,
        annealers: config.num_annealers,
        iterations: config.max_iterations,
        k_max: args.fit.k_max,
        rows,
    };
    emit(args.common.output.as_deref(), &write_report(&report, args.format.into())?)
}

#[derive(Serialize)]
struct Prediction {
    p: u32,
    phi: f64,
    speedup: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    branch: Option<Branch>,
}

fn load_params(path: &Path, application: Option<&str>) -> Result<ModelParams, Failure> {
    let bytes = read_file(path)?;
    if report_kind(&bytes).is_ok() {
        let report: ComparisonReport = read_report(&bytes)?;
        let row = match application {
            Some(name) => report.rows.iter().find(|r| r.application == name),
            None => report.rows.first(),
        };
        return row.map(|r| r.proposed).ok_or_else(|| {
            memwall::Error::Schema { row: None, message: "comparison report has no matching row".into() }.into()
        });
    }
    let params: ModelParams = serde_json::from_slice(&bytes).map_err(|e| memwall::Error::Parse {
        line: e.line(),
        field: String::new(),
        message: e.to_string(),
    })?;
    params.validate()?;
    Ok(params)
}

pub fn predict(args: PredictArgs) -> Result<(), Failure> {
    let cores = parse_int_list("cores", &args.cores)?;
    let phis: Vec<f64> = parse_list("phi", &args.phi)?;
    let params = load_params(&args.input, args.application.as_deref())?;
    let mut rows = Vec::with_capacity(cores.len() * phis.len());
    for &phi in &phis {
        for &p in &cores {
            let config = Config::new(p, phi)?;
            rows.push(match args.model {
                PredictModel::Proposed => {
                    let e = proposed_evaluate(&params, config)?;
                    Prediction { p, phi, speedup: e.speedup, branch: Some(e.branch) }
                }
                PredictModel::Amdahl => {
                    Prediction { p, phi, speedup: amdahl_speedup(&AmdahlParams::new(params.f)?, p)?, branch: None }
                }
            });
        }
    }
    let bytes = match args.format {
        FormatArg::Json => to_json(&rows)?,
        FormatArg::Csv => {
            let mut out = String::from("p,phi,speedup,branch\n");
            for r in &rows {
                let branch = match r.branch {
                    Some(Branch::Compute) => "compute",
                    Some(Branch::Memory) => "memory",
                    None => "",
                };
                let _ = writeln!(out, "{},{},{},{branch}", r.p, r.phi, r.speedup);
            }
            out.into_bytes()
        }
    };
    emit(args.common.output.as_deref(), &bytes)
}

pub fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let mut spec = match args.axis {
        AxisArg::Cores => SweepSpec::cores_default(),
        AxisArg::Phi => SweepSpec::phi_default(),
    };
    spec.k_max = args.k_max;
    let floats = [(&args.f, "f"), (&args.k, "k"), (&args.m1, "m1"), (&args.m2, "m2"), (&args.phi, "phi")];
    for (text, flag) in floats {
        if let Some(text) = text {
            let values = parse_list(flag, text)?;
            match flag {
                "f" => spec.f = values,
                "k" => spec.k = values,
                "m1" => spec.m1 = values,
                "m2" => spec.m2 = values,
                _ => spec.phi = values,
            }
        }
    }
    if let Some(text) = &args.cores {
        spec.p = parse_int_list("cores", text)?;
    }
    // Every sweep failure is a bad grid value from the command line.
    let curves = parametric_sweep(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    let bytes = match args.format {
        FormatArg::Csv => curves_to_csv(&curves),
        FormatArg::Json => to_json(&curves)?,
    };
    emit(args.common.output.as_deref(), &bytes)?;

    if let Some(path) = &args.svg {
        let (x_label, x_of): (&str, fn(&memwall::harness::CurvePoint) -> f64) = match spec.axis {
            SweepAxis::Cores => ("cores", |pt| f64::from(pt.p)),
            SweepAxis::Phi => ("CPU/memory frequency ratio", |pt| pt.phi),
        };
        let chart = LineChart {
            title: "Modeled speedup".into(),
            x_label: x_label.into(),
            y_label: "speedup".into(),
            log_x: args.log_x,
            log_y: false,
            series: curves
                .iter()
                .map(|c| Series {
                    label: c.label(),
                    points: c.points.iter().map(|pt| (x_of(pt), pt.speedup)).collect(),
                })
                .collect(),
        };
        write_file(path, chart.render().as_bytes())?;
    }
    Ok(())
}

pub fn study(args: StudyArgs) -> Result<(), Failure> {
    let table = load_table(&args.table)?;
    let sets = applications(&table, None)?;
    let models = args
        .models
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(StudyModel::parse)
        .collect::<Result<Vec<_>, _>>()?;
    let sizes = match &args.sizes {
        Some(text) => Some(parse_int_list("sizes", text)?.into_iter().map(|s| s as usize).collect()),
        None => None,
    };
    let spec = StudySpec {
        training_sizes: sizes,
        repetitions: args.reps,
        models,
        seed: args.common.seed,
        csa: args.fit.csa(args.common.seed),
        k_max: args.fit.k_max,
        cv_folds: args.folds,
        record_timing: args.timing,
        ..Default::default()
    };
    let report = run_study_set(&sets, &spec)?;
    let output = args.common.output.as_deref();
    emit(output, &write_report(&report, args.format.into())?)?;

    let csv_path =
        args.csv.clone().or_else(|| output.filter(|_| args.format == FormatArg::Json).map(|p| p.with_extension("csv")));
    if let Some(path) = csv_path {
        write_file(&path, &write_report(&report, Format::Csv)?)?;
    }
    if let Some(path) = &args.svg {
        write_file(path, study_chart(&report).render().as_bytes())?;
    }
    Ok(())
}

fn study_chart(report: &StudyReport) -> LineChart {
    let series = report
        .models
        .iter()
        .map(|&model| Series {
            label: model.name().to_string(),
            points: report
                .overall
                .iter()
                .filter(|c| c.model == model)
                .filter_map(|c| c.mean_median_mse.map(|m| (c.training_size as f64, m)))
                .collect(),
        })
        .collect();
    LineChart {
        title: "Test error against training-set size".into(),
        x_label: "training samples".into(),
        y_label: "median MSE".into(),
        log_x: true,
        log_y: true,
        series,
    }
}

pub fn gen(args: GenArgs) -> Result<(), Failure> {
    let spec = SyntheticSpec {
        application: args.application,
        true_params: ModelParams { f: args.f, k: args.k, m1: args.m1, m2: args.m2 },
        f_mem_mhz: args.mem_freq_mhz,
        cpu_frequencies_mhz: parse_int_list("freqs", &args.freqs)?,
        core_counts: parse_int_list("cores", &args.cores)?,
        base_serial_time: args.base_time,
        reference_frequency_mhz: args.reference_freq_mhz,
        noise_sigma: args.noise,
        seed: args.common.seed,
    };
    spec.true_params.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let table = generate_synthetic(&spec)?;
    emit(args.common.output.as_deref(), &write_measurements(&table, args.format.into())?)
}

fn number(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"))
}

pub fn report(args: ReportArgs) -> Result<(), Failure> {
    let bytes = read_file(&args.input)?;
    let output = args.common.output.as_deref();
    match report_kind(&bytes)? {
        ReportKind::Study => {
            let report: StudyReport = read_report(&bytes)?;
            match args.format {
                Some(format) => emit(output, &write_report(&report, format.into())?),
                None => emit(output, study_summary(&report).as_bytes()),
            }
        }
        ReportKind::Comparison => {
            let report: ComparisonReport = read_report(&bytes)?;
            match args.format {
                Some(format) => emit(output, &write_report(&report, format.into())?),
                None => emit(output, comparison_summary(&report).as_bytes()),
            }
        }
    }
}

fn study_summary(report: &StudyReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "study: seed {}, {} repetitions per cell", report.seed, report.repetitions);
    for app in &report.applications {
        let _ = writeln!(out, "\n{} ({} samples)", app.application, app.sample_count);
        let _ = writeln!(out, "  {:<10} {:>6} {:>14} {:>14} {:>7}", "model", "size", "median mse", "std mse", "failed");
        for c in &app.cells {
            let _ = writeln!(
                out,
                "  {:<10} {:>6} {:>14} {:>14} {:>7}",
                c.model.name(),
                c.training_size,
                number(c.median_mse),
                number(c.std_mse),
                c.failed
            );
        }
    }
    if report.applications.len() > 1 {
        let _ = writeln!(out, "\noverall (mean over {} applications)", report.applications.len());
        for c in &report.overall {
            let _ = writeln!(
                out,
                "  {:<10} {:>6} {:>14} {:>14}",
                c.model.name(),
                c.training_size,
                number(c.mean_median_mse),
                number(c.mean_std_mse)
            );
        }
    }
    out
}

fn comparison_summary(report: &ComparisonReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "comparison: seed {}, {} annealers, {} iterations, k <= {}",
        report.seed, report.annealers, report.iterations, report.k_max
    );
    let _ = writeln!(
        out,
        "{:<16} {:>6} {:>8} {:>12} {:>8} {:>8} {:>8} {:>8} {:>12} {:>9}",
        "application", "n", "amdahl f", "amdahl mse", "f", "k", "m1", "m2", "mse", "gain %"
    );
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{:<16} {:>6} {:>8.4} {:>12.4e} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>12.4e} {:>9}",
            r.application,
            r.measurements,
            r.amdahl.f,
            r.amdahl_mse,
            r.proposed.f,
            r.proposed.k,
            r.proposed.m1,
            r.proposed.m2,
            r.proposed_mse,
            r.accuracy_gain.map_or_else(|| "-".to_string(), |g| format!("{g:.2}"))
        );
    }
    out
}
