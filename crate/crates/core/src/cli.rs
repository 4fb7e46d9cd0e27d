//! Batch front end: JSON configuration in, CSV/JSON tables out.
//!
//! Exit status is 0 on success, 1 when the configuration does not parse or
//! validate, and 2 when a numerical method fails (a diagnostic JSON object is
//! written to stderr and any partial outputs are removed).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::asymptotic::{self, AnnulusBounds, GridSpec, RadialSolution};
use crate::ensemble::{self, SampleConfig};
use crate::error::{Error, Result};
use crate::exact_n::{self, QuadratureSpec};
use crate::measure::MeasureSpec;

pub const RADIAL_CSV: &str = "radial_solution.csv";
pub const EXACT_CSV: &str = "exact_density.csv";
pub const MODULI_CSV: &str = "moduli.csv";
pub const MODULI_PROVENANCE: &str = "moduli_provenance.json";
pub const EXACT_PROVENANCE: &str = "exact_provenance.json";
pub const COMPARE_REPORT: &str = "compare_report.json";
pub const COMPARE_CSV: &str = "compare_table.csv";

/// Largest N for which `compare` runs the exact route unless overridden.
pub const DEFAULT_EXACT_MAX_N: usize = 64;

#[derive(Debug, Parser)]
#[command(name = "subunitary", version, about = "Radial eigenvalue density of sub-unitary ensembles T = UH")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config's `output`).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads, 0 = automatic (overrides the config's `threads`).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Print the annulus of support as JSON.
    Bounds,
    /// Tabulate the large-N solution on the radial grid.
    Asymptotic,
    /// Tabulate the exact finite-N density and report its normalization.
    Exact,
    /// Sample eigenvalue moduli by Monte Carlo.
    Sample,
    /// Run every applicable route and write a comparison report.
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSettings {
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub measure: MeasureSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub quad: QuadratureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_exact_max_n")]
    pub exact_max_n: usize,
}

fn default_exact_max_n() -> usize {
    DEFAULT_EXACT_MAX_N
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

/// Every reason the configuration cannot run; empty when it can.
pub fn validate(config: &RunConfig) -> Vec<Violation> {
    let mut raw = config.measure.violations();
    raw.extend(config.grid.violations());
    raw.extend(config.quad.violations());
    if let Some(s) = &config.sample {
        if s.n == 0 {
            raw.push(("sample.N".into(), "N must be >= 1".into()));
        }
        if s.samples == 0 {
            raw.push(("sample.samples".into(), "samples must be positive".into()));
        }
    }
    raw.into_iter()
        .map(|(key, message)| Violation { key, message })
        .collect()
}

/// Extra requirements of individual commands.
fn command_violations(command: Command, config: &RunConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    if matches!(command, Command::Exact | Command::Sample) && config.sample.is_none() {
        out.push(Violation {
            key: "sample".into(),
            message: format!("`{}` requires sample.N", command_name(command)),
        });
    }
    if command != Command::Bounds && config.output.is_none() {
        out.push(Violation {
            key: "output".into(),
            message: "an output directory is required (config `output` or --output)".into(),
        });
    }
    out
}

fn command_name(command: Command) -> &'static str {
    match command {
        Command::Bounds => "bounds",
        Command::Asymptotic => "asymptotic",
        Command::Exact => "exact",
        Command::Sample => "sample",
        Command::Compare => "compare",
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// Result of a successful command.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub stdout: String,
    pub stderr: String,
    pub files: Vec<PathBuf>,
}

struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        self.written.push(path.clone());
        fs::write(&path, contents)?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn remove_all(&self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

fn radial_csv(sol: &RadialSolution) -> String {
    let mut out = String::from("r,s,y,rho_s,nu_area\n");
    for row in &sol.grid {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_num(row.r),
            fmt_num(row.s),
            fmt_num(row.y),
            fmt_num(row.rho_s),
            fmt_num(row.nu_area)
        );
    }
    out
}

fn sample_config(config: &RunConfig, settings: &SampleSettings) -> SampleConfig {
    SampleConfig::from_measure(&config.measure, settings.n, settings.samples, settings.seed)
}

fn g_source(config: &RunConfig) -> serde_json::Value {
    serde_json::to_value(&config.measure).unwrap_or(serde_json::Value::Null)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub r: f64,
    pub y_asymptotic: f64,
    pub rho_s: f64,
    pub nu_area: f64,
    pub y_exact: Option<f64>,
    pub y_empirical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareMetrics {
    pub sup_cdf_distance_exact: Option<f64>,
    pub ks_empirical: Option<f64>,
    pub saddle_max_relative_error: Option<f64>,
    pub exact_normalization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub bounds: AnnulusBounds,
    pub atom_at_zero: f64,
    pub metrics: CompareMetrics,
    /// Routes that did not run, with the reason.
    pub skipped: Vec<SkippedRoute>,
    pub table: Vec<CompareRow>,
    pub provenance: ReportProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRoute {
    pub route: String,
    pub reason: String,
}

fn compare(config: &RunConfig) -> Result<CompareReport> {
    let m = config.measure.discretize()?;
    let solution = asymptotic::tabulate(&m, &config.grid)?;
    let mut skipped = Vec::new();

    let mut saddle_worst: Option<f64> = None;
    for row in solution.grid.iter().filter(|r| r.boundary.is_none()) {
        let diag = asymptotic::saddle_identity(&m, row.s)?;
        let err = diag.relative_difference();
        saddle_worst = Some(saddle_worst.map_or(err, |w| w.max(err)));
    }

    let mut exact_cdf: Option<Vec<f64>> = None;
    let mut sup_exact = None;
    let mut normalization = None;
    match &config.sample {
        None => skipped.push(SkippedRoute {
            route: "exact".into(),
            reason: "no sample.N configured".into(),
        }),
        Some(s) if s.n > config.exact_max_n => skipped.push(SkippedRoute {
            route: "exact".into(),
            reason: format!("N = {} exceeds exact_max_n = {}", s.n, config.exact_max_n),
        }),
        Some(s) => {
            let attempt = exact_n::ensemble_from_measure(&config.measure, s.n)
                .and_then(|e| exact_n::ExactProfile::build(&e, &config.quad));
            match attempt {
                Ok(profile) => {
                    let values: Vec<f64> = solution.grid.iter().map(|row| profile.cdf(row.s)).collect();
                    sup_exact = Some(
                        values
                            .iter()
                            .zip(&solution.grid)
                            .map(|(e, row)| (e - row.y).abs())
                            .fold(0.0, f64::max),
                    );
                    normalization = Some(profile.total());
                    exact_cdf = Some(values);
                }
                Err(e) => skipped.push(SkippedRoute {
                    route: "exact".into(),
                    reason: e.to_string(),
                }),
            }
        }
    }

    let mut empirical: Option<Vec<f64>> = None;
    let mut ks = None;
    match &config.sample {
        None => skipped.push(SkippedRoute {
            route: "sample".into(),
            reason: "no sample settings configured".into(),
        }),
        Some(settings) => {
            let es = ensemble::sample_moduli(&sample_config(config, settings))?;
            ks = Some(ensemble::ks_distance(&es, &m)?);
            empirical = Some(
                solution
                    .grid
                    .iter()
                    .map(|row| ensemble::empirical_cdf(&es, row.r))
                    .collect(),
            );
        }
    }

    let table = solution
        .grid
        .iter()
        .enumerate()
        .map(|(i, row)| CompareRow {
            r: row.r,
            y_asymptotic: row.y,
            rho_s: row.rho_s,
            nu_area: row.nu_area,
            y_exact: exact_cdf.as_ref().map(|v| v[i]),
            y_empirical: empirical.as_ref().map(|v| v[i]),
        })
        .collect();

    Ok(CompareReport {
        bounds: solution.bounds,
        atom_at_zero: solution.atom_at_zero,
        metrics: CompareMetrics {
            sup_cdf_distance_exact: sup_exact,
            ks_empirical: ks,
            saddle_max_relative_error: saddle_worst,
            exact_normalization: normalization,
        },
        skipped,
        table,
        provenance: ReportProvenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
        },
    })
}

fn compare_csv(report: &CompareReport) -> String {
    let mut out = String::from("r,y_asymptotic,rho_s,nu_area,y_exact,y_empirical\n");
    for row in &report.table {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(row.r),
            fmt_num(row.y_asymptotic),
            fmt_num(row.rho_s),
            fmt_num(row.nu_area),
            fmt_opt(row.y_exact),
            fmt_opt(row.y_empirical)
        );
    }
    out
}

fn execute(command: Command, config: &RunConfig, out: &mut Option<OutputDir>) -> Result<RunOutput> {
    let mut result = RunOutput::default();
    let dir = || -> Result<OutputDir> {
        let root = config
            .output
            .as_deref()
            .ok_or_else(|| Error::Config("no output directory".into()))?;
        OutputDir::new(root)
    };
    match command {
        Command::Bounds => {
            let m = config.measure.discretize()?;
            let bounds = asymptotic::annulus(&m);
            result.stdout = serde_json::to_string(&bounds).map_err(|e| Error::Config(e.to_string()))? + "\n";
        }
        Command::Asymptotic => {
            let m = config.measure.discretize()?;
            let solution = asymptotic::tabulate(&m, &config.grid)?;
            let d = out.insert(dir()?);
            result.files.push(d.write(RADIAL_CSV, &radial_csv(&solution))?);
        }
        Command::Exact => {
            let settings = config.sample.expect("validated");
            let m = config.measure.discretize()?;
            let e = exact_n::ensemble_from_measure(&config.measure, settings.n)?;
            let radii = config.grid.radii(&asymptotic::annulus(&m));
            let densities = radii
                .iter()
                .enumerate()
                .map(|(index, &r)| {
                    exact_n::exact_density(&e, r * r, &config.quad).map_err(|source| Error::GridPoint {
                        index,
                        r,
                        source: Box::new(source),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let normalization = exact_n::normalization_check(&e, &config.quad)?;
            let mut csv = String::from("s,density\n");
            for (r, d) in radii.iter().zip(&densities) {
                let _ = writeln!(csv, "{},{}", fmt_num(r * r), fmt_num(*d));
            }
            let d = out.insert(dir()?);
            result.files.push(d.write(EXACT_CSV, &csv)?);
            let summary = serde_json::json!({
                "N": settings.n,
                "normalization": normalization,
                "g": e.g(),
                "g_source": g_source(config),
            });
            result.files.push(d.write_json(EXACT_PROVENANCE, &summary)?);
            result.stderr = format!("{summary}\n");
        }
        Command::Sample => {
            let settings = config.sample.expect("validated");
            let es = ensemble::sample_moduli(&sample_config(config, &settings))?;
            let d = out.insert(dir()?);
            let path = d.root.join(MODULI_CSV);
            d.written.push(path.clone());
            ensemble::write_moduli_csv(&path, &es)?;
            result.files.push(path);
            let prov = ensemble::provenance(&es, g_source(config));
            result.files.push(d.write_json(MODULI_PROVENANCE, &prov)?);
            if !es.failed_samples.is_empty() {
                result.stderr = format!("{{\"failed_samples\":{:?}}}\n", es.failed_samples);
            }
        }
        Command::Compare => {
            let report = compare(config)?;
            let d = out.insert(dir()?);
            result.files.push(d.write_json(COMPARE_REPORT, &report)?);
            result.files.push(d.write(COMPARE_CSV, &compare_csv(&report))?);
        }
    }
    Ok(result)
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} threads: {e}")))?;
    Ok(pool.install(f))
}

/// Runs a validated configuration. On failure every file written by this
/// call is removed before the error is returned.
pub fn run(command: Command, config: &RunConfig) -> Result<RunOutput> {
    let violations: Vec<Violation> = validate(config)
        .into_iter()
        .chain(command_violations(command, config))
        .collect();
    if let Some(v) = violations.first() {
        return Err(Error::Config(format!("{}: {}", v.key, v.message)));
    }
    let mut out = None;
    let result = with_threads(config.threads, || execute(command, config, &mut out))?;
    if result.is_err() {
        if let Some(dir) = &out {
            dir.remove_all();
        }
    }
    result
}

fn is_validation(err: &Error) -> bool {
    matches!(
        err,
        Error::Config(_) | Error::InvalidMeasure(_) | Error::MeasureFile { .. } | Error::InvalidEnsemble(_) | Error::Domain { .. }
    )
}

fn diagnostic(err: &Error) -> String {
    serde_json::json!({
        "error": err.to_string(),
        "numerical": err.is_numerical(),
    })
    .to_string()
}

/// Full command-line entry point; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let Some(config_path) = &cli.config else {
        eprintln!("{}", diagnostic(&Error::Config("--config <path> is required".into())));
        return 1;
    };
    let mut config = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            return 1;
        }
    };
    if let Some(output) = cli.output {
        config.output = Some(output);
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    let violations: Vec<Violation> = validate(&config)
        .into_iter()
        .chain(command_violations(cli.command, &config))
        .collect();
    if !violations.is_empty() {
        eprintln!(
            "{}",
            serde_json::json!({ "error": "invalid configuration", "violations": violations })
        );
        return 1;
    }
    match run(cli.command, &config) {
        Ok(out) => {
            print!("{}", out.stdout);
            eprint!("{}", out.stderr);
            0
        }
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            if is_validation(&e) {
                1
            } else {
                2
            }
        }
    }
}
