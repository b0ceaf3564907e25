use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rrkit_core::design::{design_device, p0_table};
use rrkit_core::estimation::estimate;
use rrkit_core::privacy::privacy_report;
use rrkit_core::simulation::{records_to_csv, run_replicates, SimulationConfig};
use rrkit_core::survey::{Survey, SurveyDocument};
use rrkit_core::verify::{printed, run_verification, Formulas, DEFAULT_GRID_STEP};
use rrkit_core::{json, Device, ResponseSample};

const THREADS_ENV: &str = "RRKIT_THREADS";

#[derive(Parser)]
#[command(
    name = "rrkit",
    version,
    about = "Randomized response survey design and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    /// Variance of the mean with the last term's sign flipped.
    PrintedMeanVariance,
    /// Summed proportion variance with the `1/m` term's sign flipped.
    PrintedProportionVariance,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the efficiency-maximizing device parameter for a privacy policy.
    Design {
        #[arg(long)]
        survey: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate p0 for all-stigmatizing designs.
    Table {
        /// Comma-separated support sizes.
        #[arg(long)]
        m: String,
        /// Comma-separated privacy thresholds.
        #[arg(long)]
        xi: String,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo replication of a survey.
    Simulate {
        #[arg(long)]
        survey: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        replicates: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Device parameter; defaults to the survey's `p`, then to the designed p0.
        #[arg(long)]
        p: Option<f64>,
        /// Summary JSON destination (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-replicate CSV destination.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Estimate the mean and proportions from observed response counts.
    Estimate {
        #[arg(long)]
        survey: PathBuf,
        /// JSON file holding `[c1, .., cm]` or `{"counts": [..]}`.
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Privacy measures of a device for a known population.
    Privacy {
        #[arg(long)]
        survey: PathBuf,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every closed form against the brute-force oracles.
    Verify {
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        grid_step: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Substitute a known-wrong formula to exercise the harness.
        #[arg(long, value_enum, hide = true)]
        inject: Option<Fault>,
    },
}

#[derive(Debug)]
enum CliError {
    Validation { code: String, message: String },
    Io { message: String },
    VerificationFailed,
}

impl CliError {
    fn validation(code: &str, message: impl Into<String>) -> Self {
        Self::Validation {
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::VerificationFailed => 1,
            CliError::Validation { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<rrkit_core::Error> for CliError {
    fn from(e: rrkit_core::Error) -> Self {
        CliError::validation(e.code(), e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorDocument<'a> {
    code: &'a str,
    message: &'a str,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, message) = match &err {
                CliError::Validation { code, message } => (code.as_str(), message.as_str()),
                CliError::Io { message } => ("IO_ERROR", message.as_str()),
                CliError::VerificationFailed => ("VERIFICATION_FAILED", "oracle disagreement"),
            };
            let doc = serde_json::to_string(&ErrorDocument { code, message })
                .unwrap_or_else(|_| format!("{{\"code\":\"{code}\"}}"));
            eprintln!("{doc}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Design { survey, out } => {
            let survey = load_survey(&survey)?;
            let policy = survey.policy.as_ref().ok_or_else(|| {
                CliError::validation("MISSING_PRIVACY", "survey has no `privacy` object")
            })?;
            let design = design_device(policy)?;
            emit(out.as_deref(), &to_json(&design.certificate)?)
        }
        Command::Table { m, xi, format, out } => {
            let ms: Vec<usize> = parse_list(&m, "--m")?;
            let xis: Vec<f64> = parse_list(&xi, "--xi")?;
            let table = p0_table(&ms, &xis)?;
            let text = match format {
                Format::Json => to_json(&table)?,
                _ => table.to_csv(),
            };
            emit(out.as_deref(), &text)
        }
        Command::Simulate {
            survey,
            n,
            replicates,
            seed,
            p,
            out,
            records,
        } => {
            let survey = load_survey(&survey)?;
            let device = resolve_device(&survey, p)?;
            let population = survey.population.clone().ok_or_else(|| {
                CliError::validation("MISSING_PI", "simulation needs `pi` in the survey")
            })?;
            let config = SimulationConfig::new(
                survey.support.clone(),
                population,
                device,
                n,
                replicates,
                seed,
            )?;
            let summary = run_replicates(&config, threads_from_env()?, records.is_some())?;
            if let (Some(path), Some(recs)) = (records.as_deref(), summary.records.as_ref()) {
                write_file(path, &records_to_csv(recs, survey.support.len()))?;
            }
            emit(out.as_deref(), &to_json(&summary)?)
        }
        Command::Estimate {
            survey,
            counts,
            p,
            out,
        } => {
            let survey = load_survey(&survey)?;
            let device = resolve_device(&survey, p)?;
            let counts = load_counts(&counts)?;
            if counts.len() != survey.support.len() {
                return Err(rrkit_core::Error::DimensionMismatch {
                    expected: survey.support.len(),
                    actual: counts.len(),
                }
                .into());
            }
            let sample = ResponseSample::new(counts)?;
            let report = estimate(&sample, &device, &survey.support)?;
            emit(out.as_deref(), &to_json(&report)?)
        }
        Command::Privacy { survey, p, out } => {
            let survey = load_survey(&survey)?;
            let device = resolve_device(&survey, p)?;
            let population = survey.population.as_ref().ok_or_else(|| {
                CliError::validation("MISSING_PI", "privacy measures need `pi` in the survey")
            })?;
            let policy = survey.policy.as_ref().ok_or_else(|| {
                CliError::validation("MISSING_PRIVACY", "survey has no `privacy` object")
            })?;
            let report = privacy_report(&device, population, policy)?;
            emit(out.as_deref(), &to_json(&report)?)
        }
        Command::Verify {
            grid_step,
            format,
            out,
            inject,
        } => {
            let mut formulas = Formulas::default();
            match inject {
                Some(Fault::PrintedMeanVariance) => formulas.variance_mean = printed::variance_mean,
                Some(Fault::PrintedProportionVariance) => {
                    formulas.avg_variance_proportions = printed::avg_variance_proportions
                }
                None => {}
            }
            let report = run_verification(&formulas, grid_step)?;
            let text = match format {
                Format::Json => to_json(&report)?,
                _ => report.to_text(),
            };
            emit(out.as_deref(), &text)?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::VerificationFailed)
            }
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        message: format!("{}: {e}", path.display()),
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io {
        message: format!("{}: {e}", path.display()),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    json::to_string(value).map_err(|e| CliError::validation("SERIALIZATION", e.to_string()))
}

fn load_survey(path: &Path) -> Result<Survey, CliError> {
    let text = read_file(path)?;
    let doc = SurveyDocument::from_json(&text)
        .map_err(|e| CliError::validation("INVALID_SURVEY", format!("{}: {e}", path.display())))?;
    Ok(doc.into_survey()?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CountsDocument {
    Bare(Vec<u64>),
    Object { counts: Vec<u64> },
}

fn load_counts(path: &Path) -> Result<Vec<u64>, CliError> {
    let text = read_file(path)?;
    let doc: CountsDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::validation("INVALID_COUNTS", format!("{}: {e}", path.display())))?;
    Ok(match doc {
        CountsDocument::Bare(c) | CountsDocument::Object { counts: c } => c,
    })
}

/// `--p`, then the survey's `p`, then the p0 designed from its policy.
fn resolve_device(survey: &Survey, p: Option<f64>) -> Result<Device, CliError> {
    let m = survey.support.len();
    if let Some(p) = p.or(survey.p) {
        return Ok(Device::new(p, m)?);
    }
    match &survey.policy {
        Some(policy) => Ok(design_device(policy)?.device),
        None => Err(CliError::validation(
            "MISSING_P",
            "no device parameter: pass --p, set `p`, or give a `privacy` policy",
        )),
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str, flag: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<&str> = raw
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(CliError::validation(
            "EMPTY_GRID",
            format!("{flag} needs at least one value"),
        ));
    }
    items
        .iter()
        .map(|s| {
            s.parse().map_err(|_| {
                CliError::validation("INVALID_GRID", format!("{flag}: cannot parse `{s}`"))
            })
        })
        .collect()
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v.trim().parse::<usize>().map(Some).map_err(|_| {
            CliError::validation(
                "INVALID_THREADS",
                format!("{THREADS_ENV}=`{v}` is not a count"),
            )
        }),
        _ => Ok(None),
    }
}
