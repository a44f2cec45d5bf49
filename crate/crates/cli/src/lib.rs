//! The `mqm` command line.
//!
//! Every subcommand reads the engine's canonical file formats, calls one
//! library operation and prints the resulting document as JSON on stdout.
//! Diagnostics go to stderr. Exit status: 0 success, 1 usage error, 2 invalid
//! input, 3 failed computation.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use mqm_core::calibration::replay_table;
use mqm_core::engine::render_table;
use mqm_core::metric::SeverityLevel;
use mqm_core::nonlinear::load_questionnaire;
use mqm_core::sqc::{oc_curve_table, uniform_grid};
use mqm_core::{
    default_core_metric, find_plan, fit_tolerance_curve, load_history, load_sample, oc_curve, replay, score_sample,
    select_method, validate_metric, Decimal, InspectionUnit, MetricSpec, ModelChoice, ScoreOptions, ToleranceCurve,
};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "mqm", version, about = "Translation quality scoring with MQM-style metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Raw,
    Calibrated,
    Nonlinear,
    Auto,
}

impl From<Model> for ModelChoice {
    fn from(model: Model) -> Self {
        match model {
            Model::Raw => ModelChoice::Raw,
            Model::Calibrated => ModelChoice::Calibrated,
            Model::Nonlinear => ModelChoice::Nonlinear,
            Model::Auto => ModelChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Sentence,
    Word,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one evaluation sample against a metric.
    Score {
        #[arg(long)]
        metric: PathBuf,
        /// Sample as JSON, or the tabular `ewc,<n>` + `error_type_id,severity,count` form.
        #[arg(long)]
        sample: PathBuf,
        #[arg(long, value_enum, default_value_t = Model::Auto)]
        model: Model,
        /// Tolerance curve to use instead of the metric's own.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// Allow the tolerance curve outside its surveyed range.
        #[arg(long)]
        extrapolate: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a logarithmic tolerance curve to questionnaire answers.
    Fit {
        /// JSON points, or CSV `sample_words,acceptable_penalty_points` / `sample_pages,acceptable_major_errors`.
        #[arg(long)]
        points: PathBuf,
        /// Metric whose Major multiplier converts error counts to penalty points (default 5).
        #[arg(long)]
        metric: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay historical holistic ratings against candidate metrics.
    Replay {
        #[arg(long)]
        history: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        candidates: Vec<PathBuf>,
        /// `table` prints one CSV row per candidate.
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Find the smallest single-sampling plan meeting both risk bounds.
    Plan {
        #[arg(long)]
        aql: f64,
        #[arg(long)]
        rql: f64,
        /// Largest acceptable producer's risk.
        #[arg(long)]
        alpha: f64,
        /// Largest acceptable consumer's risk.
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 1000)]
        n_max: u64,
        #[arg(long, value_enum, default_value_t = Unit::Sentence)]
        unit: Unit,
    },
    /// Print the operating characteristic curve of a plan as `p,pa` rows.
    Oc {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        c: u64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
    /// Show which method a sample size routes to.
    Route {
        #[arg(long)]
        ewc: u64,
        /// Defaults to the built-in core metric.
        #[arg(long)]
        metric: Option<PathBuf>,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Check a metric definition; prints every violation.
    Validate {
        #[arg(long)]
        metric: PathBuf,
    },
    /// Print the built-in core metric as a starting point.
    DefaultMetric,
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, env = "MQM_DATA_DIR", default_value = "mqm-data")]
        data: PathBuf,
        /// Browser origin allowed to call the API; repeatable, `*` for any.
        #[arg(long = "cors-origin", env = "MQM_CORS_ORIGIN", value_delimiter = ',')]
        cors_origins: Vec<String>,
    },
}

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Computation(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Computation(m) => f.write_str(m),
        }
    }
}

impl From<mqm_core::Error> for CliError {
    fn from(err: mqm_core::Error) -> Self {
        if err.is_validation() {
            CliError::Validation(err.to_string())
        } else {
            CliError::Computation(err.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))
}

fn read_metric(path: &Path) -> CliResult<MetricSpec> {
    MetricSpec::from_json(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn read_curve(path: &Path) -> CliResult<ToleranceCurve> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::Validation(format!("{}: malformed document: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("documents serialize");
    text.push('\n');
    text
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::Computation(format!("cannot write {}: {e}", path.display())))
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Computation(format!("cannot write output: {e}"))),
    }
}

fn major_multiplier(spec: &MetricSpec) -> Decimal {
    spec.severity
        .levels
        .iter()
        .find(|l| l.name.eq_ignore_ascii_case("major"))
        .map_or(Decimal::from(5), |l: &SeverityLevel| l.multiplier)
}

/// Runs a parsed command, writing documents to `stdout` and notes to `stderr`.
pub fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Score {
            metric,
            sample,
            model,
            curve,
            extrapolate,
            format,
            out,
        } => {
            let mut spec = read_metric(&metric)?;
            if let Some(curve) = curve {
                spec.curve = Some(read_curve(&curve)?);
            }
            let sample = load_sample(&read(&sample)?)?;
            let options = ScoreOptions {
                model: model.into(),
                extrapolate,
            };
            let report = score_sample(&sample, &spec, options)?;
            for warning in &report.warnings {
                let _ = writeln!(stderr, "warning: {warning}");
            }
            let text = match format {
                Format::Json => to_json(&report),
                Format::Table => render_table(&report, spec.rounding_decimals),
            };
            emit(&text, out.as_deref(), stdout)
        }
        Command::Fit { points, metric, out } => {
            let multiplier = match metric {
                Some(path) => major_multiplier(&read_metric(&path)?),
                None => Decimal::from(5),
            };
            let points = load_questionnaire(&read(&points)?, multiplier)?;
            let curve = fit_tolerance_curve(&points)?;
            for note in &curve.diagnostics {
                let _ = writeln!(stderr, "note: {note}");
            }
            emit(&to_json(&curve), out.as_deref(), stdout)
        }
        Command::Replay {
            history,
            candidates,
            format,
        } => {
            let history = load_history(&read(&history)?)?;
            let candidates = candidates
                .iter()
                .map(|p| read_metric(p))
                .collect::<CliResult<Vec<_>>>()?;
            let results = replay(&history, &candidates)?;
            let text = match format {
                Format::Json => to_json(&results),
                Format::Table => replay_table(&results),
            };
            emit(&text, None, stdout)
        }
        Command::Plan {
            aql,
            rql,
            alpha,
            beta,
            n_max,
            unit,
        } => {
            let unit = match unit {
                Unit::Sentence => InspectionUnit::Sentence,
                Unit::Word => InspectionUnit::Word,
            };
            let plan = find_plan(aql, rql, alpha, beta, n_max, unit)?;
            emit(&to_json(&plan), None, stdout)
        }
        Command::Oc { n, c, steps } => {
            let points = oc_curve(n, c, &uniform_grid(steps))?;
            emit(&oc_curve_table(&points), None, stdout)
        }
        Command::Route { ewc, metric, curve } => {
            let mut spec = match metric {
                Some(path) => read_metric(&path)?,
                None => default_core_metric()?,
            };
            if let Some(curve) = curve {
                spec.curve = Some(read_curve(&curve)?);
            }
            spec.validated()?;
            if ewc == 0 {
                return Err(CliError::Validation("ewc must be ≥ 1".into()));
            }
            emit(&to_json(&select_method(ewc, &spec)), None, stdout)
        }
        Command::Validate { metric } => {
            let spec = read_metric(&metric)?;
            let report = validate_metric(&spec);
            emit(&to_json(&report), None, stdout)?;
            if report.is_valid() {
                Ok(())
            } else {
                Err(CliError::Validation(format!(
                    "{}: {} violation(s)",
                    metric.display(),
                    report.violations.len()
                )))
            }
        }
        Command::DefaultMetric => emit(&to_json(&default_core_metric()?), None, stdout),
        Command::Serve {
            port,
            host,
            data,
            cors_origins,
        } => {
            let config = mqm_service::ServiceConfig {
                addr: SocketAddr::new(host, port),
                data_dir: data,
                cors_origins,
            };
            let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Computation(e.to_string()))?;
            runtime
                .block_on(mqm_service::serve(config))
                .map_err(|e| CliError::Computation(format!("service failed: {e}")))
        }
    }
}

/// Parses `args` and runs the command; returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let rendered = err.render().to_string();
            let _ = if code == 0 {
                stdout.write_all(rendered.as_bytes())
            } else {
                stderr.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            err.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (u8, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("mqm").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_and_version_succeed() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("score"));
        assert_eq!(run_args(&["--version"]).0, 0);
    }

    #[test]
    fn usage_errors_exit_1() {
        let (code, _, err) = run_args(&["score", "--sample", "x.json"]);
        assert_eq!(code, 1);
        assert!(err.contains("--metric"));
        assert_eq!(run_args(&["frobnicate"]).0, 1);
        assert_eq!(run_args(&["plan", "--aql", "lots"]).0, 1);
    }

    #[test]
    fn error_classes() {
        assert_eq!(CliError::from(mqm_core::Error::Precondition("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(mqm_core::Error::Fit("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(mqm_core::Error::NoPlan(5)).exit_code(), 3);
    }

    #[test]
    fn plan_contract_violation_exits_2() {
        let (code, out, err) = run_args(&[
            "plan", "--aql", "0.3", "--rql", "0.1", "--alpha", "0.05", "--beta", "0.1",
        ]);
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(err.contains("rql (0.1) must exceed aql (0.3)"));
    }

    #[test]
    fn unsatisfiable_plan_exits_3() {
        let args = [
            "plan", "--aql", "0.01", "--rql", "0.02", "--alpha", "0.01", "--beta", "0.01", "--n-max", "5",
        ];
        assert_eq!(run_args(&args).0, 3);
    }

    #[test]
    fn default_metric_validates() {
        let (code, out, _) = run_args(&["default-metric"]);
        assert_eq!(code, 0);
        assert_eq!(MetricSpec::from_json(&out).unwrap(), default_core_metric().unwrap());
    }
}
