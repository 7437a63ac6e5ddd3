//! Argument parsing and subcommand dispatch for the `prodtail` binary.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use prodtail_core::asymptotic::{theorem1_estimate, AsymptoticBreakdown};
use prodtail_core::oracle::{mc_estimate, tail_quadrature, McConfig, Proposal, QuadratureConfig};
use prodtail_core::saddle::saddle_sum_estimate;
use prodtail_core::signpat::{optimize_brute, optimize_linear, SignOptimum};
use prodtail_core::{Error, ErrorKind, Method, ProductModel, TailEstimate};
use serde::Serialize;

use crate::format::{csv_number, key_value_csv, write_atomic};
use crate::sweep::{render_csv, render_json, run_sweep, OracleSettings, Spacing, SweepSpec};
use crate::validate::{self, Scope};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;
pub const EXIT_REGIME: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "prodtail",
    version,
    about = "Tail probabilities of products of independent normals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Output {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single-point estimate from one tier.
    Approx {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value = "theorem1")]
        tier: Method,
        #[command(flatten)]
        output: Output,
    },
    /// Quadrature reference value (n <= 4).
    Oracle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        #[arg(long, default_value_t = 1e-10)]
        rel_tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo estimate.
    Mc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        x: f64,
        /// Defaults to 10^7 for plain sampling and 10^6 for the tilted proposal.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value = "plain")]
        proposal: Proposal,
        #[arg(long, default_value_t = 16)]
        shards: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Threshold sweep comparing tiers against an oracle.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1e1)]
        x_min: f64,
        #[arg(long, default_value_t = 1e8)]
        x_max: f64,
        #[arg(long, default_value_t = 15)]
        points: usize,
        #[arg(long, default_value = "geometric")]
        spacing: Spacing,
        /// Comma-separated tiers; all five by default.
        #[arg(long, value_delimiter = ',')]
        tier: Vec<Method>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        shards: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Optimal sign patterns for the model.
    Signopt {
        #[arg(long)]
        model: PathBuf,
        /// Enumerate every admissible pattern instead of the linear scan.
        #[arg(long)]
        brute: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Run the validation suite.
    Validate {
        #[arg(long, default_value = "fast")]
        scope: Scope,
        #[command(flatten)]
        output: Output,
    },
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
enum Failure {
    Core(Error),
    Io(String),
    Validation,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Input => EXIT_INPUT,
        ErrorKind::NumericalRegime => EXIT_REGIME,
        ErrorKind::Internal => EXIT_INTERNAL,
    }
}

fn emit(text: &str, output: &Output, stdout: &mut dyn Write) -> Result<(), Failure> {
    match &output.out {
        Some(path) => write_atomic(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(e.to_string())),
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(csv_number).unwrap_or_default()
}

fn estimate_fields(est: &TailEstimate) -> Vec<(&'static str, String)> {
    vec![
        ("method", est.method.as_str().to_string()),
        ("log_p", csv_number(est.log_p)),
        ("log10_p", csv_number(est.log10_p())),
        ("p", est.p.map(csv_number).unwrap_or_else(|| "underflow".into())),
        ("stderr", opt_num(est.stderr)),
        ("rel_stderr", opt_num(est.rel_stderr)),
        ("rel_accuracy", opt_num(est.rel_accuracy)),
        ("n_samples", est.n_samples.map(|v| v.to_string()).unwrap_or_default()),
        ("seed", est.seed.map(|v| v.to_string()).unwrap_or_default()),
    ]
}

fn breakdown_fields(b: &AsymptoticBreakdown) -> Vec<(&'static str, String)> {
    vec![
        ("r", csv_number(b.r)),
        ("l_star", csv_number(b.l_star)),
        ("m_star", b.m_star.count.map(|c| c.to_string()).unwrap_or_default()),
        ("m_star_log2", csv_number(b.m_star.log2)),
        ("log_c", csv_number(b.log_c)),
        ("exp_quadratic", csv_number(b.exp_quadratic)),
        ("exp_linear", csv_number(b.exp_linear)),
        ("exp_const", csv_number(b.exp_const)),
        ("log_prefactor", csv_number(b.log_prefactor)),
        ("log_total", csv_number(b.log_total)),
        ("regime_warning", b.regime_warning.to_string()),
    ]
}

#[derive(Serialize)]
struct EstimateDocument<'a> {
    estimate: &'a TailEstimate,
    #[serde(skip_serializing_if = "Option::is_none")]
    breakdown: Option<&'a AsymptoticBreakdown>,
}

fn render_estimate(est: &TailEstimate, breakdown: Option<&AsymptoticBreakdown>, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut fields = estimate_fields(est);
            if let Some(b) = breakdown {
                fields.extend(breakdown_fields(b));
            }
            key_value_csv(&fields)
        }
        Format::Json => {
            let doc = EstimateDocument {
                estimate: est,
                breakdown,
            };
            serde_json::to_string_pretty(&doc).expect("estimate serializes") + "\n"
        }
    }
}

fn load(path: &Path) -> Result<ProductModel, Failure> {
    Ok(ProductModel::read_file(path)?)
}

fn default_samples(proposal: Proposal) -> u64 {
    match proposal {
        Proposal::Plain => 10_000_000,
        Proposal::SaddleTilt => 1_000_000,
    }
}

fn single_point(
    model: &ProductModel,
    x: f64,
    tier: Method,
) -> Result<(TailEstimate, Option<AsymptoticBreakdown>), Error> {
    let mc = |proposal| {
        mc_estimate(
            model,
            x,
            &McConfig::new(default_samples(proposal), DEFAULT_SEED, proposal),
        )
    };
    Ok(match tier {
        Method::Theorem1 => {
            let (e, b) = theorem1_estimate(model, x)?;
            (e, Some(b))
        }
        Method::SaddleSum => (saddle_sum_estimate(model, x)?, None),
        Method::Quadrature => (tail_quadrature(model, x, &QuadratureConfig::default())?, None),
        Method::McPlain => (mc(Proposal::Plain)?, None),
        Method::McImportance => (mc(Proposal::SaddleTilt)?, None),
    })
}

#[derive(Serialize)]
struct SignDocument<'a> {
    method: &'static str,
    n: usize,
    #[serde(flatten)]
    optimum: &'a SignOptimum,
}

fn render_signopt(opt: &SignOptimum, method: &'static str, n: usize, format: Format) -> String {
    match format {
        Format::Csv => {
            let witnesses: Vec<String> = opt.witnesses.iter().map(|w| w.to_string()).collect();
            key_value_csv(&[
                ("method", method.to_string()),
                ("n", n.to_string()),
                ("l_star", csv_number(opt.l_star)),
                ("m_star", opt.m_star.count.map(|c| c.to_string()).unwrap_or_default()),
                ("m_star_log2", csv_number(opt.m_star.log2)),
                ("witnesses", witnesses.join(" ")),
            ])
        }
        Format::Json => {
            let doc = SignDocument {
                method,
                n,
                optimum: opt,
            };
            serde_json::to_string_pretty(&doc).expect("sign optimum serializes") + "\n"
        }
    }
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn render_checks(checks: &[validate::Check], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut out = String::from("id,name,status,seconds,budget_seconds,measured\n");
            for c in checks {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.id,
                    csv_quote(c.name),
                    if c.passed { "pass" } else { "fail" },
                    csv_number(c.seconds),
                    csv_number(c.budget_seconds),
                    csv_quote(&c.measured)
                ));
            }
            out
        }
        Format::Json => serde_json::to_string_pretty(checks).expect("checks serialize") + "\n",
    }
}

fn execute(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Approx { model, x, tier, output } => {
            let m = load(&model)?;
            let (est, breakdown) = single_point(&m, x, tier)?;
            emit(
                &render_estimate(&est, breakdown.as_ref(), output.format),
                &output,
                stdout,
            )
        }
        Command::Oracle {
            model,
            x,
            rel_tol,
            output,
        } => {
            let m = load(&model)?;
            let cfg = QuadratureConfig {
                rel_tol,
                ..QuadratureConfig::default()
            };
            let est = tail_quadrature(&m, x, &cfg)?;
            emit(&render_estimate(&est, None, output.format), &output, stdout)
        }
        Command::Mc {
            model,
            x,
            samples,
            seed,
            proposal,
            shards,
            output,
        } => {
            let m = load(&model)?;
            let cfg = McConfig {
                n_samples: samples.unwrap_or_else(|| default_samples(proposal)),
                seed,
                shards,
                proposal,
            };
            let est = mc_estimate(&m, x, &cfg)?;
            emit(&render_estimate(&est, None, output.format), &output, stdout)
        }
        Command::Sweep {
            model,
            x_min,
            x_max,
            points,
            spacing,
            tier,
            samples,
            seed,
            shards,
            output,
        } => {
            let m = load(&model)?;
            let spec = SweepSpec {
                x_min,
                x_max,
                points,
                spacing,
                tiers: if tier.is_empty() { Method::ALL.to_vec() } else { tier },
            };
            let settings = OracleSettings {
                samples,
                seed,
                shards,
                ..OracleSettings::default()
            };
            let rows = run_sweep(&m, &spec, &settings)?;
            let text = match output.format {
                Format::Csv => render_csv(&m, &spec, &settings, &rows),
                Format::Json => render_json(&m, &spec, &settings, &rows),
            };
            emit(&text, &output, stdout)
        }
        Command::Signopt { model, brute, output } => {
            let m = load(&model)?;
            let (opt, method) = if brute {
                (optimize_brute(&m)?, "brute")
            } else {
                (optimize_linear(&m), "linear")
            };
            emit(&render_signopt(&opt, method, m.n(), output.format), &output, stdout)
        }
        Command::Validate { scope, output } => {
            let checks = validate::run(scope);
            for c in &checks {
                let _ = writeln!(stderr, "{}", c.line());
            }
            emit(&render_checks(&checks, output.format), &output, stdout)?;
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Failure::Validation)
            }
        }
    }
}

fn command_format(command: &Command) -> Format {
    match command {
        Command::Approx { output, .. }
        | Command::Oracle { output, .. }
        | Command::Mc { output, .. }
        | Command::Sweep { output, .. }
        | Command::Signopt { output, .. }
        | Command::Validate { output, .. } => output.format,
    }
}

fn report(tag: &str, message: &str, format: Format, stderr: &mut dyn Write) {
    let _ = match format {
        Format::Csv => writeln!(stderr, "error[{tag}]: {message}"),
        Format::Json => writeln!(stderr, "{}", serde_json::json!({ "error": tag, "message": message })),
    };
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let format = command_format(&cli.command);
    match execute(cli.command, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(Failure::Core(e)) => {
            report(e.tag(), &e.to_string(), format, stderr);
            exit_code(e.kind())
        }
        Err(Failure::Io(msg)) => {
            report("io-error", &msg, format, stderr);
            EXIT_INPUT
        }
        Err(Failure::Validation) => EXIT_VALIDATION_FAILED,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run_args(&["prodtail"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["prodtail", "validate", "--scope", "bogus"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["prodtail", "approx", "--model", "m.json"]).0, EXIT_USAGE);
        assert_eq!(
            run_args(&["prodtail", "sweep", "--model", "m.json", "--tier", ""]).0,
            EXIT_USAGE
        );
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["prodtail", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("sweep"));
    }

    #[test]
    fn missing_model_file_is_input_error() {
        let (code, _, err) = run_args(&["prodtail", "approx", "--model", "/nonexistent/m.json", "--x", "10"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.starts_with("error[parse-error]"));
    }

    #[test]
    fn exit_codes_by_kind() {
        assert_eq!(exit_code(ErrorKind::Input), 3);
        assert_eq!(exit_code(ErrorKind::NumericalRegime), 4);
        assert_eq!(exit_code(ErrorKind::Internal), 5);
    }

    #[test]
    fn quoting() {
        assert_eq!(csv_quote("a, \"b\""), "\"a, \"\"b\"\"\"");
    }
}
