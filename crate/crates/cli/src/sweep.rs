//! Threshold sweeps comparing the asymptotic tiers against an oracle.

use std::io::Write;
use std::path::Path;

use prodtail_core::asymptotic::{balanced_scale, theorem1_estimate};
use prodtail_core::oracle::{mc_estimate, tail_quadrature, McConfig, Proposal, QuadratureConfig, MAX_QUADRATURE_N};
use prodtail_core::saddle::saddle_sum_estimate;
use prodtail_core::{Error, ErrorKind, Method, ProductModel, Result, TailEstimate};
use rayon::prelude::*;
use serde::Serialize;

use crate::format::{csv_number, write_atomic};

/// Quadrature is only attempted when the predicted log-probability is at
/// least this large.
pub const QUADRATURE_LOG_P_FLOOR: f64 = -700.0;

pub const CSV_COLUMNS: [&str; 9] = [
    "x",
    "r",
    "log10_theorem1",
    "log10_saddle_sum",
    "log10_oracle",
    "oracle_method",
    "mc_stderr_rel",
    "rel_err_theorem1",
    "rel_err_saddle_sum",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Geometric,
    Linear,
}

impl std::str::FromStr for Spacing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Self::Geometric),
            "linear" => Ok(Self::Linear),
            other => Err(Error::InvalidArgument(format!("unknown spacing '{other}'"))),
        }
    }
}

impl Spacing {
    fn as_str(self) -> &'static str {
        match self {
            Self::Geometric => "geometric",
            Self::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub spacing: Spacing,
    /// Requested tiers. Oracle tiers are tried in the order quadrature,
    /// importance-sampled MC, plain MC.
    pub tiers: Vec<Method>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_min > 0.0 && self.x_min.is_finite() && self.x_max.is_finite()) {
            return Err(Error::InvalidArgument(
                "x_min and x_max must be positive and finite".into(),
            ));
        }
        if self.x_min >= self.x_max {
            return Err(Error::InvalidArgument("x_min must be below x_max".into()));
        }
        if self.points < 2 {
            return Err(Error::InvalidArgument("a sweep needs at least two points".into()));
        }
        if self.tiers.is_empty() {
            return Err(Error::InvalidArgument("the tier set is empty".into()));
        }
        Ok(())
    }

    /// Grid with exact endpoints.
    pub fn grid(&self) -> Vec<f64> {
        let last = self.points - 1;
        (0..self.points)
            .map(|i| match i {
                0 => self.x_min,
                i if i == last => self.x_max,
                // Decade grids land on exact powers of ten.
                i => match self.spacing {
                    Spacing::Geometric => {
                        let (lo, hi) = (self.x_min.log10(), self.x_max.log10());
                        10f64.powf(lo + i as f64 * (hi - lo) / last as f64)
                    }
                    Spacing::Linear => self.x_min + i as f64 * (self.x_max - self.x_min) / last as f64,
                },
            })
            .collect()
    }

    fn has(&self, m: Method) -> bool {
        self.tiers.contains(&m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSettings {
    pub samples: u64,
    pub seed: u64,
    pub shards: u32,
    pub quadrature: QuadratureConfig,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            seed: 20_240_601,
            shards: 16,
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub x: f64,
    pub r: f64,
    pub log10_theorem1: Option<f64>,
    pub log10_saddle_sum: Option<f64>,
    pub log10_oracle: Option<f64>,
    pub oracle_method: Option<Method>,
    pub mc_stderr_rel: Option<f64>,
    pub rel_err_theorem1: Option<f64>,
    pub rel_err_saddle_sum: Option<f64>,
}

/// Asymptotic tiers outside their regime leave an empty cell; anything
/// else aborts the sweep.
fn optional(result: Result<TailEstimate>) -> Result<Option<TailEstimate>> {
    match result {
        Ok(est) => Ok(Some(est)),
        Err(e) if e.kind() == ErrorKind::NumericalRegime => Ok(None),
        Err(e) => Err(e),
    }
}

fn oracle(
    model: &ProductModel,
    x: f64,
    spec: &SweepSpec,
    settings: &OracleSettings,
    predicted: Option<f64>,
) -> Result<Option<TailEstimate>> {
    let quadrature_ok = model.n() <= MAX_QUADRATURE_N && predicted.is_none_or(|lp| lp >= QUADRATURE_LOG_P_FLOOR);
    let mc = |proposal| {
        let cfg = McConfig {
            n_samples: settings.samples,
            seed: settings.seed,
            shards: settings.shards,
            proposal,
        };
        mc_estimate(model, x, &cfg)
    };
    if spec.has(Method::Quadrature) && quadrature_ok {
        tail_quadrature(model, x, &settings.quadrature).map(Some)
    } else if spec.has(Method::McImportance) {
        mc(Proposal::SaddleTilt).map(Some)
    } else if spec.has(Method::McPlain) {
        mc(Proposal::Plain).map(Some)
    } else {
        Ok(None)
    }
}

fn rel_err(estimate: Option<&TailEstimate>, reference: Option<&TailEstimate>) -> Option<f64> {
    Some((estimate?.log_p - reference?.log_p).exp_m1().abs())
}

fn evaluate(model: &ProductModel, x: f64, spec: &SweepSpec, settings: &OracleSettings) -> Result<SweepRow> {
    let theorem1 = if spec.has(Method::Theorem1) {
        optional(theorem1_estimate(model, x).map(|(e, _)| e))?
    } else {
        None
    };
    let saddle = if spec.has(Method::SaddleSum) {
        optional(saddle_sum_estimate(model, x))?
    } else {
        None
    };
    let predicted = theorem1
        .as_ref()
        .or(saddle.as_ref())
        .map(|e| e.log_p)
        .or_else(|| theorem1_estimate(model, x).ok().map(|(e, _)| e.log_p));
    let reference = oracle(model, x, spec, settings, predicted)?;
    Ok(SweepRow {
        x,
        r: balanced_scale(model, x),
        log10_theorem1: theorem1.as_ref().map(TailEstimate::log10_p),
        log10_saddle_sum: saddle.as_ref().map(TailEstimate::log10_p),
        log10_oracle: reference.as_ref().map(TailEstimate::log10_p),
        oracle_method: reference.as_ref().map(|e| e.method),
        mc_stderr_rel: reference.as_ref().and_then(|e| e.rel_stderr),
        rel_err_theorem1: rel_err(theorem1.as_ref(), reference.as_ref()),
        rel_err_saddle_sum: rel_err(saddle.as_ref(), reference.as_ref()),
    })
}

/// Evaluate every grid point; points run concurrently and rows come back in
/// grid order. The first error in grid order is returned.
pub fn run_sweep(model: &ProductModel, spec: &SweepSpec, settings: &OracleSettings) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let rows: Vec<Result<SweepRow>> = spec
        .grid()
        .par_iter()
        .map(|&x| evaluate(model, x, spec, settings))
        .collect();
    rows.into_iter().collect()
}

fn tier_list(spec: &SweepSpec) -> String {
    spec.tiers.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(" ")
}

fn cell(v: Option<f64>) -> String {
    v.map(csv_number).unwrap_or_default()
}

pub fn render_csv(model: &ProductModel, spec: &SweepSpec, settings: &OracleSettings, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!("# model: {}\n", model.to_json_string()));
    out.push_str(&format!("# seed: {}\n", settings.seed));
    out.push_str(&format!(
        "# config: x_min={} x_max={} points={} spacing={} tiers={} samples={} shards={} quad_rel_tol={}\n",
        csv_number(spec.x_min),
        csv_number(spec.x_max),
        spec.points,
        spec.spacing.as_str(),
        tier_list(spec),
        settings.samples,
        settings.shards,
        csv_number(settings.quadrature.rel_tol),
    ));
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for row in rows {
        let fields = [
            csv_number(row.x),
            csv_number(row.r),
            cell(row.log10_theorem1),
            cell(row.log10_saddle_sum),
            cell(row.log10_oracle),
            row.oracle_method.map(|m| m.as_str().to_string()).unwrap_or_default(),
            cell(row.mc_stderr_rel),
            cell(row.rel_err_theorem1),
            cell(row.rel_err_saddle_sum),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    model: &'a ProductModel,
    seed: u64,
    spec: &'a SweepSpec,
    settings: &'a OracleSettings,
    rows: &'a [SweepRow],
}

pub fn render_json(model: &ProductModel, spec: &SweepSpec, settings: &OracleSettings, rows: &[SweepRow]) -> String {
    let doc = SweepDocument {
        model,
        seed: settings.seed,
        spec,
        settings,
        rows,
    };
    serde_json::to_string_pretty(&doc).expect("sweep rows serialize") + "\n"
}

/// Write the rendered sweep to `path` in one step, or to `sink`.
pub fn emit(text: &str, path: Option<&Path>, sink: &mut impl Write) -> std::io::Result<()> {
    match path {
        Some(p) => write_atomic(p, text),
        None => sink.write_all(text.as_bytes()),
    }
}
