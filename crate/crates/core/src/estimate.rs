use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::Error;
use crate::logspace::to_linear;

/// Which estimator produced a [`TailEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Theorem1,
    SaddleSum,
    Quadrature,
    McPlain,
    McImportance,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Theorem1,
        Method::SaddleSum,
        Method::Quadrature,
        Method::McPlain,
        Method::McImportance,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Theorem1 => "theorem1",
            Method::SaddleSum => "saddle_sum",
            Method::Quadrature => "quadrature",
            Method::McPlain => "mc_plain",
            Method::McImportance => "mc_importance",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown tier {s:?}")))
    }
}

/// An estimate of `P(Z > x)`, carried as a natural log.
///
/// Asymptotic formulas are not clamped and may exceed one far outside
/// their regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub log_p: f64,
    /// Linear value; `None` when it would underflow.
    pub p: Option<f64>,
    pub method: Method,
    /// Absolute standard error (Monte Carlo only).
    pub stderr: Option<f64>,
    /// Standard error relative to the estimate (Monte Carlo only).
    pub rel_stderr: Option<f64>,
    /// Estimated relative accuracy (quadrature only).
    pub rel_accuracy: Option<f64>,
    pub n_samples: Option<u64>,
    pub seed: Option<u64>,
}

impl TailEstimate {
    pub fn from_log(log_p: f64, method: Method) -> Self {
        Self {
            log_p,
            p: to_linear(log_p),
            method,
            stderr: None,
            rel_stderr: None,
            rel_accuracy: None,
            n_samples: None,
            seed: None,
        }
    }

    pub fn log10_p(&self) -> f64 {
        self.log_p / std::f64::consts::LN_10
    }
}
