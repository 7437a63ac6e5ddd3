//! Exact tail by nested one-dimensional integration.
//!
//! With `T_m(t) = P(X_1 ... X_m > t)`, `T_1(t) = Q((t - mu_1) / sigma_1)` and
//! for `m >= 2`, integrating out the last factor `u = X_m`:
//!
//! ```text
//! T_m(t) = int_{u>0} f_m(u) T_{m-1}(t / u) du + int_{u<0} f_m(u) T'_{m-1}(-t / u) du
//! ```
//!
//! where `T'` is the tail of the same product with the first mean negated
//! (`P(Y < s) = P(-Y > -s)`). Each level is integrated adaptively in log
//! space over `u = mu_m + sigma_m z`, `|z| <= R`. The discarded mass is at
//! most `2 Q(R)` and enters the error estimate; `R` grows until that bound is
//! negligible against the computed value.
//!
//! Inner calls whose contribution is provably negligible are replaced by a
//! cheap union bound, which keeps the nested cost manageable.

use serde::Serialize;

use super::gk::{integrate_log, Limits};
use crate::error::{Error, Result};
use crate::estimate::{Method, TailEstimate};
use crate::logspace::{log_add_exp, log_sum_exp};
use crate::model::ProductModel;
use crate::normal::{log_pdf, log_sf};

/// Largest number of factors handled by the nested recursion.
pub const MAX_QUADRATURE_N: usize = 4;

/// Nodes whose log integrand sits this far below the running peak are
/// treated as negligible.
const NEGLIGIBLE: f64 = 60.0;

/// Widest initial panel, in standard deviations.
const PANEL_WIDTH: f64 = 4.0;

/// Tolerance ratio between consecutive nesting levels.
const INNER_TOL_RATIO: f64 = 16.0;

const MAX_RADIUS_ROUNDS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    /// Initial truncation radius per level, in standard deviations.
    pub truncation_radius: f64,
    /// Bisection limit for any initial panel.
    pub max_depth: u32,
    /// Segment budget of each adaptive integral.
    pub grid_size: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            truncation_radius: 12.0,
            max_depth: 60,
            grid_size: 4096,
        }
    }
}

impl QuadratureConfig {
    fn validate(&self) -> Result<()> {
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rel_tol = {} must be positive",
                self.rel_tol
            )));
        }
        if self.truncation_radius.is_nan() || self.truncation_radius < 8.0 {
            return Err(Error::InvalidArgument(format!(
                "truncation_radius = {} must be at least 8",
                self.truncation_radius
            )));
        }
        if self.grid_size < 16 {
            return Err(Error::InvalidArgument("grid_size must be at least 16".into()));
        }
        Ok(())
    }

    /// Accuracy the result must reach to be returned.
    pub fn required_accuracy(&self) -> f64 {
        (10.0 * self.rel_tol).max(1e-8)
    }
}

#[derive(Debug, Clone, Copy)]
struct Level {
    log_p: f64,
    rel_err: f64,
}

fn base_tail(mu: f64, sigma: f64, t: f64) -> f64 {
    let z = (t - mu) / sigma;
    if z == f64::INFINITY {
        f64::NEG_INFINITY
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        log_sf(z)
    }
}

/// `log sum_j P(|X_j| >= t^(1/m))`, an upper bound on `T_m(t)` for `t > 0`.
fn union_bound(factors: &[(f64, f64)], t: f64) -> f64 {
    let b = (t.ln() / factors.len() as f64).exp();
    let terms: Vec<f64> = factors
        .iter()
        .flat_map(|&(mu, sigma)| [log_sf((b - mu) / sigma), log_sf((b + mu) / sigma)])
        .collect();
    log_sum_exp(&terms)
}

/// Panel boundaries on `[lo, hi]`, split at `z0` when inside.
fn panels(lo: f64, hi: f64, z0: f64) -> Vec<f64> {
    let count = ((hi - lo) / PANEL_WIDTH).ceil().max(1.0) as usize;
    let mut breaks: Vec<f64> = (0..=count).map(|k| lo + (hi - lo) * k as f64 / count as f64).collect();
    breaks[count] = hi;
    if z0 > lo && z0 < hi && !breaks.contains(&z0) {
        let at = breaks.partition_point(|&b| b < z0);
        breaks.insert(at, z0);
    }
    breaks
}

/// `log T_m(t)` to relative accuracy about `tol`. Values below `cut` need
/// not be accurate.
fn tail(factors: &[(f64, f64)], t: f64, cut: f64, tol: f64, cfg: &QuadratureConfig) -> Level {
    let m = factors.len();
    let (mu, sigma) = factors[m - 1];
    if m == 1 {
        return Level {
            log_p: base_tail(mu, sigma, t),
            rel_err: 4.0 * f64::EPSILON,
        };
    }
    if t > 0.0 && cut > f64::NEG_INFINITY {
        let bound = union_bound(factors, t);
        if bound < cut {
            return Level {
                log_p: bound,
                rel_err: 0.0,
            };
        }
    }
    let inner = &factors[..m - 1];
    let mut flipped = inner.to_vec();
    flipped[0].0 = -flipped[0].0;
    let limits = Limits {
        rel_tol: tol,
        max_depth: cfg.max_depth,
        max_segments: cfg.grid_size,
    };
    let z0 = -mu / sigma;
    // Inner values must be smoother than this level's tolerance, or the
    // error estimate here only sees their noise.
    let inner_tol = tol / INNER_TOL_RATIO;

    let mut peak = f64::NEG_INFINITY;
    let mut inner_rel = 0.0f64;
    let mut log_total = f64::NEG_INFINITY;
    let mut log_err = f64::NEG_INFINITY;
    let mut done = 0.0;
    let mut radius = cfg.truncation_radius;
    let mut trunc_rel = f64::INFINITY;
    for _ in 0..MAX_RADIUS_ROUNDS {
        let node_floor = cut - (2.0 * radius).ln() - 1.0;
        let mut integrand = |z: f64| {
            let u = mu + sigma * z;
            let lw = log_pdf(z);
            let node_cut = node_floor.max(peak - NEGLIGIBLE);
            let level = if u > 0.0 {
                tail(inner, t / u, node_cut - lw, inner_tol, cfg)
            } else if u < 0.0 {
                tail(&flipped, -t / u, node_cut - lw, inner_tol, cfg)
            } else {
                Level {
                    log_p: if t < 0.0 { 0.0 } else { f64::NEG_INFINITY },
                    rel_err: 0.0,
                }
            };
            let v = lw + level.log_p;
            if v > node_cut {
                inner_rel = inner_rel.max(level.rel_err);
            }
            peak = peak.max(v);
            v
        };
        // Only the strips not yet covered are integrated.
        let ranges = if done == 0.0 {
            vec![(-radius, radius)]
        } else {
            vec![(-radius, -done), (done, radius)]
        };
        for (lo, hi) in ranges {
            let piece = integrate_log(&mut integrand, &panels(lo, hi, z0), limits);
            log_total = log_add_exp(log_total, piece.log_value);
            log_err = log_add_exp(log_err, piece.log_value + piece.rel_err.ln());
        }
        done = radius;
        if log_total == f64::NEG_INFINITY {
            radius *= 2.0;
            continue;
        }
        trunc_rel = (std::f64::consts::LN_2 + log_sf(radius) - log_total).exp();
        if log_total < cut || trunc_rel <= 0.1 * tol {
            break;
        }
        let wanted = (2.0 * (-log_total + (20.0 / tol).ln())).sqrt() + 1.0;
        radius = wanted.max(radius + 1.0);
    }
    Level {
        log_p: log_total.min(0.0),
        rel_err: (log_err - log_total).exp() + inner_rel + trunc_rel,
    }
}

/// `P(X_1 ... X_n > x)` for `n <= 4`, with a relative accuracy estimate.
pub fn tail_quadrature(model: &ProductModel, x: f64, cfg: &QuadratureConfig) -> Result<TailEstimate> {
    let n = model.n();
    if n > MAX_QUADRATURE_N {
        return Err(Error::NTooLargeForQuadrature {
            n,
            limit: MAX_QUADRATURE_N,
        });
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold x = {x} must be finite")));
    }
    cfg.validate()?;
    let factors: Vec<(f64, f64)> = model.mu().iter().copied().zip(model.sigma().iter().copied()).collect();
    let level = tail(&factors, x, f64::NEG_INFINITY, cfg.rel_tol, cfg);
    let wanted = cfg.required_accuracy();
    if level.rel_err.is_nan() || level.rel_err > wanted {
        return Err(Error::AccuracyNotReached {
            achieved: level.rel_err,
            wanted,
        });
    }
    let mut est = TailEstimate::from_log(level.log_p, Method::Quadrature);
    est.rel_accuracy = Some(level.rel_err);
    Ok(est)
}
