//! Exact boundary saddle per sign pattern.
//!
//! For an admissible pattern `s` the minimizer of the Gaussian exponent
//!
//! ```text
//! Psi(u) = sum_i u_i^2 / (2 sigma_i^2) - mu_i u_i / sigma_i^2
//! ```
//!
//! on `{prod u_i = x, s_i u_i > 0}` satisfies `u_i^2 - mu_i u_i - sigma_i^2 beta = 0`
//! for a common multiplier `beta > 0`. Each quadratic has exactly one root
//! of sign `s_i`, and `g_s(beta) = prod u_i(beta)` is strictly increasing,
//! so the saddle is the unique root of `g_s(beta) = x`.
//!
//! From the solved point we get the exact exponent `S_s(x)`, its derivative
//! in the threshold, the Hessian of the exponent in the first `n - 1`
//! coordinates (the last one eliminated by the constraint) and the Laplace
//! prefactor `A_s(x)`. Summing `A_s / S_s' * exp(-S_s)` over all admissible
//! patterns gives the saddle-sum estimate of the tail.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotic::balanced_scale;
use crate::error::{Error, Result};
use crate::estimate::{Method, TailEstimate};
use crate::logspace::{log_add_exp, log_sum_exp};
use crate::model::ProductModel;
use crate::normal::LN_SQRT_2PI;
use crate::signpat::{enumerate_admissible, pattern_score, SignPattern};

/// Default relative tolerance on `g_s(beta) = x`.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Iteration cap for the root solve.
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct SaddlePoint {
    pub pattern: SignPattern,
    pub x: f64,
    /// `beta = -lambda x`.
    pub beta: f64,
    pub log_beta: f64,
    pub u: Vec<f64>,
    /// `S_s(x) = Psi(u)`.
    pub exponent: f64,
    /// `S_s'(x)`.
    pub ds_dw: f64,
    /// `log A_s(x)`.
    pub log_prefactor: f64,
    /// `(n-1) x (n-1)`, empty for `n = 1`.
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionCoefficients {
    pub b_s: f64,
    pub c_s: f64,
    /// `a_i = delta_i / (s_i sigma_i)`.
    pub a: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Root of `u^2 - mu u - sigma^2 beta = 0` with the sign of `s`.
///
/// The root opposite in sign to `mu` is formed from the product of roots,
/// `-sigma^2 beta`, to avoid cancellation.
pub fn select_root(mu: f64, sigma: f64, s: f64, beta: f64) -> f64 {
    let sqrt_d = (mu * mu + 4.0 * sigma * sigma * beta).sqrt();
    if s * mu > 0.0 {
        0.5 * (mu + s * sqrt_d)
    } else {
        // The other root has the sign of mu and magnitude (|mu| + sqrt_d) / 2.
        let other = 0.5 * (mu.abs() + sqrt_d);
        s * sigma * sigma * beta / other
    }
}

/// `log |u_i|` and `d log|u_i| / d log beta` at `log beta = t`, overflow-free.
fn log_root(mu: f64, sigma: f64, s: f64, t: f64) -> (f64, f64) {
    let log_4s2b = (4.0 * sigma * sigma).ln() + t;
    let log_d = if mu == 0.0 {
        log_4s2b
    } else {
        log_add_exp(2.0 * mu.abs().ln(), log_4s2b)
    };
    let log_sqrt_d = 0.5 * log_d;
    let log_mu = if mu == 0.0 { f64::NEG_INFINITY } else { mu.abs().ln() };
    let log_big = log_add_exp(log_mu, log_sqrt_d) - std::f64::consts::LN_2;
    let log_u = if s * mu > 0.0 {
        log_big
    } else {
        2.0 * sigma.ln() + t - log_big
    };
    // d|u|/dbeta = sigma^2 / sqrt(D)
    let dlog = (t + 2.0 * sigma.ln() - log_u - log_sqrt_d).exp();
    (log_u, dlog)
}

/// `g_s(beta)` in sign/log-magnitude form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub log_abs: f64,
}

impl SignedLog {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

pub fn product_at(model: &ProductModel, s: &SignPattern, beta: f64) -> Result<SignedLog> {
    check_pattern(model, s)?;
    let t = beta.ln();
    let mut log_abs = 0.0;
    let mut sign = 1.0;
    for i in 0..model.n() {
        log_abs += log_root(model.mu()[i], model.sigma()[i], s.sign(i), t).0;
        sign *= s.sign(i);
    }
    Ok(SignedLog { sign, log_abs })
}

fn check_pattern(model: &ProductModel, s: &SignPattern) -> Result<()> {
    if s.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            found: s.len(),
        });
    }
    if !s.is_admissible() {
        return Err(Error::InvalidArgument(format!("pattern {s} is not admissible")));
    }
    Ok(())
}

/// `log g_s(0+)`: `-inf` unless every `s_i` agrees in sign with a nonzero `mu_i`.
fn log_floor(model: &ProductModel, s: &SignPattern) -> f64 {
    model
        .mu()
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            if s.sign(i) * m > 0.0 {
                m.abs().ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

/// Unique boundary saddle of pattern `s` at threshold `x`.
///
/// Solves `log g_s(beta) = log x` in `log beta` by Newton steps kept
/// inside a bisection bracket.
pub fn solve_saddle(model: &ProductModel, s: &SignPattern, x: f64, tol: f64) -> Result<SaddlePoint> {
    check_pattern(model, s)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("threshold x = {x} must be positive")));
    }
    let n = model.n();
    let log_x = x.ln();
    let floor = log_floor(model, s);
    if floor >= log_x {
        return Err(Error::NoSaddleInRegion {
            pattern: s.to_string(),
            x,
            floor: floor.exp(),
        });
    }

    let eval = |t: f64| -> (f64, f64) {
        let mut h = -log_x;
        let mut dh = 0.0;
        for i in 0..n {
            let (lu, d) = log_root(model.mu()[i], model.sigma()[i], s.sign(i), t);
            h += lu;
            dh += d;
        }
        (h, dh)
    };

    let t0 = 2.0 * balanced_scale(model, x).ln();
    let step = 4f64.ln();
    let (mut lo, mut hi) = (t0 - step, t0 + step);
    let mut widen = step;
    let mut iterations = 0;
    while eval(lo).0 > 0.0 {
        lo -= widen;
        widen *= 2.0;
        iterations += 1;
        if iterations > MAX_ITERATIONS || lo < -1.0e4 {
            return Err(Error::ToleranceNotReached { tol, iterations });
        }
    }
    widen = step;
    while eval(hi).0 < 0.0 {
        hi += widen;
        widen *= 2.0;
        iterations += 1;
        if iterations > MAX_ITERATIONS || hi > 1.0e4 {
            return Err(Error::ToleranceNotReached { tol, iterations });
        }
    }

    let mut t = t0.clamp(lo, hi);
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (h, dh) = eval(t);
        if h.abs() <= tol {
            // One more Newton step brings the residual to rounding level.
            let polished = t - h / dh;
            if dh > 0.0 && polished >= lo && polished <= hi {
                t = polished;
            }
            converged = true;
            break;
        }
        if h < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - h / dh;
        t = if newton > lo && newton < hi && dh > 0.0 {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            let (h, _) = eval(t);
            converged = h.abs() <= tol;
            break;
        }
    }
    if !converged {
        return Err(Error::ToleranceNotReached { tol, iterations });
    }

    let u: Vec<f64> = (0..n)
        .map(|i| s.sign(i) * log_root(model.mu()[i], model.sigma()[i], s.sign(i), t).0.exp())
        .collect();
    let exponent = psi(model, &u);
    let (mu_n, sigma_n, u_n) = (model.mu()[n - 1], model.sigma()[n - 1], u[n - 1]);
    let ds_dw = (u_n / x) * (u_n - mu_n) / (sigma_n * sigma_n);
    let hessian = hessian_at(model, &u)?;
    let log_prefactor = log_prefactor(&u, &hessian).ok_or_else(|| Error::HessianNotPd {
        pattern: s.to_string(),
        x,
    })?;

    Ok(SaddlePoint {
        pattern: s.clone(),
        x,
        beta: t.exp(),
        log_beta: t,
        u,
        exponent,
        ds_dw,
        log_prefactor,
        hessian,
        iterations,
    })
}

/// `Psi(u) = sum u_i^2 / (2 sigma_i^2) - mu_i u_i / sigma_i^2`.
pub fn psi(model: &ProductModel, u: &[f64]) -> f64 {
    u.iter()
        .zip(model.mu().iter().zip(model.sigma()))
        .map(|(&u, (&m, &s))| (0.5 * u - m) * u / (s * s))
        .sum()
}

/// Hessian of the exponent in `u_1..u_{n-1}` with `u_n = w / (u_1 ... u_{n-1})`.
pub fn hessian_at(model: &ProductModel, u: &[f64]) -> Result<DMatrix<f64>> {
    let n = model.n();
    if u.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: u.len(),
        });
    }
    if let Some(index) = u.iter().position(|&v| v == 0.0) {
        return Err(Error::DegenerateCoordinate { index });
    }
    let m = n - 1;
    let (mu_n, s2_n, u_n) = (model.mu()[m], model.sigma()[m].powi(2), u[m]);
    let off = (2.0 * u_n * u_n - mu_n * u_n) / s2_n;
    let diag = (3.0 * u_n * u_n - 2.0 * mu_n * u_n) / s2_n;
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            1.0 / model.sigma()[i].powi(2) + diag / (u[i] * u[i])
        } else {
            off / (u[i] * u[j])
        }
    }))
}

/// `log det` of a symmetric positive definite matrix via Cholesky, `None`
/// if the factorization fails.
pub fn log_det_spd(matrix: &DMatrix<f64>) -> Option<f64> {
    if matrix.nrows() == 0 {
        return Some(0.0);
    }
    let chol = matrix.clone().cholesky()?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// `log A_s = ((n-1)/2) log(2 pi) - sum_{i<n} log|u_i| - (1/2) log det H`.
pub fn log_prefactor(u: &[f64], hessian: &DMatrix<f64>) -> Option<f64> {
    let m = u.len() - 1;
    let log_det = log_det_spd(hessian)?;
    let log_u: f64 = u[..m].iter().map(|v| v.abs().ln()).sum();
    Some(m as f64 * LN_SQRT_2PI - log_u - 0.5 * log_det)
}

/// Closed-form approximation of `S_s(x)`:
/// `(n/2) r^2 - L_s r - (1/4)(sum (mu_i/sigma_i)^2 - L_s^2 / n)`.
pub fn exponent_expansion(model: &ProductModel, s: &SignPattern, x: f64) -> Result<f64> {
    let l_s = pattern_score(model, s)?;
    let n = model.n() as f64;
    let r = balanced_scale(model, x);
    Ok(0.5 * n * r * r - l_s * r - 0.25 * (model.sum_squared_ratios() - l_s * l_s / n))
}

/// First- and second-order shape corrections of the saddle.
pub fn expansion_coefficients(model: &ProductModel, s: &SignPattern) -> Result<ExpansionCoefficients> {
    check_pattern(model, s)?;
    let n = model.n();
    let ratios: Vec<f64> = (0..n).map(|i| model.mu()[i] / (s.sign(i) * model.sigma()[i])).collect();
    let mean = ratios.iter().sum::<f64>() / n as f64;
    let b_s = -mean;
    let delta: Vec<f64> = (0..n)
        .map(|i| 0.5 * model.mu()[i] + 0.5 * b_s * s.sign(i) * model.sigma()[i])
        .collect();
    let a: Vec<f64> = (0..n).map(|i| delta[i] / (s.sign(i) * model.sigma()[i])).collect();
    let c_s = ratios.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (8.0 * n as f64);
    Ok(ExpansionCoefficients { b_s, c_s, a, delta })
}

/// Three-term prediction `s_i sigma_i r (1 + a_i / r + c_s / r^2)`.
pub fn refined_saddle_prediction(model: &ProductModel, s: &SignPattern, x: f64) -> Result<Vec<f64>> {
    let coef = expansion_coefficients(model, s)?;
    let r = balanced_scale(model, x);
    Ok((0..model.n())
        .map(|i| s.sign(i) * model.sigma()[i] * r * (1.0 + coef.a[i] / r + coef.c_s / (r * r)))
        .collect())
}

/// `log(A_s / S_s' * exp(-S_s))`.
pub fn log_contribution(saddle: &SaddlePoint) -> f64 {
    saddle.log_prefactor - saddle.ds_dw.ln() - saddle.exponent
}

const PATTERN_CHUNK: u64 = 1024;

/// Sum of the per-pattern Laplace contributions over all admissible
/// patterns. Chunks of patterns are solved in parallel and reduced in
/// enumeration order, so the result does not depend on scheduling.
pub fn saddle_sum_estimate(model: &ProductModel, x: f64) -> Result<TailEstimate> {
    let n = model.n();
    let total = enumerate_admissible(n)?.len() as u64;
    let chunks = total.div_ceil(PATTERN_CHUNK);
    let partial: Vec<Result<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * PATTERN_CHUNK;
            let end = (start + PATTERN_CHUNK).min(total);
            let terms = (start..end)
                .map(|idx| {
                    let s = crate::signpat::admissible_pattern(n, idx);
                    solve_saddle(model, &s, x, DEFAULT_TOL).map(|sp| log_contribution(&sp))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(log_sum_exp(&terms))
        })
        .collect();
    let partial = partial.into_iter().collect::<Result<Vec<f64>>>()?;
    let log_sum = log_sum_exp(&partial);
    let log_norm = model.log_c() - n as f64 * LN_SQRT_2PI - model.log_sigma_product();
    Ok(TailEstimate::from_log(log_norm + log_sum, Method::SaddleSum))
}
