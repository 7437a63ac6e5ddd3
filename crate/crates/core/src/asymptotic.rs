//! Closed-form tail asymptotic for products with at least one nonzero mean.
//!
//! With `r = (x / prod sigma_i)^(1/n)`, `C = exp(-sum mu_i^2 / 2 sigma_i^2)` and
//! `(L*, m*)` from [`optimize_linear`],
//!
//! ```text
//! P(Z > x) ~ C m* / (2^(n/2) sqrt(pi n) r)
//!            * exp(-(n/2) r^2 + L* r + (1/4)(sum (mu_i/sigma_i)^2 - L*^2 / n))
//! ```
//!
//! with relative error `O(x^(-1/n))`. Everything is evaluated in log space.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{Method, TailEstimate};
use crate::logspace::log_sum_exp;
use crate::model::ProductModel;
use crate::signpat::{optimize_linear, Multiplicity};

/// `r(x) = (x / prod sigma_j)^(1/n)`.
pub fn balanced_scale(model: &ProductModel, x: f64) -> f64 {
    ((x.ln() - model.log_sigma_product()) / model.n() as f64).exp()
}

/// Term-by-term value of the closed form (natural logs).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticBreakdown {
    pub r: f64,
    pub l_star: f64,
    pub m_star: Multiplicity,
    pub log_c: f64,
    /// `-(n/2) r^2`
    pub exp_quadratic: f64,
    /// `L* r`
    pub exp_linear: f64,
    /// `(1/4)(sum (mu_i/sigma_i)^2 - L*^2 / n)`
    pub exp_const: f64,
    /// `log[m* / (2^(n/2) sqrt(pi n)) * (prod sigma_i / x)^(1/n)]`
    pub log_prefactor: f64,
    pub log_total: f64,
    /// Set when `r < 3 max(1, |L*|)`; a heuristic, not a bound.
    pub regime_warning: bool,
}

pub fn theorem1_estimate(model: &ProductModel, x: f64) -> Result<(TailEstimate, AsymptoticBreakdown)> {
    if model.all_means_zero() {
        return Err(Error::AllMeansZero);
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("threshold x = {x} must be positive")));
    }
    let n = model.n() as f64;
    let opt = optimize_linear(model);
    let l_star = opt.l_star;
    let r = balanced_scale(model, x);

    let log_c = model.log_c();
    let exp_quadratic = -0.5 * n * r * r;
    let exp_linear = l_star * r;
    let exp_const = 0.25 * (model.sum_squared_ratios() - l_star * l_star / n);
    let log_prefactor =
        opt.m_star.ln() - 0.5 * n * std::f64::consts::LN_2 - 0.5 * (std::f64::consts::PI * n).ln() - r.ln();
    let log_total = log_c + exp_quadratic + exp_linear + exp_const + log_prefactor;

    let breakdown = AsymptoticBreakdown {
        r,
        l_star,
        m_star: opt.m_star,
        log_c,
        exp_quadratic,
        exp_linear,
        exp_const,
        log_prefactor,
        log_total,
        regime_warning: r < 3.0 * l_star.abs().max(1.0),
    };
    Ok((TailEstimate::from_log(log_total, Method::Theorem1), breakdown))
}

/// Upper bound on the tail mass from the region where some coordinate is
/// small (`|u_i| <= a_x`), which forces some other `|u_j| >= b_x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbalancedBound {
    pub a_x: f64,
    pub b_x: f64,
    pub log_bound: f64,
}

pub fn unbalanced_bound(model: &ProductModel, x: f64) -> Result<UnbalancedBound> {
    let n = model.n();
    if n < 2 {
        return Err(Error::NTooSmall {
            n,
            reason: "the unbalanced region needs at least two factors",
        });
    }
    if x.is_nan() || x <= std::f64::consts::E {
        return Err(Error::InvalidArgument(format!("x = {x} must exceed e")));
    }
    let log_x = x.ln();
    let root = (log_x / n as f64).exp();
    let a_x = root / log_x;
    let b_x = root * log_x.powf(1.0 / (n - 1) as f64);
    let max_abs_mu = model.mu().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if b_x < max_abs_mu {
        return Err(Error::BoundNotValid { b_x, max_abs_mu });
    }
    let terms: Vec<f64> = model
        .mu()
        .iter()
        .zip(model.sigma())
        .flat_map(|(&m, &s)| {
            let two_var = 2.0 * s * s;
            [-(b_x - m).powi(2) / two_var, -(b_x + m).powi(2) / two_var]
        })
        .collect();
    Ok(UnbalancedBound {
        a_x,
        b_x,
        log_bound: log_sum_exp(&terms),
    })
}
