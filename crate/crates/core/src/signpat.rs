//! Admissible sign patterns and the maximization of `L_s = sum s_i mu_i / sigma_i`.
//!
//! A pattern `s` in `{+1, -1}^n` is admissible when `prod s_i = +1`, i.e. it
//! names an orthant on which the product can be positive. The tail is
//! dominated by the admissible patterns of largest score; their score `L*`
//! and count `m*` enter the closed-form estimate.
//!
//! [`optimize_linear`] finds `(L*, m*)` in `O(n)` by case analysis on the
//! zero means and the sign parity of the nonzero ones. [`optimize_brute`]
//! scans all `2^(n-1)` patterns and serves as its oracle.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{standardized_ratios, ProductModel};

/// Largest `n` accepted by the enumerating routines.
pub const MAX_ENUMERATION_N: usize = 30;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignPattern(Vec<i8>);

impl SignPattern {
    /// Build from explicit signs; every entry must be `+1` or `-1`.
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!("sign entry {bad} is not +1 or -1")));
        }
        Ok(Self(signs))
    }

    /// All `+1`.
    pub fn positive(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn parse(text: &str) -> Result<Self> {
        text.chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::InvalidArgument(format!("bad sign character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn sign(&self, i: usize) -> f64 {
        f64::from(self.0[i])
    }

    pub fn is_admissible(&self) -> bool {
        self.0.iter().filter(|&&s| s < 0).count() % 2 == 0
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl Serialize for SignPattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Number of maximizing patterns, kept exactly even when it exceeds `u64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Multiplicity {
    /// Exact count when it fits in a `u64`.
    pub count: Option<u64>,
    /// `log2` of the count; exact for powers of two.
    pub log2: f64,
}

impl Multiplicity {
    pub fn from_count(count: u64) -> Self {
        Self {
            count: Some(count),
            log2: (count as f64).log2(),
        }
    }

    pub fn power_of_two(exponent: u32) -> Self {
        Self {
            count: 1u64.checked_shl(exponent).filter(|_| exponent < 64),
            log2: f64::from(exponent),
        }
    }

    /// Natural log of the count.
    pub fn ln(&self) -> f64 {
        match self.count {
            Some(c) => (c as f64).ln(),
            None => self.log2 * std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignOptimum {
    pub l_star: f64,
    pub m_star: Multiplicity,
    /// Maximizers in enumeration order (all of them from the brute-force scan,
    /// one canonical pattern from the linear algorithm).
    pub witnesses: Vec<SignPattern>,
}

/// Iterator over the admissible patterns of length `n`.
///
/// The first `n - 1` signs run lexicographically with `+` before `-`; the
/// last sign is forced by the parity constraint.
#[derive(Debug, Clone)]
pub struct AdmissiblePatterns {
    n: usize,
    next: u64,
    end: u64,
}

impl Iterator for AdmissiblePatterns {
    type Item = SignPattern;

    fn next(&mut self) -> Option<SignPattern> {
        if self.next >= self.end {
            return None;
        }
        let p = admissible_pattern(self.n, self.next);
        self.next += 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for AdmissiblePatterns {}

pub(crate) fn admissible_pattern(n: usize, index: u64) -> SignPattern {
    let mut signs = Vec::with_capacity(n);
    let mut parity = 1i8;
    for i in 0..n - 1 {
        let s = if (index >> (n - 2 - i)) & 1 == 1 { -1 } else { 1 };
        parity *= s;
        signs.push(s);
    }
    signs.push(parity);
    SignPattern(signs)
}

pub fn enumerate_admissible(n: usize) -> Result<AdmissiblePatterns> {
    if n == 0 {
        return Err(Error::EmptyModel);
    }
    if n > MAX_ENUMERATION_N {
        return Err(Error::NTooLargeForEnumeration {
            n,
            limit: MAX_ENUMERATION_N,
        });
    }
    Ok(AdmissiblePatterns {
        n,
        next: 0,
        end: 1u64 << (n - 1),
    })
}

/// `L_s = sum_i s_i mu_i / sigma_i`, summed left to right.
pub fn pattern_score(model: &ProductModel, s: &SignPattern) -> Result<f64> {
    if s.len() != model.n() {
        return Err(Error::LengthMismatch {
            expected: model.n(),
            found: s.len(),
        });
    }
    Ok(score_ratios(&standardized_ratios(model).a, s))
}

fn score_ratios(a: &[f64], s: &SignPattern) -> f64 {
    a.iter().zip(s.signs()).map(|(a, &s)| f64::from(s) * a).sum()
}

/// Exhaustive scan over all admissible patterns.
///
/// Two patterns tie when their scores are mathematically equal as sums of
/// the (exactly negated) double ratios; near-ties are settled by an
/// error-free expansion sum, so the count agrees with the exact-arithmetic
/// case analysis of [`optimize_linear`].
pub fn optimize_brute(model: &ProductModel) -> Result<SignOptimum> {
    let a = standardized_ratios(model).a;
    let scale: f64 = a.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let near = 64.0 * f64::EPSILON * scale;

    let mut best: Option<(f64, SignPattern)> = None;
    let mut witnesses: Vec<SignPattern> = Vec::new();
    for s in enumerate_admissible(model.n())? {
        let score = score_ratios(&a, &s);
        let ord = match &best {
            None => Ordering::Greater,
            Some((b, bs)) => {
                if score > b + near {
                    Ordering::Greater
                } else if score < b - near {
                    Ordering::Less
                } else {
                    exact_compare(&a, &s, bs)
                }
            }
        };
        match ord {
            Ordering::Greater => {
                best = Some((score, s.clone()));
                witnesses.clear();
                witnesses.push(s);
            }
            Ordering::Equal => witnesses.push(s),
            Ordering::Less => {}
        }
    }
    let (_, first) = best.expect("at least one admissible pattern");
    Ok(SignOptimum {
        l_star: score_ratios(&a, &first),
        m_star: Multiplicity::from_count(witnesses.len() as u64),
        witnesses,
    })
}

/// Sign of `L_s - L_t`, computed exactly.
fn exact_compare(a: &[f64], s: &SignPattern, t: &SignPattern) -> Ordering {
    let terms = a
        .iter()
        .zip(s.signs().iter().zip(t.signs()))
        .filter(|(_, (si, ti))| si != ti)
        .map(|(a, (&si, _))| f64::from(si) * a);
    let mut expansion: Vec<f64> = Vec::new();
    for term in terms {
        grow_expansion(&mut expansion, term);
    }
    // Components are nonoverlapping and increasing in magnitude; the
    // largest nonzero one carries the sign.
    match expansion.iter().rev().find(|&&c| c != 0.0) {
        Some(c) if *c > 0.0 => Ordering::Greater,
        Some(_) => Ordering::Less,
        None => Ordering::Equal,
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let av = s - bv;
    (s, (a - av) + (b - bv))
}

fn grow_expansion(e: &mut Vec<f64>, b: f64) {
    let mut q = b;
    let mut out = Vec::with_capacity(e.len() + 1);
    for &c in e.iter() {
        let (s, err) = two_sum(q, c);
        if err != 0.0 {
            out.push(err);
        }
        q = s;
    }
    out.push(q);
    *e = out;
}

/// Linear-time `(L*, m*)`.
///
/// With `k` exactly-zero means and `p0` the sign parity of the nonzero
/// ratios:
/// * `k >= 1`: `L* = sum |a_i|`, `m* = 2^(k-1)`;
/// * `k = 0, p0 = +1`: `L* = sum |a_i|`, `m* = 1`;
/// * `k = 0, p0 = -1`: `L* = sum |a_i| - 2 min |a_i|`, `m*` = number of
///   indices attaining the minimum (exact equality).
pub fn optimize_linear(model: &ProductModel) -> SignOptimum {
    let ratios = standardized_ratios(model);
    let a = &ratios.a;
    let n = a.len();
    let mut signs: Vec<i8> = a.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect();
    let p0: i8 = a
        .iter()
        .zip(&signs)
        .filter(|(&v, _)| v != 0.0)
        .map(|(_, &s)| s)
        .product();
    let abs_sum: f64 = a.iter().map(|v| v.abs()).sum();

    if let Some(&last_zero) = ratios.zero_set.last() {
        // Zero coordinates are all + except the last, which restores parity.
        signs[last_zero] = p0;
        return SignOptimum {
            l_star: abs_sum,
            m_star: Multiplicity::power_of_two((ratios.k() - 1) as u32),
            witnesses: vec![SignPattern(signs)],
        };
    }
    if p0 == 1 {
        return SignOptimum {
            l_star: abs_sum,
            m_star: Multiplicity::from_count(1),
            witnesses: vec![SignPattern(signs)],
        };
    }
    let min_abs = a.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let argmins: Vec<usize> = (0..n).filter(|&i| a[i].abs() == min_abs).collect();
    signs[argmins[0]] = -signs[argmins[0]];
    SignOptimum {
        l_star: abs_sum - 2.0 * min_abs,
        m_star: Multiplicity::from_count(argmins.len() as u64),
        witnesses: vec![SignPattern(signs)],
    }
}
