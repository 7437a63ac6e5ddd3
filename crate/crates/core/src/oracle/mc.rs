//! Seeded Monte Carlo estimates of `P(X_1 ... X_n > x)`.
//!
//! Samples are split over `shards` ChaCha20 streams: every shard uses the
//! run seed as key and its index as stream number, so streams never overlap.
//! Shards run in parallel and are reduced pairwise in index order.
//!
//! The tilted proposal is a mixture of independent normals with the original
//! standard deviations. For `n <= FULL_SCAN_N` every admissible sign pattern
//! whose Laplace contribution is within a factor `1e6` of the largest gets a
//! component centered at its saddle point, weighted by that contribution;
//! above that only the maximizing patterns are used, with equal weights. A
//! defensive component at the untilted means keeps every weight below
//! `1 / DEFENSIVE_WEIGHT`. Weights are likelihood ratios evaluated in log
//! space.

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{Method, TailEstimate};
use crate::logspace::{log_add_exp, pairwise_reduce};
use crate::model::ProductModel;
use crate::saddle::{log_contribution, solve_saddle, DEFAULT_TOL};
use crate::signpat::{enumerate_admissible, optimize_brute, optimize_linear, SignPattern};

/// Every admissible pattern is considered up to this many factors.
pub const FULL_SCAN_N: usize = 12;

/// Brute-force maximizer search is used up to this many factors.
pub const MAX_BRUTE_N: usize = 20;

/// Cap on the number of mixture components.
pub const MAX_COMPONENTS: usize = 4096;

/// Mixture weight of the untilted component.
pub const DEFENSIVE_WEIGHT: f64 = 0.05;

/// Patterns contributing less than `exp(-RELEVANCE_CUT)` of the largest are dropped.
const RELEVANCE_CUT: f64 = 13.815_510_557_964_274;

/// One mixture component of the tilted proposal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltComponent {
    /// `None` for the defensive component.
    pub pattern: Option<SignPattern>,
    pub center: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Proposal {
    Plain,
    SaddleTilt,
}

impl std::str::FromStr for Proposal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "saddle_tilt" | "saddle-tilt" | "tilted" => Ok(Self::SaddleTilt),
            other => Err(Error::InvalidArgument(format!("unknown proposal '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub shards: u32,
    pub proposal: Proposal,
}

impl McConfig {
    pub fn new(n_samples: u64, seed: u64, proposal: Proposal) -> Self {
        Self {
            n_samples,
            seed,
            shards: 16,
            proposal,
        }
    }
}

/// Per-shard sufficient statistics. Weight sums are kept as
/// `shift + ln(sum)` pairs.
#[derive(Debug, Clone, Copy)]
struct Stats {
    hits: u64,
    log_w: f64,
    log_w2: f64,
}

impl Stats {
    const EMPTY: Stats = Stats {
        hits: 0,
        log_w: f64::NEG_INFINITY,
        log_w2: f64::NEG_INFINITY,
    };

    fn merge(self, other: Stats) -> Stats {
        Stats {
            hits: self.hits + other.hits,
            log_w: log_add_exp(self.log_w, other.log_w),
            log_w2: log_add_exp(self.log_w2, other.log_w2),
        }
    }
}

/// Running `log(sum exp(v))` with a moving shift.
#[derive(Debug, Clone, Copy)]
struct LogAccumulator {
    shift: f64,
    sum: f64,
}

impl LogAccumulator {
    fn new() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, v: f64) {
        if v <= self.shift {
            self.sum += (v - self.shift).exp();
        } else {
            self.sum = self.sum * (self.shift - v).exp() + 1.0;
            self.shift = v;
        }
    }

    fn value(&self) -> f64 {
        if self.shift == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.shift + self.sum.ln()
        }
    }
}

fn exceeds(sample: &[f64], x: f64) -> bool {
    if x > 0.0 {
        let negatives = sample.iter().filter(|&&v| v < 0.0).count();
        negatives % 2 == 0 && sample.iter().map(|v| v.abs().ln()).sum::<f64>() > x.ln()
    } else {
        sample.iter().product::<f64>() > x
    }
}

fn shard_sizes(total: u64, shards: u32) -> Vec<u64> {
    let k = shards as u64;
    (0..k).map(|i| total / k + u64::from(i < total % k)).collect()
}

fn shard_rng(seed: u64, shard: u32) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    rng
}

fn plain_shard(model: &ProductModel, x: f64, seed: u64, shard: u32, count: u64) -> Stats {
    let mut rng = shard_rng(seed, shard);
    let mut sample = vec![0.0; model.n()];
    let mut hits = 0;
    for _ in 0..count {
        for (v, (m, s)) in sample.iter_mut().zip(model.mu().iter().zip(model.sigma())) {
            let z: f64 = rng.sample(StandardNormal);
            *v = m + s * z;
        }
        hits += u64::from(exceeds(&sample, x));
    }
    Stats {
        hits,
        log_w: (hits as f64).ln(),
        log_w2: (hits as f64).ln(),
    }
}

/// `-sum (v_i - c_i)^2 / (2 sigma_i^2)`.
fn gauss_exponent(sample: &[f64], center: &[f64], sigma: &[f64]) -> f64 {
    sample
        .iter()
        .zip(center)
        .zip(sigma)
        .map(|((v, c), s)| {
            let z = (v - c) / s;
            -0.5 * z * z
        })
        .sum()
}

fn tilted_shard(
    model: &ProductModel,
    x: f64,
    components: &[TiltComponent],
    seed: u64,
    shard: u32,
    count: u64,
) -> Stats {
    let mut rng = shard_rng(seed, shard);
    let picker = WeightedIndex::new(components.iter().map(|c| c.weight)).expect("positive mixture weights");
    let log_weights: Vec<f64> = components.iter().map(|c| c.weight.ln()).collect();
    let mut sample = vec![0.0; model.n()];
    let mut exps = vec![0.0; components.len()];
    let mut hits = 0;
    let mut acc_w = LogAccumulator::new();
    let mut acc_w2 = LogAccumulator::new();
    for _ in 0..count {
        let pick = rng.sample(&picker);
        for ((v, c), s) in sample.iter_mut().zip(&components[pick].center).zip(model.sigma()) {
            let z: f64 = rng.sample(StandardNormal);
            *v = c + s * z;
        }
        if !exceeds(&sample, x) {
            continue;
        }
        hits += 1;
        for ((e, c), lw) in exps.iter_mut().zip(components).zip(&log_weights) {
            *e = lw + gauss_exponent(&sample, &c.center, model.sigma());
        }
        let log_mixture = crate::logspace::log_sum_exp(&exps);
        let log_w = gauss_exponent(&sample, model.mu(), model.sigma()) - log_mixture;
        acc_w.add(log_w);
        acc_w2.add(2.0 * log_w);
    }
    Stats {
        hits,
        log_w: acc_w.value(),
        log_w2: acc_w2.value(),
    }
}

fn maximizer_components(model: &ProductModel, x: f64) -> Result<Vec<(SignPattern, Vec<f64>, f64)>> {
    let witnesses = if model.n() <= MAX_BRUTE_N {
        optimize_brute(model)?.witnesses
    } else {
        optimize_linear(model).witnesses
    };
    if witnesses.len() > MAX_COMPONENTS {
        return Err(Error::SaddleUnavailable(format!(
            "{} maximizing patterns exceed the mixture cap of {MAX_COMPONENTS}",
            witnesses.len()
        )));
    }
    witnesses
        .into_iter()
        .map(|s| match solve_saddle(model, &s, x, DEFAULT_TOL) {
            Ok(sp) => Ok((s, sp.u, 0.0)),
            Err(e) => Err(Error::SaddleUnavailable(format!("pattern {s}: {e}"))),
        })
        .collect()
}

fn scanned_components(model: &ProductModel, x: f64) -> Result<Vec<(SignPattern, Vec<f64>, f64)>> {
    let mut found: Vec<(SignPattern, Vec<f64>, f64)> = enumerate_admissible(model.n())?
        .filter_map(|s| {
            let sp = solve_saddle(model, &s, x, DEFAULT_TOL).ok()?;
            let lc = log_contribution(&sp);
            lc.is_finite().then_some((s, sp.u, lc))
        })
        .collect();
    if found.is_empty() {
        return Err(Error::SaddleUnavailable(format!(
            "no sign pattern has a saddle at x = {x}"
        )));
    }
    let best = found.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    found.retain(|c| c.2 >= best - RELEVANCE_CUT);
    // Stable sort keeps enumeration order among equal contributions.
    found.sort_by(|a, b| b.2.total_cmp(&a.2));
    found.truncate(MAX_COMPONENTS);
    Ok(found)
}

/// Mixture components of the tilted proposal at threshold `x`; weights sum to one.
pub fn tilt_components(model: &ProductModel, x: f64) -> Result<Vec<TiltComponent>> {
    let saddles = if model.n() <= FULL_SCAN_N {
        scanned_components(model, x)?
    } else {
        maximizer_components(model, x)?
    };
    let best = saddles.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = saddles.iter().map(|c| (c.2 - best).exp()).sum();
    let scale = (1.0 - DEFENSIVE_WEIGHT) / total;
    let mut components: Vec<TiltComponent> = saddles
        .into_iter()
        .map(|(pattern, center, lc)| TiltComponent {
            pattern: Some(pattern),
            center,
            weight: scale * (lc - best).exp(),
        })
        .collect();
    components.push(TiltComponent {
        pattern: None,
        center: model.mu().to_vec(),
        weight: DEFENSIVE_WEIGHT,
    });
    Ok(components)
}

pub fn mc_estimate(model: &ProductModel, x: f64, cfg: &McConfig) -> Result<TailEstimate> {
    if cfg.n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    if cfg.shards == 0 {
        return Err(Error::InvalidArgument("shards must be at least 1".into()));
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold x = {x} must be finite")));
    }
    let sizes = shard_sizes(cfg.n_samples, cfg.shards);
    let components = match cfg.proposal {
        Proposal::Plain => None,
        Proposal::SaddleTilt => Some(tilt_components(model, x)?),
    };
    let stats: Vec<Stats> = sizes
        .par_iter()
        .enumerate()
        .map(|(i, &count)| match &components {
            None => plain_shard(model, x, cfg.seed, i as u32, count),
            Some(c) => tilted_shard(model, x, c, cfg.seed, i as u32, count),
        })
        .collect();
    let total = pairwise_reduce(&stats, Stats::EMPTY, Stats::merge);

    let n = cfg.n_samples as f64;
    if total.hits == 0 {
        return Err(Error::DegenerateVariance {
            n_samples: cfg.n_samples,
            upper_bound: 3.0 / n,
        });
    }
    let log_p = total.log_w - n.ln();
    let rel_stderr = match cfg.proposal {
        Proposal::Plain => {
            let p = total.hits as f64 / n;
            ((1.0 - p) / (n * p)).sqrt()
        }
        Proposal::SaddleTilt => {
            let spread = (total.log_w2 + n.ln() - 2.0 * total.log_w).exp() - 1.0;
            (spread.max(0.0) / (n - 1.0).max(1.0)).sqrt()
        }
    };
    let method = match cfg.proposal {
        Proposal::Plain => Method::McPlain,
        Proposal::SaddleTilt => Method::McImportance,
    };
    let mut est = TailEstimate::from_log(log_p, method);
    est.rel_stderr = Some(rel_stderr);
    est.stderr = est.p.map(|p| p * rel_stderr);
    est.n_samples = Some(cfg.n_samples);
    est.seed = Some(cfg.seed);
    Ok(est)
}
