//! Right-tail probabilities `P(X_1 ... X_n > x)` for independent normal
//! factors `X_i ~ N(mu_i, sigma_i^2)`.
//!
//! Four estimators are provided: a closed-form asymptotic
//! ([`asymptotic::theorem1_estimate`]), a sum of per-pattern Laplace
//! contributions at exact saddle points ([`saddle::saddle_sum_estimate`]),
//! nested quadrature for `n <= 4` and seeded Monte Carlo. All probabilities
//! are carried as natural logarithms.

pub mod asymptotic;
pub mod error;
pub mod estimate;
pub mod logspace;
pub mod model;
pub mod normal;
pub mod oracle;
pub mod saddle;
pub mod signpat;

pub use asymptotic::{balanced_scale, theorem1_estimate, unbalanced_bound, AsymptoticBreakdown, UnbalancedBound};
pub use error::{Error, ErrorKind, Result};
pub use estimate::{Method, TailEstimate};
pub use model::{standardized_ratios, ProductModel, StandardizedRatios};
pub use oracle::{mc_estimate, tail_quadrature, McConfig, Proposal, QuadratureConfig};
pub use saddle::{saddle_sum_estimate, solve_saddle, SaddlePoint};
pub use signpat::{enumerate_admissible, optimize_brute, optimize_linear, Multiplicity, SignOptimum, SignPattern};
