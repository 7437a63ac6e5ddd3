//! Reference estimators used to validate the asymptotic tiers.

pub mod gk;
pub mod mc;
pub mod quadrature;

pub use mc::{mc_estimate, McConfig, Proposal};
pub use quadrature::{tail_quadrature, QuadratureConfig, MAX_QUADRATURE_N};
