//! Command-line harness around `prodtail-core`: single-point estimates,
//! threshold sweeps, sign-pattern reports and the validation suite.

pub mod app;
pub mod format;
pub mod sweep;
pub mod validate;
