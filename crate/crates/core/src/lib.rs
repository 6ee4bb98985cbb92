//! Mixed-frequency panel nowcasting with sparse-group LASSO MIDAS
//! regressions.
//!
//! The crate covers the full pipeline: long-format CSV ingestion into an
//! immutable panel ([`panel`]), compression of high-frequency lag windows
//! through Legendre dictionaries ([`midas`]), the penalized estimator with
//! its regularization path and panel-adapted cross-validation
//! ([`sglasso`]), the estimator families and nowcast production
//! ([`models`]), weighting schemes for aggregating unit nowcasts
//! ([`aggregation`]), a Monte Carlo harness over heterogeneous-coefficient
//! panels ([`simulate`]) and rolling out-of-sample accuracy evaluation
//! ([`evaluation`]).

pub mod aggregation;
pub mod error;
pub mod evaluation;
pub mod midas;
pub mod models;
pub mod panel;
pub mod period;
pub mod sglasso;
pub mod simulate;

pub use error::{Error, Result};
