//! Survey disagreement indices and bivariate Bayesian VAR impulse responses.
//!
//! The crate is organised along the data flow:
//!
//! - [`ingest`]: survey share panels, macro growth series, frequency alignment
//!   and a seeded synthetic share generator.
//! - [`indicators`]: the balance dispersion `DISP`, the geometric discrepancy
//!   `D` for any number of answer categories, and the DB / DC aggregates.
//! - [`stats`]: summary statistics, Pearson correlation and cross-correlograms.
//! - [`bvar`]: least-squares and Minnesota-prior VARs, BIC lag selection, HC0
//!   standard errors, Cholesky identification and impulse-response bands.

pub mod bvar;
pub mod calendar;
pub mod indicators;
pub mod ingest;
pub mod stats;

pub use calendar::{Month, MonthlySeries};
