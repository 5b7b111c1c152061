//! Solar energy-harvest modeling.
//!
//! The crate turns hourly solar-irradiance records into harvested-current
//! time series (astronomical projection, single-diode PV model, MPP search,
//! DC/DC stage), fits compact semi-Markov source models to them, synthesizes
//! traces from those models, and validates the fit statistically
//! (Kolmogorov-Smirnov, autocorrelation, summary tables).
//!
//! Pipeline overview:
//!
//! ```text
//! CSV -> ingest::Dataset -> power::harvest_series -> clustering -> density
//!     -> markov::SemiMarkovModel -> markov::generate_trace -> validate
//! ```
//!
//! With the default `parallel` feature the per-record and per-month work is
//! distributed with rayon; disabling it yields a sequential build with
//! identical results.

pub mod astro;
pub mod clustering;
pub mod density;
pub mod error;
pub mod fixture;
pub mod ingest;
pub mod markov;
pub mod pipeline;
pub mod power;
pub mod pv;
pub mod validate;

pub use error::{Error, Result};
