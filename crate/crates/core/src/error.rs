//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    MalformedRow { line: u64, msg: String },

    #[error("line {line}: negative irradiance {value} W/m2")]
    NegativeIrradiance { line: u64, value: f64 },

    #[error("line {line}: timestamp not after the previous row")]
    NonMonotoneTimestamps { line: u64 },

    #[error("no data rows in {path}")]
    EmptyFile { path: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("ambient thermal mode requires a temperature column; use fixed mode or supply temp_c")]
    MissingAmbientTemp,

    #[error("month {month}: no harvested current above zero; cannot form a day state")]
    DegenerateMonth { month: u32 },

    #[error("fewer than 2 distinct data points; density is degenerate")]
    DegenerateData,

    #[error("data outside the declared support [{lo}, {hi}]")]
    DataOutsideSupport { lo: f64, hi: f64 },

    #[error("{n_slots} slots do not divide the 24 h day into whole hours")]
    SlotsDontDivideDay { n_slots: usize },

    #[error("state {state} was never visited")]
    MissingState { state: usize },

    #[error("model file format: {0}")]
    ModelFormat(String),

    #[error("model fitted for month {model} but data selects month {data}")]
    MonthMismatch { model: u32, data: u32 },

    #[error("month {month} not present in the dataset")]
    MonthAbsent { month: u32 },

    #[error("sample size {n} below the minimum {min} for the KS test")]
    SampleTooSmall { n: usize, min: usize },

    #[error("significance level {0} is not tabulated (use 0.01 or 0.05)")]
    AlphaNotTabulated(f64),

    #[error("series has zero variance; autocorrelation undefined")]
    ConstantSeries,

    #[error("series too short: length {len} needs more than max_lag + 1 = {min}")]
    SeriesTooShort { len: usize, min: usize },

    #[error("ACF curves have different lag grids")]
    MismatchedLagGrids,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the input data or its files, as opposed to
    /// model or validation failures. Used by callers to pick exit codes.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MalformedRow { .. }
                | Error::NegativeIrradiance { .. }
                | Error::NonMonotoneTimestamps { .. }
                | Error::EmptyFile { .. }
                | Error::EmptyDataset
                | Error::MonthAbsent { .. }
                | Error::Io(_)
        )
    }
}
