//! Partitioning of harvested-current series into Markov states: night-day
//! thresholding and fixed-duration time slots.
//!
//! State labels for the night-day scheme: state 0 is the day (high-energy)
//! state, state 1 the night. Runs at or above the threshold are day, runs
//! below it night.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::power::HarvestSample;

/// Day (high-energy) state id in the night-day scheme.
pub const DAY_STATE: usize = 0;
/// Night (low-energy) state id in the night-day scheme.
pub const NIGHT_STATE: usize = 1;

/// Sampling step of the input series in hours. The ingest schema is hourly.
pub const SAMPLE_STEP_H: f64 = 1.0;

/// Night-day clustering parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NightDayConfig {
    /// The threshold is this fraction of the maximum current in the series.
    pub threshold_fraction: f64,
    /// Absolute threshold override in A. When set, `threshold_fraction` is
    /// ignored; used for global-maximum scoping across months.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_a: Option<f64>,
}

impl Default for NightDayConfig {
    fn default() -> Self {
        NightDayConfig {
            threshold_fraction: 1.0 / 50.0,
            threshold_a: None,
        }
    }
}

impl NightDayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return Err(Error::InvalidConfig(
                "threshold fraction must be in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Slot-based clustering parameters: the 24 h day is divided into `n_slots`
/// equal states traversed cyclically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub n_slots: usize,
}

impl SlotConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_slots < 2 {
            return Err(Error::InvalidConfig("need at least 2 slots".into()));
        }
        // Hourly records cannot populate fractional-hour slots.
        if 24 % self.n_slots != 0 {
            return Err(Error::SlotsDontDivideDay {
                n_slots: self.n_slots,
            });
        }
        Ok(())
    }

    /// Slot duration in hours.
    pub fn slot_hours(&self) -> f64 {
        24.0 / self.n_slots as f64
    }

    /// State of a sample at local hour `h`.
    pub fn state_of_hour(&self, h: f64) -> usize {
        ((h / self.slot_hours()) as usize).min(self.n_slots - 1)
    }
}

/// The clustering scheme with its configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum ClusterScheme {
    NightDay(NightDayConfig),
    Slot(SlotConfig),
}

impl ClusterScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            ClusterScheme::NightDay(cfg) => cfg.validate(),
            ClusterScheme::Slot(cfg) => cfg.validate(),
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            ClusterScheme::NightDay(_) => 2,
            ClusterScheme::Slot(cfg) => cfg.n_slots,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClusterScheme::NightDay(_) => "night-day",
            ClusterScheme::Slot(_) => "slot",
        }
    }
}

/// One uninterrupted stay in a state: its duration and the current samples
/// observed during it.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVisit {
    pub state: usize,
    pub duration_h: f64,
    /// Harvested currents (A) observed during the visit.
    pub samples: Vec<f64>,
    pub start_year: i32,
    pub start_doy: u32,
    pub start_hour: f64,
    /// Cut off by a data edge (series boundary or a gap in the record
    /// grid). Truncated visits are excluded from duration statistics but
    /// their samples still count toward current statistics.
    pub truncated: bool,
}

/// Night-day clustering: the threshold is `threshold_fraction` of the
/// maximum current in the series (or the configured absolute override);
/// contiguous runs at or above it form day visits, runs below it night
/// visits. Visits strictly alternate. Nights spanning midnight are one
/// visit; a gap in the hourly grid ends the current visit and marks both
/// sides truncated.
pub fn night_day_cluster(
    series: &[HarvestSample],
    cfg: &NightDayConfig,
) -> Result<Vec<StateVisit>> {
    cfg.validate()?;
    if series.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let max_current = series.iter().map(|s| s.current_a).fold(0.0f64, f64::max);
    if max_current <= 0.0 {
        let month = crate::astro::month_of_day_number(series[0].day_of_year);
        return Err(Error::DegenerateMonth { month });
    }
    let threshold = cfg
        .threshold_a
        .unwrap_or(cfg.threshold_fraction * max_current);
    let state_of = |s: &HarvestSample| {
        if s.current_a >= threshold {
            DAY_STATE
        } else {
            NIGHT_STATE
        }
    };
    segment_runs(series, state_of)
}

/// Slot-based clustering: the sample at local hour h belongs to state
/// floor(h / T_i). Visits have duration exactly T_i and the state sequence
/// cycles 0, 1, ..., N_s - 1, 0, ...
pub fn slot_cluster(series: &[HarvestSample], cfg: &SlotConfig) -> Result<Vec<StateVisit>> {
    cfg.validate()?;
    if series.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut visits = segment_runs(series, |s| cfg.state_of_hour(s.local_time_h))?;
    // Slot sojourns are fixed-length by construction; data edges do not
    // truncate the model duration.
    for v in &mut visits {
        v.duration_h = cfg.slot_hours();
        v.truncated = false;
    }
    Ok(visits)
}

/// Splits the series into runs of equal state, breaking runs on gaps in the
/// hourly grid. The first and last visit of every contiguous block are
/// marked truncated.
fn segment_runs(
    series: &[HarvestSample],
    state_of: impl Fn(&HarvestSample) -> usize,
) -> Result<Vec<StateVisit>> {
    let mut visits: Vec<StateVisit> = Vec::new();
    let mut current: Option<StateVisit> = None;
    let mut prev_abs_hour = f64::NEG_INFINITY;

    for sample in series {
        let state = state_of(sample);
        let abs_hour = sample.absolute_hour();
        let gap = abs_hour - prev_abs_hour != SAMPLE_STEP_H;
        prev_abs_hour = abs_hour;

        if let Some(ref mut visit) = current {
            if !gap && visit.state == state {
                visit.samples.push(sample.current_a);
                visit.duration_h += SAMPLE_STEP_H;
                continue;
            }
            let mut done = current.take().unwrap();
            if gap {
                done.truncated = true;
            }
            visits.push(done);
        }
        current = Some(StateVisit {
            state,
            duration_h: SAMPLE_STEP_H,
            samples: vec![sample.current_a],
            start_year: sample.year,
            start_doy: sample.day_of_year,
            start_hour: sample.local_time_h,
            truncated: gap, // starts right after a gap (or the series edge)
        });
    }
    if let Some(mut last) = current {
        last.truncated = true; // cut off by the series edge
        visits.push(last);
    }
    Ok(visits)
}

/// Deterministic transition matrix of the scheme: night-day alternates
/// ([[0,1],[1,0]]), slots cycle (p[u][(u+1) mod N] = 1). Rows sum to 1.
pub fn transition_matrix(scheme: &ClusterScheme) -> Vec<Vec<f64>> {
    let n = scheme.n_states();
    let mut m = vec![vec![0.0; n]; n];
    match scheme {
        ClusterScheme::NightDay(_) => {
            m[DAY_STATE][NIGHT_STATE] = 1.0;
            m[NIGHT_STATE][DAY_STATE] = 1.0;
        }
        ClusterScheme::Slot(_) => {
            for u in 0..n {
                m[u][(u + 1) % n] = 1.0;
            }
        }
    }
    m
}

/// Writes a visit table as `state,start,duration_h,n_samples` for debugging.
pub fn write_visits_csv(visits: &[StateVisit], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "state,start,duration_h,n_samples")?;
    for v in visits {
        writeln!(
            out,
            "{},{}-{:03}T{:02},{},{}",
            v.state,
            v.start_year,
            v.start_doy,
            v.start_hour as u32,
            v.duration_h,
            v.samples.len()
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
pub(crate) fn hourly_series(currents: &[f64]) -> Vec<HarvestSample> {
    currents
        .iter()
        .enumerate()
        .map(|(i, &c)| HarvestSample {
            year: 2000,
            day_of_year: 1 + (i / 24) as u32,
            local_time_h: (i % 24) as f64,
            power_w: c * 3.0,
            current_a: c,
        })
        .collect()
}
