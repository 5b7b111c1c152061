//! Maximum power point of the module I-V curve and the DC/DC conversion
//! stage, mapping irradiance records to harvested power and current.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::astro::{effective_irradiance, PanelOrientation};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, RadianceRecord, SiteConfig};
use crate::pv::{
    cell_current, cell_temperature, open_circuit_voltage, radiation_rate, CellParams, ModuleConfig,
    ThermalModel,
};

/// DC/DC power processor: a constant conversion efficiency and the
/// regulated buffer voltage that turns power into charging current.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerProcessor {
    /// Conversion efficiency in (0, 1).
    pub efficiency: f64,
    /// Buffer (battery) voltage in V, > 0.
    pub battery_voltage_v: f64,
}

impl PowerProcessor {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency < 1.0) {
            return Err(Error::InvalidConfig(
                "processor efficiency must be in (0, 1)".into(),
            ));
        }
        if self.battery_voltage_v <= 0.0 {
            return Err(Error::InvalidConfig(
                "battery voltage must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Timestamped harvested power and current after the power processor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestSample {
    pub year: i32,
    pub day_of_year: u32,
    pub local_time_h: f64,
    pub power_w: f64,
    pub current_a: f64,
}

impl HarvestSample {
    /// Hours since the calendar epoch; mirrors `RadianceRecord::absolute_hour`.
    pub fn absolute_hour(&self) -> f64 {
        let date = chrono::NaiveDate::from_yo_opt(self.year, self.day_of_year)
            .expect("day_of_year valid for year by construction");
        chrono::Datelike::num_days_from_ce(&date) as f64 * 24.0 + self.local_time_h
    }
}

/// Golden-section bracket tolerance on the cell voltage, in V.
const MPP_V_TOLERANCE: f64 = 1e-12;

const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt(5) - 1) / 2

/// Ideal maximum power point of the module at radiation rate `f`.
///
/// Returns `(p_mpp_w, v_mpp_cell_v)`: the module power n_p * n_s *
/// max_v{v * i_out(v)} and the cell voltage attaining it. The objective is
/// unimodal on [0, v_oc(F, T)], so a golden-section search converges to the
/// bracket tolerance. Operating points with non-positive power clamp to
/// (0, 0): a real tracker disconnects rather than sinking power.
pub fn mpp_power(f: f64, cell: &CellParams, module: &ModuleConfig, temp_k: f64) -> (f64, f64) {
    let (p_cell, v_mpp) = cell_mpp(f, cell, temp_k);
    if p_cell <= 0.0 {
        return (0.0, 0.0);
    }
    (module.cell_count() as f64 * p_cell, v_mpp)
}

/// Golden-section maximization of v * i_out(v) for a single cell.
fn cell_mpp(f: f64, cell: &CellParams, temp_k: f64) -> (f64, f64) {
    let v_hi = open_circuit_voltage(f, cell, temp_k);
    if v_hi <= 0.0 {
        return (0.0, 0.0);
    }
    let power = |v: f64| v * cell_current(v, f, cell, temp_k);

    let mut a = 0.0;
    let mut b = v_hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = power(c);
    let mut fd = power(d);
    while b - a > MPP_V_TOLERANCE {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = power(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = power(d);
        }
    }
    let v = 0.5 * (a + b);
    (power(v), v)
}

/// Runs one irradiance record through the full chain: effective irradiance,
/// radiation rate, cell temperature, MPP, conversion stage.
pub fn harvested_sample(
    rec: &RadianceRecord,
    site: &SiteConfig,
    panel: &PanelOrientation,
    cell: &CellParams,
    module: &ModuleConfig,
    thermal: &ThermalModel,
    proc: &PowerProcessor,
) -> Result<HarvestSample> {
    let i_eff = effective_irradiance(rec, site, panel);
    let f = radiation_rate(i_eff);
    let temp_k = cell_temperature(rec, i_eff, thermal)?;
    let (p_mpp, _) = mpp_power(f, cell, module, temp_k);
    let power_w = proc.efficiency * p_mpp;
    Ok(HarvestSample {
        year: rec.year,
        day_of_year: rec.day_of_year,
        local_time_h: rec.local_time_h,
        power_w,
        current_a: power_w / proc.battery_voltage_v,
    })
}

/// Maps a whole dataset to harvested samples, one per record, order
/// preserved. Sequential reference path; see [`harvest_series`].
pub fn harvest_series_seq(
    ds: &Dataset,
    panel: &PanelOrientation,
    cell: &CellParams,
    module: &ModuleConfig,
    thermal: &ThermalModel,
    proc: &PowerProcessor,
) -> Result<Vec<HarvestSample>> {
    ds.records
        .iter()
        .map(|rec| harvested_sample(rec, &ds.site, panel, cell, module, thermal, proc))
        .collect()
}

/// Maps a whole dataset to harvested samples, one per record, order
/// preserved. Records are independent, so the parallel build evaluates
/// them with rayon; results are identical to the sequential path.
#[cfg(feature = "parallel")]
pub fn harvest_series(
    ds: &Dataset,
    panel: &PanelOrientation,
    cell: &CellParams,
    module: &ModuleConfig,
    thermal: &ThermalModel,
    proc: &PowerProcessor,
) -> Result<Vec<HarvestSample>> {
    ds.records
        .par_iter()
        .map(|rec| harvested_sample(rec, &ds.site, panel, cell, module, thermal, proc))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn harvest_series(
    ds: &Dataset,
    panel: &PanelOrientation,
    cell: &CellParams,
    module: &ModuleConfig,
    thermal: &ThermalModel,
    proc: &PowerProcessor,
) -> Result<Vec<HarvestSample>> {
    harvest_series_seq(ds, panel, cell, module, thermal, proc)
}

/// Writes a harvest series as `year,doy,hour,power_w,current_a`.
pub fn write_harvest_csv(samples: &[HarvestSample], path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "year,doy,hour,power_w,current_a")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.year, s.day_of_year, s.local_time_h, s.power_w, s.current_a
        )?;
    }
    out.flush()?;
    Ok(())
}
