//! Single-diode solar-cell model and its scaling to an n_p x n_s module.
//!
//! The cell I-V curve is i_out = i_l - i_o (exp(q v / n k T) - 1) with the
//! light-generated current i_l = i_sc * F proportional to the radiation
//! rate F. The dark saturation current i_o is not a catalog value; it is
//! derived from the (i_sc, v_oc) anchors so that the open-circuit condition
//! holds exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RadianceRecord;

/// Elementary charge in C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Reference temperature for the (i_sc, v_oc) anchors in K (25 C).
pub const REFERENCE_TEMP_K: f64 = 298.15;

/// Exponent bound above which exp() is evaluated in log space.
const EXP_GUARD: f64 = 700.0;

/// Electrical parameters of one solar cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// Short-circuit current in A at the reference temperature.
    pub i_sc_a: f64,
    /// Open-circuit voltage in V at the reference temperature.
    pub v_oc_v: f64,
    /// Diode ideality factor, >= 1.
    #[serde(default = "default_ideality")]
    pub ideality: f64,
    pub area_cm2: f64,
    pub efficiency_pct: f64,
    /// Linear temperature coefficient of i_sc in A/K (0 disables).
    #[serde(default)]
    pub di_sc_dt_a_per_k: f64,
    /// Linear temperature coefficient of v_oc in V/K (0 disables).
    #[serde(default)]
    pub dv_oc_dt_v_per_k: f64,
}

fn default_ideality() -> f64 {
    1.5
}

impl CellParams {
    /// The Solarbotics SCC-3733 monocrystalline cell: 1 cm2, 21.1 %
    /// efficiency, i_sc = 5 mA, v_oc = 1.8 V.
    pub fn scc3733() -> Self {
        CellParams {
            i_sc_a: 5e-3,
            v_oc_v: 1.8,
            ideality: 1.5,
            area_cm2: 1.0,
            efficiency_pct: 21.1,
            di_sc_dt_a_per_k: 0.0,
            dv_oc_dt_v_per_k: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i_sc_a <= 0.0 {
            return Err(Error::InvalidConfig("i_sc must be positive".into()));
        }
        if self.v_oc_v <= 0.0 {
            return Err(Error::InvalidConfig("v_oc must be positive".into()));
        }
        if self.ideality < 1.0 {
            return Err(Error::InvalidConfig("ideality must be >= 1".into()));
        }
        Ok(())
    }

    /// (i_sc, v_oc) anchors shifted to temperature `temp_k` by the linear
    /// coefficients. With the default zero coefficients this is identity.
    pub fn anchors_at(&self, temp_k: f64) -> (f64, f64) {
        let dt = temp_k - REFERENCE_TEMP_K;
        (
            self.i_sc_a + self.di_sc_dt_a_per_k * dt,
            self.v_oc_v + self.dv_oc_dt_v_per_k * dt,
        )
    }
}

/// Module wiring: n_p parallel strings of n_s series cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleConfig {
    pub n_p: u32,
    pub n_s: u32,
}

impl ModuleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_p < 1 || self.n_s < 1 {
            return Err(Error::InvalidConfig("n_p and n_s must be >= 1".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> u32 {
        self.n_p * self.n_s
    }
}

/// Cell temperature model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ThermalModel {
    /// Constant cell temperature.
    Fixed { fixed_temp_k: f64 },
    /// Ambient temperature from the record plus a linear irradiance term
    /// (NOCT-style): T = T_ambient + coeff * I_eff.
    AmbientPlusIrradiance {
        #[serde(default = "default_irradiance_coeff")]
        irradiance_coeff_k_per_wm2: f64,
    },
}

fn default_irradiance_coeff() -> f64 {
    // (45 - 20) / 800, the NOCT linear coefficient.
    0.03125
}

impl Default for ThermalModel {
    fn default() -> Self {
        ThermalModel::Fixed {
            fixed_temp_k: REFERENCE_TEMP_K,
        }
    }
}

impl ThermalModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            ThermalModel::Fixed { fixed_temp_k } if *fixed_temp_k <= 0.0 => Err(
                Error::InvalidConfig("fixed temperature must be positive".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Cell temperature in K for one record under the chosen thermal model.
pub fn cell_temperature(rec: &RadianceRecord, i_eff_wm2: f64, tm: &ThermalModel) -> Result<f64> {
    match tm {
        ThermalModel::Fixed { fixed_temp_k } => Ok(*fixed_temp_k),
        ThermalModel::AmbientPlusIrradiance {
            irradiance_coeff_k_per_wm2,
        } => {
            let ambient = rec.ambient_temp_c.ok_or(Error::MissingAmbientTemp)?;
            Ok(ambient + 273.15 + irradiance_coeff_k_per_wm2 * i_eff_wm2)
        }
    }
}

/// Radiation rate F: effective irradiance normalized by one sun (1 kW/m2),
/// clamped to [0, 1].
pub fn radiation_rate(i_eff_wm2: f64) -> f64 {
    (0.001 * i_eff_wm2).clamp(0.0, 1.0)
}

/// q / (n k T), the reciprocal thermal voltage scale of the diode in 1/V.
fn diode_scale(ideality: f64, temp_k: f64) -> f64 {
    ELEMENTARY_CHARGE / (ideality * BOLTZMANN * temp_k)
}

/// Dark saturation current in A: the unique i_o with i_out(v_oc) = 0 when
/// i_l = i_sc, i.e. i_o = i_sc / (exp(q v_oc / n k T) - 1).
///
/// For exponents beyond the f64 range the quotient is evaluated in log
/// space.
pub fn dark_saturation_current(cell: &CellParams, temp_k: f64) -> f64 {
    let (i_sc, v_oc) = cell.anchors_at(temp_k);
    let x = diode_scale(cell.ideality, temp_k) * v_oc;
    if x < EXP_GUARD {
        i_sc / x.exp_m1()
    } else {
        // i_sc e^-x / (1 - e^-x); the denominator is 1 to machine precision.
        i_sc * (-x).exp()
    }
}

/// Cell output current in A from the diode equation at voltage `v`, with
/// the light-generated current i_l = i_sc * F. May be negative for v near
/// or above v_oc at low F.
pub fn cell_current(v: f64, radiation_rate: f64, cell: &CellParams, temp_k: f64) -> f64 {
    let (i_sc, _) = cell.anchors_at(temp_k);
    let i_l = i_sc * radiation_rate;
    let i_o = dark_saturation_current(cell, temp_k);
    let x = (diode_scale(cell.ideality, temp_k) * v).min(EXP_GUARD);
    i_l - i_o * x.exp_m1()
}

/// Open-circuit voltage of the cell at radiation rate F:
/// v = (n k T / q) ln(1 + F i_sc / i_o). Zero when F = 0.
pub fn open_circuit_voltage(radiation_rate: f64, cell: &CellParams, temp_k: f64) -> f64 {
    let (i_sc, _) = cell.anchors_at(temp_k);
    let i_o = dark_saturation_current(cell, temp_k);
    (radiation_rate * i_sc / i_o).ln_1p() / diode_scale(cell.ideality, temp_k)
}

/// Module-level operating point (current, voltage) for a cell voltage:
/// i^M = n_p i_out, v^M = n_s v.
pub fn module_operating_point(
    v_cell: f64,
    radiation_rate: f64,
    cell: &CellParams,
    module: &ModuleConfig,
    temp_k: f64,
) -> (f64, f64) {
    (
        module.n_p as f64 * cell_current(v_cell, radiation_rate, cell, temp_k),
        module.n_s as f64 * v_cell,
    )
}
