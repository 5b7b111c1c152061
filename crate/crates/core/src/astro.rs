//! Sun-panel geometry: declination, equation of time, apparent solar time,
//! hour angle, incidence cosine and the effective irradiance on a tilted,
//! rotated panel.
//!
//! All angles are stored in degrees and converted to radians only at the
//! trigonometric call boundaries.

use serde::{Deserialize, Serialize};

use crate::ingest::{RadianceRecord, SiteConfig};

/// Orientation of the panel: tilt from horizontal and azimuthal displacement
/// from the meridian plane (positive when the panel faces West).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelOrientation {
    /// Tilt from horizontal in degrees, [0, 90].
    pub tilt_deg: f64,
    /// Azimuthal displacement in degrees, [-90, 90], positive West.
    pub azimuth_disp_deg: f64,
}

impl PanelOrientation {
    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0..=90.0).contains(&self.tilt_deg) {
            return Err(crate::Error::InvalidConfig(format!(
                "tilt {} outside [0, 90]",
                self.tilt_deg
            )));
        }
        if !(-90.0..=90.0).contains(&self.azimuth_disp_deg) {
            return Err(crate::Error::InvalidConfig(format!(
                "azimuth displacement {} outside [-90, 90]",
                self.azimuth_disp_deg
            )));
        }
        Ok(())
    }

    /// Flat panel, no azimuthal displacement.
    pub fn flat() -> Self {
        PanelOrientation {
            tilt_deg: 0.0,
            azimuth_disp_deg: 0.0,
        }
    }
}

/// All intermediate angles for one (time, day) evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolarAngles {
    pub day_angle_deg: f64,
    pub declination_deg: f64,
    pub equation_of_time_h: f64,
    pub apparent_solar_time_h: f64,
    pub hour_angle_deg: f64,
    pub cos_incidence: f64,
}

/// Day angle D(N) = 360 (N - 81) / 365 degrees.
pub fn day_angle(day_number: u32) -> f64 {
    360.0 * (day_number as f64 - 81.0) / 365.0
}

/// Declination of the sun in degrees for day number N (1 = January 1st):
/// asin(sin 23.45 deg * sin D(N)). Bounded by +-23.45 degrees.
pub fn declination(day_number: u32) -> f64 {
    let d = day_angle(day_number).to_radians();
    (23.45f64.to_radians().sin() * d.sin()).asin().to_degrees()
}

/// Equation of time in hours:
/// [9.87 sin(2D) - 7.53 cos(D) - 1.5 sin(D)] / 60.
pub fn equation_of_time(day_number: u32) -> f64 {
    let d = day_angle(day_number).to_radians();
    (9.87 * (2.0 * d).sin() - 7.53 * d.cos() - 1.5 * d.sin()) / 60.0
}

// Cumulative day counts of a non-leap year, used only to decide which
// calendar month a day number falls in for the DST rule. The one-day slip
// after February in leap years is irrelevant at month granularity.
const MONTH_ENDS: [u32; 12] = [31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334, 366];

pub(crate) fn month_of_day_number(day_number: u32) -> u32 {
    let n = day_number.clamp(1, 366);
    MONTH_ENDS.iter().position(|&end| n <= end).unwrap() as u32 + 1
}

/// Apparent solar time in hours: AST = t' + dt + ET(N), where
/// dt = (Lo - UTC_off * 15 deg) / 15 deg is the longitude displacement from
/// the time-zone meridian and t' the DST-adjusted local time.
///
/// Values outside [0, 24) are not wrapped; the hour angle only enters
/// sines and cosines where the 360-degree periodicity makes wrapping
/// unnecessary.
pub fn apparent_solar_time(t_local: f64, day_number: u32, site: &SiteConfig) -> f64 {
    let t_adjusted = site.adjusted_time(t_local, month_of_day_number(day_number));
    let gma = site.utc_offset_h * 15.0;
    let dt = (site.longitude_deg - gma) / 15.0;
    t_adjusted + dt + equation_of_time(day_number)
}

/// Hour angle in degrees: 15 (AST - 12). Zero at solar noon, positive in
/// the afternoon.
pub fn hour_angle(t_local: f64, day_number: u32, site: &SiteConfig) -> f64 {
    15.0 * (apparent_solar_time(t_local, day_number, site) - 12.0)
}

/// Cosine of the incidence angle between the sun's rays and the panel
/// normal, from the five-term expansion in latitude La, declination gamma,
/// hour angle omega, tilt beta and azimuthal displacement alpha
/// (second term subtractive):
///
/// ```text
/// cos T =  sin g sin La cos b
///        - sin g cos La sin b cos a
///        + cos g cos La cos b cos w
///        + cos g sin La sin b cos a cos w
///        + cos g sin b sin a sin w
/// ```
pub fn cos_incidence(
    t_local: f64,
    day_number: u32,
    site: &SiteConfig,
    panel: &PanelOrientation,
) -> f64 {
    let gamma = declination(day_number).to_radians();
    let omega = hour_angle(t_local, day_number, site).to_radians();
    let la = site.latitude_deg.to_radians();
    let beta = panel.tilt_deg.to_radians();
    let alpha = panel.azimuth_disp_deg.to_radians();

    let (sin_g, cos_g) = gamma.sin_cos();
    let (sin_la, cos_la) = la.sin_cos();
    let (sin_b, cos_b) = beta.sin_cos();
    let (sin_a, cos_a) = alpha.sin_cos();
    let (sin_w, cos_w) = omega.sin_cos();

    let v = sin_g * sin_la * cos_b - sin_g * cos_la * sin_b * cos_a
        + cos_g * cos_la * cos_b * cos_w
        + cos_g * sin_la * sin_b * cos_a * cos_w
        + cos_g * sin_b * sin_a * sin_w;
    // The expansion is a dot product of unit vectors; clamp float residue.
    v.clamp(-1.0, 1.0)
}

/// All solar angles for one evaluation point.
pub fn solar_angles(
    t_local: f64,
    day_number: u32,
    site: &SiteConfig,
    panel: &PanelOrientation,
) -> SolarAngles {
    SolarAngles {
        day_angle_deg: day_angle(day_number),
        declination_deg: declination(day_number),
        equation_of_time_h: equation_of_time(day_number),
        apparent_solar_time_h: apparent_solar_time(t_local, day_number, site),
        hour_angle_deg: hour_angle(t_local, day_number, site),
        cos_incidence: cos_incidence(t_local, day_number, site, panel),
    }
}

/// Effective irradiance on the panel plane:
/// I_eff = I_sun * max(0, cos T). Never negative; the max() accounts for
/// the sun sitting behind the panel plane or below the horizon.
pub fn effective_irradiance(
    rec: &RadianceRecord,
    site: &SiteConfig,
    panel: &PanelOrientation,
) -> f64 {
    let cos_t = cos_incidence(rec.local_time_h, rec.day_of_year, site, panel);
    rec.irradiance_wm2 * cos_t.max(0.0)
}
