//! End-to-end composition: harvest a month's records, cluster them, and fit
//! the semi-Markov model, for one month or for many months in parallel.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::astro::PanelOrientation;
use crate::clustering::{night_day_cluster, slot_cluster, ClusterScheme, StateVisit};
use crate::error::{Error, Result};
use crate::ingest::{group_by_month, Dataset};
use crate::markov::{build_model, Provenance, SemiMarkovModel};
use crate::power::PowerProcessor;
use crate::power::{harvest_series, HarvestSample};
use crate::pv::{CellParams, ModuleConfig, ThermalModel};

/// The full physical configuration of the harvesting chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarvestConfig {
    pub panel: PanelOrientation,
    pub cell: CellParams,
    pub module: ModuleConfig,
    #[serde(default)]
    pub thermal: ThermalModel,
    pub processor: PowerProcessor,
}

impl HarvestConfig {
    pub fn validate(&self) -> Result<()> {
        self.panel.validate()?;
        self.cell.validate()?;
        self.module.validate()?;
        self.thermal.validate()?;
        self.processor.validate()
    }
}

/// Harvested series for a dataset under this configuration.
pub fn harvest(ds: &Dataset, cfg: &HarvestConfig) -> Result<Vec<HarvestSample>> {
    harvest_series(
        ds,
        &cfg.panel,
        &cfg.cell,
        &cfg.module,
        &cfg.thermal,
        &cfg.processor,
    )
}

/// Clusters a harvested series under the chosen scheme.
pub fn cluster(series: &[HarvestSample], scheme: &ClusterScheme) -> Result<Vec<StateVisit>> {
    match scheme {
        ClusterScheme::NightDay(cfg) => night_day_cluster(series, cfg),
        ClusterScheme::Slot(cfg) => slot_cluster(series, cfg),
    }
}

/// Fits the model for one month-filtered dataset.
pub fn fit_month(
    month_ds: &Dataset,
    cfg: &HarvestConfig,
    scheme: &ClusterScheme,
    month: u32,
) -> Result<SemiMarkovModel> {
    let series = harvest(month_ds, cfg)?;
    let visits = cluster(&series, scheme)?;
    let provenance = Provenance {
        site: month_ds.site,
        panel: cfg.panel,
        cell: cfg.cell,
        module: cfg.module,
        thermal: cfg.thermal,
        processor: cfg.processor,
        scheme: *scheme,
        source_label: month_ds.source_label.clone(),
    };
    build_model(&visits, scheme, month, provenance)
}

/// Fits models for the selected months (or all months present when `months`
/// is empty). Month jobs are independent and run in parallel under the
/// `parallel` feature.
pub fn fit_months(
    ds: &Dataset,
    cfg: &HarvestConfig,
    scheme: &ClusterScheme,
    months: &[u32],
) -> Result<Vec<(u32, SemiMarkovModel)>> {
    cfg.validate()?;
    scheme.validate()?;
    let groups = group_by_month(ds)?;
    let selected: Vec<u32> = if months.is_empty() {
        groups.keys().copied().collect()
    } else {
        months.to_vec()
    };

    let jobs: Vec<(u32, &Dataset)> = selected
        .iter()
        .map(|&m| match groups.get(&m) {
            Some(g) => Ok((m, g)),
            None => Err(Error::MonthAbsent { month: m }),
        })
        .collect::<Result<_>>()?;

    #[cfg(feature = "parallel")]
    let iter = jobs.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = jobs.iter();

    iter.map(|(m, g)| fit_month(g, cfg, scheme, *m).map(|model| (*m, model)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::NightDayConfig;
    use crate::fixture::{generate, los_angeles, FixtureConfig};
    use chrono::NaiveDate;

    pub(crate) fn la_config() -> HarvestConfig {
        HarvestConfig {
            panel: PanelOrientation {
                tilt_deg: 45.0,
                azimuth_disp_deg: 30.0,
            },
            cell: CellParams::scc3733(),
            module: ModuleConfig { n_p: 6, n_s: 6 },
            thermal: ThermalModel::default(),
            processor: PowerProcessor {
                efficiency: 0.5,
                battery_voltage_v: 3.0,
            },
        }
    }

    #[test]
    fn fit_months_covers_requested_months() {
        let site = los_angeles();
        let mut cfg = FixtureConfig::new(NaiveDate::from_ymd_opt(1999, 7, 1).unwrap(), 62, 3);
        cfg.days = 62; // July + August
        let ds = generate(&site, &cfg).unwrap();
        let scheme = ClusterScheme::NightDay(NightDayConfig::default());
        let models = fit_months(&ds, &la_config(), &scheme, &[]).unwrap();
        let months: Vec<u32> = models.iter().map(|(m, _)| *m).collect();
        assert_eq!(months, vec![7, 8]);
        for (m, model) in &models {
            assert_eq!(model.month, *m);
            assert_eq!(model.n_states(), 2);
        }
    }

    #[test]
    fn absent_month_is_an_error() {
        let site = los_angeles();
        let cfg = FixtureConfig::new(NaiveDate::from_ymd_opt(1999, 7, 1).unwrap(), 10, 3);
        let ds = generate(&site, &cfg).unwrap();
        let scheme = ClusterScheme::NightDay(NightDayConfig::default());
        assert!(matches!(
            fit_months(&ds, &la_config(), &scheme, &[12]),
            Err(Error::MonthAbsent { month: 12 })
        ));
    }

    #[test]
    fn refit_is_identical() {
        let site = los_angeles();
        let cfg = FixtureConfig::new(NaiveDate::from_ymd_opt(1999, 7, 1).unwrap(), 20, 3);
        let ds = generate(&site, &cfg).unwrap();
        let scheme = ClusterScheme::NightDay(NightDayConfig::default());
        let a = fit_months(&ds, &la_config(), &scheme, &[7]).unwrap();
        let b = fit_months(&ds, &la_config(), &scheme, &[7]).unwrap();
        assert_eq!(a, b);
    }
}
