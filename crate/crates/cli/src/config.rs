//! Run-configuration file (TOML) and its resolution against command-line
//! overrides.

use std::path::Path;

use serde::Deserialize;

use solar_harvest::astro::PanelOrientation;
use solar_harvest::clustering::{ClusterScheme, NightDayConfig, SlotConfig};
use solar_harvest::ingest::SiteConfig;
use solar_harvest::pipeline::HarvestConfig;
use solar_harvest::power::PowerProcessor;
use solar_harvest::pv::{CellParams, ModuleConfig, ThermalModel};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
pub struct RunConfig {
    pub site: SiteConfig,
    pub panel: PanelOrientation,
    pub cell: CellParams,
    pub module: ModuleConfig,
    #[serde(default)]
    pub thermal: ThermalModel,
    pub processor: PowerProcessor,
    /// Optional when the scheme comes from `--scheme`.
    pub clustering: Option<ClusterScheme>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.harvest_config()
            .validate()
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        cfg.site
            .validate()
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        if let Some(scheme) = &cfg.clustering {
            scheme
                .validate()
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        }
        Ok(cfg)
    }

    pub fn harvest_config(&self) -> HarvestConfig {
        HarvestConfig {
            panel: self.panel,
            cell: self.cell,
            module: self.module,
            thermal: self.thermal,
            processor: self.processor,
        }
    }

    /// Resolves the clustering scheme from the config file and the
    /// `--scheme` / `--slots` flags (flags win).
    pub fn resolve_scheme(
        &self,
        flag_scheme: Option<&str>,
        flag_slots: Option<usize>,
    ) -> Result<ClusterScheme, CliError> {
        let resolved = match flag_scheme {
            Some("night-day") => {
                if flag_slots.is_some() {
                    return Err(CliError::Usage(
                        "--slots only applies to --scheme slot".into(),
                    ));
                }
                match self.clustering {
                    Some(ClusterScheme::NightDay(cfg)) => ClusterScheme::NightDay(cfg),
                    _ => ClusterScheme::NightDay(NightDayConfig::default()),
                }
            }
            Some("slot") => {
                let n_slots = flag_slots
                    .or(match self.clustering {
                        Some(ClusterScheme::Slot(cfg)) => Some(cfg.n_slots),
                        _ => None,
                    })
                    .ok_or_else(|| CliError::Usage("--scheme slot requires --slots N".into()))?;
                ClusterScheme::Slot(SlotConfig { n_slots })
            }
            Some(other) => {
                return Err(CliError::Usage(format!(
                    "unknown scheme {other:?} (use night-day or slot)"
                )))
            }
            None => match (self.clustering, flag_slots) {
                (Some(ClusterScheme::Slot(_)), Some(n_slots)) => {
                    ClusterScheme::Slot(SlotConfig { n_slots })
                }
                (Some(scheme), None) => scheme,
                (Some(_), Some(_)) => {
                    return Err(CliError::Usage(
                        "--slots only applies to the slot scheme".into(),
                    ))
                }
                (None, _) => {
                    return Err(CliError::Usage(
                        "no [clustering] section in config; pass --scheme".into(),
                    ))
                }
            },
        };
        resolved
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(resolved)
    }
}

/// Parses `--months`: "all", or a comma-separated list like "1,2,8".
pub fn parse_months(spec: Option<&str>) -> Result<Vec<u32>, CliError> {
    match spec {
        None => Ok(Vec::new()),
        Some(s) if s.eq_ignore_ascii_case("all") => Ok(Vec::new()),
        Some(s) => {
            let mut months = Vec::new();
            for part in s.split(',') {
                let m: u32 = part
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad month {part:?} in --months")))?;
                if !(1..=12).contains(&m) {
                    return Err(CliError::Usage(format!("month {m} outside 1..12")));
                }
                months.push(m);
            }
            months.sort_unstable();
            months.dedup();
            Ok(months)
        }
    }
}

/// Parses `--sizes`: comma-separated n_p x n_s pairs like "2x2,6x6".
pub fn parse_sizes(spec: &str) -> Result<Vec<ModuleConfig>, CliError> {
    let mut sizes = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        let (p, s) = part
            .split_once(['x', 'X'])
            .ok_or_else(|| CliError::Usage(format!("bad size {part:?}, expected NxM")))?;
        let n_p: u32 = p
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad size {part:?}")))?;
        let n_s: u32 = s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad size {part:?}")))?;
        if n_p == 0 || n_s == 0 {
            return Err(CliError::Usage(format!("size {part:?} must be >= 1x1")));
        }
        sizes.push(ModuleConfig { n_p, n_s });
    }
    if sizes.is_empty() {
        return Err(CliError::Usage("--sizes is empty".into()));
    }
    Ok(sizes)
}

/// One entry of a `--sites` sweep file.
#[derive(Debug, Clone, Deserialize)]
pub struct SweepSite {
    pub name: String,
    /// Data CSV for this site, relative to the sites file.
    pub data: String,
    #[serde(flatten)]
    pub site: SiteConfig,
}

#[derive(Debug, Deserialize)]
pub struct SitesFile {
    pub sites: Vec<SweepSite>,
}

pub fn load_sites(path: &Path) -> Result<Vec<SweepSite>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read sites file {}: {e}", path.display())))?;
    let parsed: SitesFile = toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("sites file {}: {e}", path.display())))?;
    if parsed.sites.is_empty() {
        return Err(CliError::Usage("sites file lists no sites".into()));
    }
    for entry in &parsed.sites {
        entry
            .site
            .validate()
            .map_err(|e| CliError::Usage(format!("site {:?}: {e}", entry.name)))?;
    }
    Ok(parsed.sites)
}
