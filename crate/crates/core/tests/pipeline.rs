//! End-to-end library tests on the bundled clear-sky fixture: fit, trace
//! synthesis, validation statistics and their interplay.

use chrono::NaiveDate;

use solar_harvest::astro::PanelOrientation;
use solar_harvest::clustering::{
    night_day_cluster, ClusterScheme, NightDayConfig, SlotConfig, DAY_STATE, NIGHT_STATE,
};
use solar_harvest::fixture::{generate, los_angeles, FixtureConfig};
use solar_harvest::ingest::group_by_month;
use solar_harvest::markov::{generate_trace, load_model, save_model};
use solar_harvest::pipeline::{cluster, fit_month, fit_months, harvest, HarvestConfig};
use solar_harvest::power::PowerProcessor;
use solar_harvest::pv::{CellParams, ModuleConfig, ThermalModel};
use solar_harvest::validate::{acf, compare_acf, ks_against_density, summary_from_visits};

fn la_harvest_config() -> HarvestConfig {
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

fn july_fixture(days: u32, seed: u64) -> solar_harvest::ingest::Dataset {
    let cfg = FixtureConfig::new(NaiveDate::from_ymd_opt(1999, 7, 1).unwrap(), days, seed);
    generate(&los_angeles(), &cfg).unwrap()
}

#[test]
fn july_day_state_duration_is_physical() {
    // Mean day-state duration on the July Los Angeles fixture sits in the
    // 9-11 h range, consistent with a 45-degree panel's harvest window.
    let ds = july_fixture(31, 42);
    let series = harvest(&ds, &la_harvest_config()).unwrap();
    let visits = night_day_cluster(&series, &NightDayConfig::default()).unwrap();
    let stats = summary_from_visits(&visits, 7);
    let day = stats.iter().find(|s| s.state == DAY_STATE).unwrap();
    assert!(
        (9.0..=11.0).contains(&day.mean_duration_h),
        "mean day duration {} h",
        day.mean_duration_h
    );
    let night = stats.iter().find(|s| s.state == NIGHT_STATE).unwrap();
    assert!(night.mean_current_a < day.mean_current_a / 50.0);
}

#[test]
fn model_self_consistency_ks() {
    // A model fitted on a month's data reproduces that month's per-state
    // current distributions at alpha = 0.01.
    let ds = july_fixture(31, 42);
    let cfg = la_harvest_config();
    let scheme = ClusterScheme::NightDay(NightDayConfig::default());
    let months = group_by_month(&ds).unwrap();
    let model = fit_month(&months[&7], &cfg, &scheme, 7).unwrap();

    let series = harvest(&months[&7], &cfg).unwrap();
    let visits = cluster(&series, &scheme).unwrap();
    for state in &model.states {
        let samples: Vec<f64> = visits
            .iter()
            .filter(|v| v.state == state.state_id)
            .flat_map(|v| v.samples.iter().copied())
            .collect();
        let res = ks_against_density(&samples, &state.current, 0.01).unwrap();
        assert!(
            res.passed,
            "state {} failed: D = {}, critical = {}",
            state.state_id, res.statistic, res.critical
        );
    }
}

#[test]
fn acf_improves_with_finer_slots() {
    // The 12-slot model tracks the empirical autocorrelation far better
    // than the 2-slot model, and to within 0.1 absolute on lags 0..48.
    let ds = july_fixture(30, 42);
    let cfg = la_harvest_config();
    let series = harvest(&ds, &cfg).unwrap();
    let currents: Vec<f64> = series.iter().map(|s| s.current_a).collect();
    let empirical = acf(&currents, 48, "empirical").unwrap();
    let months = group_by_month(&ds).unwrap();

    let mut deviations = Vec::new();
    for n_slots in [2usize, 12] {
        let scheme = ClusterScheme::Slot(SlotConfig { n_slots });
        let model = fit_month(&months[&7], &cfg, &scheme, 7).unwrap();
        let trace = generate_trace(&model, 24.0 * 120.0, 7);
        let synthetic = acf(&trace.values, 48, "synthetic").unwrap();
        deviations.push(
            compare_acf(&empirical, &synthetic)
                .unwrap()
                .max_abs_deviation,
        );
    }
    assert!(
        deviations[1] < deviations[0],
        "12-slot deviation {} not below 2-slot deviation {}",
        deviations[1],
        deviations[0]
    );
    assert!(deviations[1] <= 0.1, "12-slot deviation {}", deviations[1]);
}

#[test]
fn generated_sojourns_match_duration_model() {
    // Self-consistency via the validation machinery: day-state sojourn
    // lengths of a long synthetic trace follow the fitted duration
    // distribution at alpha = 0.01.
    //
    // Built from a hand-made series with varying day lengths so the
    // duration distribution is non-trivial.
    let mut currents = Vec::new();
    for day in 0..60 {
        let day_len = 9 + (day * 7 + 3) % 4; // 9..12 h, aperiodic pattern
        let start = 6 + day % 2;
        for h in 0..24 {
            let lit = h >= start && h < start + day_len;
            currents.push(if lit {
                3e-3 + 1e-4 * ((day * 13 + h * 5) % 17) as f64
            } else {
                0.0
            });
        }
    }
    let series: Vec<solar_harvest::power::HarvestSample> = currents
        .iter()
        .enumerate()
        .map(|(i, &c)| solar_harvest::power::HarvestSample {
            year: 2000,
            day_of_year: 1 + (i / 24) as u32,
            local_time_h: (i % 24) as f64,
            power_w: c * 3.0,
            current_a: c,
        })
        .collect();
    let scheme = ClusterScheme::NightDay(NightDayConfig::default());
    let visits = night_day_cluster(&series, &NightDayConfig::default()).unwrap();
    let model = solar_harvest::markov::build_model(
        &visits,
        &scheme,
        1,
        solar_harvest::markov::Provenance {
            site: los_angeles(),
            panel: PanelOrientation::flat(),
            cell: CellParams::scc3733(),
            module: ModuleConfig { n_p: 1, n_s: 1 },
            thermal: ThermalModel::default(),
            processor: PowerProcessor {
                efficiency: 0.5,
                battery_voltage_v: 3.0,
            },
            scheme,
            source_label: "hand-made".into(),
        },
    )
    .unwrap();

    let trace = generate_trace(&model, 1_000_000.0, 99);
    let day_sojourns: Vec<f64> = trace
        .sojourns
        .iter()
        .skip(1) // the first sojourn is a fractional residual
        .filter(|s| s.state == DAY_STATE)
        .map(|s| s.duration_h)
        .collect();
    assert!(day_sojourns.len() > 10_000);
    let res = ks_against_density(&day_sojourns, &model.states[DAY_STATE].duration, 0.01).unwrap();
    assert!(
        res.passed,
        "sojourn KS failed: D = {}, critical = {}",
        res.statistic, res.critical
    );
}

#[test]
fn module_size_scales_summary_currents_exactly() {
    // 6x6 versus 2x2 panels: mean and max day currents scale by 36/4 = 9;
    // durations are untouched because the threshold scales along.
    let ds = july_fixture(31, 5);
    let mut cfg = la_harvest_config();
    cfg.module = ModuleConfig { n_p: 2, n_s: 2 };
    let small = harvest(&ds, &cfg).unwrap();
    cfg.module = ModuleConfig { n_p: 6, n_s: 6 };
    let large = harvest(&ds, &cfg).unwrap();

    let nd = NightDayConfig::default();
    let stats_small = summary_from_visits(&night_day_cluster(&small, &nd).unwrap(), 7);
    let stats_large = summary_from_visits(&night_day_cluster(&large, &nd).unwrap(), 7);
    let (s, l) = (
        stats_small.iter().find(|s| s.state == DAY_STATE).unwrap(),
        stats_large.iter().find(|s| s.state == DAY_STATE).unwrap(),
    );
    assert!((l.mean_current_a / s.mean_current_a - 9.0).abs() < 1e-9);
    assert!((l.max_current_a / s.max_current_a - 9.0).abs() < 1e-9);
    assert_eq!(l.mean_duration_h, s.mean_duration_h);
    assert_eq!(l.n_visits, s.n_visits);
}

#[test]
fn model_files_round_trip_through_disk() {
    let ds = july_fixture(31, 11);
    let cfg = la_harvest_config();
    for scheme in [
        ClusterScheme::NightDay(NightDayConfig::default()),
        ClusterScheme::Slot(SlotConfig { n_slots: 12 }),
    ] {
        let models = fit_months(&ds, &cfg, &scheme, &[7]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&models[0].1, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, models[0].1);

        // reload produces bit-identical traces
        let a = generate_trace(&models[0].1, 24.0 * 30.0, 4);
        let b = generate_trace(&back, 24.0 * 30.0, 4);
        assert_eq!(a, b);
    }
}

#[test]
fn full_year_fixture_fits_every_month() {
    let cfg = FixtureConfig::new(NaiveDate::from_ymd_opt(1999, 1, 1).unwrap(), 365, 21);
    let ds = generate(&los_angeles(), &cfg).unwrap();
    let models = fit_months(
        &ds,
        &la_harvest_config(),
        &ClusterScheme::NightDay(NightDayConfig::default()),
        &[],
    )
    .unwrap();
    assert_eq!(models.len(), 12);
    // summer days are longer than winter days
    let mean_day = |m: &solar_harvest::markov::SemiMarkovModel| {
        let months = group_by_month(&ds).unwrap();
        let series = harvest(&months[&m.month], &la_harvest_config()).unwrap();
        let visits = cluster(&series, m.scheme()).unwrap();
        summary_from_visits(&visits, m.month)
            .iter()
            .find(|s| s.state == DAY_STATE)
            .unwrap()
            .mean_duration_h
    };
    let june = models
        .iter()
        .find(|(m, _)| *m == 6)
        .map(|(_, m)| mean_day(m))
        .unwrap();
    let december = models
        .iter()
        .find(|(m, _)| *m == 12)
        .map(|(_, m)| mean_day(m))
        .unwrap();
    assert!(
        june > december + 1.0,
        "june {june} h vs december {december} h"
    );
}
