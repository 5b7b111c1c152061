//! The semi-Markov source model: per-state current and duration
//! distributions plus a transition matrix, built from clustered visits, and
//! synthesis of energy-inflow traces from it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::astro::PanelOrientation;
use crate::clustering::{transition_matrix, ClusterScheme, StateVisit};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::ingest::SiteConfig;
use crate::power::PowerProcessor;
use crate::pv::{CellParams, ModuleConfig, ThermalModel};

/// Current model-file format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Headroom factor on the observed maximum current when bounding the
/// support of g(i | x_s).
const CURRENT_SUPPORT_HEADROOM: f64 = 1.05;

/// One state of the semi-Markov chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateModel {
    pub state_id: usize,
    /// Sojourn-duration distribution f(tau | x_s). A point mass for the
    /// slot scheme (fixed slot length) and for degenerate night-day states.
    pub duration: Density,
    /// Input-current distribution g(i | x_s).
    pub current: Density,
    /// Number of current samples observed in this state.
    pub sample_count: usize,
    /// Number of visits observed (all, including truncated ones).
    pub visit_count: usize,
    /// True when a distribution had to fall back to a point mass.
    pub degenerate: bool,
}

/// Everything the model was fitted from, so reports are self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub site: SiteConfig,
    pub panel: PanelOrientation,
    pub cell: CellParams,
    pub module: ModuleConfig,
    pub thermal: ThermalModel,
    pub processor: PowerProcessor,
    pub scheme: ClusterScheme,
    pub source_label: String,
}

/// The fitted semi-Markov source model for one calendar month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemiMarkovModel {
    pub month: u32,
    pub states: Vec<StateModel>,
    /// Transition probabilities p_uv; rows sum to 1. Both schemes produce
    /// deterministic matrices, but the general form is kept in the model.
    pub transitions: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl SemiMarkovModel {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn scheme(&self) -> &ClusterScheme {
        &self.provenance.scheme
    }

    /// Structural invariants, also enforced when loading a model file.
    pub fn check(&mut self) -> Result<()> {
        let n = self.provenance.scheme.n_states();
        if self.states.len() != n {
            return Err(Error::ModelFormat(format!(
                "{} states but scheme {} needs {n}",
                self.states.len(),
                self.provenance.scheme.name()
            )));
        }
        if self.transitions.len() != n {
            return Err(Error::ModelFormat("transition matrix shape".into()));
        }
        for (u, row) in self.transitions.iter().enumerate() {
            if row.len() != n {
                return Err(Error::ModelFormat("transition matrix shape".into()));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::ModelFormat(format!(
                    "transition row {u} does not sum to 1"
                )));
            }
        }
        if self.transitions != transition_matrix(&self.provenance.scheme) {
            return Err(Error::ModelFormat(format!(
                "transition matrix does not match the {} scheme",
                self.provenance.scheme.name()
            )));
        }
        for (i, state) in self.states.iter_mut().enumerate() {
            if state.state_id != i {
                return Err(Error::ModelFormat(format!(
                    "state ids not consecutive at {i}"
                )));
            }
            state.duration.check_and_rebuild()?;
            state.current.check_and_rebuild()?;
            let (lo, _) = state.current.support();
            if lo < 0.0 {
                return Err(Error::ModelFormat(format!(
                    "state {i}: current support extends below zero"
                )));
            }
            let (dur_lo, _) = state.duration.support();
            if dur_lo <= 0.0 {
                return Err(Error::ModelFormat(format!(
                    "state {i}: non-positive sojourn durations"
                )));
            }
        }
        Ok(())
    }
}

/// Fits per-state current and duration distributions from clustered visits
/// and assembles the model.
///
/// Current KDEs use the support [0, 1.05 x observed max]; night-day
/// duration KDEs use [observed min, observed max] over non-truncated
/// visits. Slot durations are point masses at the slot length. A state
/// that was never visited is an error; states without enough data for a
/// KDE are flagged degenerate and fall back to point masses.
pub fn build_model(
    visits: &[StateVisit],
    scheme: &ClusterScheme,
    month: u32,
    provenance: Provenance,
) -> Result<SemiMarkovModel> {
    scheme.validate()?;
    let n = scheme.n_states();
    let mut states = Vec::with_capacity(n);
    for state_id in 0..n {
        let mine: Vec<&StateVisit> = visits.iter().filter(|v| v.state == state_id).collect();
        if mine.is_empty() {
            return Err(Error::MissingState { state: state_id });
        }
        let samples: Vec<f64> = mine
            .iter()
            .flat_map(|v| v.samples.iter().copied())
            .collect();
        let max_current = samples.iter().fold(0.0f64, |a, &b| a.max(b));
        let current_hi = if max_current > 0.0 {
            CURRENT_SUPPORT_HEADROOM * max_current
        } else {
            0.0
        };
        let (current, current_degenerate) = Density::fit(&samples, 0.0, current_hi)?;

        let (duration, duration_degenerate) = match scheme {
            ClusterScheme::Slot(cfg) => (
                Density::PointMass {
                    value: cfg.slot_hours(),
                },
                false,
            ),
            ClusterScheme::NightDay(_) => {
                // Truncated sojourns bias f(tau | x_s) downward; keep them
                // out of the duration fit.
                let mut durations: Vec<f64> = mine
                    .iter()
                    .filter(|v| !v.truncated)
                    .map(|v| v.duration_h)
                    .collect();
                if durations.is_empty() {
                    // Every sojourn was cut by a data edge; the untruncated
                    // durations are unknown, so fall back to what was seen.
                    durations = mine.iter().map(|v| v.duration_h).collect();
                }
                let lo = durations.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = durations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Density::fit(&durations, lo, hi)?
            }
        };
        let duration_degenerate = match scheme {
            ClusterScheme::Slot(_) => false,
            ClusterScheme::NightDay(_) => duration_degenerate,
        };

        states.push(StateModel {
            state_id,
            duration,
            current,
            sample_count: samples.len(),
            visit_count: mine.len(),
            degenerate: current_degenerate || duration_degenerate,
        });
    }

    Ok(SemiMarkovModel {
        month,
        states,
        transitions: transition_matrix(scheme),
        provenance,
    })
}

/// A synthesized energy-inflow trace on a regular sampling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    pub sampling_step_h: f64,
    /// Harvested current at each grid point, >= 0.
    pub values: Vec<f64>,
    /// State id at each grid point.
    pub state_log: Vec<usize>,
    /// Every sojourn the generator produced (the continuous-time truth
    /// behind the discretized grid).
    pub sojourns: Vec<Sojourn>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sojourn {
    pub state: usize,
    pub start_h: f64,
    pub duration_h: f64,
    pub current_a: f64,
}

/// Simulates the semi-Markov process for `horizon_h` hours.
///
/// On entering state x_s the sojourn time is drawn from f(tau | x_s) and
/// the current from g(i | x_s); the current holds until the next
/// transition. The trace is discretized onto an hourly grid; a partial
/// final hour is truncated. Night-day traces start in the night state at a
/// fractional sojourn (uniform residual of a drawn duration); slot traces
/// start at the state containing local hour 0, so they are time-aligned
/// with empirical days.
pub fn generate_trace(model: &SemiMarkovModel, horizon_h: f64, seed: u64) -> SyntheticTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 1.0;
    let len = (horizon_h / step).floor() as usize;

    let mut state = match model.scheme() {
        ClusterScheme::NightDay(_) => crate::clustering::NIGHT_STATE,
        ClusterScheme::Slot(_) => 0,
    };

    let mut sojourns = Vec::new();
    let mut t = 0.0f64;
    let mut first = true;
    while t < horizon_h {
        let s = &model.states[state];
        let mut tau = s.duration.sample(&mut rng);
        if first {
            if let ClusterScheme::NightDay(_) = model.scheme() {
                // Enter mid-sojourn: a uniform residual of a full draw.
                tau *= rng.random::<f64>();
            }
            first = false;
        }
        let current = s.current.sample(&mut rng);
        if tau > 0.0 {
            sojourns.push(Sojourn {
                state,
                start_h: t,
                duration_h: tau,
                current_a: current,
            });
            t += tau;
        }
        state = next_state(&model.transitions[state], &mut rng);
    }

    // Rasterize: each grid point takes the sojourn active at its start.
    let mut values = Vec::with_capacity(len);
    let mut state_log = Vec::with_capacity(len);
    let mut idx = 0;
    for j in 0..len {
        let tj = j as f64 * step;
        while idx + 1 < sojourns.len() && sojourns[idx].start_h + sojourns[idx].duration_h <= tj {
            idx += 1;
        }
        values.push(sojourns[idx].current_a);
        state_log.push(sojourns[idx].state);
    }

    SyntheticTrace {
        sampling_step_h: step,
        values,
        state_log,
        sojourns,
        seed,
    }
}

/// Inverse-cdf draw from one row of the transition matrix. Deterministic
/// rows (the only ones the two schemes construct) return their single
/// successor.
fn next_state<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (v, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return v;
        }
    }
    row.len() - 1
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: SemiMarkovModel,
}

/// Saves the model as versioned, pretty-printed JSON. Numbers are written
/// in shortest round-trip decimal, so loading reproduces every f64 bit for
/// bit.
pub fn save_model(model: &SemiMarkovModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let json = serde_json::to_string_pretty(&file)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(json.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Loads and validates a model file; rejects unknown versions, malformed
/// JSON and invariant violations (e.g. a transition row not summing to 1).
pub fn load_model(path: &Path) -> Result<SemiMarkovModel> {
    let file = File::open(path)?;
    let parsed: ModelFile = serde_json::from_reader(BufReader::new(file))?;
    if parsed.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "format version {} (supported: {})",
            parsed.format_version, MODEL_FORMAT_VERSION
        )));
    }
    let mut model = parsed.model;
    model.check()?;
    Ok(model)
}

/// Writes a trace as `hour,state,current_a`.
pub fn write_trace_csv(trace: &SyntheticTrace, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "hour,state,current_a")?;
    for (j, (v, s)) in trace.values.iter().zip(&trace.state_log).enumerate() {
        writeln!(out, "{},{},{}", j, s, v)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{
        hourly_series, night_day_cluster, slot_cluster, NightDayConfig, SlotConfig, DAY_STATE,
        NIGHT_STATE,
    };

    pub(crate) fn test_provenance(scheme: ClusterScheme) -> Provenance {
        Provenance {
            site: SiteConfig {
                latitude_deg: 34.05,
                longitude_deg: -118.25,
                utc_offset_h: -8.0,
                dst_adjusted: false,
                dst_rule: Default::default(),
            },
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
            scheme,
            source_label: "test".into(),
        }
    }

    /// Two identical toy days: 8 h of daylight bell, 16 h of night.
    fn toy_two_days() -> Vec<f64> {
        let mut currents = vec![0.0; 48];
        for day in 0..2 {
            for h in 8..16 {
                let x = (h - 8) as f64 / 7.0;
                currents[day * 24 + h] = 5e-3 * (std::f64::consts::PI * x).sin().max(0.1);
            }
        }
        currents
    }

    /// A month of slightly varied days so duration KDEs are non-degenerate.
    fn varied_month() -> Vec<f64> {
        let mut currents = Vec::new();
        for day in 0..20 {
            let day_len = 10 + (day % 3); // 10, 11, 12 hours
            let start = 6 + (day % 2);
            for h in 0..24 {
                let lit = h >= start && h < start + day_len;
                let c = if lit {
                    4e-3 + 1e-3 * ((day % 5) as f64) / 5.0 + 1e-4 * (h as f64)
                } else {
                    0.0
                };
                currents.push(c);
            }
        }
        currents
    }

    #[test]
    fn toy_model_concentrates_at_toy_lengths() {
        let series = hourly_series(&toy_two_days());
        let scheme = ClusterScheme::NightDay(NightDayConfig::default());
        let visits = night_day_cluster(&series, &NightDayConfig::default()).unwrap();
        let model = build_model(&visits, &scheme, 1, test_provenance(scheme)).unwrap();
        assert_eq!(model.n_states(), 2);
        // Identical days degenerate to point masses at the toy durations.
        assert_eq!(
            model.states[DAY_STATE].duration,
            Density::PointMass { value: 8.0 }
        );
        assert_eq!(
            model.states[NIGHT_STATE].duration,
            Density::PointMass { value: 16.0 }
        );
    }

    #[test]
    fn slot_model_structure() {
        let series = hourly_series(&varied_month());
        let cfg = SlotConfig { n_slots: 12 };
        let scheme = ClusterScheme::Slot(cfg);
        let visits = slot_cluster(&series, &cfg).unwrap();
        let model = build_model(&visits, &scheme, 1, test_provenance(scheme)).unwrap();
        assert_eq!(model.n_states(), 12);
        for (u, row) in model.transitions.iter().enumerate() {
            for (v, &p) in row.iter().enumerate() {
                let expected = if v == (u + 1) % 12 { 1.0 } else { 0.0 };
                assert_eq!(p, expected);
            }
        }
        for s in &model.states {
            assert_eq!(s.duration, Density::PointMass { value: 2.0 });
        }
    }

    #[test]
    fn missing_state_is_reported() {
        // All samples land in slot 0 of a 2-slot scheme: state 1 never
        // appears among the visits.
        let series: Vec<_> = hourly_series(&[1e-3; 48])
            .into_iter()
            .filter(|s| s.local_time_h < 12.0)
            .collect();
        let cfg = SlotConfig { n_slots: 2 };
        let scheme = ClusterScheme::Slot(cfg);
        let visits = slot_cluster(&series, &cfg).unwrap();
        match build_model(&visits, &scheme, 1, test_provenance(scheme)) {
            Err(Error::MissingState { state }) => assert_eq!(state, 1),
            other => panic!("expected MissingState, got {other:?}"),
        }
    }

    #[test]
    fn night_day_trace_alternates_and_holds_current() {
        let series = hourly_series(&varied_month());
        let scheme = ClusterScheme::NightDay(NightDayConfig::default());
        let visits = night_day_cluster(&series, &NightDayConfig::default()).unwrap();
        let model = build_model(&visits, &scheme, 1, test_provenance(scheme)).unwrap();
        let trace = generate_trace(&model, 24.0 * 50.0, 3);
        assert_eq!(trace.values.len(), 24 * 50);
        assert!(trace.values.iter().all(|&v| v >= 0.0));
        for pair in trace.sojourns.windows(2) {
            assert_ne!(pair[0].state, pair[1].state);
        }
        // piecewise constancy: within a sojourn every grid sample is equal
        for s in &trace.sojourns {
            let from = s.start_h.ceil() as usize;
            let to = ((s.start_h + s.duration_h).ceil() as usize).min(trace.values.len());
            for j in from..to {
                assert_eq!(trace.values[j], s.current_a);
                assert_eq!(trace.state_log[j], s.state);
            }
        }
    }

    #[test]
    fn slot_trace_is_periodic() {
        let series = hourly_series(&varied_month());
        let cfg = SlotConfig { n_slots: 12 };
        let scheme = ClusterScheme::Slot(cfg);
        let visits = slot_cluster(&series, &cfg).unwrap();
        let model = build_model(&visits, &scheme, 1, test_provenance(scheme)).unwrap();
        let trace = generate_trace(&model, 24.0 * 10.0, 11);
        for (j, &s) in trace.state_log.iter().enumerate() {
            assert_eq!(s, (j % 24) / 2);
        }
        for s in &trace.sojourns {
            assert_eq!(s.duration_h, 2.0);
        }
    }

    #[test]
    fn short_horizon_trace_is_constant() {
        let series = hourly_series(&varied_month());
        let cfg = SlotConfig { n_slots: 2 };
        let scheme = ClusterScheme::Slot(cfg);
        let visits = slot_cluster(&series, &cfg).unwrap();
        let model = build_model(&visits, &scheme, 1, test_provenance(scheme)).unwrap();
        // horizon shorter than the first 12 h sojourn
        let trace = generate_trace(&model, 5.0, 1);
        assert_eq!(trace.values.len(), 5);
        assert!(trace.values.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn identical_seeds_are_bitwise_identical() {
        let series = hourly_series(&varied_month());
        let scheme = ClusterScheme::NightDay(NightDayConfig::default());
        let visits = night_day_cluster(&series, &NightDayConfig::default()).unwrap();
        let model = build_model(&visits, &scheme, 1, test_provenance(scheme)).unwrap();
        let a = generate_trace(&model, 1000.0, 42);
        let b = generate_trace(&model, 1000.0, 42);
        assert_eq!(a, b);
        let c = generate_trace(&model, 1000.0, 43);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn slot_chain_stationary_distribution_is_uniform() {
        // For a cyclic permutation matrix the uniform vector is stationary:
        // pi P = pi with pi = 1/N.
        for n in [2usize, 6, 12] {
            let m = transition_matrix(&ClusterScheme::Slot(SlotConfig { n_slots: n }));
            let pi = vec![1.0 / n as f64; n];
            for v in 0..n {
                let out: f64 = (0..n).map(|u| pi[u] * m[u][v]).sum();
                assert!((out - pi[v]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let series = hourly_series(&varied_month());
        let scheme = ClusterScheme::NightDay(NightDayConfig::default());
        let visits = night_day_cluster(&series, &NightDayConfig::default()).unwrap();
        let model = build_model(&visits, &scheme, 7, test_provenance(scheme)).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();

        assert_eq!(back.month, model.month);
        assert_eq!(back.transitions, model.transitions);
        // pdf/cdf agree on a probe grid at full precision
        for state in 0..2 {
            let (lo, hi) = model.states[state].current.support();
            for i in 0..=100 {
                let x = lo + (hi - lo) * i as f64 / 100.0;
                assert_eq!(
                    model.states[state].current.pdf(x),
                    back.states[state].current.pdf(x)
                );
                assert_eq!(
                    model.states[state].current.cdf(x),
                    back.states[state].current.cdf(x)
                );
            }
        }
    }

    #[test]
    fn truncated_file_is_a_structured_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, "{\"format_version\": 1, \"month\": 7").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Json(_))));
    }

    #[test]
    fn bad_transition_row_rejected_on_load() {
        let series = hourly_series(&varied_month());
        let scheme = ClusterScheme::NightDay(NightDayConfig::default());
        let visits = night_day_cluster(&series, &NightDayConfig::default()).unwrap();
        let model = build_model(&visits, &scheme, 7, test_provenance(scheme)).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let edited = std::fs::read_to_string(&path).unwrap().replace(
            "[\n      0.0,\n      1.0\n    ]",
            "[\n      0.3,\n      1.0\n    ]",
        );
        assert_ne!(edited, std::fs::read_to_string(&path).unwrap());
        std::fs::write(&path, edited).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }

    #[test]
    fn version_mismatch_rejected() {
        let series = hourly_series(&varied_month());
        let scheme = ClusterScheme::NightDay(NightDayConfig::default());
        let visits = night_day_cluster(&series, &NightDayConfig::default()).unwrap();
        let model = build_model(&visits, &scheme, 7, test_provenance(scheme)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let edited = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        std::fs::write(&path, edited).unwrap();
        assert!(matches!(load_model(&path), Err(Error::ModelFormat(_))));
    }
}
