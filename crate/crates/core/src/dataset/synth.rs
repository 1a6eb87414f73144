//! Synthetic run-to-failure fleets with the same layout as the public
//! turbofan files, for tests and offline experiments.
//!
//! Every unit starts with a small random wear offset, runs healthy until a
//! per-unit fault onset, then degrades along a convex ramp until end of life.
//! Each cycle is flown in one operating condition drawn uniformly from the
//! fleet's condition set; sensor baselines depend strongly on that condition.
//! The sensor model (baselines, condition gains, fault signatures, noise
//! bounds) is fixed, so fleets generated with different seeds or condition
//! counts describe the same engine type.

use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    write_cmapss, write_rul_file, DatasetError, Result, Sample, SubsetId, Trajectory, N_FEATURES,
    N_SETTINGS,
};

/// Operating-setting triples (altitude kft, Mach, throttle resolver angle)
/// of the six-condition regime. Single-condition fleets fly the first one.
pub const OPERATING_CONDITIONS: [[f64; 3]; 6] = [
    [0.0, 0.0, 100.0],
    [10.0, 0.25, 100.0],
    [20.0, 0.7, 100.0],
    [25.0, 0.62, 60.0],
    [35.0, 0.84, 100.0],
    [42.0, 0.84, 100.0],
];

const SETTING_NOISE: [f64; 3] = [0.004, 0.0004, 0.0];
const N_SENSORS: usize = N_FEATURES - N_SETTINGS;
const N_FAULT_MODES: usize = 2;
const MODEL_SEED: u64 = 0x00C0_5A0D_E6EA_D0FF;

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub n_units: usize,
    pub n_conditions: usize,
    /// 1 = compressor degradation only; 2 = compressor or fan degradation.
    pub n_fault_modes: usize,
    /// Cycle after which degradation starts.
    pub fault_onset: RangeInclusive<usize>,
    /// Cycles from onset to end of life.
    pub degradation_cycles: RangeInclusive<usize>,
    pub seed: u64,
}

impl FleetSpec {
    pub fn new(n_units: usize, n_conditions: usize, fault_onset: RangeInclusive<usize>, seed: u64) -> Self {
        FleetSpec {
            n_units,
            n_conditions,
            n_fault_modes: 1,
            fault_onset,
            degradation_cycles: 100..=220,
            seed,
        }
    }

    pub fn with_fault_modes(mut self, n: usize) -> Self {
        self.n_fault_modes = n;
        self
    }

    pub fn with_degradation_cycles(mut self, range: RangeInclusive<usize>) -> Self {
        self.degradation_cycles = range;
        self
    }
}

/// Generator ground truth for one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitTruth {
    pub unit_id: u32,
    pub onset: usize,
    pub fault_mode: usize,
    /// Noise-free health offset before onset, in units of the fault signature.
    pub initial_wear: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticFleet {
    pub trajectories: Vec<Trajectory>,
    pub units: Vec<UnitTruth>,
}

struct SensorModel {
    base: [f64; N_SENSORS],
    /// Relative baseline change per normalized setting (altitude, Mach, TRA).
    gain: [[f64; 3]; N_SENSORS],
    /// Absolute shift at end of life, per fault mode.
    signature: [[f64; N_SENSORS]; N_FAULT_MODES],
    noise: [f64; N_SENSORS],
}

/// Sensors that never respond to condition or degradation (constant channels).
const FLAT_SENSORS: [usize; 4] = [0, 4, 15, 17];
/// Sensors that respond to each fault mode.
const FAULT_SENSORS: [&[usize]; N_FAULT_MODES] = [
    &[1, 2, 3, 6, 7, 8, 10, 11, 12, 13, 14, 16, 19, 20],
    &[1, 2, 5, 6, 7, 9, 10, 11, 12, 13, 16, 18, 19],
];

fn model() -> &'static SensorModel {
    static MODEL: OnceLock<SensorModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(MODEL_SEED);
        let mut m = SensorModel {
            base: [0.0; N_SENSORS],
            gain: [[0.0; 3]; N_SENSORS],
            signature: [[0.0; N_SENSORS]; N_FAULT_MODES],
            noise: [0.0; N_SENSORS],
        };
        for j in 0..N_SENSORS {
            m.base[j] = 10f64.powf(rng.random_range(1.0..3.8));
            if FLAT_SENSORS.contains(&j) {
                continue;
            }
            for g in m.gain[j].iter_mut() {
                *g = rng.random_range(-0.3..0.3);
            }
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let mut scale = 0.0f64;
            for (mode, sensors) in FAULT_SENSORS.iter().enumerate() {
                if sensors.contains(&j) {
                    let rel = rng.random_range(0.003..0.012);
                    // the fan fault flips some responses relative to the compressor fault
                    let flip = if mode == 1 && rng.random_bool(0.35) { -1.0 } else { 1.0 };
                    m.signature[mode][j] = sign * flip * rel * m.base[j];
                    scale = scale.max(rel * m.base[j]);
                }
            }
            let scale = if scale > 0.0 { scale } else { 0.004 * m.base[j] };
            m.noise[j] = scale * rng.random_range(0.12..0.3);
        }
        m
    })
}

fn condition_triples(n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|i| match OPERATING_CONDITIONS.get(i) {
            Some(c) => *c,
            None => {
                let extra = (i - OPERATING_CONDITIONS.len()) as f64;
                [3.0 + 7.0 * extra, 0.1 + 0.03 * extra, 80.0]
            }
        })
        .collect()
}

fn baseline(m: &SensorModel, j: usize, setting: &[f64; 3]) -> f64 {
    let z = [setting[0] / 42.0, setting[1] / 0.84, (setting[2] - 100.0) / 40.0];
    let g = &m.gain[j];
    m.base[j] * (1.0 + g[0] * z[0] + g[1] * z[1] + g[2] * z[2])
}

/// Same as [`synthesize_fleet_detailed`] without the ground truth.
pub fn synthesize_fleet(spec: &FleetSpec) -> Result<Vec<Trajectory>> {
    synthesize_fleet_detailed(spec).map(|f| f.trajectories)
}

/// Generates a deterministic fleet; the last cycle of each unit is its EOL.
pub fn synthesize_fleet_detailed(spec: &FleetSpec) -> Result<SyntheticFleet> {
    if spec.n_units == 0 || spec.n_conditions == 0 {
        return Err(DatasetError::InvalidArgument(
            "n_units and n_conditions must be at least 1".into(),
        ));
    }
    if spec.n_fault_modes == 0 || spec.n_fault_modes > N_FAULT_MODES {
        return Err(DatasetError::InvalidArgument(format!(
            "n_fault_modes must be 1..={N_FAULT_MODES}"
        )));
    }
    if spec.fault_onset.is_empty() {
        return Err(DatasetError::InvalidArgument("fault onset range is empty".into()));
    }
    if spec.degradation_cycles.is_empty() || *spec.degradation_cycles.start() == 0 {
        return Err(DatasetError::InvalidArgument(
            "degradation cycle range must be non-empty and positive".into(),
        ));
    }
    let m = model();
    let conditions = condition_triples(spec.n_conditions);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trajectories = Vec::with_capacity(spec.n_units);
    let mut units = Vec::with_capacity(spec.n_units);

    for u in 0..spec.n_units {
        let unit_id = u as u32 + 1;
        let onset = rng.random_range(spec.fault_onset.clone());
        let duration = rng.random_range(spec.degradation_cycles.clone());
        let fault_mode = rng.random_range(0..spec.n_fault_modes);
        let initial_wear = rng.random_range(0.0..0.08);
        let exponent = rng.random_range(1.3..2.0);
        let mut build_offset = [0.0; N_SENSORS];
        for (j, o) in build_offset.iter_mut().enumerate() {
            *o = m.noise[j] * rng.random_range(-0.3..0.3);
        }
        let life = onset + duration;
        let signature = &m.signature[fault_mode];
        let mut samples = Vec::with_capacity(life);
        for t in 1..=life {
            let cond = &conditions[rng.random_range(0..conditions.len())];
            let mut setting = [0.0; 3];
            for i in 0..3 {
                let n = SETTING_NOISE[i];
                setting[i] = cond[i] + if n > 0.0 { rng.random_range(-n..n) } else { 0.0 };
            }
            let progress = if t > onset {
                ((t - onset) as f64 / duration as f64).powf(exponent)
            } else {
                0.0
            };
            let health = initial_wear + progress;
            let mut values = [0.0; N_FEATURES];
            values[..N_SETTINGS].copy_from_slice(&setting);
            for j in 0..N_SENSORS {
                let noise = if m.noise[j] > 0.0 {
                    rng.random_range(-m.noise[j]..m.noise[j])
                } else {
                    0.0
                };
                values[N_SETTINGS + j] =
                    baseline(m, j, cond) + build_offset[j] + signature[j] * health + noise;
            }
            samples.push(Sample::new(values)?);
        }
        trajectories.push(Trajectory::new(unit_id, samples)?);
        units.push(UnitTruth {
            unit_id,
            onset,
            fault_mode,
            initial_wear,
        });
    }
    Ok(SyntheticFleet { trajectories, units })
}

/// Right-censors each unit at a random cycle, keeping between 30% and 95%
/// of its life (at least one cycle).
pub fn censor_fleet(trajectories: &[Trajectory], seed: u64) -> Result<Vec<Trajectory>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    trajectories
        .iter()
        .map(|t| {
            let l = t.len();
            let lo = ((l as f64 * 0.3).ceil() as usize).max(1);
            let hi = ((l as f64 * 0.95).floor() as usize).max(lo);
            t.truncate(rng.random_range(lo..=hi))
        })
        .collect()
}

/// Writes all four subsets (`train_`, `test_`, `RUL_` files) with the
/// public condition/fault layout into `dir`.
pub fn write_synthetic_cmapss(dir: &Path, units_per_subset: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (i, id) in SubsetId::ALL.into_iter().enumerate() {
        let fleet_seed = seed.wrapping_mul(31).wrapping_add(i as u64 * 1000);
        let spec = |s: u64| {
            FleetSpec::new(units_per_subset, id.n_conditions(), 10..=120, s)
                .with_fault_modes(id.n_fault_modes())
        };
        let train = synthesize_fleet(&spec(fleet_seed))?;
        let test_full = synthesize_fleet(&spec(fleet_seed + 1))?;
        let test = censor_fleet(&test_full, fleet_seed + 2)?;
        let ruls: Vec<u32> = test.iter().map(|t| t.censored_rul.unwrap_or(0)).collect();
        write_file(&dir.join(id.train_file()), &write_cmapss(&train))?;
        write_file(&dir.join(id.test_file()), &write_cmapss(&test))?;
        write_file(&dir.join(id.rul_file()), &write_rul_file(&ruls))?;
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
