//! Inertia-uncertainty Monte-Carlo campaigns.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::{compute_metrics, run_closed_loop, Metrics, Scenario, SimError};
use crate::dynamics::InertiaMatrix;

/// ±10 % per inertia entry.
pub const DEFAULT_UNCERTAINTY_LEVEL: f64 = 0.10;
/// Identifier of the pseudo-random source, recorded in every report.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = run index";
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerturbError {
    #[error("uncertainty level {0} outside [0, 1)")]
    InvalidLevel(f64),
    #[error("no positive-definite draw after {MAX_REDRAWS} attempts")]
    RetriesExhausted,
}

/// Generator for run `index` of a campaign seeded with `seed`.
pub fn run_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Scales each of the six independent entries of `j` by an independent
/// uniform draw from `[1 − level, 1 + level]`, redrawing until the result is
/// positive definite.
pub fn perturb_inertia_with<R: Rng>(
    j: &InertiaMatrix,
    level: f64,
    rng: &mut R,
) -> Result<InertiaMatrix, PerturbError> {
    if !(0.0..1.0).contains(&level) {
        return Err(PerturbError::InvalidLevel(level));
    }
    let [ixx, iyy, izz, ixy, ixz, iyz] = j.entries();
    for _ in 0..MAX_REDRAWS {
        let mut f = [0.0; 6];
        for v in &mut f {
            *v = rng.random_range(1.0 - level..=1.0 + level);
        }
        let m = Matrix3::new(
            ixx * f[0],
            ixy * f[3],
            ixz * f[4],
            ixy * f[3],
            iyy * f[1],
            iyz * f[5],
            ixz * f[4],
            iyz * f[5],
            izz * f[2],
        );
        if let Ok(p) = InertiaMatrix::new(m) {
            return Ok(p);
        }
    }
    Err(PerturbError::RetriesExhausted)
}

pub fn perturb_inertia(j: &InertiaMatrix, level: f64, seed: u64) -> Result<InertiaMatrix, PerturbError> {
    perturb_inertia_with(j, level, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub index: usize,
    pub plant_inertia: InertiaMatrix,
    /// Divergence is recorded, not fatal.
    pub outcome: Result<Metrics, SimError>,
}

impl RunRecord {
    pub fn settled(&self) -> bool {
        matches!(&self.outcome, Ok(m) if m.settled())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloAggregate {
    pub settled: usize,
    pub diverged: usize,
    pub worst_peak_torque: f64,
    /// `None` when any run failed to settle.
    pub worst_settling_time: Option<f64>,
    pub worst_final_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub seed: u64,
    pub level: f64,
    pub rng_algorithm: &'static str,
    pub settle_threshold: f64,
    pub records: Vec<RunRecord>,
    pub aggregate: MonteCarloAggregate,
}

/// Runs `runs` copies of `scenario` with independently perturbed plant
/// inertia. The controller keeps the nominal inertia and gain table.
pub fn monte_carlo(
    scenario: &Scenario,
    runs: usize,
    level: f64,
    seed: u64,
    settle_threshold: f64,
) -> Result<MonteCarloReport, PerturbError> {
    let nominal = scenario.plant_inertia;
    let plants = (0..runs)
        .map(|i| perturb_inertia_with(&nominal, level, &mut run_rng(seed, i as u64)))
        .collect::<Result<Vec<_>, _>>()?;

    let records: Vec<RunRecord> = plants
        .into_par_iter()
        .enumerate()
        .map(|(index, plant_inertia)| {
            let s = Scenario {
                plant_inertia,
                ..scenario.clone()
            };
            let outcome = run_closed_loop(&s).map(|t| compute_metrics(&t, settle_threshold));
            RunRecord {
                index,
                plant_inertia,
                outcome,
            }
        })
        .collect();

    let mut agg = MonteCarloAggregate {
        settled: 0,
        diverged: 0,
        worst_peak_torque: 0.0,
        worst_settling_time: Some(0.0),
        worst_final_error: 0.0,
    };
    for r in &records {
        match &r.outcome {
            Ok(m) => {
                agg.worst_peak_torque = agg.worst_peak_torque.max(m.peak_torque_inf);
                agg.worst_final_error = agg.worst_final_error.max(m.final_attitude_error);
                agg.worst_settling_time = match (agg.worst_settling_time, m.settling_time) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                };
                if m.settled() {
                    agg.settled += 1;
                }
            }
            Err(_) => {
                agg.diverged += 1;
                agg.worst_settling_time = None;
                agg.worst_final_error = f64::INFINITY;
            }
        }
    }
    Ok(MonteCarloReport {
        runs,
        seed,
        level,
        rng_algorithm: RNG_ALGORITHM,
        settle_threshold,
        records,
        aggregate: agg,
    })
}
