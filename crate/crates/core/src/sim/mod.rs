//! Deterministic closed-loop simulation.
//!
//! The controller is continuous-time: the torque is re-evaluated at every
//! Runge–Kutta stage. The controller sees only `controller_inertia`; the plant
//! integrates with `plant_inertia`.

mod integrator;
mod metrics;
mod montecarlo;

pub use integrator::{rk4_step, NonFiniteState};
pub use metrics::{compute_metrics, Metrics, DEFAULT_SETTLE_THRESHOLD, TORQUE_GUIDELINE};
pub use montecarlo::{
    monte_carlo, perturb_inertia, perturb_inertia_with, run_rng, MonteCarloAggregate,
    MonteCarloReport, PerturbError, RunRecord, DEFAULT_UNCERTAINTY_LEVEL, RNG_ALGORITHM,
};

use std::sync::Arc;

use nalgebra::{Vector3, Vector6};
use thiserror::Error;

use crate::control::control_torque;
use crate::dynamics::{error_state_derivative, ErrorState, InertiaMatrix, OrbitRate};
use crate::gaintable::GainTable;

pub const DEFAULT_DT: f64 = 0.05;
pub const DEFAULT_DURATION: f64 = 600.0;
/// Any state component beyond this magnitude is treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
    #[error("simulation diverged at t = {time} s")]
    Diverged { time: f64 },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub initial_state: ErrorState,
    pub omega_io: OrbitRate,
    pub plant_inertia: InertiaMatrix,
    pub controller_inertia: InertiaMatrix,
    pub table: Arc<GainTable>,
    /// s
    pub dt: f64,
    /// s
    pub duration: f64,
}

impl Scenario {
    /// Nominal scenario: both sides use the table's design inertia.
    pub fn nominal(initial_state: ErrorState, table: Arc<GainTable>) -> Self {
        let inertia = *table.inertia();
        Self {
            initial_state,
            omega_io: OrbitRate::zero(),
            plant_inertia: inertia,
            controller_inertia: inertia,
            table,
            dt: DEFAULT_DT,
            duration: DEFAULT_DURATION,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidScenario("dt must be positive"));
        }
        if !(self.duration >= self.dt && self.duration.is_finite()) {
            return Err(SimError::InvalidScenario("duration must be at least dt"));
        }
        if !self.omega_io.0.iter().all(|v| v.is_finite())
            || !self.initial_state.to_vector().iter().all(|v| v.is_finite())
        {
            return Err(SimError::InvalidScenario("non-finite initial condition"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// s
    pub t: f64,
    pub sigma: Vector3<f64>,
    /// rad/s
    pub omega: Vector3<f64>,
    /// N·m
    pub tau: Vector3<f64>,
    /// Lower-corner flat index of the gain-table cell that produced `tau`.
    pub cell: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    samples: Vec<Sample>,
}

impl Trajectory {
    pub fn from_samples(dt: f64, samples: Vec<Sample>) -> Self {
        Self { dt, samples }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

fn closed_loop_field(s: &Scenario, x: &Vector6<f64>) -> Vector6<f64> {
    match ErrorState::from_vector(x) {
        Some(state) => {
            let cmd = control_torque(&state, &s.table, &s.omega_io, &s.controller_inertia);
            error_state_derivative(&state, &cmd.tau_a, &s.omega_io, &s.plant_inertia)
        }
        None => Vector6::repeat(f64::NAN),
    }
}

fn sample_at(s: &Scenario, t: f64, x: &Vector6<f64>) -> Sample {
    let state = ErrorState::from_vector(x).expect("state checked finite");
    let cmd = control_torque(&state, &s.table, &s.omega_io, &s.controller_inertia);
    Sample {
        t,
        sigma: *state.sigma.as_vector(),
        omega: state.omega,
        tau: cmd.tau_a,
        cell: cmd.cell,
    }
}

/// Integrates the closed loop from `t = 0` to `duration`, recording the
/// initial sample and one sample per step.
pub fn run_closed_loop(s: &Scenario) -> Result<Trajectory, SimError> {
    s.validate()?;
    let steps = s.steps();
    let mut samples = Vec::with_capacity(steps + 1);
    let mut x = s.initial_state.to_vector();
    samples.push(sample_at(s, 0.0, &x));
    for k in 1..=steps {
        let t = k as f64 * s.dt;
        x = rk4_step(&x, s.dt, |x| closed_loop_field(s, x))
            .map_err(|_| SimError::Diverged { time: t })?;
        if x.amax() > DIVERGENCE_BOUND {
            return Err(SimError::Diverged { time: t });
        }
        let sample = sample_at(s, t, &x);
        if !sample.tau.iter().all(|v| v.is_finite()) {
            return Err(SimError::Diverged { time: t });
        }
        samples.push(sample);
    }
    Ok(Trajectory::from_samples(s.dt, samples))
}
