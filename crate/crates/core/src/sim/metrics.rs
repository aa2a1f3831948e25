use nalgebra::Vector3;

use super::Trajectory;

/// Default settling threshold on `‖σ_e‖∞`.
pub const DEFAULT_SETTLE_THRESHOLD: f64 = 0.01;
/// Torque level above which a run is flagged as demanding too much from the
/// actuators, N·m.
pub const TORQUE_GUIDELINE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Largest |τ_i| over the run, per axis, N·m.
    pub peak_torque_per_axis: Vector3<f64>,
    /// Largest per-axis |τ_i| over all axes, N·m.
    pub peak_torque_inf: f64,
    /// Earliest time after which `‖σ_e‖∞` stays below the threshold;
    /// `None` if the run never settles.
    pub settling_time: Option<f64>,
    /// `‖σ_e‖∞` at the last sample.
    pub final_attitude_error: f64,
}

impl Metrics {
    pub fn settled(&self) -> bool {
        self.settling_time.is_some()
    }

    pub fn exceeds_torque_guideline(&self) -> bool {
        self.peak_torque_inf >= TORQUE_GUIDELINE
    }
}

/// # Panics
///
/// If `traj` has no samples.
pub fn compute_metrics(traj: &Trajectory, settle_threshold: f64) -> Metrics {
    let samples = traj.samples();
    assert!(!samples.is_empty(), "metrics need at least one sample");
    let mut peak = Vector3::zeros();
    for s in samples {
        peak = peak.zip_map(&s.tau, |p: f64, t: f64| p.max(t.abs()));
    }
    let mut settling_time = None;
    for s in samples.iter().rev() {
        if s.sigma.amax() < settle_threshold {
            settling_time = Some(s.t);
        } else {
            break;
        }
    }
    Metrics {
        peak_torque_per_axis: peak,
        peak_torque_inf: peak.max(),
        settling_time,
        final_attitude_error: samples.last().unwrap().sigma.amax(),
    }
}
