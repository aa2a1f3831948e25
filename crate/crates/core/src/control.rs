//! Actuator torque command: scheduled SDRE feedback plus orbit-rate
//! feedforward.

use nalgebra::Vector3;

use crate::attitude::{rotation_from_mrp, skew};
use crate::dynamics::{ErrorState, InertiaMatrix, OrbitRate};
use crate::gaintable::{interpolate_gain_with_cell, Gain, GainTable};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlCommand {
    /// N·m
    pub tau_a: Vector3<f64>,
    pub feedback_part: Vector3<f64>,
    pub feedforward_part: Vector3<f64>,
    pub gain_used: Gain,
    /// Flat index of the lower corner of the interpolation cell.
    pub cell: usize,
}

/// Torque that cancels every orbit-rate coupling term of the error
/// dynamics, leaving `ω̇_e = −J⁻¹S(ω_e)Jω_e + J⁻¹u_fb`.
///
/// With `ω_r = R(σ_e)ω_io`:
/// `S(ω_r)Jω_e + S(ω_e)Jω_r + S(ω_r)Jω_r + J·Ṙ(σ_e)ω_io`, where
/// `Ṙ(σ_e)ω_io = −S(ω_e)ω_r`.
pub fn feedforward_torque(x: &ErrorState, omega_io: &OrbitRate, j: &InertiaMatrix) -> Vector3<f64> {
    let jm = j.matrix();
    let we = &x.omega;
    let w_ref = rotation_from_mrp(&x.sigma) * omega_io.0;
    let s_ref = skew(&w_ref);
    s_ref * (jm * we) + skew(we) * (jm * w_ref) + s_ref * (jm * w_ref)
        - jm * (skew(we) * w_ref)
}

/// `τ_a = −K(x)·x + feedforward`. No saturation is applied.
pub fn control_torque(
    x: &ErrorState,
    table: &GainTable,
    omega_io: &OrbitRate,
    j: &InertiaMatrix,
) -> ControlCommand {
    let (gain, cell) = interpolate_gain_with_cell(table, x);
    let feedback_part = -(gain * x.to_vector());
    let feedforward_part = feedforward_torque(x, omega_io, j);
    ControlCommand {
        tau_a: feedback_part + feedforward_part,
        feedback_part,
        feedforward_part,
        gain_used: gain,
        cell,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude::Mrp;
    use crate::dynamics::{error_state_derivative, reduced_error_dynamics};
    use crate::gaintable::BreakpointGrid;
    use crate::riccati::WeightCase;
    use nalgebra::{Matrix3x6, Vector6};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_vertex_table(k: Gain) -> GainTable {
        let grid = BreakpointGrid::new(std::array::from_fn(|_| vec![0.0])).unwrap();
        GainTable::from_parts(grid, vec![k], InertiaMatrix::paper(), WeightCase::new(1.0, 1.0, 1.0), 1e-8)
            .unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng) -> ErrorState {
        let s = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let w = Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1));
        ErrorState::new(Mrp::new(s).unwrap(), w)
    }

    #[test]
    fn no_orbit_rate_means_no_feedforward() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let x = random_state(&mut rng);
            let ff = feedforward_torque(&x, &OrbitRate::zero(), &InertiaMatrix::paper());
            assert_eq!(ff, Vector3::zeros());
        }
    }

    #[test]
    fn zero_error_feedforward_is_gyroscopic_torque() {
        let j = InertiaMatrix::paper();
        let w = Vector3::new(0.0, -1.1e-3, 2e-4);
        let ff = feedforward_torque(&ErrorState::zero(), &OrbitRate(w), &j);
        let expected = skew(&w) * (j.matrix() * w);
        assert!((ff - expected).norm() <= 1e-15 * expected.norm().max(1e-30));
    }

    #[test]
    fn feedforward_cancels_coupling_terms() {
        let j = InertiaMatrix::paper();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let x = random_state(&mut rng);
            let wio = OrbitRate(Vector3::from_fn(|_, _| rng.random_range(-0.01..0.01)));
            let u = Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05));
            let full = error_state_derivative(&x, &(u + feedforward_torque(&x, &wio, &j)), &wio, &j);
            let reduced = reduced_error_dynamics(&x, &u, &j);
            assert!((full - reduced).amax() <= 1e-11, "{}", (full - reduced).amax());
        }
    }

    #[test]
    fn equilibrium_needs_no_torque() {
        let k = Matrix3x6::from_fn(|r, c| (r + 2 * c) as f64 * 0.01);
        let table = single_vertex_table(k);
        let cmd = control_torque(&ErrorState::zero(), &table, &OrbitRate::zero(), &InertiaMatrix::paper());
        assert_eq!(cmd.tau_a, Vector3::zeros());
        assert_eq!(cmd.cell, 0);
    }

    #[test]
    fn constant_gain_law_is_linear_feedback() {
        let k = Matrix3x6::from_fn(|r, c| 0.01 * (1.0 + r as f64) - 0.003 * c as f64);
        let table = single_vertex_table(k);
        let j = InertiaMatrix::paper();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = random_state(&mut rng);
            let cmd = control_torque(&x, &table, &OrbitRate::zero(), &j);
            let expected = -(k * Vector6::from(x.to_vector()));
            assert!((cmd.tau_a - expected).amax() <= 1e-15);
            assert_eq!(cmd.feedforward_part, Vector3::zeros());
            assert_eq!(cmd.gain_used, k);
        }
    }
}
