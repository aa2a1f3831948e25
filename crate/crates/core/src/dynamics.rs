//! Rigid-body satellite dynamics relative to the orbit frame, and the
//! state-dependent-coefficient factorization used by the SDRE design.

use nalgebra::{Matrix3, Matrix6, Matrix6x3, Vector3, Vector6};
use thiserror::Error;

use crate::attitude::{kinematics_matrix, rotation_from_mrp, skew, Mrp};

/// Inertia of the reference spacecraft, kg·m².
pub const PAPER_INERTIA: [[f64; 3]; 3] = [
    [9.8194, -0.0721, -0.2893],
    [-0.0721, 9.7030, -0.1011],
    [-0.2893, -0.1011, 9.7309],
];

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InertiaError {
    #[error("inertia matrix has non-finite entries")]
    NonFinite,
    #[error("inertia matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("inertia matrix is not positive definite")]
    NotPositiveDefinite,
}

/// Symmetric positive-definite inertia matrix `J` with its inverse cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaMatrix {
    j: Matrix3<f64>,
    j_inv: Matrix3<f64>,
}

impl InertiaMatrix {
    pub fn new(j: Matrix3<f64>) -> Result<Self, InertiaError> {
        if !j.iter().all(|v| v.is_finite()) {
            return Err(InertiaError::NonFinite);
        }
        let asym = (j - j.transpose()).amax();
        if asym > SYMMETRY_TOL * j.amax().max(1.0) {
            return Err(InertiaError::Asymmetric(asym));
        }
        let chol = j.cholesky().ok_or(InertiaError::NotPositiveDefinite)?;
        if chol.l_dirty().diagonal().iter().any(|&d| d <= 0.0) {
            return Err(InertiaError::NotPositiveDefinite);
        }
        Ok(Self {
            j,
            j_inv: chol.inverse(),
        })
    }

    /// Builds `J` from its six independent entries.
    pub fn from_entries(
        ixx: f64,
        iyy: f64,
        izz: f64,
        ixy: f64,
        ixz: f64,
        iyz: f64,
    ) -> Result<Self, InertiaError> {
        Self::new(Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz))
    }

    /// The example satellite's inertia.
    pub fn paper() -> Self {
        Self::new(Matrix3::from_fn(|r, c| PAPER_INERTIA[r][c])).expect("reference inertia is SPD")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.j
    }

    pub fn inverse(&self) -> &Matrix3<f64> {
        &self.j_inv
    }

    /// `[ixx, iyy, izz, ixy, ixz, iyz]`
    pub fn entries(&self) -> [f64; 6] {
        let j = &self.j;
        [j[(0, 0)], j[(1, 1)], j[(2, 2)], j[(0, 1)], j[(0, 2)], j[(1, 2)]]
    }
}

/// Orbit angular rate `ω_io`, rad/s, expressed in the orbit frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OrbitRate(pub Vector3<f64>);

impl OrbitRate {
    pub fn zero() -> Self {
        Self(Vector3::zeros())
    }
}

/// Attitude and rate of the body relative to the orbit frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    pub sigma: Mrp,
    /// rad/s, body axes
    pub omega: Vector3<f64>,
}

impl ErrorState {
    pub fn new(sigma: Mrp, omega: Vector3<f64>) -> Self {
        Self { sigma, omega }
    }

    pub fn zero() -> Self {
        Self::new(Mrp::identity(), Vector3::zeros())
    }

    /// Stacked `[σ; ω]`.
    pub fn to_vector(&self) -> Vector6<f64> {
        let s = self.sigma.as_vector();
        Vector6::new(s.x, s.y, s.z, self.omega.x, self.omega.y, self.omega.z)
    }

    /// Returns `None` if any component is non-finite.
    pub fn from_vector(x: &Vector6<f64>) -> Option<Self> {
        let sigma = Mrp::new(x.fixed_rows::<3>(0).into_owned()).ok()?;
        let omega: Vector3<f64> = x.fixed_rows::<3>(3).into_owned();
        omega
            .iter()
            .all(|v| v.is_finite())
            .then_some(Self { sigma, omega })
    }
}

/// SDC pair `(A(x), B)` with `ẋ = A(x)·x + B·u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdcPair {
    pub a: Matrix6<f64>,
    pub b: Matrix6x3<f64>,
}

/// Euler's rotational equation: `ω̇ = −J⁻¹·S(ω)·J·ω + J⁻¹·τ`.
pub fn body_rate_derivative(
    omega_ib: &Vector3<f64>,
    tau: &Vector3<f64>,
    j: &InertiaMatrix,
) -> Vector3<f64> {
    j.inverse() * (tau - skew(omega_ib) * (j.matrix() * omega_ib))
}

/// `ω_e = ω_ib − R(σ_e)·ω_io`
pub fn error_rate_from_body_rate(
    omega_ib: &Vector3<f64>,
    sigma_e: &Mrp,
    omega_io: &OrbitRate,
) -> Vector3<f64> {
    omega_ib - rotation_from_mrp(sigma_e) * omega_io.0
}

/// Time derivative of the error state under actuator torque `tau_a`.
///
/// The rate block is the fully expanded orbit-relative form, with the
/// rotation-rate term `Ṙ(σ_e)·ω_io = −S(ω_e)·R(σ_e)·ω_io`.
pub fn error_state_derivative(
    x: &ErrorState,
    tau_a: &Vector3<f64>,
    omega_io: &OrbitRate,
    j: &InertiaMatrix,
) -> Vector6<f64> {
    let we = &x.omega;
    let jm = j.matrix();
    let ji = j.inverse();
    let r = rotation_from_mrp(&x.sigma);
    let w_ref = r * omega_io.0;
    let s_we = skew(we);
    let s_ref = skew(&w_ref);
    let r_dot_w = -(s_we * w_ref);

    let sigma_dot = kinematics_matrix(&x.sigma) * we;
    let omega_dot = -(ji * (s_we * (jm * we)))
        - ji * (s_ref * (jm * we))
        - ji * (s_we * (jm * w_ref))
        - ji * (s_ref * (jm * w_ref))
        - r_dot_w
        + ji * tau_a;
    stack(&sigma_dot, &omega_dot)
}

/// Virtual input `u` for which the error dynamics reduce to
/// `ω̇_e = −J⁻¹S(ω_e)Jω_e + J⁻¹u`: the actuator torque minus every
/// orbit-rate coupling torque.
pub fn virtual_input(
    x: &ErrorState,
    tau_a: &Vector3<f64>,
    omega_io: &OrbitRate,
    j: &InertiaMatrix,
) -> Vector3<f64> {
    let we = &x.omega;
    let jm = j.matrix();
    let w_ref = rotation_from_mrp(&x.sigma) * omega_io.0;
    let s_ref = skew(&w_ref);
    let r_dot_w = -(skew(we) * w_ref);
    tau_a
        - s_ref * (jm * we)
        - skew(we) * (jm * w_ref)
        - s_ref * (jm * w_ref)
        - jm * r_dot_w
}

/// Reduced error dynamics `[G(σ_e)ω_e; −J⁻¹S(ω_e)Jω_e + J⁻¹u]`.
pub fn reduced_error_dynamics(x: &ErrorState, u: &Vector3<f64>, j: &InertiaMatrix) -> Vector6<f64> {
    let sigma_dot = kinematics_matrix(&x.sigma) * x.omega;
    stack(&sigma_dot, &body_rate_derivative(&x.omega, u, j))
}

/// `A(x) = [[0, G(σ_e)], [0, −J⁻¹S(ω_e)J]]`, `B = [[0], [J⁻¹]]`.
pub fn sdc_factorize(x: &ErrorState, j: &InertiaMatrix) -> SdcPair {
    let mut a = Matrix6::zeros();
    a.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&kinematics_matrix(&x.sigma));
    a.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&-(j.inverse() * skew(&x.omega) * j.matrix()));
    let mut b = Matrix6x3::zeros();
    b.fixed_view_mut::<3, 3>(3, 0).copy_from(j.inverse());
    SdcPair { a, b }
}

fn stack(top: &Vector3<f64>, bottom: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}
