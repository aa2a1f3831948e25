//! Modified Rodrigues Parameter (MRP) attitude algebra.
//!
//! Conventions used throughout the crate:
//!
//! * `rotation_from_mrp` returns the passive direction-cosine matrix that maps
//!   components expressed in the reference frame into the body frame.
//! * Quaternions are scalar-first with the Hamilton product.
//! * Euler angles are the aerospace 3-2-1 body sequence (yaw, then pitch, then
//!   roll), stored as `[roll, pitch, yaw]`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Quaternions whose scalar part lies this close to -1 are treated as the
/// 360° MRP singularity.
pub const QUATERNION_SINGULARITY_TOL: f64 = 1e-9;

/// Minimum distance of the pitch angle from ±90° for Euler extraction.
pub const GIMBAL_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttitudeError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("quaternion scalar part {w} is at the 360 degree MRP singularity")]
    Singularity { w: f64 },
    #[error("pitch {pitch} rad is within gimbal-lock proximity of ±90 degrees")]
    GimbalLock { pitch: f64 },
    #[error("quaternion is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
}

/// Modified Rodrigues Parameters `σ = tan(Φ/4)·ê`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mrp(Vector3<f64>);

impl Mrp {
    pub fn new(sigma: Vector3<f64>) -> Result<Self, AttitudeError> {
        if sigma.iter().all(|c| c.is_finite()) {
            Ok(Self(sigma))
        } else {
            Err(AttitudeError::NonFinite("MRP"))
        }
    }

    pub fn identity() -> Self {
        Self(Vector3::zeros())
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn into_vector(self) -> Vector3<f64> {
        self.0
    }

    /// `σᵀσ`
    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }
}

/// Scalar-first unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    w: f64,
    v: Vector3<f64>,
}

impl UnitQuaternion {
    /// Normalizes `(w, v)`; rejects zero or non-finite input.
    pub fn new(w: f64, v: Vector3<f64>) -> Result<Self, AttitudeError> {
        let norm = (w * w + v.norm_squared()).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(AttitudeError::NotNormalized { norm });
        }
        Ok(Self {
            w: w / norm,
            v: v / norm,
        })
    }

    pub fn identity() -> Self {
        Self {
            w: 1.0,
            v: Vector3::zeros(),
        }
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn v(&self) -> &Vector3<f64> {
        &self.v
    }

    /// Rotation by `angle` about the unit vector `axis`.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let half = 0.5 * angle;
        Self {
            w: half.cos(),
            v: axis * half.sin(),
        }
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let w = self.w * rhs.w - self.v.dot(&rhs.v);
        let v = rhs.v * self.w + self.v * rhs.w + self.v.cross(&rhs.v);
        // Renormalize so the unit-norm invariant survives long products.
        let norm = (w * w + v.norm_squared()).sqrt();
        Self {
            w: w / norm,
            v: v / norm,
        }
    }

    /// Passive direction-cosine matrix of this quaternion.
    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, v) = (self.w, self.v);
        Matrix3::identity() * (w * w - v.norm_squared()) + v * v.transpose() * 2.0
            - skew(&v) * (2.0 * w)
    }
}

/// Euler angles in radians, 3-2-1 sequence, ordered `[roll, pitch, yaw]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }

    pub fn to_degrees(&self) -> [f64; 3] {
        [
            self.roll.to_degrees(),
            self.pitch.to_degrees(),
            self.yaw.to_degrees(),
        ]
    }
}

/// Skew-symmetric cross-product matrix: `skew(v) * w == v.cross(w)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// MRP kinematics matrix `G(σ)` with `σ̇ = G(σ)·ω`.
///
/// `G(σ) = ¼[(1 − σᵀσ)I + 2S(σ) + 2σσᵀ]`, invertible for every finite σ with
/// `det G = ((1 + σᵀσ)/4)³`.
pub fn kinematics_matrix(sigma: &Mrp) -> Matrix3<f64> {
    let s = sigma.as_vector();
    let s2 = s.norm_squared();
    (Matrix3::identity() * (1.0 - s2) + skew(s) * 2.0 + s * s.transpose() * 2.0) * 0.25
}

/// Direction-cosine matrix of `σ`, mapping reference-frame components into
/// body-frame components.
pub fn rotation_from_mrp(sigma: &Mrp) -> Matrix3<f64> {
    let s = sigma.as_vector();
    let s2 = s.norm_squared();
    let denom = (1.0 + s2) * (1.0 + s2);
    let sk = skew(s);
    Matrix3::identity() - sk * (4.0 * (1.0 - s2) / denom) + sk * sk * (8.0 / denom)
}

pub fn mrp_from_quaternion(q: &UnitQuaternion) -> Result<Mrp, AttitudeError> {
    if (q.w + 1.0).abs() <= QUATERNION_SINGULARITY_TOL {
        return Err(AttitudeError::Singularity { w: q.w });
    }
    Mrp::new(q.v / (1.0 + q.w))
}

pub fn quaternion_from_mrp(sigma: &Mrp) -> UnitQuaternion {
    let s = sigma.as_vector();
    let s2 = s.norm_squared();
    UnitQuaternion {
        w: (1.0 - s2) / (1.0 + s2),
        v: s * (2.0 / (1.0 + s2)),
    }
}

/// Composes `q_yaw ⊗ q_pitch ⊗ q_roll` and converts to MRP.
pub fn mrp_from_euler(e: &EulerAngles) -> Result<Mrp, AttitudeError> {
    if ![e.roll, e.pitch, e.yaw].iter().all(|a| a.is_finite()) {
        return Err(AttitudeError::NonFinite("Euler angles"));
    }
    let q = quaternion_from_euler(e);
    mrp_from_quaternion(&q)
}

pub fn quaternion_from_euler(e: &EulerAngles) -> UnitQuaternion {
    let qx = UnitQuaternion::from_axis_angle(&Vector3::x(), e.roll);
    let qy = UnitQuaternion::from_axis_angle(&Vector3::y(), e.pitch);
    let qz = UnitQuaternion::from_axis_angle(&Vector3::z(), e.yaw);
    qz.mul(&qy).mul(&qx)
}

pub fn euler_from_mrp(sigma: &Mrp) -> Result<EulerAngles, AttitudeError> {
    let q = quaternion_from_mrp(sigma);
    let (w, x, y, z) = (q.w, q.v.x, q.v.y, q.v.z);
    let sin_pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
    let pitch = sin_pitch.asin();
    if std::f64::consts::FRAC_PI_2 - pitch.abs() < GIMBAL_TOL {
        return Err(AttitudeError::GimbalLock { pitch });
    }
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    Ok(EulerAngles { roll, pitch, yaw })
}
