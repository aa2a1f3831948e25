//! Dense small-matrix Lyapunov and continuous-time algebraic Riccati solvers.
//!
//! The CARE `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` is solved by Newton–Kleinman
//! iteration. The initial stabilizing gain comes from the matrix sign
//! function of the Hamiltonian (scaled Newton iteration, inverses only); if
//! that does not yield a stabilizing gain, the differential Riccati equation
//! is integrated forward from `P = 0` until the closed loop certifies as
//! Hurwitz. Every returned solution is certified: `P` is symmetric positive
//! definite and `A − BK` is Hurwitz.
//!
//! Matrix norms are Frobenius throughout.

use nalgebra::DMatrix;
use thiserror::Error;

/// Default relative residual tolerance, `‖residual‖_F ≤ tol·‖Q‖_F`.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Newton–Kleinman iteration cap.
pub const MAX_NEWTON_ITERATIONS: usize = 200;
/// Step cap for the differential-Riccati fallback warm start.
pub const MAX_WARMUP_STEPS: usize = 200_000;
/// Iteration cap for the Hamiltonian sign-function warm start.
pub const MAX_SIGN_ITERATIONS: usize = 100;

const SYMMETRY_TOL: f64 = 1e-9;
const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-8;
const WARMUP_CHECK_EVERY: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiccatiError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric (asymmetry {asymmetry:e}, norm {norm:e})")]
    Asymmetric { asymmetry: f64, norm: f64 },
    #[error("Lyapunov system is singular (eigenvalue pair sums to zero)")]
    SingularLyapunov,
    #[error("weight matrix {0} is not symmetric positive definite")]
    InvalidWeight(&'static str),
    #[error("no stabilizing gain found after {steps} differential-Riccati steps")]
    NoStabilizingGain { steps: usize },
    #[error("Newton-Kleinman did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("certification failed: {0}")]
    Certification(&'static str),
}

/// State and input weights of the quadratic cost.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPair {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl WeightPair {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self, RiccatiError> {
        if !q.is_square() || !r.is_square() {
            return Err(RiccatiError::Dimension("weights must be square".into()));
        }
        if !is_positive_definite(&q).unwrap_or(false) {
            return Err(RiccatiError::InvalidWeight("Q"));
        }
        if !is_positive_definite(&r).unwrap_or(false) {
            return Err(RiccatiError::InvalidWeight("R"));
        }
        Ok(Self { q, r })
    }

    /// `Q = diag(q1·I₃, q2·I₃)`, `R = r·I₃`.
    pub fn attitude(q1: f64, q2: f64, r: f64) -> Result<Self, RiccatiError> {
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            6,
            [q1, q1, q1, q2, q2, q2],
        ));
        Self::new(q, DMatrix::identity(3, 3) * r)
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
}

/// Scalar weight coefficients `(q1, q2, r)` of the attitude cost
/// `Q = diag(q1·I₃, q2·I₃)`, `R = r·I₃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightCase {
    pub q1: f64,
    pub q2: f64,
    pub r: f64,
}

impl WeightCase {
    pub const fn new(q1: f64, q2: f64, r: f64) -> Self {
        Self { q1, q2, r }
    }

    pub fn to_pair(&self) -> Result<WeightPair, RiccatiError> {
        WeightPair::attitude(self.q1, self.q2, self.r)
    }
}

/// The four weight sets compared in the reference study, in case order.
pub const TABLE1_CASES: [WeightCase; 4] = [
    WeightCase::new(0.1, 1e-6, 1.0),
    WeightCase::new(0.1, 1e-6, 1000.0),
    WeightCase::new(0.001, 1e-6, 1.0),
    WeightCase::new(0.001, 1e-6, 1000.0),
];

/// A certified stabilizing CARE solution.
#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    /// Absolute Frobenius norm of the Riccati residual.
    pub residual_norm: f64,
    /// Newton–Kleinman iterations.
    pub iterations: usize,
    /// Iterations spent finding the initial stabilizing gain (sign-function
    /// iterations, or differential-Riccati steps when that fallback ran).
    pub warmup_steps: usize,
}

/// Solves `aᵀX + Xa + q = 0` through the Kronecker-vectorized n²×n² system.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, RiccatiError> {
    let n = a.nrows();
    if !a.is_square() || q.shape() != (n, n) {
        return Err(RiccatiError::Dimension(format!(
            "a is {:?}, q is {:?}",
            a.shape(),
            q.shape()
        )));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    // Column-major vec: vec(AᵀX) = (I⊗Aᵀ)vec X, vec(XA) = (Aᵀ⊗I)vec X.
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let lu = op.full_piv_lu();
    let u_diag = lu.u().diagonal();
    let max_pivot = u_diag.amax();
    let min_pivot = u_diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(max_pivot > 0.0) || min_pivot <= max_pivot * f64::EPSILON * (n * n) as f64 {
        return Err(RiccatiError::SingularLyapunov);
    }
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = lu.solve(&rhs).ok_or(RiccatiError::SingularLyapunov)?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    let x = symmetrize(&x);
    // A near-singular operator yields an X that does not satisfy the equation.
    let residual = (&at * &x + &x * a + q).norm();
    if !(residual <= LYAPUNOV_RESIDUAL_TOL * q.norm()) {
        return Err(RiccatiError::SingularLyapunov);
    }
    Ok(x)
}

/// Cholesky-based positive-definiteness test.
pub fn is_positive_definite(m: &DMatrix<f64>) -> Result<bool, RiccatiError> {
    if !m.is_square() {
        return Err(RiccatiError::Dimension("matrix must be square".into()));
    }
    let norm = m.norm();
    let asymmetry = (m - m.transpose()).norm();
    if !(asymmetry <= SYMMETRY_TOL * norm) {
        return Err(RiccatiError::Asymmetric { asymmetry, norm });
    }
    Ok(match m.clone().cholesky() {
        Some(c) => c.l_dirty().diagonal().iter().all(|&d| d > 0.0),
        None => false,
    })
}

/// Lyapunov-theorem Hurwitz test: `aᵀX + Xa + I = 0` has a PD solution.
pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    if !a.is_square() || !a.iter().all(|v| v.is_finite()) {
        return false;
    }
    match solve_lyapunov(a, &DMatrix::identity(a.nrows(), a.ncols())) {
        Ok(x) => is_positive_definite(&x).unwrap_or(false),
        Err(_) => false,
    }
}

/// `AᵀP + PA − PBR⁻¹BᵀP + Q`
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    w: &WeightPair,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let s = b * r_inverse(w) * b.transpose();
    a.transpose() * p + p * a - p * s * p + w.q()
}

/// Solves the CARE and certifies the result.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    w: &WeightPair,
    tol: f64,
) -> Result<CareSolution, RiccatiError> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || w.q().shape() != (n, n) || w.r().shape() != (m, m) {
        return Err(RiccatiError::Dimension(format!(
            "a {:?}, b {:?}, q {:?}, r {:?}",
            a.shape(),
            b.shape(),
            w.q().shape(),
            w.r().shape()
        )));
    }
    let r_inv = r_inverse(w);
    let s = b * &r_inv * b.transpose();
    let q_norm = w.q().norm();

    let (mut p, warmup_steps) = match sign_function_warm_start(a, &s, w.q()) {
        Some((p, iters)) if is_hurwitz(&(a - &s * &p)) => (p, iters),
        _ => stabilizing_warm_start(a, &s, w.q())?,
    };

    // At least one Newton step; afterwards iterate until the tolerance is
    // met. When the iteration stagnates first, an iterate at the rounding
    // floor of the residual evaluation is accepted.
    let a_norm = a.norm();
    let s_norm = s.norm();
    let target = tol * q_norm;
    let floor = |p: &DMatrix<f64>| {
        let pn = p.norm();
        64.0 * f64::EPSILON * (2.0 * a_norm * pn + s_norm * pn * pn + q_norm)
    };
    let mut iterations = 0;
    let mut residual = care_residual(a, b, w, &p).norm();
    while iterations == 0 || residual > target {
        if iterations >= MAX_NEWTON_ITERATIONS {
            if residual <= floor(&p) {
                break;
            }
            return Err(RiccatiError::NoConvergence {
                iterations,
                residual,
            });
        }
        let k = &r_inv * b.transpose() * &p;
        let a_cl = a - b * &k;
        let rhs = w.q() + k.transpose() * w.r() * &k;
        let next = match solve_lyapunov(&a_cl, &rhs) {
            Ok(next) => next,
            Err(_) if residual <= target.max(floor(&p)) => break,
            Err(_) => {
                return Err(RiccatiError::NoConvergence {
                    iterations,
                    residual,
                })
            }
        };
        let next_residual = care_residual(a, b, w, &next).norm();
        iterations += 1;
        if next_residual >= residual && residual <= target.max(floor(&p)) {
            // Already at the rounding floor.
            break;
        }
        p = next;
        residual = next_residual;
    }

    if !is_positive_definite(&p)? {
        return Err(RiccatiError::Certification("P is not positive definite"));
    }
    let k = &r_inv * b.transpose() * &p;
    if !is_hurwitz(&(a - b * k)) {
        return Err(RiccatiError::Certification("closed loop is not Hurwitz"));
    }
    Ok(CareSolution {
        p,
        residual_norm: residual,
        iterations,
        warmup_steps,
    })
}

/// `K = R⁻¹BᵀP`, so that `u = −Kx`.
pub fn gain_from_solution(p: &CareSolution, b: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let r_inv = r
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .expect("weight R is positive definite");
    r_inv * b.transpose() * &p.p
}

/// Stabilizing CARE solution from the sign of the Hamiltonian
/// `H = [[A, −S], [−Q, −Aᵀ]]`, computed by the determinant-scaled Newton
/// iteration `Z ← (Z/c + c·Z⁻¹)/2`. With `W = sign(H)` partitioned into n×n
/// blocks, `P` is the least-squares solution of
/// `[W12; W22 + I]·P = −[W11 + I; W21]`.
fn sign_function_warm_start(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, usize)> {
    let n = a.nrows();
    let mut z = DMatrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(a);
    z.view_mut((0, n), (n, n)).copy_from(&-s);
    z.view_mut((n, 0), (n, n)).copy_from(&-q);
    z.view_mut((n, n), (n, n)).copy_from(&-a.transpose());

    let mut iterations = 0;
    loop {
        if iterations >= MAX_SIGN_ITERATIONS {
            return None;
        }
        let lu = z.clone().lu();
        let det = lu.determinant();
        if !det.is_finite() || det == 0.0 {
            return None;
        }
        let z_inv = lu.try_inverse()?;
        let c = det.abs().powf(1.0 / (2 * n) as f64);
        let next = (&z / c + z_inv * c) * 0.5;
        let change = (&next - &z).norm();
        z = next;
        iterations += 1;
        if !z.iter().all(|v| v.is_finite()) {
            return None;
        }
        if change <= 1e-13 * z.norm() {
            break;
        }
    }

    let eye = DMatrix::<f64>::identity(n, n);
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(z.view((n, n), (n, n)) + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&-(z.view((0, 0), (n, n)) + &eye));
    rhs.view_mut((n, 0), (n, n)).copy_from(&-z.view((n, 0), (n, n)));
    let p = lhs.svd(true, true).solve(&rhs, f64::EPSILON).ok()?;
    p.iter()
        .all(|v| v.is_finite())
        .then(|| (symmetrize(&p), iterations))
}

/// Integrates `Ṗ = AᵀP + PA − PSP + Q` from `P = 0` with fixed RK4 steps
/// until `A − SP` is Hurwitz.
fn stabilizing_warm_start(
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, usize), RiccatiError> {
    let n = a.nrows();
    let mut p = DMatrix::zeros(n, n);
    if is_hurwitz(a) {
        return Ok((p, 0));
    }
    // Step sized from a bound on the Hamiltonian's spectral radius.
    let scale = a.norm() + (s.norm() * q.norm()).sqrt();
    let h = if scale > 0.0 { 0.25 / scale } else { 1.0 };
    let field = |p: &DMatrix<f64>| a.transpose() * p + p * a - p * s * p + q;
    let mut steps = 0;
    for step in 1..=MAX_WARMUP_STEPS {
        steps = step;
        let k1 = field(&p);
        let k2 = field(&(&p + &k1 * (0.5 * h)));
        let k3 = field(&(&p + &k2 * (0.5 * h)));
        let k4 = field(&(&p + &k3 * h));
        p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        p = symmetrize(&p);
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if step % WARMUP_CHECK_EVERY == 0 && is_hurwitz(&(a - s * &p)) {
            return Ok((p, step));
        }
    }
    Err(RiccatiError::NoStabilizingGain { steps })
}

fn r_inverse(w: &WeightPair) -> DMatrix<f64> {
    w.r()
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .expect("weight R validated as positive definite")
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}
