use nalgebra::SVector;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("integration produced a non-finite state")]
pub struct NonFiniteState;

/// One classical fourth-order Runge–Kutta step of `ẋ = f(x)`.
pub fn rk4_step<const N: usize, F>(
    x: &SVector<f64, N>,
    dt: f64,
    mut f: F,
) -> Result<SVector<f64, N>, NonFiniteState>
where
    F: FnMut(&SVector<f64, N>) -> SVector<f64, N>,
{
    let k1 = f(x);
    let k2 = f(&(x + k1 * (0.5 * dt)));
    let k3 = f(&(x + k2 * (0.5 * dt)));
    let k4 = f(&(x + k3 * dt));
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(NonFiniteState)
    }
}
