//! Breakpoint grid of pointwise SDRE gains and multilinear gain scheduling.

mod io;

pub use io::{load_table, read_table, save_table, write_table, TableIoError, FORMAT_VERSION};

use std::fmt;

use nalgebra::{DMatrix, SMatrix};
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{sdc_factorize, ErrorState, InertiaMatrix};
use crate::riccati::{
    gain_from_solution, solve_care, CareSolution, RiccatiError, WeightCase, WeightPair,
};

/// Number of scheduling axes: `(σ1, σ2, σ3, ω1, ω2, ω3)`.
pub const AXES: usize = 6;

/// 3×6 state-feedback gain, `u = −K·x`.
pub type Gain = SMatrix<f64, 3, 6>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("axis {axis} is empty")]
    EmptyAxis { axis: usize },
    #[error("axis {axis} is not strictly increasing and finite")]
    NotIncreasing { axis: usize },
}

/// Per-axis breakpoints. Attitude axes are dimensionless MRP components,
/// rate axes are in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakpointGrid {
    axes: [Vec<f64>; AXES],
}

impl BreakpointGrid {
    pub fn new(axes: [Vec<f64>; AXES]) -> Result<Self, GridError> {
        for (axis, values) in axes.iter().enumerate() {
            if values.is_empty() {
                return Err(GridError::EmptyAxis { axis });
            }
            let ok = values.iter().all(|v| v.is_finite())
                && values.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return Err(GridError::NotIncreasing { axis });
            }
        }
        Ok(Self { axes })
    }

    /// The same breakpoints on all three attitude axes and all three rate
    /// axes; `rate_dps` is given in degrees per second.
    pub fn uniform(sigma: &[f64], rate_dps: &[f64]) -> Result<Self, GridError> {
        let rate: Vec<f64> = rate_dps.iter().map(|d| d.to_radians()).collect();
        Self::new([
            sigma.to_vec(),
            sigma.to_vec(),
            sigma.to_vec(),
            rate.clone(),
            rate.clone(),
            rate,
        ])
    }

    /// `σ ∈ {−1, 0, 1}`, `ω ∈ {−5, 0, 5} °/s` on every axis (729 vertices).
    pub fn paper() -> Self {
        Self::uniform(&[-1.0, 0.0, 1.0], &[-5.0, 0.0, 5.0]).expect("default grid is valid")
    }

    pub fn axes(&self) -> &[Vec<f64>; AXES] {
        &self.axes
    }

    pub fn axis(&self, axis: usize) -> &[f64] {
        &self.axes[axis]
    }

    pub fn shape(&self) -> [usize; AXES] {
        std::array::from_fn(|a| self.axes[a].len())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flat index of a vertex.
    pub fn flat_index(&self, idx: &[usize; AXES]) -> usize {
        idx.iter()
            .zip(self.axes.iter())
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; AXES] {
        let mut idx = [0; AXES];
        for a in (0..AXES).rev() {
            let n = self.axes[a].len();
            idx[a] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Error state at a vertex.
    pub fn vertex(&self, idx: &[usize; AXES]) -> ErrorState {
        let v: [f64; AXES] = std::array::from_fn(|a| self.axes[a][idx[a]]);
        ErrorState::from_vector(&v.into()).expect("breakpoints are finite")
    }

    /// Lower cell index and fractional position along one axis, with the
    /// coordinate clamped to the axis range.
    fn locate(&self, axis: usize, x: f64) -> (usize, f64) {
        let b = &self.axes[axis];
        let n = b.len();
        if n == 1 {
            return (0, 0.0);
        }
        let x = x.clamp(b[0], b[n - 1]);
        let i = b[..n - 1].partition_point(|&v| v <= x).saturating_sub(1);
        let t = (x - b[i]) / (b[i + 1] - b[i]);
        (i, t.clamp(0.0, 1.0))
    }
}

/// Gains at every grid vertex, plus the design data that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    grid: BreakpointGrid,
    gains: Vec<Gain>,
    inertia: InertiaMatrix,
    weights: WeightCase,
    tolerance: f64,
}

impl GainTable {
    /// Assembles a table from stored gains (used by the loader).
    pub fn from_parts(
        grid: BreakpointGrid,
        gains: Vec<Gain>,
        inertia: InertiaMatrix,
        weights: WeightCase,
        tolerance: f64,
    ) -> Result<Self, TableIoError> {
        if gains.len() != grid.len() {
            return Err(TableIoError::CorruptedLength {
                expected: grid.len(),
                found: gains.len(),
            });
        }
        Ok(Self {
            grid,
            gains,
            inertia,
            weights,
            tolerance,
        })
    }

    pub fn grid(&self) -> &BreakpointGrid {
        &self.grid
    }

    pub fn gains(&self) -> &[Gain] {
        &self.gains
    }

    pub fn gain_at(&self, idx: &[usize; AXES]) -> &Gain {
        &self.gains[self.grid.flat_index(idx)]
    }

    pub fn inertia(&self) -> &InertiaMatrix {
        &self.inertia
    }

    pub fn weights(&self) -> &WeightCase {
        &self.weights
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// Solver statistics from a table build.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub vertices: usize,
    pub max_iterations: usize,
    pub mean_iterations: f64,
    pub max_warmup_steps: usize,
    /// Largest `‖residual‖_F / ‖Q‖_F` over all vertices.
    pub max_relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexFailure {
    pub index: [usize; AXES],
    pub state: [f64; AXES],
    pub error: RiccatiError,
}

impl fmt::Display for VertexFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vertex {:?} at {:?}: {}", self.index, self.state, self.error)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BuildError {
    #[error("invalid weights: {0}")]
    Weights(RiccatiError),
    #[error("{} of {total} vertices failed:\n{}", failures.len(), list(failures))]
    Vertices {
        total: usize,
        failures: Vec<VertexFailure>,
    },
}

fn list(failures: &[VertexFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("  {f}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Solves and certifies the SDRE at every grid vertex.
pub fn build_table(
    grid: &BreakpointGrid,
    inertia: &InertiaMatrix,
    weights: &WeightCase,
    tol: f64,
) -> Result<GainTable, BuildError> {
    build_table_with_report(grid, inertia, weights, tol).map(|(table, _)| table)
}

pub fn build_table_with_report(
    grid: &BreakpointGrid,
    inertia: &InertiaMatrix,
    weights: &WeightCase,
    tol: f64,
) -> Result<(GainTable, BuildReport), BuildError> {
    let pair = weights.to_pair().map_err(BuildError::Weights)?;
    let q_norm = pair.q().norm();
    let results: Vec<_> = (0..grid.len())
        .into_par_iter()
        .map(|flat| solve_vertex(grid, flat, inertia, &pair, tol))
        .collect();

    let mut gains = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    let mut report = BuildReport {
        vertices: grid.len(),
        max_iterations: 0,
        mean_iterations: 0.0,
        max_warmup_steps: 0,
        max_relative_residual: 0.0,
    };
    let mut iteration_sum = 0usize;
    for (flat, result) in results.into_iter().enumerate() {
        match result {
            Ok((gain, sol)) => {
                gains.push(gain);
                iteration_sum += sol.iterations;
                report.max_iterations = report.max_iterations.max(sol.iterations);
                report.max_warmup_steps = report.max_warmup_steps.max(sol.warmup_steps);
                report.max_relative_residual =
                    report.max_relative_residual.max(sol.residual_norm / q_norm);
            }
            Err(error) => {
                let index = grid.multi_index(flat);
                failures.push(VertexFailure {
                    index,
                    state: grid.vertex(&index).to_vector().into(),
                    error,
                });
            }
        }
    }
    if !failures.is_empty() {
        return Err(BuildError::Vertices {
            total: grid.len(),
            failures,
        });
    }
    report.mean_iterations = iteration_sum as f64 / grid.len() as f64;
    let table = GainTable {
        grid: grid.clone(),
        gains,
        inertia: *inertia,
        weights: *weights,
        tolerance: tol,
    };
    Ok((table, report))
}

fn solve_vertex(
    grid: &BreakpointGrid,
    flat: usize,
    inertia: &InertiaMatrix,
    weights: &WeightPair,
    tol: f64,
) -> Result<(Gain, CareSolution), RiccatiError> {
    let x = grid.vertex(&grid.multi_index(flat));
    let sdc = sdc_factorize(&x, inertia);
    let a = DMatrix::from_column_slice(6, 6, sdc.a.as_slice());
    let b = DMatrix::from_column_slice(6, 3, sdc.b.as_slice());
    let sol = solve_care(&a, &b, weights, tol)?;
    let k = gain_from_solution(&sol, &b, weights.r());
    Ok((Gain::from_column_slice(k.as_slice()), sol))
}

/// Multilinear interpolation of every gain entry over the cell containing
/// `x`; coordinates outside the grid are clamped to the boundary.
pub fn interpolate_gain(table: &GainTable, x: &ErrorState) -> Gain {
    interpolate_gain_with_cell(table, x).0
}

/// Like [`interpolate_gain`], also returning the flat index of the cell's
/// lower corner.
pub fn interpolate_gain_with_cell(table: &GainTable, x: &ErrorState) -> (Gain, usize) {
    let grid = &table.grid;
    let coords = x.to_vector();
    let mut lower = [0usize; AXES];
    let mut frac = [0.0f64; AXES];
    for a in 0..AXES {
        let (i, t) = grid.locate(a, coords[a]);
        lower[a] = i;
        frac[a] = t;
    }
    let shape = grid.shape();
    let mut out = Gain::zeros();
    for corner in 0..(1usize << AXES) {
        let mut weight = 1.0;
        let mut idx = lower;
        for a in 0..AXES {
            let upper = (corner >> (AXES - 1 - a)) & 1 == 1;
            if upper {
                if shape[a] == 1 {
                    weight = 0.0;
                    break;
                }
                idx[a] += 1;
                weight *= frac[a];
            } else {
                weight *= 1.0 - frac[a];
            }
        }
        if weight != 0.0 {
            out += table.gains[grid.flat_index(&idx)] * weight;
        }
    }
    (out, grid.flat_index(&lower))
}
