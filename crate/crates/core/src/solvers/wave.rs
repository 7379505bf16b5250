use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{check_profile, check_row, gaussian, tridiag::solve_tridiagonal};
use crate::error::{EpdeError, Result};
use crate::grid::{Grid, SolutionField};

/// Parameters for `u_tt = (1/c^2) u_xx` with zero Dirichlet boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub c: f64,
    pub grid: Grid,
    pub initial_displacement: Vec<f64>,
    pub initial_velocity: Vec<f64>,
}

impl WaveParams {
    /// 100 x 100 points, dt = dx = 0.1, c = 2, Gaussian pulse at rest in the
    /// middle of the domain.
    pub fn validation_default() -> Self {
        let grid = Grid::new(100, 100, 0.1, 0.1).expect("static grid");
        Self::gaussian_pulse(2.0, grid, 1.0)
    }

    /// A pulse of unit height and width `sigma`, centred in the domain, at rest.
    pub fn gaussian_pulse(c: f64, grid: Grid, sigma: f64) -> Self {
        let centre = grid.x0 + 0.5 * (grid.nx - 1) as f64 * grid.dx;
        let initial_displacement = grid.xs().iter().map(|&x| gaussian(x, centre, sigma, 1.0)).collect();
        Self {
            c,
            grid,
            initial_displacement,
            initial_velocity: vec![0.0; grid.nx],
        }
    }

    /// Squared propagation speed `1/c^2` multiplying `u_xx`.
    pub fn stiffness(&self) -> f64 {
        1.0 / (self.c * self.c)
    }
}

/// Implicit average-acceleration scheme: the second time difference balances
/// the discrete Laplacian of the weighted mean `(u^{n+1} + 2u^n + u^{n-1})/4`.
/// Unconditionally stable and second order; boundaries are held at zero.
pub fn solve_wave(p: &WaveParams) -> Result<SolutionField> {
    if !(p.c > 0.0 && p.c.is_finite()) {
        return Err(EpdeError::InvalidParameter(format!("wave speed must be positive, got {}", p.c)));
    }
    let g = p.grid;
    check_profile("initial displacement", &p.initial_displacement, g.nx)?;
    check_profile("initial velocity", &p.initial_velocity, g.nx)?;

    let n = g.nx;
    let m = n - 2;
    let r = p.stiffness() * g.dt * g.dt / 4.0;
    let k = r / (g.dx * g.dx);
    let lower = vec![-k; m];
    let upper = vec![-k; m];
    let diag = vec![1.0 + 2.0 * k; m];
    // (D2 w)_j scaled by r, evaluated on interior nodes with zero boundaries.
    let lap = |w: &[f64], j: usize| k * (w[j - 1] - 2.0 * w[j] + w[j + 1]);

    let mut values = Array2::zeros((g.nt, n));
    let mut prev: Vec<f64> = p.initial_displacement.clone();
    prev[0] = 0.0;
    prev[n - 1] = 0.0;
    values.row_mut(0).assign(&ndarray::ArrayView1::from(&prev));

    // First step eliminates the ghost level u^{-1} = u^1 - 2 dt v0.
    let mut tmp = vec![0.0; n];
    for j in 1..n - 1 {
        tmp[j] = prev[j] - g.dt * p.initial_velocity[j];
    }
    let rhs: Vec<f64> = (1..n - 1)
        .map(|j| prev[j] + g.dt * p.initial_velocity[j] + lap(&tmp, j))
        .collect();
    let mut cur = vec![0.0; n];
    cur[1..n - 1].copy_from_slice(&solve_tridiagonal(&lower, &diag, &upper, &rhs)?);
    check_row(&cur, 1)?;
    values.row_mut(1).assign(&ndarray::ArrayView1::from(&cur));

    let mut rhs = vec![0.0; m];
    for step in 2..g.nt {
        for j in 1..n - 1 {
            tmp[j] = 2.0 * cur[j] + prev[j];
        }
        for j in 1..n - 1 {
            rhs[j - 1] = 2.0 * cur[j] - prev[j] + lap(&tmp, j);
        }
        let next_inner = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
        let mut next = vec![0.0; n];
        next[1..n - 1].copy_from_slice(&next_inner);
        check_row(&next, step)?;
        values.row_mut(step).assign(&ndarray::ArrayView1::from(&next));
        prev = cur;
        cur = next;
    }
    SolutionField::new(g, values)
}
