use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{check_profile, check_row, gaussian, tridiag::solve_tridiagonal};
use crate::error::{EpdeError, Result};
use crate::grid::{Grid, SolutionField};

/// Parameters for viscous Burgers `u_t = -u u_x + mu u_xx` with zero
/// Dirichlet boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurgersParams {
    pub mu: f64,
    pub grid: Grid,
    pub initial: Vec<f64>,
    /// Upper bound on fixed-point sweeps for the implicit nonlinear term.
    pub picard_iterations: usize,
    /// Sweeps stop early once the largest update falls below this.
    pub picard_tolerance: f64,
}

impl BurgersParams {
    /// 256 x 256 points on x in [-8, 8), t in [0, 10), mu = 0.1, with a unit
    /// Gaussian hump centred at x = -2.
    pub fn validation_default() -> Self {
        let grid = Grid::with_origin(256, 256, 10.0 / 256.0, 16.0 / 256.0, 0.0, -8.0).expect("static grid");
        Self::gaussian_hump(0.1, grid, -2.0, 1.0 / std::f64::consts::SQRT_2, 1.0)
    }

    pub fn gaussian_hump(mu: f64, grid: Grid, centre: f64, sigma: f64, height: f64) -> Self {
        Self {
            mu,
            grid,
            initial: grid.xs().iter().map(|&x| gaussian(x, centre, sigma, height)).collect(),
            picard_iterations: 2,
            picard_tolerance: 0.0,
        }
    }
}

/// Crank-Nicolson in time, central differences in space. The advective term
/// at the new level is linearised around the latest Picard iterate so that
/// every sweep is a single tridiagonal solve.
pub fn solve_burgers(p: &BurgersParams) -> Result<SolutionField> {
    if !(p.mu > 0.0 && p.mu.is_finite()) {
        return Err(EpdeError::InvalidParameter(format!("viscosity must be positive, got {}", p.mu)));
    }
    if p.picard_iterations == 0 {
        return Err(EpdeError::InvalidParameter("picard_iterations must be at least 1".into()));
    }
    let g = p.grid;
    check_profile("initial profile", &p.initial, g.nx)?;
    let n = g.nx;
    let m = n - 2;
    let half = 0.5 * g.dt;
    let diff = p.mu / (g.dx * g.dx);
    let adv = 1.0 / (2.0 * g.dx);

    let mut values = Array2::zeros((g.nt, n));
    let mut cur = p.initial.clone();
    cur[0] = 0.0;
    cur[n - 1] = 0.0;
    values.row_mut(0).assign(&ndarray::ArrayView1::from(&cur));

    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for step in 1..g.nt {
        for j in 1..n - 1 {
            let explicit = diff * (cur[j - 1] - 2.0 * cur[j] + cur[j + 1]) - cur[j] * adv * (cur[j + 1] - cur[j - 1]);
            rhs[j - 1] = cur[j] + half * explicit;
        }
        let mut iterate = cur.clone();
        for _ in 0..p.picard_iterations {
            for j in 1..n - 1 {
                let w = iterate[j];
                lower[j - 1] = -half * (diff + w * adv);
                diag[j - 1] = 1.0 + 2.0 * half * diff;
                upper[j - 1] = -half * (diff - w * adv);
            }
            let inner = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
            let mut change = 0.0_f64;
            for j in 1..n - 1 {
                change = change.max((inner[j - 1] - iterate[j]).abs());
                iterate[j] = inner[j - 1];
            }
            if change <= p.picard_tolerance {
                break;
            }
        }
        check_row(&iterate, step)?;
        values.row_mut(step).assign(&ndarray::ArrayView1::from(&iterate));
        cur = iterate;
    }
    SolutionField::new(g, values)
}
