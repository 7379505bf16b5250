use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{check_profile, check_row};
use crate::error::{EpdeError, Result};
use crate::grid::{Grid, SolutionField};

/// Upper bound of `|2 sin(k dx) - sin(2 k dx)|` over wavenumbers, the
/// spectral radius factor of the five-point third-derivative stencil.
const DISPERSION_PEAK: f64 = 2.598_076_211_353_316; // 3 sqrt(3) / 2

/// Fraction of the leapfrog stability limit used when picking substeps.
const SAFETY: f64 = 0.8;

/// Parameters for `u_t + 6 u u_x + u_xxx = 0` on a periodic domain.
///
/// The grid's `dt` is the sampling interval of the returned field; the
/// integrator advances `substeps` internal steps between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdvParams {
    pub grid: Grid,
    pub initial: Vec<f64>,
    /// Internal steps per sample; 0 picks the smallest stable count.
    pub substeps: usize,
}

/// `(c/2) sech^2(sqrt(c) (x - x0) / 2)`, the soliton travelling at speed `c`.
pub fn soliton(x: f64, speed: f64, centre: f64) -> f64 {
    let s = 1.0 / (0.5 * speed.sqrt() * (x - centre)).cosh();
    0.5 * speed * s * s
}

/// Soliton profile wrapped onto a periodic domain of length `period`.
pub fn periodic_soliton(x: f64, speed: f64, centre: f64, period: f64) -> f64 {
    (-3..=3).map(|k| soliton(x, speed, centre + k as f64 * period)).sum()
}

impl KdvParams {
    /// 1024 x 1024 samples on x in [-20, 20), sampling interval 0.01, with
    /// two separated solitons (speeds 4 and 1) that collide mid-run.
    pub fn validation_default() -> Self {
        Self::two_soliton(1024, 1024)
    }

    /// Reduced-size variant of the default run covering the same space-time
    /// window with `n` points per axis.
    pub fn two_soliton(nt: usize, nx: usize) -> Self {
        let length = 40.0;
        let duration = 10.24;
        let grid = Grid::with_origin(nt, nx, duration / nt as f64, length / nx as f64, 0.0, -20.0).expect("static grid");
        let initial = grid
            .xs()
            .iter()
            .map(|&x| periodic_soliton(x, 4.0, -10.0, length) + periodic_soliton(x, 1.0, -2.0, length))
            .collect();
        Self { grid, initial, substeps: 0 }
    }

    fn step_bound(&self, umax: f64) -> f64 {
        let dx = self.grid.dx;
        1.0 / (6.0 * umax / dx + DISPERSION_PEAK / (dx * dx * dx))
    }

    /// Internal steps per sample needed for stability, honouring an explicit
    /// `substeps` request when it is itself stable.
    pub fn effective_substeps(&self) -> Result<usize> {
        // Collisions can raise the peak above the initial maximum; allow 50%.
        let umax = 1.5 * self.initial.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let bound = self.step_bound(umax);
        if self.substeps == 0 {
            return Ok((self.grid.dt / (SAFETY * bound)).ceil().max(1.0) as usize);
        }
        let h = self.grid.dt / self.substeps as f64;
        if h > bound {
            return Err(EpdeError::Unstable(format!(
                "internal step {h:.3e} exceeds the leapfrog limit {bound:.3e}; raise substeps"
            )));
        }
        Ok(self.substeps)
    }
}

/// Right-hand side of the Zabusky-Kruskal semi-discretisation with
/// periodic wrap-around. Its entries sum to zero, so mass is conserved.
fn zk_rhs(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len();
    let a = 6.0 / (3.0 * 2.0 * dx);
    let b = 1.0 / (2.0 * dx * dx * dx);
    for j in 0..n {
        let jm2 = (j + n - 2) % n;
        let jm1 = (j + n - 1) % n;
        let jp1 = (j + 1) % n;
        let jp2 = (j + 2) % n;
        let nonlinear = a * (u[jp1] + u[j] + u[jm1]) * (u[jp1] - u[jm1]);
        let dispersive = b * (u[jp2] - 2.0 * u[jp1] + 2.0 * u[jm1] - u[jm2]);
        out[j] = -(nonlinear + dispersive);
    }
}

fn rk4_step(u: &[f64], h: f64, dx: f64) -> Vec<f64> {
    let n = u.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    zk_rhs(u, dx, &mut k1);
    for j in 0..n {
        tmp[j] = u[j] + 0.5 * h * k1[j];
    }
    zk_rhs(&tmp, dx, &mut k2);
    for j in 0..n {
        tmp[j] = u[j] + 0.5 * h * k2[j];
    }
    zk_rhs(&tmp, dx, &mut k3);
    for j in 0..n {
        tmp[j] = u[j] + h * k3[j];
    }
    zk_rhs(&tmp, dx, &mut k4);
    (0..n)
        .map(|j| u[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect()
}

/// Zabusky-Kruskal leapfrog integration, started with one RK4 step.
pub fn solve_kdv(p: &KdvParams) -> Result<SolutionField> {
    let g = p.grid;
    check_profile("initial profile", &p.initial, g.nx)?;
    let substeps = p.effective_substeps()?;
    let h = g.dt / substeps as f64;
    let n = g.nx;

    let mut values = Array2::zeros((g.nt, n));
    values.row_mut(0).assign(&ndarray::ArrayView1::from(&p.initial));
    if p.initial.iter().all(|&v| v == 0.0) {
        return SolutionField::new(g, values);
    }

    let mut prev = p.initial.clone();
    let mut cur = rk4_step(&prev, h, g.dx);
    let mut rhs = vec![0.0; n];
    let mut taken = 1;
    for sample in 1..g.nt {
        while taken < sample * substeps {
            zk_rhs(&cur, g.dx, &mut rhs);
            for j in 0..n {
                let next = prev[j] + 2.0 * h * rhs[j];
                prev[j] = cur[j];
                cur[j] = next;
            }
            taken += 1;
        }
        check_row(&cur, sample)?;
        values.row_mut(sample).assign(&ndarray::ArrayView1::from(&cur));
    }
    SolutionField::new(g, values)
}
