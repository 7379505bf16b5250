//! Oracle measurements shared by the integration suites and the acceptance
//! report. Each returns the measured quantity; callers decide the tolerance.
#![allow(dead_code)]

use epde::derivatives::fd_derivatives;
use epde::evolution::run_epde_on;
use epde::solvers::{periodic_soliton, solve_burgers, solve_kdv, solve_wave, BurgersParams, KdvParams, WaveParams};
use epde::terms::FeatureLibrary;
use epde::{EvolutionConfig, Factor, Grid, SolutionField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rel_l2(found: impl IntoIterator<Item = f64>, exact: impl IntoIterator<Item = f64>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in found.into_iter().zip(exact) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    (num / den).sqrt()
}

/// Wave field against the half-sum of translated pulses, over the frames
/// before the pulse reaches either wall.
pub fn dalembert_error() -> f64 {
    let p = WaveParams::validation_default();
    let f = solve_wave(&p).unwrap();
    let g = *f.grid();
    let speed = 1.0 / p.c;
    let centre = g.x0 + 0.5 * (g.nx - 1) as f64 * g.dx;
    let profile = |x: f64| (-0.5 * (x - centre) * (x - centre)).exp();
    // Pulse halves travel 1.5 units (three widths still clear of the walls).
    let frames = (1.5 / speed / g.dt) as usize;
    let mut found = Vec::new();
    let mut exact = Vec::new();
    for i in 0..=frames {
        let t = g.t(i);
        for j in 0..g.nx {
            let x = g.x(j);
            found.push(f.values()[[i, j]]);
            exact.push(0.5 * (profile(x - speed * t) + profile(x + speed * t)));
        }
    }
    rel_l2(found, exact)
}

/// Default Burgers run against the same problem on a grid refined four
/// times in both directions, compared at the shared points.
pub fn burgers_self_convergence_error() -> f64 {
    let coarse_p = BurgersParams::validation_default();
    let g = coarse_p.grid;
    let fine_grid = Grid::with_origin(4 * g.nt - 3, 4 * g.nx - 3, g.dt / 4.0, g.dx / 4.0, g.t0, g.x0).unwrap();
    let fine_p = BurgersParams::gaussian_hump(coarse_p.mu, fine_grid, -2.0, 1.0 / std::f64::consts::SQRT_2, 1.0);
    let coarse = solve_burgers(&coarse_p).unwrap();
    let fine = solve_burgers(&fine_p).unwrap();
    let mut found = Vec::new();
    let mut exact = Vec::new();
    for i in 0..g.nt {
        for j in 0..g.nx {
            found.push(coarse.values()[[i, j]]);
            exact.push(fine.values()[[4 * i, 4 * j]]);
        }
    }
    rel_l2(found, exact)
}

/// A single soliton of speed 2 on the periodic domain, against its exact
/// translate, over the whole run.
pub fn soliton_error() -> f64 {
    let (speed, centre, length) = (2.0, -10.0, 40.0);
    let grid = Grid::with_origin(200, 512, 0.05, length / 512.0, 0.0, -20.0).unwrap();
    let initial = grid.xs().iter().map(|&x| periodic_soliton(x, speed, centre, length)).collect();
    let f = solve_kdv(&KdvParams { grid, initial, substeps: 0 }).unwrap();
    let mut found = Vec::new();
    let mut exact = Vec::new();
    for i in 0..grid.nt {
        let shift = centre + speed * grid.t(i);
        for j in 0..grid.nx {
            found.push(f.values()[[i, j]]);
            exact.push(periodic_soliton(grid.x(j), speed, shift, length));
        }
    }
    rel_l2(found, exact)
}

/// Max error of the first x-derivative of sin(x) cos(t) on a square grid of
/// spacing `h`, measured on the interior the stencils cover.
pub fn fd_ux_error(h: f64) -> f64 {
    let n = (2.0 / h) as usize;
    let g = Grid::new(n, n, h, h).unwrap();
    let f = SolutionField::from_fn(g, |t, x| x.sin() * t.cos()).unwrap();
    let stack = fd_derivatives(&f).unwrap();
    let (mt, mx) = stack.margins();
    let ux = stack.factor(Factor::Ux).unwrap();
    let mut worst = 0.0_f64;
    for ((i, j), v) in ux.indexed_iter() {
        let (t, x) = (g.t(i + mt), g.x(j + mx));
        worst = worst.max((v - x.cos() * t.cos()).abs());
    }
    worst
}

/// Observed order of accuracy between spacings `h` and `h / 2`.
pub fn fd_convergence_order(h: f64) -> f64 {
    (fd_ux_error(h) / fd_ux_error(h / 2.0)).log2()
}

/// Best-fitness histories of `seeds` runs on the default Burgers field.
pub fn burgers_histories(cfg: &EvolutionConfig, seeds: u64) -> Vec<Vec<f64>> {
    let f = solve_burgers(&BurgersParams::validation_default()).unwrap();
    let lib = FeatureLibrary::new(cfg.differentiation.apply(&f).unwrap(), cfg.normalization);
    (0..seeds)
        .map(|seed| {
            let cfg = EvolutionConfig { seed, ..cfg.clone() };
            run_epde_on(&lib, &cfg).unwrap().best_fitness_history
        })
        .collect()
}

/// A 50 x 4 design with correlated columns and a noisy target.
pub fn random_instance(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cols: Vec<Vec<f64>> = (0..4)
        .map(|_| base.iter().map(|b| 0.3 * b + rng.random_range(-1.0..1.0)).collect())
        .collect();
    let w = [1.0, -0.5, 0.0, 0.25];
    let y = (0..50)
        .map(|r| (0..4).map(|k| w[k] * cols[k][r]).sum::<f64>() + 0.1 * rng.random_range(-1.0..1.0))
        .collect();
    (cols, y)
}

/// Smallest value of `0.5 |S w - y|^2 + lambda |w|_1` over the grid of
/// step `step` on `[-bound, bound]^4`. The last coordinate is minimised in
/// closed form per cell: the objective is convex in it, so the grid minimum
/// along that axis sits at one of the two grid points around the continuous
/// minimiser (or at the box edge).
pub fn grid_minimum(cols: &[Vec<f64>], y: &[f64], lambda: f64, step: f64, bound: f64) -> f64 {
    let p = cols.len();
    assert_eq!(p, 4);
    let g: Vec<Vec<f64>> = (0..p)
        .map(|a| (0..p).map(|b| cols[a].iter().zip(&cols[b]).map(|(x, z)| x * z).sum()).collect())
        .collect();
    let bv: Vec<f64> = (0..p).map(|a| cols[a].iter().zip(y).map(|(x, z)| x * z).sum()).collect();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    let n = (2.0 * bound / step).round() as i64;
    let at = |k: i64| -bound + k as f64 * step;
    let mut best = f64::INFINITY;
    for a in 0..=n {
        let w0 = at(a);
        for b in 0..=n {
            let w1 = at(b);
            for c in 0..=n {
                let w2 = at(c);
                let w = [w0, w1, w2];
                // f(w3) = 0.5 g33 w3^2 - (b3 - sum g3k wk) w3 + lambda |w3| + rest
                let mut rest = yy;
                let mut lin = bv[3];
                for i in 0..3 {
                    rest -= 2.0 * bv[i] * w[i];
                    lin -= g[3][i] * w[i];
                    for k in 0..3 {
                        rest += g[i][k] * w[i] * w[k];
                    }
                }
                let rest = 0.5 * rest + lambda * (w0.abs() + w1.abs() + w2.abs());
                let g33 = g[3][3];
                let soft = if lin > lambda {
                    lin - lambda
                } else if lin < -lambda {
                    lin + lambda
                } else {
                    0.0
                };
                let cont = (soft / g33).clamp(-bound, bound);
                let k = ((cont + bound) / step).floor() as i64;
                for kk in [k, k + 1] {
                    if (0..=n).contains(&kk) {
                        let w3 = at(kk);
                        let v = rest + 0.5 * g33 * w3 * w3 - lin * w3 + lambda * w3.abs();
                        best = best.min(v);
                    }
                }
            }
        }
    }
    best
}
