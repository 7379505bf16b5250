mod common;

use epde::solvers::{solve_kdv, solve_wave, KdvParams, WaveParams};

#[test]
fn wave_matches_dalembert_before_reflection() {
    let e = common::dalembert_error();
    assert!(e < 1e-2, "relative L2 {e}");
}

#[test]
fn burgers_converges_under_refinement() {
    let e = common::burgers_self_convergence_error();
    assert!(e < 1e-2, "relative L2 {e}");
}

#[test]
fn soliton_translates_at_its_speed() {
    let e = common::soliton_error();
    assert!(e < 1e-2, "relative L2 {e}");
}

#[test]
fn kdv_conserves_mass() {
    let f = solve_kdv(&KdvParams::two_soliton(128, 256)).unwrap();
    let v = f.values();
    let first: f64 = v.row(0).sum();
    for i in 1..v.nrows() {
        let m: f64 = v.row(i).sum();
        assert!((m - first).abs() < 1e-9 * first.abs(), "frame {i}: {m} vs {first}");
    }
}

#[test]
fn wave_energy_is_nearly_constant_before_reflection() {
    let p = WaveParams::validation_default();
    let f = solve_wave(&p).unwrap();
    let g = *f.grid();
    let v = f.values();
    // Centred-difference energy over frames where the pulse is clear of the walls.
    let energy = |i: usize| -> f64 {
        (1..g.nx - 1)
            .map(|j| {
                let ut = (v[[i + 1, j]] - v[[i - 1, j]]) / (2.0 * g.dt);
                let ux = (v[[i, j + 1]] - v[[i, j - 1]]) / (2.0 * g.dx);
                0.5 * (ut * ut + p.stiffness() * ux * ux) * g.dx
            })
            .sum()
    };
    let e0 = energy(1);
    for i in 2..30 {
        let e = energy(i);
        assert!((e - e0).abs() < 2e-2 * e0, "frame {i}: {e} vs {e0}");
    }
}
