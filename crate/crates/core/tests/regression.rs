mod common;

use epde::regression::{lasso_objective, ols};
use epde::solvers::{solve_burgers, BurgersParams};
use epde::terms::FeatureLibrary;
use epde::{fit_coefficients, lasso, Differentiation, Factor, Normalization, RegressionConfig, Term};

fn slices(cols: &[Vec<f64>]) -> Vec<&[f64]> {
    cols.iter().map(|c| c.as_slice()).collect()
}

fn cfg(lambda: f64) -> RegressionConfig {
    RegressionConfig {
        lambda,
        tolerance: 1e-13,
        ..RegressionConfig::default()
    }
}

#[test]
fn lasso_dominates_grid_search() {
    for seed in 0..3 {
        let (cols, y) = common::random_instance(seed);
        let sol = lasso(&slices(&cols), &y, &cfg(0.1)).unwrap();
        let obj = lasso_objective(&slices(&cols), &y, &sol.weights, 0.1);
        let grid = common::grid_minimum(&cols, &y, 0.1, 1e-2, 2.0);
        assert!(obj <= grid + 1e-12 * grid.abs(), "seed {seed}: lasso {obj} vs grid {grid}");
    }
}

#[test]
fn lasso_objective_never_increases_between_sweeps() {
    for seed in 0..20 {
        let (cols, y) = common::random_instance(seed);
        for lambda in [0.0, 0.01, 0.1, 1.0] {
            let sol = lasso(&slices(&cols), &y, &cfg(lambda)).unwrap();
            for w in sol.sweep_objectives.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "seed {seed}, lambda {lambda}: {} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn zero_penalty_matches_least_squares() {
    for seed in 0..10 {
        let (cols, y) = common::random_instance(seed);
        let sol = lasso(&slices(&cols), &y, &cfg(0.0)).unwrap();
        let (w, _) = ols(&slices(&cols), &y).unwrap();
        for (a, b) in sol.weights.iter().zip(&w) {
            assert!((a - b).abs() < 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn penalty_above_lambda_max_kills_every_weight() {
    let (cols, y) = common::random_instance(4);
    let lambda_max = cols
        .iter()
        .map(|c| c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max);
    for factor in [1.0, 1.5, 10.0] {
        let sol = lasso(&slices(&cols), &y, &cfg(factor * lambda_max)).unwrap();
        assert!(sol.weights.iter().all(|&w| w == 0.0), "{:?}", sol.weights);
    }
    let sol = lasso(&slices(&cols), &y, &cfg(0.9 * lambda_max)).unwrap();
    assert!(sol.weights.iter().any(|&w| w != 0.0));
}

#[test]
fn lasso_is_permutation_equivariant() {
    let (cols, y) = common::random_instance(7);
    let sol = lasso(&slices(&cols), &y, &cfg(0.2)).unwrap();
    let order = [2, 0, 3, 1];
    let permuted: Vec<Vec<f64>> = order.iter().map(|&k| cols[k].clone()).collect();
    let psol = lasso(&slices(&permuted), &y, &cfg(0.2)).unwrap();
    for (pos, &k) in order.iter().enumerate() {
        assert!((psol.weights[pos] - sol.weights[k]).abs() < 1e-8);
    }
}

#[test]
fn refit_residual_is_orthogonal_to_the_features() {
    let f = solve_burgers(&BurgersParams::validation_default()).unwrap();
    let stack = Differentiation::FiniteDifference.apply(&f).unwrap();
    let lib = FeatureLibrary::new(stack.clone(), Normalization::L2);
    let target = Term::single(Factor::Ut);
    let terms = vec![
        Term::single(Factor::Uxx),
        Term::new(vec![Factor::U, Factor::Ux]).unwrap(),
        Term::single(Factor::U),
        Term::new(vec![Factor::U, Factor::U]).unwrap(),
    ];
    let eq = fit_coefficients(&target, &terms, &stack).unwrap();
    let y = lib.raw(&target).unwrap();
    let mut residual = y.clone();
    for (t, w) in &eq.terms {
        for (r, v) in residual.iter_mut().zip(lib.raw(t).unwrap()) {
            *r -= w * v;
        }
    }
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    for t in &terms {
        let col = lib.raw(t).unwrap();
        let cnorm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dot: f64 = col.iter().zip(&residual).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-8 * cnorm * ynorm, "{t}: {}", dot / (cnorm * ynorm));
    }
}
