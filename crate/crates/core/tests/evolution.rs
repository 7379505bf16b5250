mod common;

use std::collections::HashSet;

use epde::evolution::{crossover, evaluate_fitness, init_population, mutate, run_epde_on, tournament_select, FitnessEvaluator};
use epde::solvers::{solve_burgers, BurgersParams};
use epde::terms::{enumerate_terms, FeatureLibrary};
use epde::{Chromosome, Differentiation, EvolutionConfig, Factor, FitnessMode, Grid, Normalization, SolutionField, Term};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn burgers_library() -> FeatureLibrary {
    let f = solve_burgers(&BurgersParams::validation_default()).unwrap();
    FeatureLibrary::new(Differentiation::FiniteDifference.apply(&f).unwrap(), Normalization::L2)
}

fn term(f: &[Factor]) -> Term {
    Term::new(f.to_vec()).unwrap()
}

fn every_term() -> Vec<Term> {
    enumerate_terms(&Factor::POOL, 2)
}

#[test]
fn tournament_matches_hypergeometric_expectation() {
    let lib = burgers_library();
    let cfg = EvolutionConfig {
        population_size: 10,
        // Pruned physical refits can tie; unpruned normalised fits do not.
        fitness: FitnessMode::Normalized,
        ..EvolutionConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pop = init_population(&cfg, &Factor::POOL, &|t| lib.is_usable(t), &mut rng).unwrap();
    FitnessEvaluator::new(&lib, &cfg).evaluate_population(&mut pop).unwrap();
    let fit: Vec<f64> = pop.iter().map(|c| c.fitness().unwrap()).collect();
    let best = (0..fit.len()).max_by(|&a, &b| fit[a].total_cmp(&fit[b])).unwrap();
    assert_eq!(fit.iter().filter(|&&f| f == fit[best]).count(), 1);

    let trials = 100_000;
    let hits = (0..trials).filter(|_| tournament_select(&pop, 3, &mut rng) == best).count();
    // 1 - C(9,3)/C(10,3)
    let expected = 1.0 - 84.0 / 120.0;
    let freq = hits as f64 / trials as f64;
    assert!((freq - expected).abs() < 0.02 * expected, "{freq} vs {expected}");
}

#[test]
fn crossover_swaps_each_position_half_the_time() {
    let all = every_term();
    let a = Chromosome::new(all[..6].to_vec(), 0).unwrap();
    let b = Chromosome::new(all[6..12].to_vec(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let trials = 10_000;
    let mut swaps = [0usize; 6];
    for _ in 0..trials {
        let (x, y) = crossover(&a, &b, &mut rng);
        for i in 0..6 {
            if x.terms()[i] != a.terms()[i] {
                assert_eq!(x.terms()[i], b.terms()[i]);
                assert_eq!(y.terms()[i], a.terms()[i]);
                swaps[i] += 1;
            }
        }
    }
    for (i, s) in swaps.iter().enumerate() {
        let freq = *s as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "position {i}: {freq}");
    }
}

#[test]
fn mutation_replaces_genes_at_the_requested_rate() {
    let all = every_term();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let genes_per = 5;
    let individuals = 2_000;
    let mut changed = 0;
    for _ in 0..individuals {
        let mut ch = Chromosome::new(all[..genes_per].to_vec(), 0).unwrap();
        changed += mutate(&mut ch, 0.3, &Factor::POOL, 2, &|_| true, &mut rng);
        let distinct: HashSet<&Term> = ch.terms().iter().collect();
        assert_eq!(distinct.len(), genes_per);
    }
    let freq = changed as f64 / (genes_per * individuals) as f64;
    assert!((freq - 0.3).abs() < 0.02, "{freq}");
}

#[test]
fn initialisation_reaches_every_term() {
    let cfg = EvolutionConfig {
        population_size: 100,
        ..EvolutionConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut seen = HashSet::new();
    for _ in 0..100 {
        for ch in init_population(&cfg, &Factor::POOL, &|_| true, &mut rng).unwrap() {
            seen.extend(ch.terms().iter().cloned());
        }
    }
    for t in every_term() {
        assert!(seen.contains(&t), "{t} never drawn");
    }
}

#[test]
fn truth_outscores_noise_terms() {
    let f = solve_burgers(&BurgersParams::validation_default()).unwrap();
    let mut stack = Differentiation::FiniteDifference.apply(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (a, b) = stack.shape();
    let noise: Vec<Factor> = (0..3)
        .map(|_| {
            let values = Array2::from_shape_fn((a, b), |_| rng.random_range(-1.0..1.0));
            stack.register_factor(values).unwrap()
        })
        .collect();
    let lib = FeatureLibrary::new(stack, Normalization::L2);
    for mode in [FitnessMode::Normalized, FitnessMode::Physical] {
        let cfg = EvolutionConfig {
            fitness: mode,
            ..EvolutionConfig::default()
        };
        let mut truth = Chromosome::new(vec![term(&[Factor::Ut]), term(&[Factor::Uxx]), term(&[Factor::U, Factor::Ux])], 0).unwrap();
        let mut junk = Chromosome::new(
            vec![term(&[Factor::Ut]), term(&[noise[0]]), term(&[noise[1], noise[2]])],
            0,
        )
        .unwrap();
        let ft = evaluate_fitness(&mut truth, &lib, &cfg).unwrap();
        let fj = evaluate_fitness(&mut junk, &lib, &cfg).unwrap();
        assert!(ft > fj, "{mode:?}: truth {ft} vs noise {fj}");
    }
}

#[test]
fn normalized_fitness_is_inverse_residual() {
    let lib = burgers_library();
    let cfg = EvolutionConfig {
        fitness: FitnessMode::Normalized,
        ..EvolutionConfig::default()
    };
    let mut ch = Chromosome::new(vec![term(&[Factor::Ut]), term(&[Factor::Uxx]), term(&[Factor::U])], 0).unwrap();
    let fit = evaluate_fitness(&mut ch, &lib, &cfg).unwrap();
    let e = ch.evaluation().unwrap();
    let y = lib.normalized(&term(&[Factor::Ut])).unwrap();
    let mut r = y.to_vec();
    for (t, w) in ch.features().iter().zip(&e.weights) {
        for (ri, v) in r.iter_mut().zip(lib.normalized(t).unwrap().iter()) {
            *ri -= w * v;
        }
    }
    let direct = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((e.residual_norm - direct).abs() < 1e-9 * direct);
    assert!((fit - 1.0 / (direct + cfg.fitness_epsilon)).abs() < 1e-9 * fit);
}

#[test]
fn exact_dependence_scores_inverse_epsilon() {
    // u = x^2 + 2t: u_t = u_xx = 2 exactly under a cubic fit.
    let g = Grid::new(30, 30, 0.1, 0.1).unwrap();
    let f = SolutionField::from_fn(g, |t, x| x * x + 2.0 * t).unwrap();
    let lib = FeatureLibrary::new(
        Differentiation::Polynomial { window: 7, degree: 3 }.apply(&f).unwrap(),
        Normalization::L2,
    );
    for mode in [FitnessMode::Normalized, FitnessMode::Physical] {
        let mut cfg = EvolutionConfig {
            fitness: mode,
            ..EvolutionConfig::default()
        };
        cfg.regression.lambda = 0.0;
        let mut ch = Chromosome::new(vec![term(&[Factor::Ut]), term(&[Factor::Uxx])], 0).unwrap();
        let fit = evaluate_fitness(&mut ch, &lib, &cfg).unwrap();
        let ideal = 1.0 / cfg.fitness_epsilon;
        assert!((fit - ideal).abs() < 1e-3 * ideal, "{mode:?}: {fit}");
    }
}

fn property_config() -> EvolutionConfig {
    EvolutionConfig {
        epochs: 100,
        plateau_window: 0,
        ..EvolutionConfig::default()
    }
}

#[test]
fn best_fitness_never_decreases() {
    for (seed, h) in common::burgers_histories(&property_config(), 20).iter().enumerate() {
        assert_eq!(h.len(), 101, "seed {seed}");
        for w in h.windows(2) {
            assert!(w[1] >= w[0], "seed {seed}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn population_stays_full_and_distinct_and_runs_repeat_bitwise() {
    let lib = burgers_library();
    let cfg = EvolutionConfig {
        seed: 17,
        ..property_config()
    };
    let a = run_epde_on(&lib, &cfg).unwrap();
    let b = run_epde_on(&lib, &cfg).unwrap();
    assert_eq!(a.population.len(), cfg.population_size);
    for ch in &a.population {
        let distinct: HashSet<&Term> = ch.terms().iter().collect();
        assert_eq!(distinct.len(), cfg.terms_in_individual);
    }
    let bits = |h: &[f64]| h.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.best_fitness_history), bits(&b.best_fitness_history));
    assert_eq!(a.population, b.population);
    assert_eq!(a.equation.to_json(), b.equation.to_json());
}
