//! The evolutionary search over candidate equations.
//!
//! An individual is a fixed-size set of distinct terms with one of them
//! singled out as the regression target. A LASSO fit of the target on the
//! other terms, all frame-normalised, picks the active terms; fitness is the
//! inverse of a residual (see [`FitnessMode`]).

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derivatives::{Differentiation, Factor};
use crate::equation::{DiscoveredEquation, Provenance};
use crate::error::{EpdeError, Result};
use crate::grid::SolutionField;
use crate::regression::{fit_coefficients, lasso_gram, GramSystem, RegressionConfig};
use crate::terms::{random_term, FeatureLibrary, Normalization, Term};

/// Draws allowed per gene before giving up on finding a fresh term.
const MAX_DRAWS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub terms_in_individual: usize,
    pub max_factors: usize,
    pub tournament_size: usize,
    /// Share of the population replaced by offspring each epoch.
    pub crossover_fraction: f64,
    /// Per-gene replacement probability.
    pub mutation_rate: f64,
    pub elite_count: usize,
    pub epochs: usize,
    /// Stop once best fitness improved by less than `plateau_threshold`
    /// (relative) over this many epochs. Zero disables the check.
    pub plateau_window: usize,
    pub plateau_threshold: f64,
    pub fitness_epsilon: f64,
    pub fitness: FitnessMode,
    /// In physical mode, active terms contributing less than this share of
    /// the target norm (`|w| |F| / |y|`) are dropped and the rest refitted.
    pub prune_threshold: f64,
    /// In physical mode, a term is also dropped while leaving it out raises
    /// the refit residual by less than this factor. Values <= 1 disable it.
    pub prune_ratio: f64,
    pub seed: u64,
    pub regression: RegressionConfig,
    pub normalization: Normalization,
    pub differentiation: Differentiation,
    /// Divide out a factor shared by every term of the final structure.
    pub simplify: bool,
    /// Report the highest-order bare time derivative as the left-hand side.
    pub canonical_lhs: bool,
    pub verbose: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 16,
            terms_in_individual: 6,
            max_factors: 2,
            tournament_size: 3,
            crossover_fraction: 0.5,
            mutation_rate: 0.3,
            elite_count: 1,
            epochs: 100,
            plateau_window: 50,
            plateau_threshold: 1e-6,
            fitness_epsilon: 1e-9,
            fitness: FitnessMode::default(),
            prune_threshold: 1e-2,
            prune_ratio: 2.0,
            seed: 0,
            regression: RegressionConfig::default(),
            normalization: Normalization::default(),
            differentiation: Differentiation::default(),
            simplify: true,
            canonical_lhs: true,
            verbose: false,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EpdeError::InvalidParameter(m));
        if self.population_size < 2 {
            return bad(format!("population_size must be >= 2, got {}", self.population_size));
        }
        if self.terms_in_individual < 2 {
            return bad(format!("terms_in_individual must be >= 2, got {}", self.terms_in_individual));
        }
        if self.max_factors == 0 {
            return bad("max_factors must be >= 1".into());
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad(format!(
                "tournament_size must be in 1..={}, got {}",
                self.population_size, self.tournament_size
            ));
        }
        for (name, v) in [
            ("crossover_fraction", self.crossover_fraction),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.elite_count == 0 || self.elite_count >= self.population_size {
            return bad(format!(
                "elite_count must be in 1..{}, got {}",
                self.population_size, self.elite_count
            ));
        }
        if !(self.fitness_epsilon > 0.0) {
            return bad("fitness_epsilon must be positive".into());
        }
        if !(self.prune_threshold >= 0.0 && self.prune_threshold < 1.0) {
            return bad(format!("prune_threshold must be in [0, 1), got {}", self.prune_threshold));
        }
        if !self.prune_ratio.is_finite() {
            return bad("prune_ratio must be finite".into());
        }
        if !(self.plateau_threshold >= 0.0) {
            return bad("plateau_threshold must be >= 0".into());
        }
        self.regression.validate()
    }
}

/// What the fitness residual is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitnessMode {
    /// Residual of the LASSO fit on frame-normalised features.
    Normalized,
    /// Relative residual of a least-squares refit of the LASSO-active terms
    /// on raw features. Frame normalisation lets constant-coefficient fits
    /// absorb per-frame amplitude changes, which favours approximate
    /// travelling-wave relations over the true equation; raw features do not.
    #[default]
    Physical,
}

impl std::str::FromStr for FitnessMode {
    type Err = EpdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normalized" => Ok(FitnessMode::Normalized),
            "physical" => Ok(FitnessMode::Physical),
            other => Err(EpdeError::Parse(format!("unknown fitness mode `{other}` (normalized|physical)"))),
        }
    }
}

/// Result of scoring one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub residual_norm: f64,
    /// LASSO weights of the non-target genes, in gene order.
    pub weights: Vec<f64>,
    /// Gene positions (not counting the target) with non-negligible weight.
    pub active: Vec<usize>,
    pub converged: bool,
}

/// Equality and hashing look only at the genes and the target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Chromosome {
    terms: Vec<Term>,
    target: usize,
    evaluation: Option<Evaluation>,
}

impl PartialEq for Chromosome {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.target == other.target
    }
}

impl Eq for Chromosome {}

impl std::hash::Hash for Chromosome {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.terms.hash(state);
        self.target.hash(state);
    }
}

impl Chromosome {
    pub fn new(terms: Vec<Term>, target: usize) -> Result<Self> {
        let ch = Self {
            terms,
            target,
            evaluation: None,
        };
        ch.check()?;
        Ok(ch)
    }

    fn check(&self) -> Result<()> {
        if self.terms.len() < 2 {
            return Err(EpdeError::InvalidParameter("a chromosome needs at least two terms".into()));
        }
        if self.target >= self.terms.len() {
            return Err(EpdeError::InvalidParameter(format!(
                "target index {} out of range for {} terms",
                self.target,
                self.terms.len()
            )));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if self.terms[..i].contains(t) {
                return Err(EpdeError::InvalidParameter(format!("duplicate term {t}")));
            }
        }
        Ok(())
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target_term(&self) -> &Term {
        &self.terms[self.target]
    }

    /// Non-target genes in order.
    pub fn features(&self) -> Vec<Term> {
        self.terms
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != self.target)
            .map(|(_, t)| t.clone())
            .collect()
    }

    pub fn evaluation(&self) -> Option<&Evaluation> {
        self.evaluation.as_ref()
    }

    pub fn fitness(&self) -> Option<f64> {
        self.evaluation.as_ref().map(|e| e.fitness)
    }

    /// Features with non-negligible LASSO weight; empty before evaluation.
    pub fn active_terms(&self) -> Vec<Term> {
        let features = self.features();
        self.evaluation
            .as_ref()
            .map(|e| e.active.iter().map(|&k| features[k].clone()).collect())
            .unwrap_or_default()
    }

    fn set_terms(&mut self, terms: Vec<Term>, target: usize) {
        self.terms = terms;
        self.target = target;
        self.evaluation = None;
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~", self.target_term())?;
        let features = self.features();
        let active = self.evaluation.as_ref().map(|e| &e.active);
        for (k, t) in features.iter().enumerate() {
            let mark = match active {
                Some(a) if a.contains(&k) => "*",
                _ => "",
            };
            write!(f, " {t}{mark}")?;
        }
        Ok(())
    }
}

/// Scores chromosomes against one feature library, memoising dot products
/// between terms and whole evaluations.
pub struct FitnessEvaluator<'a> {
    library: &'a FeatureLibrary,
    regression: RegressionConfig,
    epsilon: f64,
    mode: FitnessMode,
    prune_threshold: f64,
    prune_ratio: f64,
    dots: Mutex<HashMap<(Term, Term), f64>>,
    raw_dots: Mutex<HashMap<(Term, Term), f64>>,
    memo: Mutex<HashMap<(Vec<Term>, usize), Evaluation>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ordered(a: &Term, b: &Term) -> (Term, Term) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(library: &'a FeatureLibrary, cfg: &EvolutionConfig) -> Self {
        Self {
            library,
            regression: cfg.regression,
            epsilon: cfg.fitness_epsilon,
            mode: cfg.fitness,
            prune_threshold: if cfg.fitness == FitnessMode::Physical { cfg.prune_threshold } else { 0.0 },
            prune_ratio: if cfg.fitness == FitnessMode::Physical { cfg.prune_ratio } else { 0.0 },
            dots: Mutex::new(HashMap::new()),
            raw_dots: Mutex::new(HashMap::new()),
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn library(&self) -> &FeatureLibrary {
        self.library
    }

    fn dot_terms(&self, a: &Term, b: &Term) -> Result<f64> {
        let key = ordered(a, b);
        if let Some(v) = self.dots.lock().expect("dot cache").get(&key) {
            return Ok(*v);
        }
        let va = self.library.normalized(&key.0)?;
        let vb = self.library.normalized(&key.1)?;
        let v = dot(&va, &vb);
        self.dots.lock().expect("dot cache").insert(key, v);
        Ok(v)
    }

    fn raw_dot_terms(&self, a: &Term, b: &Term) -> Result<f64> {
        let key = ordered(a, b);
        if let Some(v) = self.raw_dots.lock().expect("dot cache").get(&key) {
            return Ok(*v);
        }
        let va = self.library.raw(&key.0)?;
        let v = if key.0 == key.1 {
            dot(&va, &va)
        } else {
            dot(&va, &self.library.raw(&key.1)?)
        };
        self.raw_dots.lock().expect("dot cache").insert(key, v);
        Ok(v)
    }

    fn system(&self, features: &[Term], target: &Term, d: impl Fn(&Term, &Term) -> Result<f64>) -> Result<GramSystem> {
        let p = features.len();
        let mut g = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = d(&features[i], &features[j])?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let b = features.iter().map(|f| d(f, target)).collect::<Result<Vec<_>>>()?;
        Ok(GramSystem {
            g,
            b: DVector::from_vec(b),
            yy: d(target, target)?,
        })
    }

    /// Scores a chromosome without touching its cached evaluation.
    pub fn score(&self, ch: &Chromosome) -> Result<Evaluation> {
        let key = (ch.terms.clone(), ch.target);
        if let Some(e) = self.memo.lock().expect("memo").get(&key) {
            return Ok(e.clone());
        }
        let features = ch.features();
        let target = ch.target_term();
        let system = self.system(&features, target, |a, b| self.dot_terms(a, b))?;
        let sol = lasso_gram(&system, self.regression.lambda * system.yy, &self.regression)?;
        let (residual, active) = match self.mode {
            FitnessMode::Normalized => {
                let mut r = sol.residual_norm;
                // Near-exact fits lose digits in the cross-product formula.
                if r * r < 1e-8 * system.yy {
                    r = self.direct_residual(&features, target, &sol.weights, true)?;
                }
                (r, sol.active_set)
            }
            FitnessMode::Physical => self.physical_fit(&features, &sol.active_set, target)?,
        };
        let e = Evaluation {
            fitness: 1.0 / (residual + self.epsilon),
            residual_norm: residual,
            weights: sol.weights,
            active,
            converged: sol.converged,
        };
        self.memo.lock().expect("memo").insert(key, e.clone());
        Ok(e)
    }

    /// Least squares of the raw target on the raw features at `active`,
    /// pruning weak contributors and then, one at a time, terms whose
    /// removal barely changes the residual. Returns `|y - S w| / |y|` and
    /// the kept positions.
    fn physical_fit(&self, features: &[Term], active: &[usize], target: &Term) -> Result<(f64, Vec<usize>)> {
        let mut kept = active.to_vec();
        loop {
            let terms: Vec<Term> = kept.iter().map(|&k| features[k].clone()).collect();
            let system = self.system(&terms, target, |a, b| self.raw_dot_terms(a, b))?;
            if system.yy == 0.0 {
                return Err(EpdeError::DegenerateTerm(target.to_string()));
            }
            if kept.is_empty() {
                return Ok((1.0, kept));
            }
            let w = least_squares(&system)?;
            let ynorm = system.yy.sqrt();
            let strong: Vec<usize> = (0..kept.len())
                .filter(|&i| w[i].abs() * system.g[(i, i)].sqrt() >= self.prune_threshold * ynorm)
                .collect();
            if strong.len() < kept.len() {
                kept = strong.into_iter().map(|i| kept[i]).collect();
                continue;
            }
            let mut r = system.residual_norm(&w);
            if r * r < 1e-8 * system.yy {
                r = self.direct_residual(&terms, target, &w, false)?;
            }
            if self.prune_ratio > 1.0 && r > 0.0 {
                let weakest = (0..kept.len())
                    .map(|i| Ok((i, leave_one_out(&system, i)? / r)))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((i, ratio)) = weakest {
                    if ratio < self.prune_ratio {
                        kept.remove(i);
                        continue;
                    }
                }
            }
            return Ok((r / ynorm, kept));
        }
    }

    /// Least-squares refit of `target` on all of `terms` with pruning.
    pub fn refit(&self, target: &Term, terms: &[Term]) -> Result<(f64, Vec<Term>)> {
        let all: Vec<usize> = (0..terms.len()).collect();
        let (r, kept) = self.physical_fit(terms, &all, target)?;
        Ok((r, kept.into_iter().map(|k| terms[k].clone()).collect()))
    }

    fn direct_residual(&self, features: &[Term], target: &Term, w: &[f64], normalized: bool) -> Result<f64> {
        let column = |t: &Term| -> Result<Vec<f64>> {
            if normalized {
                Ok(self.library.normalized(t)?.to_vec())
            } else {
                self.library.raw(t)
            }
        };
        let mut r: Vec<f64> = column(target)?.iter().map(|v| -v).collect();
        for (t, &wk) in features.iter().zip(w) {
            if wk != 0.0 {
                let c = column(t)?;
                for (ri, ci) in r.iter_mut().zip(c.iter()) {
                    *ri += wk * ci;
                }
            }
        }
        Ok(dot(&r, &r).sqrt())
    }

    /// Scores every unevaluated chromosome in parallel. Results do not
    /// depend on scheduling: each score is a pure function of its genes.
    pub fn evaluate_population(&self, population: &mut [Chromosome]) -> Result<()> {
        let results: Vec<Option<Result<Evaluation>>> = population
            .par_iter()
            .map(|ch| {
                if ch.evaluation.is_some() {
                    None
                } else {
                    Some(self.score(ch))
                }
            })
            .collect();
        for (ch, r) in population.iter_mut().zip(results) {
            if let Some(r) = r {
                ch.evaluation = Some(r?);
            }
        }
        Ok(())
    }
}

/// Scores one chromosome and caches the result on it.
pub fn evaluate_fitness(ch: &mut Chromosome, library: &FeatureLibrary, cfg: &EvolutionConfig) -> Result<f64> {
    let e = FitnessEvaluator::new(library, cfg).score(ch)?;
    let f = e.fitness;
    ch.evaluation = Some(e);
    Ok(f)
}

/// Residual norm of the least-squares fit without column `skip`.
fn leave_one_out(system: &GramSystem, skip: usize) -> Result<f64> {
    let idx: Vec<usize> = (0..system.b.len()).filter(|&i| i != skip).collect();
    if idx.is_empty() {
        return Ok(system.yy.sqrt());
    }
    let sub = GramSystem {
        g: DMatrix::from_fn(idx.len(), idx.len(), |i, j| system.g[(idx[i], idx[j])]),
        b: DVector::from_fn(idx.len(), |i, _| system.b[idx[i]]),
        yy: system.yy,
    };
    Ok(sub.residual_norm(&least_squares(&sub)?))
}

/// Minimum-norm least squares from cross products, on unit-diagonal scaling
/// so the pseudo-inverse cut-off is relative.
fn least_squares(system: &GramSystem) -> Result<Vec<f64>> {
    let p = system.b.len();
    let s: Vec<f64> = (0..p).map(|i| system.g[(i, i)].sqrt().max(f64::MIN_POSITIVE)).collect();
    let gs = DMatrix::from_fn(p, p, |i, j| system.g[(i, j)] / (s[i] * s[j]));
    let bs = DVector::from_fn(p, |i, _| system.b[i] / s[i]);
    let z = gs
        .svd(true, true)
        .solve(&bs, 1e-12)
        .map_err(|e| EpdeError::LinearSolveFailure(e.to_string()))?;
    Ok((0..p).map(|i| z[i] / s[i]).collect())
}

fn draw_fresh<R: Rng + ?Sized>(
    pool: &[Factor],
    max_factors: usize,
    taken: &[Term],
    usable: &dyn Fn(&Term) -> bool,
    rng: &mut R,
) -> Option<Term> {
    (0..MAX_DRAWS)
        .map(|_| random_term(pool, max_factors, rng))
        .find(|t| !taken.contains(t) && usable(t))
}

/// Random individuals of `terms_in_individual` distinct usable terms.
pub fn init_population<R: Rng + ?Sized>(
    cfg: &EvolutionConfig,
    pool: &[Factor],
    usable: &dyn Fn(&Term) -> bool,
    rng: &mut R,
) -> Result<Vec<Chromosome>> {
    cfg.validate()?;
    if pool.is_empty() {
        return Err(EpdeError::PoolExhausted);
    }
    (0..cfg.population_size)
        .map(|_| {
            let mut terms = Vec::with_capacity(cfg.terms_in_individual);
            for _ in 0..cfg.terms_in_individual {
                let t = draw_fresh(pool, cfg.max_factors, &terms, usable, rng).ok_or(EpdeError::PoolExhausted)?;
                terms.push(t);
            }
            let target = rng.random_range(0..terms.len());
            Chromosome::new(terms, target)
        })
        .collect()
}

/// Index of the fittest among `k` distinct individuals drawn uniformly;
/// ties go to the lower index. Unscored individuals lose every comparison.
pub fn tournament_select<R: Rng + ?Sized>(population: &[Chromosome], k: usize, rng: &mut R) -> usize {
    assert!(k >= 1 && k <= population.len(), "tournament size out of range");
    let fit = |i: usize| population[i].fitness().unwrap_or(f64::NEG_INFINITY);
    sample(rng, population.len(), k)
        .into_iter()
        .fold(None, |best: Option<usize>, i| match best {
            None => Some(i),
            Some(b) if fit(i) > fit(b) || (fit(i) == fit(b) && i < b) => Some(i),
            keep => keep,
        })
        .expect("k >= 1")
}

/// Uniform crossover: every position swaps with probability one half unless
/// the swap would duplicate a term in either child. A child whose genes
/// differ from its parent's gets a fresh random target; a clone keeps it.
pub fn crossover<R: Rng + ?Sized>(a: &Chromosome, b: &Chromosome, rng: &mut R) -> (Chromosome, Chromosome) {
    assert_eq!(a.terms.len(), b.terms.len(), "crossover needs equal gene counts");
    let n = a.terms.len();
    let mut x = a.terms.clone();
    let mut y = b.terms.clone();
    for i in 0..n {
        if !rng.random_bool(0.5) || x[i] == y[i] {
            continue;
        }
        let clash_x = x.iter().enumerate().any(|(k, t)| k != i && *t == y[i]);
        let clash_y = y.iter().enumerate().any(|(k, t)| k != i && *t == x[i]);
        if !clash_x && !clash_y {
            std::mem::swap(&mut x[i], &mut y[i]);
        }
    }
    let mut child = |terms: Vec<Term>, parent: &Chromosome| {
        let target = if terms == parent.terms {
            parent.target
        } else {
            rng.random_range(0..n)
        };
        Chromosome {
            terms,
            target,
            evaluation: None,
        }
    };
    let cx = child(x, a);
    let cy = child(y, b);
    (cx, cy)
}

/// Replaces each gene with probability `rate` by a fresh random term that is
/// usable and not already present. Returns how many genes changed.
pub fn mutate<R: Rng + ?Sized>(
    ch: &mut Chromosome,
    rate: f64,
    pool: &[Factor],
    max_factors: usize,
    usable: &dyn Fn(&Term) -> bool,
    rng: &mut R,
) -> usize {
    let mut terms = ch.terms.clone();
    let mut target = ch.target;
    let mut changed = 0;
    for i in 0..terms.len() {
        if !rng.random_bool(rate) {
            continue;
        }
        match draw_fresh(pool, max_factors, &terms, usable, rng) {
            Some(t) => {
                terms[i] = t;
                changed += 1;
                if i == target {
                    target = rng.random_range(0..terms.len());
                }
            }
            None => log::warn!("no fresh term for gene {i}; left unchanged"),
        }
    }
    if changed > 0 {
        ch.set_terms(terms, target);
    }
    changed
}

/// Everything a run produces, including the per-epoch trace.
#[derive(Debug, Clone)]
pub struct EvolutionOutcome {
    pub equation: DiscoveredEquation,
    pub best: Chromosome,
    /// Best fitness after initialisation and after every epoch.
    pub best_fitness_history: Vec<f64>,
    pub population: Vec<Chromosome>,
    pub epochs_run: usize,
}

fn best_index(population: &[Chromosome]) -> usize {
    let mut best = 0;
    for (i, ch) in population.iter().enumerate() {
        if ch.fitness().unwrap_or(f64::NEG_INFINITY) > population[best].fitness().unwrap_or(f64::NEG_INFINITY) {
            best = i;
        }
    }
    best
}

/// Indices sorted from fittest to least fit, ties by index.
fn ranking(population: &[Chromosome]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..population.len()).collect();
    idx.sort_by(|&i, &j| {
        let fi = population[i].fitness().unwrap_or(f64::NEG_INFINITY);
        let fj = population[j].fitness().unwrap_or(f64::NEG_INFINITY);
        fj.total_cmp(&fi).then(i.cmp(&j))
    });
    idx
}

fn assert_population(population: &[Chromosome], cfg: &EvolutionConfig) {
    assert_eq!(population.len(), cfg.population_size, "population size drifted");
    for ch in population {
        assert_eq!(ch.terms.len(), cfg.terms_in_individual, "gene count drifted");
        debug_assert!(ch.check().is_ok(), "invalid chromosome {ch}");
        if let Err(e) = ch.check() {
            panic!("invalid chromosome {ch}: {e}");
        }
    }
}

fn plateaued(history: &[f64], window: usize, threshold: f64) -> bool {
    if window == 0 || history.len() <= window {
        return false;
    }
    let now = history[history.len() - 1];
    let then = history[history.len() - 1 - window];
    now - then <= threshold * then.abs()
}

/// One generation: breed, replace the least fit, mutate non-elites.
fn next_generation<R: Rng + ?Sized>(
    population: &mut Vec<Chromosome>,
    cfg: &EvolutionConfig,
    pool: &[Factor],
    usable: &dyn Fn(&Term) -> bool,
    rng: &mut R,
) {
    let n = population.len();
    let order = ranking(population);
    let elites: Vec<usize> = order[..cfg.elite_count].to_vec();
    let n_off = ((cfg.crossover_fraction * n as f64).round() as usize).min(n - cfg.elite_count);

    let mut offspring = Vec::with_capacity(n_off + 1);
    while offspring.len() < n_off {
        let pa = tournament_select(population, cfg.tournament_size, rng);
        let mut pb = tournament_select(population, cfg.tournament_size, rng);
        for _ in 0..10 {
            if pb != pa {
                break;
            }
            pb = tournament_select(population, cfg.tournament_size, rng);
        }
        let (ca, cb) = crossover(&population[pa], &population[pb], rng);
        offspring.push(ca);
        offspring.push(cb);
    }
    offspring.truncate(n_off);

    // Least fit first; elites are never among them because n_off <= n - elites.
    for (slot, child) in order.iter().rev().zip(offspring) {
        debug_assert!(!elites.contains(slot));
        population[*slot] = child;
    }
    for (i, ch) in population.iter_mut().enumerate() {
        if !elites.contains(&i) {
            mutate(ch, cfg.mutation_rate, pool, cfg.max_factors, usable, rng);
        }
    }
}

/// Divides out any factor shared by every term, repeatedly.
fn strip_common_factors(mut terms: Vec<Term>) -> Vec<Term> {
    loop {
        let shared = terms[0]
            .factors()
            .iter()
            .copied()
            .find(|&f| f != Factor::One && terms.iter().all(|t| t.contains(f)));
        match shared {
            Some(f) => terms = terms.iter().map(|t| t.without(f).expect("contains f")).collect(),
            None => return terms,
        }
    }
}

fn canonical_target(mut all: Vec<Term>, cfg: &EvolutionConfig) -> (Term, Vec<Term>) {
    let mut lhs = 0;
    if cfg.canonical_lhs {
        if let Some((k, _)) = all
            .iter()
            .enumerate()
            .filter_map(|(k, t)| t.pure_time_order().map(|o| (k, o)))
            .max_by_key(|&(k, o)| (o, std::cmp::Reverse(k)))
        {
            lhs = k;
        }
    }
    let target = all.remove(lhs);
    (target, all)
}

/// Turns the winner's target and active genes into the reported structure.
pub fn final_structure(target: &Term, active: &[Term], cfg: &EvolutionConfig) -> (Term, Vec<Term>) {
    let mut all: Vec<Term> = std::iter::once(target.clone()).chain(active.iter().cloned()).collect();
    if cfg.simplify {
        all = strip_common_factors(all);
    }
    canonical_target(all, cfg)
}

/// Among the bare time derivatives of the structure, the left-hand side
/// whose pruned refit leaves the smallest relative residual. Keeps the
/// given target when there is no candidate or no candidate fits at all.
fn best_time_target(
    evaluator: &FitnessEvaluator<'_>,
    target: Term,
    terms: Vec<Term>,
) -> Result<(Term, Vec<Term>)> {
    let all: Vec<Term> = std::iter::once(target.clone()).chain(terms.iter().cloned()).collect();
    let mut best: Option<(f64, Term, Vec<Term>)> = None;
    for (k, cand) in all.iter().enumerate() {
        if cand.pure_time_order().is_none() {
            continue;
        }
        let rest: Vec<Term> = all.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, t)| t.clone()).collect();
        let (r, kept) = evaluator.refit(cand, &rest)?;
        if kept.is_empty() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((rb, tb, _)) => r < *rb || (r == *rb && cand.pure_time_order() > tb.pure_time_order()),
        };
        if better {
            best = Some((r, cand.clone(), kept));
        }
    }
    Ok(match best {
        Some((_, t, kept)) => (t, kept),
        None => (target, terms),
    })
}

/// The bare factors of a structure made only of pairwise products over at
/// most three factors, i.e. a quadratic form that may be the square (or a
/// product) of linear relations between those factors.
pub fn quadratic_form_factors(target: &Term, terms: &[Term]) -> Option<Vec<Term>> {
    let all: Vec<&Term> = std::iter::once(target).chain(terms).collect();
    if all.iter().any(|t| t.degree() != 2 || t.contains(Factor::One)) {
        return None;
    }
    let mut factors: Vec<Factor> = all.iter().flat_map(|t| t.factors().iter().copied()).collect();
    factors.sort();
    factors.dedup();
    (factors.len() >= 2 && factors.len() <= 3).then(|| factors.into_iter().map(Term::single).collect())
}

/// Replaces a quadratic structure by the linear relation it is the square
/// of. A squared relation has a residual of the order of the linear
/// residual squared; a genuine quadratic law fits its linear shadow badly.
fn reduce_quadratic(
    evaluator: &FitnessEvaluator<'_>,
    target: &Term,
    terms: &[Term],
    cfg: &EvolutionConfig,
) -> Result<Option<(Term, Vec<Term>)>> {
    let Some(singles) = quadratic_form_factors(target, terms) else {
        return Ok(None);
    };
    let (r_quad, _) = evaluator.refit(target, terms)?;
    let (lhs, rest) = canonical_target(singles, cfg);
    let (r_lin, kept) = match evaluator.refit(&lhs, &rest) {
        Ok(v) => v,
        Err(EpdeError::DegenerateTerm(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if !kept.is_empty() && r_lin * r_lin <= 10.0 * r_quad {
        log::debug!("quadratic structure reduced to its linear root (residuals {r_quad:.3e} vs {r_lin:.3e})");
        return Ok(Some((lhs, kept)));
    }
    Ok(None)
}

/// Runs the search on a prepared library.
pub fn run_epde_on(library: &FeatureLibrary, cfg: &EvolutionConfig) -> Result<EvolutionOutcome> {
    cfg.validate()?;
    let pool = library.stack().pool();
    let usable = |t: &Term| library.is_usable(t);
    let evaluator = FitnessEvaluator::new(library, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut population = init_population(cfg, &pool, &usable, &mut rng)?;
    evaluator.evaluate_population(&mut population)?;
    let mut history = vec![population[best_index(&population)].fitness().expect("evaluated")];
    let mut epochs_run = 0;
    for epoch in 1..=cfg.epochs {
        next_generation(&mut population, cfg, &pool, &usable, &mut rng);
        evaluator.evaluate_population(&mut population)?;
        assert_population(&population, cfg);
        let b = best_index(&population);
        let best = population[b].fitness().expect("evaluated");
        assert!(
            best >= *history.last().expect("non-empty"),
            "best fitness decreased at epoch {epoch}"
        );
        history.push(best);
        epochs_run = epoch;
        if cfg.verbose {
            eprintln!("epoch {epoch:4} best {best:.6e} {}", population[b]);
        }
        if plateaued(&history, cfg.plateau_window, cfg.plateau_threshold) {
            log::debug!("fitness plateau after {epoch} epochs");
            break;
        }
    }

    let best = population[best_index(&population)].clone();
    let active = best.active_terms();
    if active.is_empty() {
        return Err(EpdeError::DegenerateDiscovery(format!(
            "sparse regression removed every term of the best individual ({best})"
        )));
    }
    let (mut target, mut terms) = final_structure(best.target_term(), &active, cfg);
    if cfg.simplify {
        if let Some((t, rest)) = reduce_quadratic(&evaluator, &target, &terms, cfg)? {
            target = t;
            terms = rest;
        }
    }
    if cfg.canonical_lhs {
        (target, terms) = best_time_target(&evaluator, target, terms)?;
    }
    terms.sort();
    let mut equation = fit_coefficients(&target, &terms, library.stack())?;
    equation.fitness = best.fitness();
    equation.provenance = Some(Provenance {
        method: "epde".into(),
        seed: cfg.seed,
        epochs_run,
        config: serde_json::to_value(cfg).expect("config serialises"),
    });
    Ok(EvolutionOutcome {
        equation,
        best,
        best_fitness_history: history,
        population,
        epochs_run,
    })
}

/// Differentiates the field and runs the search, keeping the full trace.
pub fn run_epde_detailed(field: &SolutionField, cfg: &EvolutionConfig) -> Result<EvolutionOutcome> {
    cfg.validate()?;
    if field.max_abs() == 0.0 {
        return Err(EpdeError::DegenerateDiscovery("the field is identically zero".into()));
    }
    let stack = cfg.differentiation.apply(field)?;
    let library = FeatureLibrary::new(stack, cfg.normalization);
    run_epde_on(&library, cfg)
}

pub fn run_epde(field: &SolutionField, cfg: &EvolutionConfig) -> Result<DiscoveredEquation> {
    run_epde_detailed(field, cfg).map(|o| o.equation)
}
