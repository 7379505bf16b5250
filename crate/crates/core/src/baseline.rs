//! Full-library sparse regression: every candidate term is built up front
//! and regressed against the first time derivative.

use serde::{Deserialize, Serialize};

use crate::derivatives::{Differentiation, Factor};
use crate::equation::{DiscoveredEquation, Provenance};
use crate::error::{EpdeError, Result};
use crate::grid::SolutionField;
use crate::regression::{fit_coefficients, lasso_relative, ridge, RegressionConfig};
use crate::terms::{enumerate_terms, FeatureLibrary, Normalization, Term};

/// All products of up to `max_factors` factors from the pool without the
/// target, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermLibrary {
    pub terms: Vec<Term>,
    pub target: Factor,
}

impl TermLibrary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn enumerate_library(pool: &[Factor], max_factors: usize, target: Factor) -> Result<TermLibrary> {
    if max_factors == 0 {
        return Err(EpdeError::InvalidParameter("max_factors must be >= 1".into()));
    }
    if !pool.contains(&target) {
        return Err(EpdeError::UnknownFactor(target.symbol()));
    }
    let rest: Vec<Factor> = pool.iter().copied().filter(|&f| f != target).collect();
    if rest.is_empty() {
        return Err(EpdeError::PoolExhausted);
    }
    Ok(TermLibrary {
        terms: enumerate_terms(&rest, max_factors),
        target,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub regression: RegressionConfig,
    /// When set, sequentially thresholded ridge regression replaces LASSO.
    pub ridge_alpha: Option<f64>,
    /// Ridge active-set cut-off on normalised weights (target normalised too).
    pub hard_threshold: f64,
    /// Thresholding rounds for the ridge variant.
    pub ridge_iterations: usize,
    pub differentiation: Differentiation,
    pub normalization: Normalization,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            regression: RegressionConfig::default(),
            ridge_alpha: Some(1e-6),
            hard_threshold: 5e-2,
            ridge_iterations: 10,
            differentiation: Differentiation::default(),
            normalization: Normalization::Global,
        }
    }
}

/// Regresses the normalised target on the whole library, keeps the active
/// terms and refits them on raw features.
pub fn discover_baseline(field: &SolutionField, lib: &TermLibrary, cfg: &BaselineConfig) -> Result<DiscoveredEquation> {
    if field.max_abs() == 0.0 {
        return Err(EpdeError::DegenerateDiscovery("the field is identically zero".into()));
    }
    let stack = cfg.differentiation.apply(field)?;
    let library = FeatureLibrary::new(stack, cfg.normalization);
    discover_baseline_on(&library, lib, cfg)
}

pub fn discover_baseline_on(library: &FeatureLibrary, lib: &TermLibrary, cfg: &BaselineConfig) -> Result<DiscoveredEquation> {
    let target = Term::single(lib.target);
    let y = library.normalized(&target).map_err(|e| match e {
        EpdeError::DegenerateTerm(_) => EpdeError::DegenerateDiscovery(format!("target {target} vanishes")),
        other => other,
    })?;
    let mut terms = Vec::new();
    let mut columns = Vec::new();
    for t in &lib.terms {
        match library.normalized(t) {
            Ok(c) => {
                terms.push(t.clone());
                columns.push(c);
            }
            Err(EpdeError::DegenerateTerm(_)) => log::debug!("skipping degenerate library term {t}"),
            Err(e) => return Err(e),
        }
    }
    if terms.is_empty() {
        return Err(EpdeError::DegenerateDiscovery("every library term is degenerate".into()));
    }

    let active: Vec<usize> = match cfg.ridge_alpha {
        Some(alpha) => {
            let mut active: Vec<usize> = (0..terms.len()).collect();
            for _ in 0..cfg.ridge_iterations.max(1) {
                if active.is_empty() {
                    break;
                }
                let cols: Vec<&[f64]> = active.iter().map(|&k| &*columns[k]).collect();
                let w = ridge(&cols, &y, alpha)?;
                let next: Vec<usize> = active
                    .iter()
                    .zip(&w)
                    .filter(|(_, wk)| wk.abs() > cfg.hard_threshold)
                    .map(|(&k, _)| k)
                    .collect();
                if next == active {
                    break;
                }
                active = next;
            }
            active
        }
        None => {
            let cols: Vec<&[f64]> = columns.iter().map(|c| &**c).collect();
            lasso_relative(&cols, &y, &cfg.regression)?.active_set
        }
    };
    if active.is_empty() {
        return Err(EpdeError::DegenerateDiscovery("sparse regression removed every library term".into()));
    }
    let chosen: Vec<Term> = active.iter().map(|&k| terms[k].clone()).collect();
    let mut eq = fit_coefficients(&target, &chosen, library.stack())?;
    eq.provenance = Some(Provenance {
        method: "baseline".into(),
        seed: 0,
        epochs_run: 0,
        config: serde_json::to_value(cfg).expect("config serialises"),
    });
    Ok(eq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn library_sizes() {
        let six = [Factor::U, Factor::Utt, Factor::Ux, Factor::Uxx, Factor::Uxxx, Factor::Extra(0), Factor::Ut];
        assert_eq!(enumerate_library(&six, 1, Factor::Ut).unwrap().len(), 6);
        assert_eq!(enumerate_library(&six, 2, Factor::Ut).unwrap().len(), 27);
        // With the constant factor, products with `1` collapse onto existing terms.
        let lib = enumerate_library(&Factor::POOL, 2, Factor::Ut).unwrap();
        assert_eq!(lib.len(), 21);
        assert!(lib.terms.iter().all(|t| !t.contains(Factor::Ut)));
        assert!(enumerate_library(&Factor::POOL, 0, Factor::Ut).is_err());
        assert!(enumerate_library(&[Factor::U], 1, Factor::Ut).is_err());
    }

    #[test]
    fn library_is_canonical_and_deterministic() {
        let a = enumerate_library(&Factor::POOL, 2, Factor::Ut).unwrap();
        let b = enumerate_library(&Factor::POOL, 2, Factor::Ut).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.terms.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted, a.terms);
    }

    #[test]
    fn zero_field_is_degenerate() {
        let f = SolutionField::zeros(Grid::new(20, 20, 0.1, 0.1).unwrap());
        let lib = enumerate_library(&Factor::POOL, 2, Factor::Ut).unwrap();
        assert!(matches!(
            discover_baseline(&f, &lib, &BaselineConfig::default()),
            Err(EpdeError::DegenerateDiscovery(_))
        ));
    }

    #[test]
    fn recovers_burgers_from_clean_data() {
        let f = crate::solvers::solve_burgers(&crate::solvers::BurgersParams::validation_default()).unwrap();
        let lib = enumerate_library(&Factor::POOL, 2, Factor::Ut).unwrap();
        let eq = discover_baseline(&f, &lib, &BaselineConfig::default()).unwrap();
        let uux = Term::new(vec![Factor::U, Factor::Ux]).unwrap();
        assert!(eq.has_structure(&[Term::single(Factor::Ut), Term::single(Factor::Uxx), uux.clone()]), "{eq}");
        assert!((eq.coefficient(&Term::single(Factor::Uxx)).unwrap() - 0.1).abs() < 5e-3, "{eq}");
        assert!((eq.coefficient(&uux).unwrap() + 1.0).abs() < 2e-2, "{eq}");
    }
}
