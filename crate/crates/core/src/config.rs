//! Flat `key = value` run configuration.
//!
//! Every key is optional. Lines starting with `#` are comments, blank lines
//! are skipped, and unknown keys are rejected so that typos cannot silently
//! fall back to defaults. The accepted entries are kept verbatim so reports
//! can echo exactly what was asked for.

use std::path::Path;
use std::str::FromStr;

use crate::baseline::BaselineConfig;
use crate::bench::{BenchSettings, Placement, SolverSettings};
use crate::derivatives::Differentiation;
use crate::error::{EpdeError, Result};
use crate::evolution::EvolutionConfig;
use crate::grid::NoiseSpec;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub evolution: EvolutionConfig,
    pub baseline: BaselineConfig,
    pub noise: Option<NoiseSpec>,
    pub solver: SolverSettings,
    pub bench: BenchSettings,
    /// Accepted `(key, value)` pairs in file order.
    pub entries: Vec<(String, String)>,
}

pub const KEYS: &[&str] = &[
    "population_size",
    "terms_in_individual",
    "max_factors",
    "tournament_size",
    "crossover_fraction",
    "mutation_rate",
    "elite_count",
    "epochs",
    "plateau_window",
    "plateau_threshold",
    "fitness_epsilon",
    "fitness",
    "prune_threshold",
    "prune_ratio",
    "seed",
    "simplify",
    "canonical_lhs",
    "lambda",
    "max_iterations",
    "tolerance",
    "zero_threshold",
    "normalization",
    "derivatives",
    "poly_window",
    "poly_degree",
    "ridge_alpha",
    "hard_threshold",
    "ridge_iterations",
    "baseline_normalization",
    "noise_fraction",
    "noise_seed",
    "nt",
    "nx",
    "dt",
    "dx",
    "c",
    "mu",
    "fractions",
    "levels",
    "repeats",
    "placement",
    "kdv_size",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| EpdeError::Parse(format!("invalid value `{raw}` for `{key}`")))
}

fn list(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(key, s))
        .collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut poly: Option<(usize, usize)> = None;
        let mut derivatives: Option<String> = None;
        let mut noise_fraction: Option<f64> = None;
        let mut noise_seed = 0u64;

        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| EpdeError::Parse(format!("line {}: expected `key = value`", lineno + 1)))?;
            let (key, raw) = (key.trim(), raw.trim());
            if cfg.entries.iter().any(|(k, _)| k == key) {
                return Err(EpdeError::Parse(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            let ev = &mut cfg.evolution;
            match key {
                "population_size" => ev.population_size = value(key, raw)?,
                "terms_in_individual" => ev.terms_in_individual = value(key, raw)?,
                "max_factors" => ev.max_factors = value(key, raw)?,
                "tournament_size" => ev.tournament_size = value(key, raw)?,
                "crossover_fraction" => ev.crossover_fraction = value(key, raw)?,
                "mutation_rate" => ev.mutation_rate = value(key, raw)?,
                "elite_count" => ev.elite_count = value(key, raw)?,
                "epochs" => ev.epochs = value(key, raw)?,
                "plateau_window" => ev.plateau_window = value(key, raw)?,
                "plateau_threshold" => ev.plateau_threshold = value(key, raw)?,
                "fitness_epsilon" => ev.fitness_epsilon = value(key, raw)?,
                "fitness" => ev.fitness = raw.parse()?,
                "prune_threshold" => ev.prune_threshold = value(key, raw)?,
                "prune_ratio" => ev.prune_ratio = value(key, raw)?,
                "seed" => ev.seed = value(key, raw)?,
                "simplify" => ev.simplify = value(key, raw)?,
                "canonical_lhs" => ev.canonical_lhs = value(key, raw)?,
                "lambda" => {
                    ev.regression.lambda = value(key, raw)?;
                    cfg.baseline.regression.lambda = ev.regression.lambda;
                }
                "max_iterations" => {
                    ev.regression.max_iterations = value(key, raw)?;
                    cfg.baseline.regression.max_iterations = ev.regression.max_iterations;
                }
                "tolerance" => {
                    ev.regression.tolerance = value(key, raw)?;
                    cfg.baseline.regression.tolerance = ev.regression.tolerance;
                }
                "zero_threshold" => {
                    ev.regression.zero_threshold = value(key, raw)?;
                    cfg.baseline.regression.zero_threshold = ev.regression.zero_threshold;
                }
                "normalization" => ev.normalization = raw.parse()?,
                "derivatives" => derivatives = Some(raw.to_string()),
                "poly_window" => poly = Some((value(key, raw)?, poly.map_or(4, |p| p.1))),
                "poly_degree" => poly = Some((poly.map_or(15, |p| p.0), value(key, raw)?)),
                "ridge_alpha" => {
                    cfg.baseline.ridge_alpha = if raw == "none" { None } else { Some(value(key, raw)?) }
                }
                "hard_threshold" => cfg.baseline.hard_threshold = value(key, raw)?,
                "ridge_iterations" => cfg.baseline.ridge_iterations = value(key, raw)?,
                "baseline_normalization" => cfg.baseline.normalization = raw.parse()?,
                "noise_fraction" => noise_fraction = Some(value(key, raw)?),
                "noise_seed" => noise_seed = value(key, raw)?,
                "nt" => cfg.solver.nt = Some(value(key, raw)?),
                "nx" => cfg.solver.nx = Some(value(key, raw)?),
                "dt" => cfg.solver.dt = Some(value(key, raw)?),
                "dx" => cfg.solver.dx = Some(value(key, raw)?),
                "c" => cfg.solver.c = Some(value(key, raw)?),
                "mu" => cfg.solver.mu = Some(value(key, raw)?),
                "fractions" => cfg.bench.fractions = list(key, raw)?,
                "levels" => cfg.bench.levels = list(key, raw)?,
                "repeats" => cfg.bench.repeats = value(key, raw)?,
                "placement" => cfg.bench.placement = raw.parse::<Placement>()?,
                "kdv_size" => cfg.bench.kdv_size = value(key, raw)?,
                other => return Err(EpdeError::Parse(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
            cfg.entries.push((key.to_string(), raw.to_string()));
        }

        let diff = match (derivatives.as_deref(), poly) {
            (None | Some("fd"), None) => None,
            (Some("fd"), Some(_)) => {
                return Err(EpdeError::Parse("poly_window/poly_degree require `derivatives = poly`".into()))
            }
            (None | Some("poly"), Some((window, degree))) => Some(Differentiation::Polynomial { window, degree }),
            (Some("poly"), None) => Some(Differentiation::DEFAULT_POLY),
            (Some(other), _) => return Err(EpdeError::Parse(format!("unknown derivatives `{other}` (fd|poly)"))),
        };
        if derivatives.as_deref() == Some("fd") {
            cfg.evolution.differentiation = Differentiation::FiniteDifference;
            cfg.baseline.differentiation = Differentiation::FiniteDifference;
        }
        if let Some(d) = diff {
            cfg.evolution.differentiation = d;
            cfg.baseline.differentiation = d;
        }
        if let Some(f) = noise_fraction {
            cfg.noise = Some(NoiseSpec::new(f, noise_seed)?);
        }
        cfg.evolution.validate()?;
        cfg.baseline.regression.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EpdeError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The accepted entries rendered back as `key = value` lines.
    pub fn echo(&self) -> Vec<String> {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::FitnessMode;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = RunConfig::parse("# nothing here\n\n").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn parses_and_echoes() {
        let text = "seed = 7\n  lambda=0.05 \n# comment\nfitness = normalized\nderivatives = poly\npoly_window = 21\nridge_alpha = none\nfractions = 0.9, 0.5\nnoise_fraction = 0.01\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.evolution.seed, 7);
        assert_eq!(cfg.evolution.regression.lambda, 0.05);
        assert_eq!(cfg.baseline.regression.lambda, 0.05);
        assert_eq!(cfg.evolution.fitness, FitnessMode::Normalized);
        assert_eq!(cfg.evolution.differentiation, Differentiation::Polynomial { window: 21, degree: 4 });
        assert_eq!(cfg.baseline.differentiation, cfg.evolution.differentiation);
        assert_eq!(cfg.baseline.ridge_alpha, None);
        assert_eq!(cfg.bench.fractions, vec![0.9, 0.5]);
        assert_eq!(cfg.noise.unwrap().fraction, 0.01);
        assert_eq!(cfg.echo()[1], "lambda = 0.05");
        assert_eq!(RunConfig::parse(&cfg.echo().join("\n")).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "populaton_size = 3",
            "seed = -1",
            "seed",
            "seed = 1\nseed = 2",
            "derivatives = spectral",
            "derivatives = fd\npoly_window = 9",
            "tournament_size = 0",
            "noise_fraction = -0.1",
            "simplify = yes",
        ] {
            assert!(RunConfig::parse(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let samples = |k: &str| match k {
            "fitness" => "physical",
            "simplify" | "canonical_lhs" => "true",
            "normalization" | "baseline_normalization" => "l2",
            "derivatives" => "poly",
            "poly_window" => "11",
            "poly_degree" => "3",
            "ridge_alpha" => "1e-6",
            "fractions" | "levels" => "0.5",
            "placement" => "centered",
            "population_size" => "8",
            "tournament_size" => "2",
            "terms_in_individual" => "4",
            "crossover_fraction" | "mutation_rate" | "prune_threshold" => "0.5",
            "noise_fraction" => "0.01",
            _ => "1",
        };
        for key in KEYS {
            let line = format!("{key} = {}", samples(key));
            RunConfig::parse(&line).unwrap_or_else(|e| panic!("{line}: {e}"));
        }
    }
}
