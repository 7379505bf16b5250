//! Evolutionary discovery of partial differential equations from gridded data.

pub mod baseline;
pub mod bench;
pub mod config;
pub mod derivatives;
pub mod equation;
pub mod evolution;
pub mod error;
pub mod grid;
pub mod regression;
pub mod solvers;
pub mod terms;

pub use baseline::{discover_baseline, enumerate_library, BaselineConfig, TermLibrary};
pub use bench::{ExperimentReport, Placement};
pub use config::RunConfig;
pub use derivatives::{DerivativeStack, Differentiation, Factor};
pub use equation::{DiscoveredEquation, Provenance};
pub use evolution::{run_epde, run_epde_detailed, Chromosome, EvolutionConfig, EvolutionOutcome, FitnessMode};
pub use error::{EpdeError, Result};
pub use grid::{add_noise, coeff_error, make_grid, noise_level, Grid, NoiseSpec, SolutionField};
pub use regression::{fit_coefficients, lasso, ridge, RegressionConfig, SparseSolution};
pub use solvers::Equation;
pub use terms::{FeatureLibrary, Normalization, Term};
