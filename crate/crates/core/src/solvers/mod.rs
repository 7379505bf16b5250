//! Finite-difference solvers producing the synthetic validation fields.

mod burgers;
mod kdv;
mod tridiag;
mod wave;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use burgers::{solve_burgers, BurgersParams};
pub use kdv::{periodic_soliton, soliton, solve_kdv, KdvParams};
pub use tridiag::solve_tridiagonal;
pub use wave::{solve_wave, WaveParams};

use crate::error::{EpdeError, Result};

/// The three validation equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Wave,
    Burgers,
    Kdv,
}

impl Equation {
    pub const ALL: [Equation; 3] = [Equation::Wave, Equation::Burgers, Equation::Kdv];

    pub fn name(self) -> &'static str {
        match self {
            Equation::Wave => "wave",
            Equation::Burgers => "burgers",
            Equation::Kdv => "kdv",
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Equation {
    type Err = EpdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wave" => Ok(Equation::Wave),
            "burgers" => Ok(Equation::Burgers),
            "kdv" => Ok(Equation::Kdv),
            other => Err(EpdeError::Parse(format!("unknown equation `{other}` (wave|burgers|kdv)"))),
        }
    }
}

pub(crate) fn gaussian(x: f64, centre: f64, sigma: f64, height: f64) -> f64 {
    let z = (x - centre) / sigma;
    height * (-0.5 * z * z).exp()
}

pub(crate) fn check_profile(name: &str, profile: &[f64], nx: usize) -> Result<()> {
    if profile.len() != nx {
        return Err(EpdeError::InvalidParameter(format!(
            "{name} has {} points, grid has nx={nx}",
            profile.len()
        )));
    }
    if profile.iter().any(|v| !v.is_finite()) {
        return Err(EpdeError::NonFinite);
    }
    Ok(())
}

pub(crate) fn check_row(row: &[f64], step: usize) -> Result<()> {
    if row.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(EpdeError::SolverDiverged { step })
    }
}
