use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::terms::Term;

/// Where a discovery came from, enough to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    pub seed: u64,
    pub epochs_run: usize,
    pub config: serde_json::Value,
}

/// `target = sum_i coefficient_i * term_i` in physical (non-normalised) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredEquation {
    pub target: Term,
    pub terms: Vec<(Term, f64)>,
    pub residual_norm: f64,
    pub fitness: Option<f64>,
    pub provenance: Option<Provenance>,
}

impl DiscoveredEquation {
    /// The target together with every right-hand-side term.
    pub fn structure(&self) -> BTreeSet<Term> {
        self.terms
            .iter()
            .map(|(t, _)| t.clone())
            .chain(std::iter::once(self.target.clone()))
            .collect()
    }

    pub fn coefficient(&self, term: &Term) -> Option<f64> {
        self.terms.iter().find(|(t, _)| t == term).map(|(_, c)| *c)
    }

    /// Coefficients aligned with `library`; absent terms contribute zero.
    pub fn coefficients_for(&self, library: &[Term]) -> Vec<f64> {
        library
            .iter()
            .map(|t| self.coefficient(t).unwrap_or(0.0))
            .collect()
    }

    pub fn has_structure(&self, expected: &[Term]) -> bool {
        self.structure() == expected.iter().cloned().collect::<BTreeSet<_>>()
    }

    /// The same linear relation rearranged with `term` on the left, when it
    /// appears on the right with a nonzero coefficient.
    pub fn solve_for(&self, term: &Term) -> Option<DiscoveredEquation> {
        if *term == self.target {
            return Some(self.clone());
        }
        let c = self.coefficient(term).filter(|c| *c != 0.0)?;
        let mut terms = vec![(self.target.clone(), 1.0 / c)];
        terms.extend(
            self.terms
                .iter()
                .filter(|(t, _)| t != term)
                .map(|(t, w)| (t.clone(), -w / c)),
        );
        Some(DiscoveredEquation {
            target: term.clone(),
            terms,
            residual_norm: self.residual_norm / c.abs(),
            fitness: self.fitness,
            provenance: self.provenance.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("equation serialises")
    }

    /// Human-readable form, e.g. `du/dt = 0.0999 * d2u/dx2 - 0.9999 * u*du/dx`.
    pub fn render(&self) -> String {
        self.render_with_precision(4)
    }

    pub fn render_with_precision(&self, digits: usize) -> String {
        let mut out = format!("{} =", self.target);
        if self.terms.is_empty() {
            out.push_str(" 0");
            return out;
        }
        for (k, (term, c)) in self.terms.iter().enumerate() {
            let sign = if *c < 0.0 { '-' } else { '+' };
            if k == 0 {
                out.push_str(if sign == '-' { " -" } else { " " });
            } else {
                out.push_str(&format!(" {sign} "));
            }
            out.push_str(&format!("{:.*} * {}", digits, c.abs(), term));
        }
        out
    }
}

impl fmt::Display for DiscoveredEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}
