//! Terms (products of factors), their frame-normalised feature vectors and
//! the per-individual feature matrices handed to sparse regression.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::derivatives::{DerivativeStack, Factor};
use crate::error::{EpdeError, Result};

/// A product of factors, stored as a sorted multiset.
///
/// Multiplying by the constant factor is the identity, so `1` is dropped from
/// any product that has another factor; `{1}` alone is the constant term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    factors: Vec<Factor>,
}

impl Term {
    pub fn new(mut factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(EpdeError::InvalidParameter("a term needs at least one factor".into()));
        }
        factors.sort();
        if factors.iter().any(|&f| f != Factor::One) {
            factors.retain(|&f| f != Factor::One);
        } else {
            factors.truncate(1);
        }
        Ok(Self { factors })
    }

    pub fn single(factor: Factor) -> Self {
        Self { factors: vec![factor] }
    }

    pub fn constant() -> Self {
        Self::single(Factor::One)
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn contains(&self, factor: Factor) -> bool {
        self.factors.contains(&factor)
    }

    /// Time-derivative order when the term is a bare `u_t` or `u_tt`.
    pub fn pure_time_order(&self) -> Option<u8> {
        match self.factors.as_slice() {
            [f] => f.time_order(),
            _ => None,
        }
    }

    /// Removes one occurrence of `factor`; `None` if absent.
    pub fn without(&self, factor: Factor) -> Option<Term> {
        let pos = self.factors.iter().position(|&f| f == factor)?;
        let mut rest = self.factors.clone();
        rest.remove(pos);
        if rest.is_empty() {
            rest.push(Factor::One);
        }
        Term::new(rest).ok()
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Shorter products first, then factor-wise in pool order.
impl Ord for Term {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.factors
            .len()
            .cmp(&other.factors.len())
            .then_with(|| self.factors.cmp(&other.factors))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, factor) in self.factors.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            write!(f, "{factor}")?;
        }
        Ok(())
    }
}

impl FromStr for Term {
    type Err = EpdeError;

    fn from_str(s: &str) -> Result<Self> {
        let factors = s.split('*').map(str::parse).collect::<Result<Vec<Factor>>>()?;
        Term::new(factors)
    }
}

/// Scaling applied to feature vectors before structure regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Divide each time frame by its Euclidean norm.
    #[default]
    L2,
    /// Divide each time frame by its largest absolute value.
    Max,
    /// Divide the whole vector by its Euclidean norm; a zero frame is allowed.
    Global,
}

impl FromStr for Normalization {
    type Err = EpdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "l2" => Ok(Normalization::L2),
            "max" => Ok(Normalization::Max),
            "global" => Ok(Normalization::Global),
            other => Err(EpdeError::Parse(format!("unknown normalization `{other}` (l2|max|global)"))),
        }
    }
}

/// Pointwise product of the term's factor matrices, flattened frame by frame.
pub fn evaluate_term_raw(term: &Term, stack: &DerivativeStack) -> Result<Vec<f64>> {
    let mut factors = term.factors().iter();
    let first = factors.next().expect("terms are never empty");
    let mut out: Vec<f64> = stack.factor(*first)?.iter().copied().collect();
    for f in factors {
        let m = stack.factor(*f)?;
        for (o, v) in out.iter_mut().zip(m.iter()) {
            *o *= v;
        }
    }
    Ok(out)
}

/// Scales every frame (consecutive run of `frame_len` entries) to unit L2
/// norm. A zero frame makes the term unusable.
pub fn normalize_frames(raw: &[f64], frame_len: usize) -> Result<Vec<f64>> {
    normalize_frames_with(raw, frame_len, Normalization::L2)
}

pub fn normalize_frames_with(raw: &[f64], frame_len: usize, how: Normalization) -> Result<Vec<f64>> {
    if frame_len == 0 || !raw.len().is_multiple_of(frame_len) {
        return Err(EpdeError::InvalidParameter(format!(
            "vector of length {} is not a whole number of frames of {frame_len}",
            raw.len()
        )));
    }
    if how == Normalization::Global {
        let scale = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(EpdeError::DegenerateTerm("zero vector".into()));
        }
        return Ok(raw.iter().map(|v| v / scale).collect());
    }
    let mut out = Vec::with_capacity(raw.len());
    for (k, frame) in raw.chunks_exact(frame_len).enumerate() {
        let scale = match how {
            Normalization::L2 => frame.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Normalization::Max => frame.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
            Normalization::Global => unreachable!("handled above"),
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(EpdeError::DegenerateTerm(format!("frame {k}")));
        }
        out.extend(frame.iter().map(|v| v / scale));
    }
    Ok(out)
}

/// Normalised feature columns of one individual plus its target vector.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub terms: Vec<Term>,
    pub columns: Vec<Arc<[f64]>>,
    pub target_term: Term,
    pub target: Arc<[f64]>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_slices(&self) -> Vec<&[f64]> {
        self.columns.iter().map(|c| &c[..]).collect()
    }
}

/// Memoised normalised feature vectors for one derivative stack.
///
/// Degenerate terms are remembered as such so they are never rebuilt.
#[derive(Debug)]
pub struct FeatureLibrary {
    stack: DerivativeStack,
    normalization: Normalization,
    cache: Mutex<HashMap<Term, Option<Arc<[f64]>>>>,
}

impl FeatureLibrary {
    pub fn new(stack: DerivativeStack, normalization: Normalization) -> Self {
        Self {
            stack,
            normalization,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn stack(&self) -> &DerivativeStack {
        &self.stack
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    fn frame_len(&self) -> usize {
        self.stack.shape().1
    }

    pub fn raw(&self, term: &Term) -> Result<Vec<f64>> {
        evaluate_term_raw(term, &self.stack)
    }

    pub fn normalized(&self, term: &Term) -> Result<Arc<[f64]>> {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(term) {
            return hit
                .clone()
                .ok_or_else(|| EpdeError::DegenerateTerm(term.to_string()));
        }
        let built = evaluate_term_raw(term, &self.stack)
            .and_then(|raw| normalize_frames_with(&raw, self.frame_len(), self.normalization));
        let entry = match built {
            Ok(v) => Some(Arc::<[f64]>::from(v)),
            Err(EpdeError::DegenerateTerm(_)) => None,
            Err(e) => return Err(e),
        };
        self.cache
            .lock()
            .expect("cache lock")
            .insert(term.clone(), entry.clone());
        entry.ok_or_else(|| EpdeError::DegenerateTerm(term.to_string()))
    }

    pub fn is_usable(&self, term: &Term) -> bool {
        self.normalized(term).is_ok()
    }

    /// Separates the target term from the remaining columns, keeping order.
    pub fn feature_matrix(&self, terms: &[Term], target_index: usize) -> Result<FeatureMatrix> {
        if target_index >= terms.len() {
            return Err(EpdeError::InvalidParameter(format!(
                "target index {target_index} out of range for {} terms",
                terms.len()
            )));
        }
        let mut columns = Vec::with_capacity(terms.len() - 1);
        let mut names = Vec::with_capacity(terms.len() - 1);
        for (k, t) in terms.iter().enumerate() {
            if k != target_index {
                columns.push(self.normalized(t)?);
                names.push(t.clone());
            }
        }
        Ok(FeatureMatrix {
            terms: names,
            columns,
            target_term: terms[target_index].clone(),
            target: self.normalized(&terms[target_index])?,
        })
    }
}

/// Builds the feature matrix of a term list with a designated target.
pub fn build_feature_matrix(
    terms: &[Term],
    target_index: usize,
    stack: &DerivativeStack,
    normalization: Normalization,
) -> Result<FeatureMatrix> {
    FeatureLibrary::new(stack.clone(), normalization).feature_matrix(terms, target_index)
}

/// Draws a factor count uniformly from `1..=max_factors`, then that many
/// factors uniformly with replacement.
pub fn random_term<R: Rng + ?Sized>(pool: &[Factor], max_factors: usize, rng: &mut R) -> Term {
    assert!(!pool.is_empty() && max_factors >= 1);
    let count = rng.random_range(1..=max_factors);
    let factors = (0..count).map(|_| pool[rng.random_range(0..pool.len())]).collect();
    Term::new(factors).expect("count >= 1")
}

/// Every distinct term with at most `max_factors` factors drawn from `pool`,
/// in canonical order.
pub fn enumerate_terms(pool: &[Factor], max_factors: usize) -> Vec<Term> {
    let mut pool: Vec<Factor> = pool.to_vec();
    pool.sort();
    pool.dedup();
    let mut out = std::collections::BTreeSet::new();
    let mut stack: Vec<Factor> = Vec::new();
    fn rec(pool: &[Factor], start: usize, left: usize, cur: &mut Vec<Factor>, out: &mut std::collections::BTreeSet<Term>) {
        if !cur.is_empty() {
            out.insert(Term::new(cur.clone()).expect("non-empty"));
        }
        if left == 0 {
            return;
        }
        for k in start..pool.len() {
            cur.push(pool[k]);
            rec(pool, k, left - 1, cur, out);
            cur.pop();
        }
    }
    rec(&pool, 0, max_factors, &mut stack, &mut out);
    out.into_iter().collect()
}
