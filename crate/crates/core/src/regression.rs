//! Sparse structure selection (LASSO), ridge regression and the final
//! ordinary least-squares fit on physical-scale features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::derivatives::DerivativeStack;
use crate::equation::DiscoveredEquation;
use crate::error::{EpdeError, Result};
use crate::terms::{evaluate_term_raw, Term};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    /// L1 penalty weight. In the discovery pipelines this is multiplied by
    /// the squared norm of the normalised target, so a value is comparable
    /// across grid sizes.
    pub lambda: f64,
    pub max_iterations: usize,
    /// Coordinate descent stops when no weight moves by more than this.
    pub tolerance: f64,
    /// Weights at or below this magnitude are left out of the active set.
    pub zero_threshold: f64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            lambda: 3e-2,
            max_iterations: 10_000,
            tolerance: 1e-10,
            zero_threshold: 1e-6,
        }
    }
}

impl RegressionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(EpdeError::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.tolerance > 0.0) {
            return Err(EpdeError::InvalidParameter("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(EpdeError::InvalidParameter("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSolution {
    pub weights: Vec<f64>,
    pub residual_norm: f64,
    pub active_set: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// Objective value after each full sweep.
    pub sweep_objectives: Vec<f64>,
}

/// Cross products of the columns with each other and with the target:
/// everything coordinate descent needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GramSystem {
    pub g: DMatrix<f64>,
    pub b: DVector<f64>,
    pub yy: f64,
}

impl GramSystem {
    pub fn from_columns(columns: &[&[f64]], target: &[f64]) -> Result<Self> {
        check_inputs(columns, target)?;
        Ok(gram(columns, target))
    }

    /// `|S w - y|` from the cross products alone; loses relative accuracy
    /// only when the fit is nearly exact.
    pub fn residual_norm(&self, w: &[f64]) -> f64 {
        let w = DVector::from_column_slice(w);
        let r2 = w.dot(&(&self.g * &w)) - 2.0 * self.b.dot(&w) + self.yy;
        r2.max(0.0).sqrt()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_inputs(columns: &[&[f64]], target: &[f64]) -> Result<()> {
    if columns.is_empty() {
        return Err(EpdeError::InvalidParameter("regression needs at least one column".into()));
    }
    for c in columns {
        if c.len() != target.len() {
            return Err(EpdeError::LengthMismatch(c.len(), target.len()));
        }
    }
    Ok(())
}

fn gram(columns: &[&[f64]], target: &[f64]) -> GramSystem {
    let p = columns.len();
    let mut g = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = dot(columns[i], columns[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let b = DVector::from_iterator(p, columns.iter().map(|c| dot(c, target)));
    GramSystem {
        g,
        b,
        yy: dot(target, target),
    }
}

fn residual_norm(columns: &[&[f64]], weights: &[f64], target: &[f64]) -> f64 {
    let mut r: Vec<f64> = target.iter().map(|v| -v).collect();
    for (c, &w) in columns.iter().zip(weights) {
        if w != 0.0 {
            for (ri, ci) in r.iter_mut().zip(c.iter()) {
                *ri += w * ci;
            }
        }
    }
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// `0.5 * |S w - y|^2 + lambda * |w|_1`.
pub fn lasso_objective(columns: &[&[f64]], target: &[f64], weights: &[f64], lambda: f64) -> f64 {
    let r = residual_norm(columns, weights, target);
    0.5 * r * r + lambda * weights.iter().map(|w| w.abs()).sum::<f64>()
}

fn gram_objective(gr: &GramSystem, w: &DVector<f64>, lambda: f64) -> f64 {
    let quad = w.dot(&(&gr.g * w));
    0.5 * (quad - 2.0 * gr.b.dot(w) + gr.yy) + lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Minimises `0.5 * |S w - y|^2 + lambda * |w|_1` by cyclic coordinate
/// descent with soft thresholding. The sweep works on the Gram matrix, so
/// its cost does not grow with the number of rows.
///
/// Hitting `max_iterations` is not an error: the last iterate is returned
/// with `converged == false`.
pub fn lasso(columns: &[&[f64]], target: &[f64], cfg: &RegressionConfig) -> Result<SparseSolution> {
    check_inputs(columns, target)?;
    cfg.validate()?;
    let gr = gram(columns, target);
    let mut sol = lasso_gram(&gr, cfg.lambda, cfg)?;
    sol.residual_norm = residual_norm(columns, &sol.weights, target);
    Ok(sol)
}

/// Coordinate descent on precomputed cross products with an absolute
/// penalty. The residual is derived from the cross products.
pub fn lasso_gram(gr: &GramSystem, lambda: f64, cfg: &RegressionConfig) -> Result<SparseSolution> {
    cfg.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(EpdeError::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let p = gr.b.len();
    let mut w = DVector::zeros(p);
    let mut converged = false;
    let mut iterations = 0;
    let mut sweep_objectives = Vec::new();
    let mut last = gram_objective(gr, &w, lambda);
    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut max_step = 0.0_f64;
        for j in 0..p {
            let gjj = gr.g[(j, j)];
            if gjj <= 0.0 {
                continue;
            }
            let mut rho = gr.b[j];
            for k in 0..p {
                if k != j {
                    rho -= gr.g[(j, k)] * w[k];
                }
            }
            let updated = soft_threshold(rho, lambda) / gjj;
            max_step = max_step.max((updated - w[j]).abs());
            w[j] = updated;
        }
        let obj = gram_objective(gr, &w, lambda);
        debug_assert!(
            obj <= last + 1e-9 * last.abs().max(1.0),
            "coordinate descent increased the objective: {last} -> {obj}"
        );
        last = obj;
        sweep_objectives.push(obj);
        if max_step <= cfg.tolerance {
            converged = true;
            break;
        }
    }
    let weights: Vec<f64> = w.iter().copied().collect();
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(EpdeError::NonFinite);
    }
    let active_set = weights
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > cfg.zero_threshold)
        .map(|(k, _)| k)
        .collect();
    Ok(SparseSolution {
        residual_norm: gr.residual_norm(&weights),
        weights,
        active_set,
        converged,
        iterations,
        sweep_objectives,
    })
}

/// LASSO whose penalty is `cfg.lambda * |y|^2`. For frame-normalised data
/// `|y|^2` is the number of frames, so one setting serves any grid.
pub fn lasso_relative(columns: &[&[f64]], target: &[f64], cfg: &RegressionConfig) -> Result<SparseSolution> {
    check_inputs(columns, target)?;
    cfg.validate()?;
    let gr = gram(columns, target);
    let mut sol = lasso_gram(&gr, cfg.lambda * gr.yy, cfg)?;
    sol.residual_norm = residual_norm(columns, &sol.weights, target);
    Ok(sol)
}

/// Solves `(S^T S + alpha I) w = S^T y`.
pub fn ridge(columns: &[&[f64]], target: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_inputs(columns, target)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(EpdeError::InvalidParameter(format!("ridge alpha must be >= 0, got {alpha}")));
    }
    let gr = gram(columns, target);
    let p = columns.len();
    let mut a = gr.g.clone();
    for i in 0..p {
        a[(i, i)] += alpha;
    }
    let w = solve_spd(a, &gr.b)?;
    Ok(w.iter().copied().collect())
}

/// Cholesky solve with a reciprocal-condition guard on the diagonal.
fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(EpdeError::SingularSystem);
    }
    let chol = a.cholesky().ok_or(EpdeError::SingularSystem)?;
    let l = chol.l();
    let dmin = l.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if dmin * dmin <= 1e-14 * scale {
        return Err(EpdeError::SingularSystem);
    }
    let w = chol.solve(b);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(EpdeError::SingularSystem);
    }
    Ok(w)
}

/// Ordinary least squares through a Householder QR of the column-scaled
/// design matrix. Returns weights and the residual norm.
pub fn ols(columns: &[&[f64]], target: &[f64]) -> Result<(Vec<f64>, f64)> {
    check_inputs(columns, target)?;
    let n = target.len();
    let p = columns.len();
    if n < p {
        return Err(EpdeError::RankDeficient);
    }
    let norms: Vec<f64> = columns.iter().map(|c| dot(c, c).sqrt()).collect();
    if norms.iter().any(|&v| v == 0.0 || !v.is_finite()) {
        return Err(EpdeError::RankDeficient);
    }
    let a = DMatrix::from_fn(n, p, |i, j| columns[j][i] / norms[j]);
    let qr = a.qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if r.diagonal().iter().any(|v| v.abs() <= 1e-10 * rmax) {
        return Err(EpdeError::RankDeficient);
    }
    let mut qty = DVector::from_column_slice(target);
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, p).into_owned();
    let z = r.solve_upper_triangular(&head).ok_or(EpdeError::RankDeficient)?;
    let weights: Vec<f64> = z.iter().zip(&norms).map(|(v, s)| v / s).collect();
    let res = residual_norm(columns, &weights, target);
    Ok((weights, res))
}

/// Refits a selected structure on raw (non-normalised) features so the
/// coefficients come out in physical units.
pub fn fit_coefficients(target: &Term, terms: &[Term], stack: &DerivativeStack) -> Result<DiscoveredEquation> {
    if terms.is_empty() {
        return Err(EpdeError::DegenerateDiscovery("no terms to fit".into()));
    }
    let y = evaluate_term_raw(target, stack)?;
    let raw = terms
        .iter()
        .map(|t| evaluate_term_raw(t, stack))
        .collect::<Result<Vec<_>>>()?;
    let cols: Vec<&[f64]> = raw.iter().map(|c| c.as_slice()).collect();
    let (weights, residual_norm) = ols(&cols, &y)?;
    Ok(DiscoveredEquation {
        target: target.clone(),
        terms: terms.iter().cloned().zip(weights).collect(),
        residual_norm,
        fitness: None,
        provenance: None,
    })
}
