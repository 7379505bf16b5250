//! The factor pool: `u` and its partial derivatives evaluated on the grid
//! interior, either by central finite differences or by local least-squares
//! polynomial fits (for noisy data).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{EpdeError, Result};
use crate::grid::{Grid, SolutionField};

/// One building block of a term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Factor {
    One,
    U,
    Ut,
    Utt,
    Ux,
    Uxx,
    Uxxx,
    /// A factor added through [`DerivativeStack::register_factor`].
    Extra(u8),
}

impl Factor {
    /// The built-in pool in its canonical order.
    pub const POOL: [Factor; 7] = [
        Factor::One,
        Factor::U,
        Factor::Ut,
        Factor::Utt,
        Factor::Ux,
        Factor::Uxx,
        Factor::Uxxx,
    ];

    fn slot(self) -> usize {
        match self {
            Factor::One => 0,
            Factor::U => 1,
            Factor::Ut => 2,
            Factor::Utt => 3,
            Factor::Ux => 4,
            Factor::Uxx => 5,
            Factor::Uxxx => 6,
            Factor::Extra(k) => 7 + k as usize,
        }
    }

    /// Order of the time derivative, if this is a pure time derivative.
    pub fn time_order(self) -> Option<u8> {
        match self {
            Factor::Ut => Some(1),
            Factor::Utt => Some(2),
            _ => None,
        }
    }

    pub fn symbol(self) -> String {
        match self {
            Factor::One => "1".into(),
            Factor::U => "u".into(),
            Factor::Ut => "du/dt".into(),
            Factor::Utt => "d2u/dt2".into(),
            Factor::Ux => "du/dx".into(),
            Factor::Uxx => "d2u/dx2".into(),
            Factor::Uxxx => "d3u/dx3".into(),
            Factor::Extra(k) => format!("g{k}"),
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbol())
    }
}

impl FromStr for Factor {
    type Err = EpdeError;

    fn from_str(s: &str) -> Result<Self> {
        let f = match s.trim() {
            "1" => Factor::One,
            "u" => Factor::U,
            "u_t" | "du/dt" => Factor::Ut,
            "u_tt" | "d2u/dt2" => Factor::Utt,
            "u_x" | "du/dx" => Factor::Ux,
            "u_xx" | "d2u/dx2" => Factor::Uxx,
            "u_xxx" | "d3u/dx3" => Factor::Uxxx,
            other => {
                if let Some(k) = other.strip_prefix('g').and_then(|k| k.parse::<u8>().ok()) {
                    Factor::Extra(k)
                } else {
                    return Err(EpdeError::UnknownFactor(other.to_string()));
                }
            }
        };
        Ok(f)
    }
}

/// How derivatives are estimated from the sampled field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Differentiation {
    #[default]
    FiniteDifference,
    Polynomial { window: usize, degree: usize },
}

impl Differentiation {
    pub const DEFAULT_POLY: Differentiation = Differentiation::Polynomial { window: 15, degree: 4 };

    pub fn apply(&self, field: &SolutionField) -> Result<DerivativeStack> {
        match *self {
            Differentiation::FiniteDifference => fd_derivatives(field),
            Differentiation::Polynomial { window, degree } => poly_derivatives(field, window, degree),
        }
    }
}

/// Factor matrices on a common interior region of the source grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeStack {
    source: Grid,
    t_margin: usize,
    x_margin: usize,
    factors: Vec<Array2<f64>>,
}

impl DerivativeStack {
    fn from_builtins(source: Grid, t_margin: usize, x_margin: usize, factors: Vec<Array2<f64>>) -> Self {
        debug_assert_eq!(factors.len(), Factor::POOL.len());
        Self {
            source,
            t_margin,
            x_margin,
            factors,
        }
    }

    /// `(frames, points per frame)` of every factor matrix.
    pub fn shape(&self) -> (usize, usize) {
        self.factors[0].dim()
    }

    pub fn len(&self) -> usize {
        let (a, b) = self.shape();
        a * b
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source_grid(&self) -> &Grid {
        &self.source
    }

    /// Frames and points trimmed from each side of the source grid.
    pub fn margins(&self) -> (usize, usize) {
        (self.t_margin, self.x_margin)
    }

    pub fn get(&self, factor: Factor) -> Option<&Array2<f64>> {
        self.factors.get(factor.slot())
    }

    pub fn factor(&self, factor: Factor) -> Result<ArrayView2<'_, f64>> {
        self.get(factor)
            .map(|a| a.view())
            .ok_or_else(|| EpdeError::UnknownFactor(factor.symbol()))
    }

    /// Every factor available in this stack, built-ins first.
    pub fn pool(&self) -> Vec<Factor> {
        let extras = self.factors.len() - Factor::POOL.len();
        Factor::POOL
            .iter()
            .copied()
            .chain((0..extras).map(|k| Factor::Extra(k as u8)))
            .collect()
    }

    /// Adds a user-supplied factor with the interior shape.
    pub fn register_factor(&mut self, values: Array2<f64>) -> Result<Factor> {
        if values.dim() != self.shape() {
            return Err(EpdeError::ShapeMismatch {
                expected: self.shape(),
                got: values.dim(),
            });
        }
        let k = self.factors.len() - Factor::POOL.len();
        if k > u8::MAX as usize {
            return Err(EpdeError::InvalidParameter("too many extra factors".into()));
        }
        self.factors.push(values.as_standard_layout().into_owned());
        Ok(Factor::Extra(k as u8))
    }
}

/// Central finite differences: second order for `u_t`, `u_tt`, `u_x`,
/// `u_xx`, and the five-point stencil for `u_xxx`. The result covers
/// `(nt - 2) x (nx - 4)` interior points.
pub fn fd_derivatives(field: &SolutionField) -> Result<DerivativeStack> {
    let g = *field.grid();
    if g.nt < 3 || g.nx < 5 {
        return Err(EpdeError::DimensionTooSmall {
            nt: g.nt,
            nx: g.nx,
            min: 5,
        });
    }
    let u = field.values();
    let (rows, cols) = (g.nt - 2, g.nx - 4);
    let (dt, dx) = (g.dt, g.dx);
    let at = |di: isize, dj: isize| {
        move |(i, j): (usize, usize)| u[[(i as isize + 1 + di) as usize, (j as isize + 2 + dj) as usize]]
    };
    let shape = (rows, cols);
    let uu = u.slice(s![1..g.nt - 1, 2..g.nx - 2]).to_owned();
    let ut = Array2::from_shape_fn(shape, |p| (at(1, 0)(p) - at(-1, 0)(p)) / (2.0 * dt));
    let utt = Array2::from_shape_fn(shape, |p| (at(1, 0)(p) - 2.0 * at(0, 0)(p) + at(-1, 0)(p)) / (dt * dt));
    let ux = Array2::from_shape_fn(shape, |p| (at(0, 1)(p) - at(0, -1)(p)) / (2.0 * dx));
    let uxx = Array2::from_shape_fn(shape, |p| (at(0, 1)(p) - 2.0 * at(0, 0)(p) + at(0, -1)(p)) / (dx * dx));
    let uxxx = Array2::from_shape_fn(shape, |p| {
        (at(0, 2)(p) - 2.0 * at(0, 1)(p) + 2.0 * at(0, -1)(p) - at(0, -2)(p)) / (2.0 * dx * dx * dx)
    });
    let one = Array2::ones(shape);
    Ok(DerivativeStack::from_builtins(g, 1, 2, vec![one, uu, ut, utt, ux, uxx, uxxx]))
}

/// Convolution weights that return the `order`-th derivative at the centre of
/// a `window`-point least-squares polynomial fit of the given degree, for
/// unit sample spacing.
pub fn poly_derivative_weights(window: usize, degree: usize, order: usize) -> Vec<f64> {
    let half = (window / 2) as f64;
    let offsets: Vec<f64> = (0..window).map(|k| (k as f64 - half) / half).collect();
    let v = DMatrix::from_fn(window, degree + 1, |r, c| offsets[r].powi(c as i32));
    let vt = v.transpose();
    let normal = &vt * &v;
    let chol = normal.cholesky().expect("Vandermonde normal matrix is positive definite");
    let pinv = chol.solve(&vt);
    let fact: f64 = (1..=order).map(|k| k as f64).product();
    let scale = fact / half.powi(order as i32);
    (0..window).map(|k| pinv[(order, k)] * scale).collect()
}

/// Local polynomial differentiation along each axis separately. Each
/// derivative at an interior point is the analytic derivative of the
/// least-squares polynomial fitted to `window` samples centred on it.
pub fn poly_derivatives(field: &SolutionField, window: usize, degree: usize) -> Result<DerivativeStack> {
    if degree < 3 {
        return Err(EpdeError::DegreeTooSmall(degree));
    }
    if window < degree + 1 {
        return Err(EpdeError::WindowTooSmall { window, degree });
    }
    if window.is_multiple_of(2) {
        return Err(EpdeError::InvalidParameter(format!("window must be odd, got {window}")));
    }
    let g = *field.grid();
    if window > g.nt || window > g.nx {
        return Err(EpdeError::DimensionTooSmall {
            nt: g.nt,
            nx: g.nx,
            min: window,
        });
    }
    let h = window / 2;
    let (rows, cols) = (g.nt - 2 * h, g.nx - 2 * h);
    let u = field.values();
    let weights: Vec<Vec<f64>> = (1..=3).map(|q| poly_derivative_weights(window, degree, q)).collect();

    let along_t = |order: usize| {
        let w = &weights[order - 1];
        let scale = g.dt.powi(order as i32);
        Array2::from_shape_fn((rows, cols), |(i, j)| {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                acc += wk * u[[i + k, j + h]];
            }
            acc / scale
        })
    };
    let along_x = |order: usize| {
        let w = &weights[order - 1];
        let scale = g.dx.powi(order as i32);
        Array2::from_shape_fn((rows, cols), |(i, j)| {
            let row = u.row(i + h);
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                acc += wk * row[j + k];
            }
            acc / scale
        })
    };
    let uu = u.slice(s![h..g.nt - h, h..g.nx - h]).to_owned();
    let factors = vec![
        Array2::ones((rows, cols)),
        uu,
        along_t(1),
        along_t(2),
        along_x(1),
        along_x(2),
        along_x(3),
    ];
    Ok(DerivativeStack::from_builtins(g, h, h, factors))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(nt: usize, nx: usize, dt: f64, dx: f64, f: impl Fn(f64, f64) -> f64) -> SolutionField {
        SolutionField::from_fn(Grid::new(nt, nx, dt, dx).unwrap(), f).unwrap()
    }

    #[test]
    fn constant_field_has_zero_derivatives() {
        let s = fd_derivatives(&field(6, 9, 0.1, 0.2, |_, _| 3.5)).unwrap();
        assert_eq!(s.shape(), (4, 5));
        for f in [Factor::Ut, Factor::Utt, Factor::Ux, Factor::Uxx, Factor::Uxxx] {
            assert!(s.get(f).unwrap().iter().all(|&v| v == 0.0), "{f}");
        }
        assert!(s.get(Factor::U).unwrap().iter().all(|&v| v == 3.5));
        assert!(s.get(Factor::One).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn quadratic_in_x_is_exact() {
        let s = fd_derivatives(&field(5, 12, 0.1, 0.25, |_, x| x * x)).unwrap();
        for &v in s.get(Factor::Uxx).unwrap() {
            assert!((v - 2.0).abs() < 1e-12);
        }
        for &v in s.get(Factor::Uxxx).unwrap() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn cubic_third_derivative_is_exact() {
        let s = fd_derivatives(&field(5, 12, 0.1, 0.25, |_, x| x * x * x - x)).unwrap();
        for &v in s.get(Factor::Uxxx).unwrap() {
            assert!((v - 6.0).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn u_factor_is_interior_of_field() {
        let f = field(7, 9, 0.1, 0.1, |t, x| t * 10.0 + x);
        let s = fd_derivatives(&f).unwrap();
        assert_eq!(s.get(Factor::U).unwrap()[[0, 0]], f.values()[[1, 2]]);
        let p = poly_derivatives(&f, 5, 3).unwrap();
        assert_eq!(p.margins(), (2, 2));
        assert_eq!(p.get(Factor::U).unwrap()[[0, 0]], f.values()[[2, 2]]);
    }

    #[test]
    fn poly_parameter_errors() {
        let f = field(20, 20, 0.1, 0.1, |_, x| x);
        assert_eq!(
            poly_derivatives(&f, 3, 4).unwrap_err(),
            EpdeError::WindowTooSmall { window: 3, degree: 4 }
        );
        assert_eq!(poly_derivatives(&f, 9, 2).unwrap_err(), EpdeError::DegreeTooSmall(2));
        assert!(poly_derivatives(&f, 8, 4).is_err());
        assert!(poly_derivatives(&f, 21, 4).is_err());
    }

    #[test]
    fn poly_weights_differentiate_monomials() {
        // First-derivative weights of a degree-4 fit reproduce d/dz z^3 = 0 at 0
        // and d/dz z = 1.
        let w = poly_derivative_weights(9, 4, 1);
        let lin: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64 - 4.0)).sum();
        let cub: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64 - 4.0).powi(3)).sum();
        assert!((lin - 1.0).abs() < 1e-12);
        assert!(cub.abs() < 1e-10);
    }

    #[test]
    fn register_extra_factor() {
        let mut s = fd_derivatives(&field(6, 9, 0.1, 0.2, |t, x| t + x)).unwrap();
        let extra = s.register_factor(Array2::from_elem(s.shape(), 2.0)).unwrap();
        assert_eq!(extra, Factor::Extra(0));
        assert_eq!(s.pool().len(), 8);
        assert!(s.register_factor(Array2::zeros((1, 1))).is_err());
    }

    #[test]
    fn factor_names_round_trip() {
        for f in Factor::POOL {
            assert_eq!(f.symbol().parse::<Factor>().unwrap(), f);
        }
        assert_eq!("u_xx".parse::<Factor>().unwrap(), Factor::Uxx);
        assert!("v".parse::<Factor>().is_err());
    }
}
