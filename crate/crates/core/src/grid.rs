//! Uniform space-time grids, sampled fields, noise injection and the two
//! quality metrics used by the experiments (relative noise level and
//! coefficient error).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{EpdeError, Result};

/// Smallest extent along either axis; the five-point third-derivative
/// stencil needs this many samples.
pub const MIN_POINTS: usize = 5;

/// A uniform rectangular grid in (t, x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub t0: f64,
    pub x0: f64,
}

impl Grid {
    pub fn new(nt: usize, nx: usize, dt: f64, dx: f64) -> Result<Self> {
        Self::with_origin(nt, nx, dt, dx, 0.0, 0.0)
    }

    pub fn with_origin(nt: usize, nx: usize, dt: f64, dx: f64, t0: f64, x0: f64) -> Result<Self> {
        if nt < MIN_POINTS || nx < MIN_POINTS {
            return Err(EpdeError::DimensionTooSmall {
                nt,
                nx,
                min: MIN_POINTS,
            });
        }
        if !(dt > 0.0 && dx > 0.0 && dt.is_finite() && dx.is_finite()) {
            return Err(EpdeError::NonPositiveStep { dt, dx });
        }
        Ok(Self {
            nt,
            nx,
            dt,
            dx,
            t0,
            x0,
        })
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nt, self.nx)
    }
}

/// Convenience wrapper matching the `make_grid` operation.
pub fn make_grid(nt: usize, nx: usize, dt: f64, dx: f64) -> Result<Grid> {
    Grid::new(nt, nx, dt, dx)
}

/// Scalar field `u(t, x)` sampled on a [`Grid`]. Rows are time frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    grid: Grid,
    values: Array2<f64>,
}

impl SolutionField {
    pub fn new(grid: Grid, values: Array2<f64>) -> Result<Self> {
        let got = values.dim();
        if got != grid.shape() {
            return Err(EpdeError::ShapeMismatch {
                expected: grid.shape(),
                got,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EpdeError::NonFinite);
        }
        // Keep storage in standard (row-major) layout so frames are contiguous.
        let values = values.as_standard_layout().into_owned();
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(grid.t(i), grid.x(j)));
        Self::new(grid, values)
    }

    /// Row-major values, one time frame after another.
    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.nt * grid.nx {
            return Err(EpdeError::ShapeMismatch {
                expected: grid.shape(),
                got: (data.len() / grid.nx.max(1), grid.nx),
            });
        }
        let values = Array2::from_shape_vec(grid.shape(), data).expect("length checked");
        Self::new(grid, values)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: Array2::zeros(grid.shape()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// The time frame at index `i` as a contiguous slice.
    pub fn frame(&self, i: usize) -> &[f64] {
        let row = self.values.row(i);
        row.to_slice().expect("row-major storage")
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rectangular sub-field `[t_start, t_start + nt) x [x_start, x_start + nx)`.
    pub fn crop(&self, t_start: usize, nt: usize, x_start: usize, nx: usize) -> Result<Self> {
        if t_start + nt > self.grid.nt || x_start + nx > self.grid.nx {
            return Err(EpdeError::InvalidParameter(format!(
                "crop [{t_start}+{nt}, {x_start}+{nx}] exceeds field {:?}",
                self.grid.shape()
            )));
        }
        let grid = Grid::with_origin(
            nt,
            nx,
            self.grid.dt,
            self.grid.dx,
            self.grid.t(t_start),
            self.grid.x(x_start),
        )?;
        let values = self
            .values
            .slice(s![t_start..t_start + nt, x_start..x_start + nx])
            .to_owned();
        Self::new(grid, values)
    }

    /// Writes the field as text: a `# nt=.. nx=.. dt=.. dx=.. t0=.. x0=..`
    /// header line (the origin keys are optional when reading) followed by
    /// one comma-separated row per time frame. Values carry 17
    /// significant digits so reading the file back is bit-exact.
    pub fn to_csv_string(&self) -> String {
        let g = &self.grid;
        let mut out = String::with_capacity(g.nt * g.nx * 25 + 64);
        let _ = writeln!(
            out,
            "# nt={} nx={} dt={:.16e} dx={:.16e} t0={:.16e} x0={:.16e}",
            g.nt, g.nx, g.dt, g.dx, g.t0, g.x0
        );
        for row in self.values.rows() {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| EpdeError::Parse("empty field file".into()))?;
        let header = header
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| EpdeError::Parse("missing `# nt=.. nx=.. dt=.. dx=..` header".into()))?;
        let (mut nt, mut nx, mut dt, mut dx) = (None, None, None, None);
        let (mut t0, mut x0) = (0.0, 0.0);
        for kv in header.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| EpdeError::Parse(format!("bad header token `{kv}`")))?;
            let bad = |_| EpdeError::Parse(format!("bad header value `{kv}`"));
            match k {
                "nt" => nt = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "nx" => nx = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "dt" => dt = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "dx" => dx = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "t0" => t0 = v.parse::<f64>().map_err(|e| bad(e.to_string()))?,
                "x0" => x0 = v.parse::<f64>().map_err(|e| bad(e.to_string()))?,
                other => return Err(EpdeError::Parse(format!("unknown header key `{other}`"))),
            }
        }
        let missing = |k: &str| EpdeError::Parse(format!("header lacks `{k}`"));
        let grid = Grid::with_origin(
            nt.ok_or_else(|| missing("nt"))?,
            nx.ok_or_else(|| missing("nx"))?,
            dt.ok_or_else(|| missing("dt"))?,
            dx.ok_or_else(|| missing("dx"))?,
            t0,
            x0,
        )?;
        let mut data = Vec::with_capacity(grid.nt * grid.nx);
        let mut rows = 0;
        for (lineno, line) in lines.enumerate() {
            let before = data.len();
            for tok in line.split(',') {
                let v = tok.trim().parse::<f64>().map_err(|_| {
                    EpdeError::Parse(format!("row {}: bad number `{}`", lineno + 1, tok.trim()))
                })?;
                data.push(v);
            }
            if data.len() - before != grid.nx {
                return Err(EpdeError::Parse(format!(
                    "row {} has {} columns, expected {}",
                    lineno + 1,
                    data.len() - before,
                    grid.nx
                )));
            }
            rows += 1;
        }
        if rows != grid.nt {
            return Err(EpdeError::Parse(format!(
                "file has {rows} rows, header says nt={}",
                grid.nt
            )));
        }
        let values = Array2::from_shape_vec(grid.shape(), data)
            .map_err(|e| EpdeError::Parse(e.to_string()))?;
        Self::new(grid, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string())
            .map_err(|e| EpdeError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| EpdeError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }
}

/// Gaussian noise with standard deviation `fraction * max |u|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub fraction: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction >= 0.0 && fraction.is_finite()) {
            return Err(EpdeError::InvalidParameter(format!(
                "noise fraction must be >= 0, got {fraction}"
            )));
        }
        Ok(Self { fraction, seed })
    }
}

/// Adds independent zero-mean Gaussian noise to every grid point.
pub fn add_noise(field: &SolutionField, spec: NoiseSpec) -> SolutionField {
    let sigma = spec.fraction * field.max_abs();
    if sigma == 0.0 {
        return field.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let mut values = field.values.clone();
    for v in values.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    SolutionField {
        grid: field.grid,
        values,
    }
}

/// Relative Frobenius distance between a clean and a noisy field, in percent.
pub fn noise_level(clean: &SolutionField, noisy: &SolutionField) -> Result<f64> {
    let (a, b) = (clean.values.dim(), noisy.values.dim());
    if a != b {
        return Err(EpdeError::ShapeMismatch {
            expected: a,
            got: b,
        });
    }
    let norm = clean.frobenius_norm();
    if norm == 0.0 {
        return Err(EpdeError::ZeroCleanField);
    }
    let diff = clean
        .values
        .iter()
        .zip(noisy.values.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm * 100.0)
}

/// Euclidean distance between true and predicted coefficient vectors.
pub fn coeff_error(true_w: &[f64], pred_w: &[f64]) -> Result<f64> {
    if true_w.len() != pred_w.len() {
        return Err(EpdeError::LengthMismatch(true_w.len(), pred_w.len()));
    }
    Ok(true_w
        .iter()
        .zip(pred_w)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(nt: usize, nx: usize) -> SolutionField {
        let g = Grid::new(nt, nx, 0.1, 0.1).unwrap();
        SolutionField::from_fn(g, |t, x| (t + 1.0) * (x - 0.3).sin()).unwrap()
    }

    #[test]
    fn make_grid_paper_sizes() {
        let wave = make_grid(100, 100, 0.1, 0.1).unwrap();
        assert_eq!(wave.shape(), (100, 100));
        let burgers = make_grid(256, 256, 10.0 / 256.0, 16.0 / 256.0).unwrap();
        assert_eq!(burgers.dx, 0.0625);
    }

    #[test]
    fn make_grid_rejects_bad_input() {
        assert!(matches!(
            make_grid(4, 10, 0.1, 0.1),
            Err(EpdeError::DimensionTooSmall { .. })
        ));
        assert!(matches!(
            make_grid(10, 10, 0.0, 0.1),
            Err(EpdeError::NonPositiveStep { .. })
        ));
        assert!(matches!(
            make_grid(10, 10, 0.1, -1.0),
            Err(EpdeError::NonPositiveStep { .. })
        ));
    }

    #[test]
    fn field_rejects_nan_and_bad_shape() {
        let g = Grid::new(5, 5, 1.0, 1.0).unwrap();
        let mut v = Array2::zeros((5, 5));
        v[[2, 2]] = f64::NAN;
        assert_eq!(SolutionField::new(g, v), Err(EpdeError::NonFinite));
        assert!(matches!(
            SolutionField::new(g, Array2::zeros((5, 6))),
            Err(EpdeError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn zero_fraction_noise_is_identity() {
        let f = ramp(8, 9);
        let n = add_noise(&f, NoiseSpec::new(0.0, 3).unwrap());
        assert_eq!(f, n);
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let f = ramp(8, 9);
        let spec = NoiseSpec::new(0.05, 11).unwrap();
        assert_eq!(add_noise(&f, spec), add_noise(&f, spec));
        let other = add_noise(&f, NoiseSpec::new(0.05, 12).unwrap());
        assert_ne!(add_noise(&f, spec), other);
    }

    #[test]
    fn noise_level_basic_identities() {
        let w = ramp(6, 7);
        assert_eq!(noise_level(&w, &w).unwrap(), 0.0);
        let w2 = SolutionField::new(*w.grid(), w.values() * 2.0).unwrap();
        assert!((noise_level(&w, &w2).unwrap() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn noise_level_matches_direct_formula() {
        let g = Grid::new(5, 5, 1.0, 1.0).unwrap();
        let a = [0.3, -1.2, 2.5, 0.7, -0.4, 1.1, 0.05, -2.2, 0.9];
        let b = [0.35, -1.0, 2.4, 0.9, -0.41, 1.0, 0.0, -2.0, 1.2];
        // Embed the 3x3 pair in otherwise identical 5x5 fields.
        let mut va = Array2::from_elem((5, 5), 1.0);
        let mut vb = va.clone();
        for k in 0..9 {
            va[[k / 3, k % 3]] = a[k];
            vb[[k / 3, k % 3]] = b[k];
        }
        let mut num = 0.0_f64;
        let mut den = 0.0_f64;
        for (x, y) in va.iter().zip(vb.iter()) {
            num += (x - y) * (x - y);
            den += x * x;
        }
        let expected = (num / den).sqrt() * 100.0;
        let fa = SolutionField::new(g, va).unwrap();
        let fb = SolutionField::new(g, vb).unwrap();
        assert!((noise_level(&fa, &fb).unwrap() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn noise_level_errors() {
        let w = ramp(6, 7);
        let z = SolutionField::zeros(*w.grid());
        assert_eq!(noise_level(&z, &w), Err(EpdeError::ZeroCleanField));
        let other = ramp(6, 8);
        assert!(matches!(
            noise_level(&w, &other),
            Err(EpdeError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn coeff_error_examples() {
        assert_eq!(coeff_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(coeff_error(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        let e = coeff_error(&[0.1, -1.0], &[0.09985, -0.99986]).unwrap();
        // sqrt(0.00015^2 + 0.00014^2)
        assert!((e - 2.0518284528683e-4).abs() < 1e-12, "{e}");
        assert_eq!(
            coeff_error(&[1.0], &[1.0, 2.0]),
            Err(EpdeError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn crop_keeps_spacing_and_origin() {
        let f = ramp(10, 12);
        let c = f.crop(2, 5, 3, 6).unwrap();
        assert_eq!(c.grid().shape(), (5, 6));
        assert_eq!(c.values()[[0, 0]], f.values()[[2, 3]]);
        assert!((c.grid().x0 - f.grid().x(3)).abs() < 1e-15);
        assert!(f.crop(8, 5, 0, 5).is_err());
    }

    #[test]
    fn csv_header_and_errors() {
        let f = ramp(5, 6);
        let text = f.to_csv_string();
        assert!(text.starts_with("# nt=5 nx=6 dt="));
        assert_eq!(text.lines().count(), 6);
        assert!(SolutionField::from_csv_str("1,2,3\n").is_err());
        let truncated: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(SolutionField::from_csv_str(&truncated).is_err());

        let shifted = SolutionField::new(Grid::with_origin(5, 6, 0.1, 0.2, 1.5, -8.0).unwrap(), f.values().clone()).unwrap();
        assert_eq!(SolutionField::from_csv_str(&shifted.to_csv_string()).unwrap(), shifted);
        // The origin is optional on input.
        let bare = "# nt=5 nx=5 dt=1 dx=1\n".to_string() + &"0,0,0,0,1\n".repeat(5);
        assert_eq!(SolutionField::from_csv_str(&bare).unwrap().grid().x0, 0.0);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            vals in proptest::collection::vec(-1e6f64..1e6, 30),
            dt in 1e-4f64..10.0,
        ) {
            let g = Grid::new(5, 6, dt, 0.37).unwrap();
            let f = SolutionField::new(g, Array2::from_shape_vec((5, 6), vals).unwrap()).unwrap();
            let back = SolutionField::from_csv_str(&f.to_csv_string()).unwrap();
            prop_assert_eq!(back.grid().dt.to_bits(), dt.to_bits());
            for (a, b) in f.values().iter().zip(back.values().iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn noise_level_is_homogeneous(alpha in -3.0f64..3.0) {
            let w = ramp(6, 7);
            let shifted = SolutionField::new(*w.grid(), w.values() * (1.0 + alpha)).unwrap();
            let q = noise_level(&w, &shifted).unwrap();
            prop_assert!((q - 100.0 * alpha.abs()).abs() < 1e-9);
        }

        #[test]
        fn coeff_error_is_a_metric(
            a in proptest::collection::vec(-5.0f64..5.0, 4),
            b in proptest::collection::vec(-5.0f64..5.0, 4),
            c in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            let ab = coeff_error(&a, &b).unwrap();
            prop_assert_eq!(ab, coeff_error(&b, &a).unwrap());
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(coeff_error(&a, &a).unwrap(), 0.0);
            let ac = coeff_error(&a, &c).unwrap();
            let cb = coeff_error(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }
    }
}
