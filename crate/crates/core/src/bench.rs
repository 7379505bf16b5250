//! Scripted validation experiments: coefficient recovery on the three
//! synthetic equations, recovery on cropped sub-regions, and a noise sweep
//! comparing the evolutionary search with full-library regression.
//!
//! Trials run on a rayon pool sized by `EPDE_THREADS` (unset or 0 means one
//! worker per core). Rows come back in job order, never completion order, so
//! reports are reproducible from their seeds.

use std::fmt;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{discover_baseline_on, enumerate_library, BaselineConfig};
use crate::derivatives::Factor;
use crate::equation::DiscoveredEquation;
use crate::error::{EpdeError, Result};
use crate::evolution::{run_epde_on, EvolutionConfig};
use crate::grid::{add_noise, coeff_error, noise_level, Grid, NoiseSpec, SolutionField, MIN_POINTS};
use crate::solvers::{
    periodic_soliton, solve_burgers, solve_kdv, solve_wave, BurgersParams, Equation, KdvParams, WaveParams,
};
use crate::terms::{FeatureLibrary, Term};

/// Grid and physical overrides for the generated fields. Unset entries fall
/// back to the validation setup of each equation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub nt: Option<usize>,
    pub nx: Option<usize>,
    pub dt: Option<f64>,
    pub dx: Option<f64>,
    /// Wave speed.
    pub c: Option<f64>,
    /// Burgers viscosity.
    pub mu: Option<f64>,
}

impl SolverSettings {
    pub fn kdv_square(n: usize) -> Self {
        Self {
            nt: Some(n),
            nx: Some(n),
            ..Self::default()
        }
    }
}

/// Solves `equation` on its validation grid, adjusted by `s`.
///
/// Burgers keeps x in [-8, 8) and t in [0, 10) unless the steps are given;
/// KdV keeps a 40-long periodic domain and a 10.24-long run likewise.
pub fn generate(equation: Equation, s: &SolverSettings) -> Result<SolutionField> {
    match equation {
        Equation::Wave => {
            let nt = s.nt.unwrap_or(100);
            let nx = s.nx.unwrap_or(100);
            let grid = Grid::new(nt, nx, s.dt.unwrap_or(0.1), s.dx.unwrap_or(0.1))?;
            solve_wave(&WaveParams::gaussian_pulse(s.c.unwrap_or(2.0), grid, 1.0))
        }
        Equation::Burgers => {
            let nt = s.nt.unwrap_or(256);
            let nx = s.nx.unwrap_or(256);
            let dx = s.dx.unwrap_or(16.0 / nx as f64);
            let grid = Grid::with_origin(nt, nx, s.dt.unwrap_or(10.0 / nt as f64), dx, 0.0, -0.5 * nx as f64 * dx)?;
            let p = BurgersParams::gaussian_hump(s.mu.unwrap_or(0.1), grid, -2.0, 1.0 / std::f64::consts::SQRT_2, 1.0);
            solve_burgers(&p)
        }
        Equation::Kdv => {
            let nt = s.nt.unwrap_or(1024);
            let nx = s.nx.unwrap_or(1024);
            let dx = s.dx.unwrap_or(40.0 / nx as f64);
            let period = nx as f64 * dx;
            let grid = Grid::with_origin(nt, nx, s.dt.unwrap_or(10.24 / nt as f64), dx, 0.0, -0.5 * period)?;
            let initial = grid
                .xs()
                .iter()
                .map(|&x| periodic_soliton(x, 4.0, -10.0, period) + periodic_soliton(x, 1.0, -2.0, period))
                .collect();
            solve_kdv(&KdvParams {
                grid,
                initial,
                substeps: 0,
            })
        }
    }
}

/// The equation each generator integrates, written as `target = sum c_i term_i`.
pub fn truth(equation: Equation, s: &SolverSettings) -> DiscoveredEquation {
    use Factor::*;
    let t = |f: &[Factor]| Term::new(f.to_vec()).expect("static term");
    let (target, terms) = match equation {
        Equation::Wave => {
            let c = s.c.unwrap_or(2.0);
            (t(&[Utt]), vec![(t(&[Uxx]), 1.0 / (c * c))])
        }
        Equation::Burgers => (t(&[Ut]), vec![(t(&[Uxx]), s.mu.unwrap_or(0.1)), (t(&[U, Ux]), -1.0)]),
        Equation::Kdv => (t(&[Ut]), vec![(t(&[U, Ux]), -6.0), (t(&[Uxxx]), -1.0)]),
    };
    DiscoveredEquation {
        target,
        terms,
        residual_norm: 0.0,
        fitness: None,
        provenance: None,
    }
}

/// Coefficient error of `found` against `truth` over the union of their
/// right-hand sides, after rearranging `found` onto the truth's target.
/// A relation that cannot be rearranged counts as all-zero coefficients.
pub fn equation_error(found: &DiscoveredEquation, truth: &DiscoveredEquation) -> f64 {
    let rearranged = found.solve_for(&truth.target);
    let mut library: Vec<Term> = truth.terms.iter().map(|(t, _)| t.clone()).collect();
    if let Some(eq) = &rearranged {
        for (t, _) in &eq.terms {
            if !library.contains(t) {
                library.push(t.clone());
            }
        }
    }
    let w_true = truth.coefficients_for(&library);
    let w_pred = match &rearranged {
        Some(eq) => eq.coefficients_for(&library),
        None => vec![0.0; library.len()],
    };
    coeff_error(&w_true, &w_pred).expect("aligned vectors")
}

/// Right-hand-side terms of the truth missing from a discovered relation.
pub fn missing_terms(found: &DiscoveredEquation, truth: &DiscoveredEquation) -> Vec<Term> {
    let have = found.structure();
    truth
        .terms
        .iter()
        .map(|(t, _)| t.clone())
        .filter(|t| !have.contains(t))
        .collect()
}

/// Where a sub-region is cut from the full field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Centred in time and on the spatial column carrying the most signal.
    #[default]
    Centered,
    /// Anchored at the first time frame and leftmost point.
    Corner,
    /// Uniformly random offset, drawn from the trial seed.
    Random,
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Placement::Centered => "centered",
            Placement::Corner => "corner",
            Placement::Random => "random",
        })
    }
}

impl FromStr for Placement {
    type Err = EpdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "centered" | "centred" => Ok(Placement::Centered),
            "corner" => Ok(Placement::Corner),
            "random" => Ok(Placement::Random),
            other => Err(EpdeError::Parse(format!("unknown placement `{other}` (centered|corner|random)"))),
        }
    }
}

fn window_start(n: usize, len: usize, centre: usize) -> usize {
    centre.saturating_sub(len / 2).min(n - len)
}

/// A contiguous sub-region holding `fraction` of the points along each axis.
pub fn crop_fraction(field: &SolutionField, fraction: f64, placement: Placement, seed: u64) -> Result<SolutionField> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EpdeError::InvalidParameter(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let (nt, nx) = field.grid().shape();
    let lt = ((fraction * nt as f64).round() as usize).clamp(MIN_POINTS, nt);
    let lx = ((fraction * nx as f64).round() as usize).clamp(MIN_POINTS, nx);
    let (t0, x0) = match placement {
        Placement::Corner => (0, 0),
        Placement::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (rng.random_range(0..=nt - lt), rng.random_range(0..=nx - lx))
        }
        Placement::Centered => {
            let v = field.values();
            let ridge = (0..nx)
                .map(|j| v.column(j).iter().map(|u| u.abs()).sum::<f64>())
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, s)| if s > best.1 { (j, s) } else { best })
                .0;
            (window_start(nt, lt, nt / 2), window_start(nx, lx, ridge))
        }
    };
    field.crop(t0, lt, x0, lx)
}

/// Experiment selection shared by the CLI and config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub fractions: Vec<f64>,
    /// Noise fractions of max |u|.
    pub levels: Vec<f64>,
    pub repeats: usize,
    pub placement: Placement,
    pub kdv_size: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self {
            fractions: vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1],
            levels: vec![0.0, 0.0002, 0.0005, 0.001, 0.002, 0.005, 0.01],
            repeats: 10,
            placement: Placement::Centered,
            kdv_size: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub equation: Equation,
    pub method: String,
    pub fraction: f64,
    pub noise: f64,
    pub seed: u64,
    pub q_noise: Option<f64>,
    pub correct: bool,
    /// Truth terms absent from the discovery, `;`-separated.
    pub missing: String,
    pub e_coeff: f64,
    pub discovered: String,
    /// `term=coefficient` pairs, `;`-separated.
    pub coefficients: String,
    pub runtime_s: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub equation: Equation,
    pub method: String,
    pub fraction: f64,
    pub noise: f64,
    pub trials: usize,
    pub correct: usize,
    pub median_q_noise: Option<f64>,
    pub median_e_coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    /// `key = value` lines describing the run, written as `#` comments.
    pub config: Vec<String>,
    pub rows: Vec<TrialRow>,
    pub summary: Vec<SummaryRow>,
    /// Set when any trial panicked; its row carries the message.
    pub panicked: bool,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn summarize(rows: &[TrialRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut groups: Vec<Vec<&TrialRow>> = Vec::new();
    for r in rows {
        let pos = groups.iter().position(|g| {
            let h = g[0];
            h.equation == r.equation && h.method == r.method && h.fraction == r.fraction && h.noise == r.noise
        });
        match pos {
            Some(k) => groups[k].push(r),
            None => groups.push(vec![r]),
        }
    }
    for g in groups {
        let h = g[0];
        let q: Vec<f64> = g.iter().filter_map(|r| r.q_noise).collect();
        let e: Vec<f64> = g.iter().map(|r| r.e_coeff).collect();
        out.push(SummaryRow {
            equation: h.equation,
            method: h.method.clone(),
            fraction: h.fraction,
            noise: h.noise,
            trials: g.len(),
            correct: g.iter().filter(|r| r.correct).count(),
            median_q_noise: median(&q),
            median_e_coeff: median(&e).expect("non-empty group"),
        });
    }
    out
}

impl ExperimentReport {
    fn new(id: &str, config: Vec<String>, rows: Vec<TrialRow>) -> Self {
        let panicked = rows
            .iter()
            .any(|r| r.error.as_deref().is_some_and(|e| e.starts_with("panic")));
        Self {
            id: id.to_string(),
            config,
            summary: summarize(&rows),
            rows,
            panicked,
        }
    }

    fn with_header(&self, body: Vec<u8>) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(format!("# experiment = {}\n", self.id).as_bytes());
        for line in &self.config {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
        out.extend(body);
        out
    }

    pub fn rows_csv(&self) -> Result<String> {
        Ok(String::from_utf8(self.with_header(to_csv(&self.rows)?)).expect("utf-8"))
    }

    pub fn summary_csv(&self) -> Result<String> {
        Ok(String::from_utf8(self.with_header(to_csv(&self.summary)?)).expect("utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Writes `<id>.csv` and `<id>_summary.csv` (plus `<id>.json` when asked)
    /// into `dir`. A report with a panicked trial gets a `.partial` suffix
    /// on every file.
    pub fn write(&self, dir: impl AsRef<Path>, json: bool) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(EpdeError::Io(format!("{}: not a directory", dir.display())));
        }
        let suffix = if self.panicked { ".partial" } else { "" };
        let mut files = vec![
            (dir.join(format!("{}.csv{suffix}", self.id)), self.rows_csv()?),
            (dir.join(format!("{}_summary.csv{suffix}", self.id)), self.summary_csv()?),
        ];
        if json {
            files.push((dir.join(format!("{}.json{suffix}", self.id)), self.to_json()));
        }
        for (path, text) in &files {
            fs::write(path, text).map_err(|e| EpdeError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }

    /// Fixed-width table of the summary rows for terminal output.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<8} {:<9} {:>8} {:>8} {:>9} {:>10} {:>12}\n",
            "equation", "method", "fraction", "noise", "correct", "Q_noise", "E_coeff"
        );
        for s in &self.summary {
            out.push_str(&format!(
                "{:<8} {:<9} {:>8.2} {:>8.4} {:>5}/{:<3} {:>10} {:>12.4e}\n",
                s.equation.name(),
                s.method,
                s.fraction,
                s.noise,
                s.correct,
                s.trials,
                s.median_q_noise.map_or("-".to_string(), |q| format!("{q:.3}")),
                s.median_e_coeff
            ));
        }
        out
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| EpdeError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| EpdeError::Io(e.to_string()))
}

/// Pool honouring `EPDE_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("EPDE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| EpdeError::Parse(format!("EPDE_THREADS must be a count, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EpdeError::InvalidParameter(e.to_string()))
}

fn run_jobs<J: Sync, F>(jobs: &[J], run: F) -> Result<Vec<TrialRow>>
where
    F: Fn(&J) -> Vec<TrialRow> + Sync,
{
    let pool = thread_pool()?;
    let nested: Vec<Vec<TrialRow>> = pool.install(|| jobs.par_iter().map(&run).collect());
    Ok(nested.into_iter().flatten().collect())
}

struct TrialSpec<'a> {
    equation: Equation,
    method: &'a str,
    fraction: f64,
    noise: f64,
    seed: u64,
    q_noise: Option<f64>,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs one discovery and turns its outcome, error or panic into a row.
fn trial<F>(spec: TrialSpec<'_>, truth: &DiscoveredEquation, discover: F) -> TrialRow
where
    F: FnOnce() -> Result<DiscoveredEquation>,
{
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(discover));
    let runtime_s = start.elapsed().as_secs_f64();
    let mut row = TrialRow {
        equation: spec.equation,
        method: spec.method.to_string(),
        fraction: spec.fraction,
        noise: spec.noise,
        seed: spec.seed,
        q_noise: spec.q_noise,
        correct: false,
        missing: String::new(),
        e_coeff: equation_error(&DiscoveredEquation { terms: vec![], ..truth.clone() }, truth),
        discovered: String::new(),
        coefficients: String::new(),
        runtime_s,
        error: None,
    };
    match outcome {
        Ok(Ok(eq)) => {
            row.correct = eq.has_structure(&truth.structure().into_iter().collect::<Vec<_>>());
            row.missing = join(missing_terms(&eq, truth).iter().map(Term::to_string));
            row.e_coeff = equation_error(&eq, truth);
            row.discovered = eq.render();
            row.coefficients = join(eq.terms.iter().map(|(t, c)| format!("{t}={c:.6}")));
        }
        Ok(Err(e)) => {
            row.missing = join(truth.terms.iter().map(|(t, _)| t.to_string()));
            row.error = Some(e.to_string());
        }
        Err(p) => {
            row.missing = join(truth.terms.iter().map(|(t, _)| t.to_string()));
            row.error = Some(format!("panic: {}", panic_message(p)));
        }
    }
    row
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(";")
}

fn library_for(field: &SolutionField, cfg: &EvolutionConfig) -> Result<FeatureLibrary> {
    Ok(FeatureLibrary::new(cfg.differentiation.apply(field)?, cfg.normalization))
}

fn epde_on(library: &Result<FeatureLibrary>, cfg: &EvolutionConfig, seed: u64) -> Result<DiscoveredEquation> {
    let library = library.as_ref().map_err(Clone::clone)?;
    let cfg = EvolutionConfig { seed, ..cfg.clone() };
    Ok(run_epde_on(library, &cfg)?.equation)
}

fn config_lines(settings: &BenchSettings, evo: &EvolutionConfig, base: Option<&BaselineConfig>) -> Vec<String> {
    let mut lines = vec![format!(
        "bench = {}",
        serde_json::to_string(settings).expect("settings serialise")
    )];
    lines.push(format!("evolution = {}", serde_json::to_string(evo).expect("config serialises")));
    if let Some(b) = base {
        lines.push(format!("baseline = {}", serde_json::to_string(b).expect("config serialises")));
    }
    lines
}

/// One EPDE discovery per equation on its validation grid, seeded by
/// `cfg.seed`. KdV uses `settings.kdv_size` points per axis.
pub fn run_coefficient_table(
    equations: &[Equation],
    settings: &BenchSettings,
    cfg: &EvolutionConfig,
    echo: &[String],
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let rows = run_jobs(equations, |&eq| {
        let solver = match eq {
            Equation::Kdv => SolverSettings::kdv_square(settings.kdv_size),
            _ => SolverSettings::default(),
        };
        let truth = truth(eq, &solver);
        let spec = TrialSpec {
            equation: eq,
            method: "epde",
            fraction: 1.0,
            noise: 0.0,
            seed: cfg.seed,
            q_noise: None,
        };
        vec![trial(spec, &truth, || {
            let field = generate(eq, &solver)?;
            epde_on(&library_for(&field, cfg), cfg, cfg.seed)
        })]
    })?;
    let mut config = echo.to_vec();
    config.extend(config_lines(settings, cfg, None));
    Ok(ExperimentReport::new("table2", config, rows))
}

/// EPDE on sub-regions of one solution: every fraction in
/// `settings.fractions`, seeds `0..settings.repeats`.
pub fn run_data_fraction_study(
    equation: Equation,
    field: &SolutionField,
    solver: &SolverSettings,
    settings: &BenchSettings,
    cfg: &EvolutionConfig,
    echo: &[String],
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if settings.repeats == 0 {
        return Err(EpdeError::InvalidParameter("repeats must be >= 1".into()));
    }
    let truth = truth(equation, solver);
    let jobs: Vec<(f64, u64)> = settings
        .fractions
        .iter()
        .flat_map(|&f| (0..settings.repeats as u64).map(move |s| (f, s)))
        .collect();
    for &(f, _) in &jobs {
        if !(f > 0.0 && f <= 1.0) {
            return Err(EpdeError::InvalidParameter(format!("fraction must be in (0, 1], got {f}")));
        }
    }
    // Random crops differ per seed; the others share one library per fraction.
    let shared: Vec<(f64, Result<FeatureLibrary>)> = if settings.placement == Placement::Random {
        Vec::new()
    } else {
        let pool = thread_pool()?;
        pool.install(|| {
            settings
                .fractions
                .par_iter()
                .map(|&f| {
                    let lib = crop_fraction(field, f, settings.placement, 0).and_then(|c| library_for(&c, cfg));
                    (f, lib)
                })
                .collect()
        })
    };
    let rows = run_jobs(&jobs, |&(fraction, seed)| {
        let spec = TrialSpec {
            equation,
            method: "epde",
            fraction,
            noise: 0.0,
            seed,
            q_noise: None,
        };
        vec![trial(spec, &truth, || match shared.iter().find(|(f, _)| *f == fraction) {
            Some((_, lib)) => epde_on(lib, cfg, seed),
            None => {
                let lib = crop_fraction(field, fraction, settings.placement, seed).and_then(|c| library_for(&c, cfg));
                epde_on(&lib, cfg, seed)
            }
        })]
    })?;
    let mut config = echo.to_vec();
    config.push(format!("equation = {equation}"));
    config.extend(config_lines(settings, cfg, None));
    Ok(ExperimentReport::new("table3", config, rows))
}

/// Burgers with independent Gaussian noise per point: for every level in
/// `settings.levels` and seed in `0..settings.repeats`, both methods run on
/// the same noisy field and are scored against `u_t = mu u_xx - u u_x`.
pub fn run_noise_sweep(
    clean: &SolutionField,
    solver: &SolverSettings,
    settings: &BenchSettings,
    evo: &EvolutionConfig,
    base: &BaselineConfig,
    echo: &[String],
) -> Result<ExperimentReport> {
    evo.validate()?;
    base.regression.validate()?;
    if settings.repeats == 0 {
        return Err(EpdeError::InvalidParameter("repeats must be >= 1".into()));
    }
    for &level in &settings.levels {
        NoiseSpec::new(level, 0)?;
    }
    let truth = truth(Equation::Burgers, solver);
    let library = enumerate_library(&Factor::POOL, evo.max_factors, Factor::Ut)?;
    let jobs: Vec<(f64, u64)> = settings
        .levels
        .iter()
        .flat_map(|&l| (0..settings.repeats as u64).map(move |s| (l, s)))
        .collect();
    let rows = run_jobs(&jobs, |&(level, seed)| {
        let noisy = add_noise(clean, NoiseSpec { fraction: level, seed });
        let q = noise_level(clean, &noisy).ok();
        let spec = |method| TrialSpec {
            equation: Equation::Burgers,
            method,
            fraction: 1.0,
            noise: level,
            seed,
            q_noise: q,
        };
        let epde = trial(spec("epde"), &truth, || epde_on(&library_for(&noisy, evo), evo, seed));
        let baseline = trial(spec("baseline"), &truth, || {
            if noisy.max_abs() == 0.0 {
                return Err(EpdeError::DegenerateDiscovery("the field is identically zero".into()));
            }
            let features = FeatureLibrary::new(base.differentiation.apply(&noisy)?, base.normalization);
            discover_baseline_on(&features, &library, base)
        });
        vec![epde, baseline]
    })?;
    let mut config = echo.to_vec();
    config.extend(config_lines(settings, evo, Some(base)));
    Ok(ExperimentReport::new("noise_sweep", config, rows))
}
