use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use epde::bench::{self, BenchSettings, ExperimentReport, SolverSettings};
use epde::solvers::Equation;
use epde::{
    add_noise, discover_baseline, enumerate_library, run_epde, Differentiation, DiscoveredEquation, Factor,
    Placement, RunConfig, SolutionField,
};

#[derive(Parser)]
#[command(name = "epde", version, about = "Discover partial differential equations from gridded data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one of the validation equations and write the field as CSV.
    Generate(GenerateArgs),
    /// Discover an equation from a field CSV.
    Discover(DiscoverArgs),
    /// Run a scripted experiment and write its report.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    equation: Equation,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    dx: Option<f64>,
    /// Wave speed.
    #[arg(long)]
    c: Option<f64>,
    /// Burgers viscosity.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Derivatives {
    Fd,
    Poly,
}

#[derive(Args)]
struct DiscoverArgs {
    input: PathBuf,
    /// Seed for every random choice; a logged OS seed is used when omitted.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Regress on the full term library instead of evolving structures.
    #[arg(long)]
    baseline: bool,
    #[arg(long, value_enum)]
    derivatives: Option<Derivatives>,
    /// Print per-epoch progress to stderr.
    #[arg(long)]
    verbose: bool,
    /// Print the result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Table2,
    Table3,
    NoiseSweep,
}

#[derive(Args)]
struct BenchArgs {
    experiment: Experiment,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory receiving the report files.
    #[arg(short, long, default_value = ".")]
    out: PathBuf,
    /// Equation for table3 (table2 runs all three).
    #[arg(long)]
    equation: Option<Equation>,
    /// Comma-separated data fractions for table3.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    /// Comma-separated noise fractions for noise-sweep.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    placement: Option<Placement>,
    /// Use a 512 x 512 KdV grid instead of 1024 x 1024.
    #[arg(long)]
    kdv_small: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    derivatives: Option<Derivatives>,
    /// Also write the rows as JSON.
    #[arg(long)]
    json: bool,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, String> {
    match path {
        Some(p) => RunConfig::from_file(p).map_err(|e| format!("config: {e}")),
        None => Ok(RunConfig::default()),
    }
}

fn differentiation(d: Derivatives) -> Differentiation {
    match d {
        Derivatives::Fd => Differentiation::FiniteDifference,
        Derivatives::Poly => Differentiation::DEFAULT_POLY,
    }
}

fn resolve_seed(flag: Option<u64>, cfg: &RunConfig) -> u64 {
    if let Some(s) = flag {
        return s;
    }
    if cfg.entries.iter().any(|(k, _)| k == "seed") {
        return cfg.evolution.seed;
    }
    let seed = rand::random::<u64>();
    eprintln!("no --seed given; using seed {seed}");
    seed
}

fn generate(args: GenerateArgs) -> Result<(), String> {
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        if !dir.is_dir() {
            return Err(format!("output directory {} does not exist", dir.display()));
        }
    }
    let settings = SolverSettings {
        nt: args.nt,
        nx: args.nx,
        dt: args.dt,
        dx: args.dx,
        c: args.c,
        mu: args.mu,
    };
    let field = bench::generate(args.equation, &settings).map_err(|e| format!("{}: {e}", args.equation))?;
    field.write_csv(&args.output).map_err(|e| e.to_string())?;
    let g = field.grid();
    println!(
        "{}: nt={} nx={} dt={} dx={} t0={} x0={} max|u|={:.6} -> {}",
        args.equation,
        g.nt,
        g.nx,
        g.dt,
        g.dx,
        g.t0,
        g.x0,
        field.max_abs(),
        args.output.display()
    );
    Ok(())
}

fn print_equation(eq: &DiscoveredEquation) {
    println!("{eq}");
    for (term, c) in &eq.terms {
        println!("  {:<16} {:>14.8}", term.to_string(), c);
    }
    println!("residual_norm = {:.6e}", eq.residual_norm);
    if let Some(f) = eq.fitness {
        println!("fitness = {f:.6e}");
    }
}

fn discover(args: DiscoverArgs) -> Result<(), String> {
    let mut cfg = load_config(args.config.as_deref())?;
    let field = SolutionField::read_csv(&args.input).map_err(|e| e.to_string())?;
    let field = match cfg.noise {
        Some(spec) => add_noise(&field, spec),
        None => field,
    };
    if let Some(d) = args.derivatives {
        cfg.evolution.differentiation = differentiation(d);
        cfg.baseline.differentiation = differentiation(d);
    }
    let eq = if args.baseline {
        let lib = enumerate_library(&Factor::POOL, cfg.evolution.max_factors, Factor::Ut).map_err(|e| e.to_string())?;
        discover_baseline(&field, &lib, &cfg.baseline)
    } else {
        cfg.evolution.seed = resolve_seed(args.seed, &cfg);
        cfg.evolution.verbose = args.verbose;
        run_epde(&field, &cfg.evolution)
    }
    .map_err(|e| e.to_string())?;
    if args.json {
        println!("{}", eq.to_json());
    } else {
        print_equation(&eq);
        if !args.baseline {
            println!("seed = {}", cfg.evolution.seed);
        }
    }
    Ok(())
}

fn bench_cmd(args: BenchArgs) -> Result<bool, String> {
    let mut cfg = load_config(args.config.as_deref())?;
    let mut settings: BenchSettings = cfg.bench.clone();
    if let Some(f) = args.fractions {
        settings.fractions = f;
    }
    if let Some(l) = args.levels {
        settings.levels = l;
    }
    if let Some(r) = args.repeats {
        settings.repeats = r;
    }
    if let Some(p) = args.placement {
        settings.placement = p;
    }
    if args.kdv_small {
        settings.kdv_size = 512;
    }
    if let Some(s) = args.seed {
        cfg.evolution.seed = s;
    }
    let echo = cfg.echo();
    let report: ExperimentReport = match args.experiment {
        Experiment::Table2 => {
            if let Some(d) = args.derivatives {
                cfg.evolution.differentiation = differentiation(d);
            }
            let eqs = args.equation.map_or(Equation::ALL.to_vec(), |e| vec![e]);
            bench::run_coefficient_table(&eqs, &settings, &cfg.evolution, &echo)
        }
        Experiment::Table3 => {
            if let Some(d) = args.derivatives {
                cfg.evolution.differentiation = differentiation(d);
            }
            let eq = args.equation.unwrap_or(Equation::Burgers);
            let solver = match eq {
                Equation::Kdv => SolverSettings::kdv_square(settings.kdv_size),
                _ => cfg.solver.clone(),
            };
            let field = bench::generate(eq, &solver).map_err(|e| e.to_string())?;
            bench::run_data_fraction_study(eq, &field, &solver, &settings, &cfg.evolution, &echo)
        }
        Experiment::NoiseSweep => {
            if args.equation.is_some_and(|e| e != Equation::Burgers) {
                return Err("noise-sweep runs on burgers only".into());
            }
            // Both methods differentiate noisy data with local polynomials
            // unless told otherwise.
            let explicit = cfg.entries.iter().any(|(k, _)| k == "derivatives" || k == "poly_window" || k == "poly_degree");
            let d = match args.derivatives {
                Some(d) => differentiation(d),
                None if explicit => cfg.evolution.differentiation,
                None => Differentiation::DEFAULT_POLY,
            };
            cfg.evolution.differentiation = d;
            cfg.baseline.differentiation = d;
            let clean = bench::generate(Equation::Burgers, &cfg.solver).map_err(|e| e.to_string())?;
            bench::run_noise_sweep(&clean, &cfg.solver, &settings, &cfg.evolution, &cfg.baseline, &echo)
        }
    }
    .map_err(|e| e.to_string())?;
    print!("{}", report.summary_table());
    let files = report.write(&args.out, args.json).map_err(|e| e.to_string())?;
    for f in files {
        println!("wrote {}", f.display());
    }
    if report.panicked {
        eprintln!("some trials panicked; results kept with a .partial suffix");
    }
    Ok(!report.panicked)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a).map(|_| true),
        Command::Discover(a) => discover(a).map(|_| true),
        Command::Bench(a) => bench_cmd(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
