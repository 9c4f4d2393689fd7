use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sparse_pde::datasets::{sample_analytic, solve_newell_whitehead, AnalyticSolution, FieldGrid, GridSpec, NwParams};
use sparse_pde::error::{Error, Result};
use sparse_pde::estimators::{EstimatorConfig, EstimatorKind, DEFAULT_GAMMA, DEFAULT_RIDGE_LAMBDA};
use sparse_pde::library::{
    build_library_analytic, build_library_numeric, enumerate_terms, ingest_library, TargetSource, TermLibrary,
    DEFAULT_POLY_DEGREE, DEFAULT_WINDOW, UT_COLUMN,
};
use sparse_pde::pipeline::{diagnose, discover, DiscoveryResult, DEFAULT_REFIT_RIDGE, DIAGNOSTIC_RIDGE};
use sparse_pde::recipes::{self, NOISE_SWEEP};
use sparse_pde::stability::{run_stability, StabilityConfig};
use sparse_pde::SupportSet;

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_EMPTY: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Environment variable pointing at the directory with external library files.
const DATA_DIR_ENV: &str = "SPARSE_PDE_DATA_DIR";
const KS_FILE: &str = "ks_case1.csv";
const BURGERS_CASE2_FILE: &str = "burgers_case2.csv";

#[derive(Parser)]
#[command(name = "sparse-pde", version, about = "Sparse discovery of PDEs from field data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark field (CSV + JSON manifest).
    Generate(GenerateArgs),
    /// Build a term library and export it as CSV.
    Library(LibraryArgs),
    /// Irrepresentability diagnostics for a given support.
    Diagnose(DiagnoseArgs),
    /// Full pipeline: stability selection, mask, Ridge refit.
    Discover(DiscoverArgs),
    /// Stability selection only.
    Stability(DiscoverArgs),
    /// Named reproduction recipes.
    Repro(ReproArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    Kdv,
    Kdv1,
    Burgers,
    Fisher,
    Nw,
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    x0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x1: Option<f64>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    t0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    t1: Option<f64>,
}

#[derive(Args, Clone)]
struct FieldArgs {
    /// Benchmark to generate.
    #[arg(long, value_enum)]
    dataset: Dataset,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 5.0)]
    c1: f64,
    #[arg(long, default_value_t = 2.0)]
    c2: f64,
    /// Single-soliton speed.
    #[arg(long, default_value_t = 5.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    nu: f64,
    /// Burgers initial mass.
    #[arg(long, default_value_t = 1.0)]
    mass: f64,
    /// Noise level as a fraction of the field's standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct LibrarySource {
    /// Library CSV (one sample per row).
    #[arg(long, conflicts_with_all = ["field", "dataset"])]
    library: Option<PathBuf>,
    /// Separate single-column u_t CSV for --library.
    #[arg(long, requires = "library")]
    target_file: Option<PathBuf>,
    /// Name of the u_t column inside --library.
    #[arg(long, default_value = UT_COLUMN)]
    target_column: String,
    /// Field manifest written by `generate`.
    #[arg(long, conflicts_with = "dataset")]
    field: Option<PathBuf>,
    #[arg(long, value_enum)]
    dataset: Option<Dataset>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Exact derivatives of the closed form instead of numerical ones.
    #[arg(long)]
    analytic: bool,
    #[arg(long)]
    max_poly: Option<usize>,
    #[arg(long)]
    max_deriv: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_POLY_DEGREE)]
    degree: usize,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
}

#[derive(Args)]
struct LibraryArgs {
    #[command(flatten)]
    source: LibrarySource,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[command(flatten)]
    source: LibrarySource,
    /// Comma-separated term names.
    #[arg(long, value_delimiter = ',', required = true)]
    support: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Ridge for the initial estimate of the adaptive weights.
    #[arg(long, default_value_t = DIAGNOSTIC_RIDGE)]
    ridge: f64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SelectionArgs {
    #[arg(long, value_enum, default_value = "radalasso")]
    estimator: EstimatorKind,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Ridge for the adaptive weights' initial estimate.
    #[arg(long, default_value_t = DEFAULT_RIDGE_LAMBDA)]
    ridge: f64,
    #[arg(long = "B", visible_alias = "resamples", default_value_t = 40)]
    resamples: usize,
    #[arg(long, default_value_t = 0.9)]
    pithr: f64,
    #[arg(long, default_value_t = 3.0)]
    evmax: f64,
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 30)]
    n_lambdas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run resamples on one thread.
    #[arg(long)]
    serial: bool,
    #[arg(long, default_value_t = DEFAULT_REFIT_RIDGE)]
    refit_ridge: f64,
}

impl SelectionArgs {
    fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig { gamma: self.gamma, ridge_lambda: self.ridge, ..EstimatorConfig::with_kind(self.estimator) }
    }

    fn stability(&self) -> StabilityConfig {
        StabilityConfig {
            n_resamples: self.resamples,
            pi_thr: self.pithr,
            ev_max: self.evmax,
            eps: self.eps,
            n_lambdas: self.n_lambdas,
            seed: self.seed,
            parallel: !self.serial,
        }
    }
}

#[derive(Args)]
struct DiscoverArgs {
    #[command(flatten)]
    source: LibrarySource,
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Recipe {
    KdvFig1,
    KsCase1,
    BurgersCase2,
    Fig4Suite,
}

#[derive(Args)]
struct ReproArgs {
    #[arg(value_enum)]
    recipe: Recipe,
    #[arg(long, short)]
    out: PathBuf,
    /// Directory with external library files (defaults to $SPARSE_PDE_DATA_DIR).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

fn grid_for(dataset: Dataset, args: &GridArgs) -> GridSpec {
    let base = match dataset {
        Dataset::Kdv | Dataset::Kdv1 => GridSpec::kdv(),
        Dataset::Burgers => GridSpec::burgers(),
        Dataset::Fisher => GridSpec::new(40, (-10.0, 10.0), 50, (0.0, 2.0)),
        Dataset::Nw => GridSpec::newell_whitehead(),
    };
    GridSpec {
        nx: args.nx.unwrap_or(base.nx),
        x0: args.x0.unwrap_or(base.x0),
        x1: args.x1.unwrap_or(base.x1),
        nt: args.nt.unwrap_or(base.nt),
        t0: args.t0.unwrap_or(base.t0),
        t1: args.t1.unwrap_or(base.t1),
    }
}

fn solution_for(dataset: Dataset, f: &FieldArgs) -> Option<AnalyticSolution> {
    match dataset {
        Dataset::Kdv => Some(AnalyticSolution::KdV2Soliton { c1: f.c1, c2: f.c2 }),
        Dataset::Kdv1 => Some(AnalyticSolution::KdV1Soliton { c: f.c }),
        Dataset::Burgers => Some(AnalyticSolution::BurgersDirac { nu: f.nu, a: f.mass }),
        Dataset::Fisher => Some(AnalyticSolution::fisher()),
        Dataset::Nw => None,
    }
}

fn generate_field(f: &FieldArgs) -> Result<FieldGrid> {
    let grid = grid_for(f.dataset, &f.grid);
    let clean = match solution_for(f.dataset, f) {
        Some(sol) => sample_analytic(&sol, &grid)?,
        None => solve_newell_whitehead(&grid, &NwParams::default())?,
    };
    recipes::noisy(&clean, f.noise, f.noise_seed)
}

fn field_args(dataset: Dataset, s: &LibrarySource) -> FieldArgs {
    FieldArgs {
        dataset,
        grid: s.grid.clone(),
        c1: 5.0,
        c2: 2.0,
        c: 5.0,
        nu: 0.1,
        mass: 1.0,
        noise: s.noise,
        noise_seed: s.noise_seed,
    }
}

/// The library plus the field it came from, when there is one.
fn load_library(s: &LibrarySource) -> Result<(Option<FieldGrid>, TermLibrary)> {
    if let Some(path) = &s.library {
        let target = match &s.target_file {
            Some(f) => TargetSource::File(f),
            None => TargetSource::Named(&s.target_column),
        };
        return Ok((None, ingest_library(path, target, None)?));
    }
    let default_terms = matches!(s.dataset, Some(Dataset::Kdv)).then_some((2, 3)).unwrap_or((5, 5));
    let terms = enumerate_terms(s.max_poly.unwrap_or(default_terms.0), s.max_deriv.unwrap_or(default_terms.1));
    let field = match (&s.field, s.dataset) {
        (Some(path), _) => FieldGrid::read(path)?,
        (None, Some(ds)) => {
            let f = field_args(ds, s);
            if s.analytic {
                let sol = solution_for(ds, &f)
                    .ok_or_else(|| Error::InvalidData("this dataset has no closed form".into()))?;
                if s.noise > 0.0 {
                    return Err(Error::InvalidData("--analytic libraries are noiseless".into()));
                }
                let grid = grid_for(ds, &s.grid);
                let lib = build_library_analytic(&sol, &grid, &terms)?;
                return Ok((Some(sample_analytic(&sol, &grid)?), lib));
            }
            generate_field(&f)?
        }
        (None, None) => return Err(Error::InvalidData("one of --library, --field or --dataset is required".into())),
    };
    let lib = build_library_numeric(&field, &terms, s.degree, s.window)?;
    Ok((Some(field), lib))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn report(result: &DiscoveryResult) {
    println!("{}", result.equation);
    if let Some(d) = &result.delta {
        println!("delta raw = {:.4} ({}), adaptive = {:.3e}", d.raw.delta, d.raw.verdict(), d.adaptive.delta);
    }
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
}

fn run_discover(args: &DiscoverArgs) -> Result<u8> {
    let (field, lib) = load_library(&args.source)?;
    let result = discover(&lib, &args.selection.estimator(), &args.selection.stability(), args.selection.refit_ridge)?;
    result.write(&args.out)?;
    if let Some(f) = field {
        f.write(&args.out, "field")?;
    }
    report(&result);
    Ok(if result.stable_set.is_empty() { EXIT_EMPTY } else { EXIT_OK })
}

fn run_stability_only(args: &DiscoverArgs) -> Result<u8> {
    let (_, lib) = load_library(&args.source)?;
    let est = args.selection.estimator();
    if est.kind == EstimatorKind::ThresholdedLassoCv {
        return Err(Error::InvalidData("stability selection needs a path-based estimator".into()));
    }
    let report = run_stability(&lib.problem()?, &est, &args.selection.stability())?;
    let names = lib.names();
    fs::create_dir_all(&args.out)?;
    report.write_paths_csv(&args.out.join("stability_paths.csv"), &names)?;
    report.write_error_bound_csv(&args.out.join("error_bound.csv"))?;
    let summary = report.summary(&names);
    write_json(&args.out.join("stability.json"), &summary)?;
    println!("stable set: {{{}}}", summary.stable_terms.join(", "));
    if report.lambda_star_is_empty() {
        eprintln!("warning: no valid region; the smallest workable ev_max is {:.3}", report.min_ev_max());
    }
    Ok(if report.stable_set.is_empty() { EXIT_EMPTY } else { EXIT_OK })
}

fn run_diagnose(args: &DiagnoseArgs) -> Result<u8> {
    let (_, lib) = load_library(&args.source)?;
    let support = SupportSet::new(lib.indices_of(&args.support)?, lib.p())?;
    let pair = diagnose(&lib, &support, args.gamma, args.ridge)?;
    println!("delta(theta, T)       = {:.6} ({})", pair.raw.delta, pair.raw.verdict());
    println!("delta(theta_ada, T)   = {:.6e} ({})", pair.adaptive.delta, pair.adaptive.verdict());
    println!("worst irrelevant term = {}", lib.terms[pair.raw.argmax_column].name);
    println!("scaling: {} (unscaled columns give {:.6})", pair.scaling, pair.unscaled.delta);
    if let Some(out) = &args.out {
        write_json(&out.join("delta.json"), &pair)?;
    }
    Ok(EXIT_OK)
}

fn data_file(args: &ReproArgs, name: &str) -> Result<PathBuf> {
    let dir = args
        .data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .ok_or_else(|| Error::InvalidData(format!("set --data-dir or {DATA_DIR_ENV} to locate {name}")))?;
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::InvalidData(format!("{} not found", path.display())));
    }
    Ok(path)
}

fn stability_with(seed: u64, ev_max: f64) -> StabilityConfig {
    StabilityConfig { seed, ev_max, ..StabilityConfig::default() }
}

fn run_ingested(args: &ReproArgs, file: &str, ev_max: f64) -> Result<u8> {
    let lib = ingest_library(&data_file(args, file)?, TargetSource::Named(UT_COLUMN), None)?;
    let result = discover(&lib, &EstimatorConfig::default(), &stability_with(args.seed, ev_max), DEFAULT_REFIT_RIDGE)?;
    result.write(&args.out)?;
    report(&result);
    Ok(if result.stable_set.is_empty() { EXIT_EMPTY } else { EXIT_OK })
}

#[derive(Serialize)]
struct SuiteEntry {
    dataset: &'static str,
    noise: f64,
    equation: String,
    stable_terms: Vec<String>,
}

fn run_fig4_suite(args: &ReproArgs) -> Result<u8> {
    let stab = stability_with(args.seed, 3.0);
    let est = EstimatorConfig::default();
    let mut entries = Vec::new();
    for &alpha in &NOISE_SWEEP {
        let pct = (alpha * 100.0).round() as u32;
        let cases: Vec<(&'static str, Result<TermLibrary>)> = vec![
            ("burgers", recipes::burgers_numeric_library(&recipes::burgers_discovery_grid(), alpha, args.noise_seed).map(|x| x.1)),
            ("nw", recipes::newell_whitehead_library(&GridSpec::newell_whitehead(), alpha, args.noise_seed).map(|x| x.1)),
        ];
        for (name, lib) in cases {
            let result = discover(&lib?, &est, &stab, DEFAULT_REFIT_RIDGE)?;
            result.write(&args.out.join(format!("{name}_{pct}pct")))?;
            println!("{name:>8} {pct:>3}%  {}", result.equation);
            entries.push(SuiteEntry { dataset: name, noise: alpha, equation: result.equation.clone(), stable_terms: result.support_names() });
        }
    }
    let kdv = discover(&recipes::kdv_library()?, &est, &stab, DEFAULT_REFIT_RIDGE)?;
    kdv.write(&args.out.join("kdv_analytic"))?;
    println!("{:>8} {:>3}   {}", "kdv", "-", kdv.equation);
    entries.push(SuiteEntry { dataset: "kdv", noise: 0.0, equation: kdv.equation.clone(), stable_terms: kdv.support_names() });
    write_json(&args.out.join("suite.json"), &entries)?;
    Ok(EXIT_OK)
}

fn run_repro(args: &ReproArgs) -> Result<u8> {
    match args.recipe {
        Recipe::KdvFig1 => {
            let (lib, lasso, ada, summary) = recipes::kdv_fig1()?;
            fs::create_dir_all(&args.out)?;
            let names = lib.names();
            lasso.write_csv(&args.out.join("lasso_path.csv"), &names)?;
            ada.write_csv(&args.out.join("adalasso_path.csv"), &names)?;
            write_json(&args.out.join("delta.json"), &summary)?;
            println!(
                "delta = {:.4}, adaptive delta = {:.3e}; exact support hit by lasso on {}/{} and adaptive lasso on {}/{} lambdas",
                summary.delta.raw.delta, summary.delta.adaptive.delta, summary.lasso_hits, summary.points, summary.adaptive_hits, summary.points
            );
            Ok(EXIT_OK)
        }
        Recipe::KsCase1 => run_ingested(args, KS_FILE, 2.0),
        Recipe::BurgersCase2 => run_ingested(args, BURGERS_CASE2_FILE, 2.0),
        Recipe::Fig4Suite => run_fig4_suite(args),
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Generate(a) => {
            let field = generate_field(&a.field)?;
            let path = field.write(&a.out, "field")?;
            println!("{}", path.display());
            Ok(EXIT_OK)
        }
        Command::Library(a) => {
            let (_, lib) = load_library(&a.source)?;
            fs::create_dir_all(&a.out)?;
            lib.write_csv(&a.out.join("library.csv"))?;
            write_json(&a.out.join("library_meta.json"), &lib.meta())?;
            println!("n = {}, p = {}", lib.n(), lib.p());
            Ok(EXIT_OK)
        }
        Command::Diagnose(a) => run_diagnose(&a),
        Command::Discover(a) => run_discover(&a),
        Command::Stability(a) => run_stability_only(&a),
        Command::Repro(a) => run_repro(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
