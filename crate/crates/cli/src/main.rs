//! `addgp` command-line tool.
//!
//! Exit status: 0 on success, 1 for usage and input errors, 2 for numerical
//! failures (singular design without noise, failed likelihood fits).

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::LazyLock;

use addgp::additive::{centered_submodel, raw_submodel, uniform_grid, DEFAULT_GRID_POINTS};
use addgp::bench::{
    gfun_replicate, main_effect_table, run_add_vs_sep, run_gfun_benchmark, run_p_collapse, write_fig3_table,
    write_fig4_table, write_fig5_table, write_fig6_table, write_records_csv, Experiment, ExperimentMetadata,
    ExperimentRecord, GFunOptions, Theta,
};
use addgp::doe::{generate, read_design_csv, write_design_files};
use addgp::fit::mle_fit;
use addgp::kriging::DEFAULT_RANK_TOL;
use addgp::{
    detect_rank_deficiency, fit, DoeConfig, DoeKind, Error, FitConfig, GpModel, KernelFamily, KernelSpec,
    ModelDocument, RankReport, Structure, TrendMode,
};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::config::{pick, ConfigFile};

static VERSION: LazyLock<String> = LazyLock::new(|| {
    format!(
        "{} (library addgp {}, rng {})",
        env!("CARGO_PKG_VERSION"),
        addgp::VERSION,
        addgp::RNG_ALGORITHM
    )
});

#[derive(Parser, Debug)]
#[command(name = "addgp", about = "Additive-kernel Kriging: designs, fits, submodels and benchmarks")]
struct Cli {
    /// JSON file with per-subcommand defaults (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a design of experiments.
    Doe(DoeArgs),
    /// Condition a model on data, estimating hyperparameters unless a kernel is given.
    Fit(FitArgs),
    /// Predict mean and variance at new points.
    Predict(PredictArgs),
    /// Export one main effect of an additive model.
    Submodel(SubmodelArgs),
    /// Check a design for the rank deficiency of additive kernels.
    Audit(AuditArgs),
    /// Explained variance of separable SE models versus dimension.
    BenchP(BenchPArgs),
    /// Additive versus separable emulators of a half-additive process.
    BenchAddsep(BenchAddSepArgs),
    /// Q² of separable and additive models on the g-function.
    BenchGfun(BenchGFunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindArg {
    Lhs,
    Uniform,
    #[value(name = "fig1left")]
    Fig1left,
    #[value(name = "fig1right")]
    Fig1right,
}

impl From<KindArg> for DoeKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Lhs => DoeKind::LatinHypercube,
            KindArg::Uniform => DoeKind::UniformIid,
            KindArg::Fig1left => DoeKind::Fig1Left,
            KindArg::Fig1right => DoeKind::Fig1Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Se,
    Matern52,
}

impl From<FamilyArg> for KernelFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Se => KernelFamily::SquaredExponential,
            FamilyArg::Matern52 => KernelFamily::Matern52,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureArg {
    Additive,
    Separable,
}

impl From<StructureArg> for Structure {
    fn from(s: StructureArg) -> Self {
        match s {
            StructureArg::Additive => Structure::Additive,
            StructureArg::Separable => Structure::Separable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendArg {
    Simple,
    Ordinary,
}

#[derive(Args, Debug)]
struct DoeArgs {
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; metadata goes to the same path with extension `.meta.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Design CSV with header x1,…,xd.
    #[arg(long)]
    design: PathBuf,
    /// Observations CSV with a single column `y`.
    #[arg(long)]
    response: PathBuf,
    /// Kernel JSON with fixed hyperparameters; skips estimation.
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long, value_enum)]
    structure: Option<StructureArg>,
    #[arg(long, value_enum)]
    trend: Option<TrendArg>,
    /// Known mean for the simple trend.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_evals: Option<usize>,
    /// Estimate one range and variance per dimension.
    #[arg(long)]
    anisotropic: bool,
    /// Model JSON output.
    #[arg(long)]
    out: PathBuf,
    /// Optimizer trace CSV output.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Points CSV with header x1,…,xd.
    #[arg(long)]
    points: PathBuf,
    /// CSV output with columns x1,…,xd,mean,variance (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SubmodelArgs {
    #[arg(long)]
    model: PathBuf,
    /// Input dimension, counted from 1.
    #[arg(long)]
    dim: usize,
    /// Number of equispaced grid points.
    #[arg(long)]
    grid: Option<usize>,
    /// Export the uncentered submodel instead.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    kernel: PathBuf,
    /// Relative eigenvalue threshold.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchPArgs {
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    /// Range values; `sqrt(d)` scales with the dimension.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<Theta>>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Aggregated `d,theta,P` table.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchAddSepArgs {
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Aggregated `d,P_mA,P_mS` table.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchGFunArgs {
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    n_t: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Q² quartiles per dimension and model.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// Centered first main effect of the first replicate's additive model
    /// next to the analytic one.
    #[arg(long)]
    main_effect: Option<PathBuf>,
}

/// Failure carrying its exit status.
enum Failure {
    Usage(String),
    Library(Error),
    /// Already reported on stdout.
    Reported(u8),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let command = Cli::command().version(VERSION.as_str());
    let cli = match command.try_get_matches().and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Reported(code)) => ExitCode::from(code),
        Err(Failure::Library(e)) => {
            eprintln!("error: {e}");
            if let Error::SingularDesign(report) = &e {
                print_report(&mut std::io::stderr(), report);
            }
            ExitCode::from(if numerical(&e) { 2 } else { 1 })
        }
    }
}

fn numerical(e: &Error) -> bool {
    e.is_numerical() || matches!(e, Error::UnattainableTarget(_))
}

fn run(cli: Cli) -> CmdResult {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let cfg = config::load(cli.config.as_deref()).map_err(|e| Failure::Usage(format!("config: {e}")))?;
    match cli.command {
        Command::Doe(a) => doe(a, &cfg),
        Command::Fit(a) => fit_cmd(a, &cfg),
        Command::Predict(a) => predict(a),
        Command::Submodel(a) => submodel(a, &cfg),
        Command::Audit(a) => audit(a, &cfg),
        Command::BenchP(a) => bench_p(a, &cfg),
        Command::BenchAddsep(a) => bench_addsep(a, &cfg),
        Command::BenchGfun(a) => bench_gfun(a, &cfg),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn read_design(path: &Path) -> Result<addgp::Design, Error> {
    read_design_csv(File::open(path)?)
}

fn read_kernel(path: &Path) -> Result<KernelSpec, Error> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn read_response(path: &Path) -> Result<Vec<f64>, Failure> {
    let mut r = csv::Reader::from_reader(File::open(path).map_err(Error::from)?);
    let headers = r.headers().map_err(Error::from)?;
    if headers.len() != 1 || headers[0].trim() != "y" {
        return Err(Failure::Usage(format!("{}: expected a single column 'y'", path.display())));
    }
    let mut y = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(Error::from)?;
        let v = rec[0]
            .trim()
            .parse::<f64>()
            .map_err(|_| Failure::Usage(format!("{}: not a number '{}'", path.display(), &rec[0])))?;
        y.push(v);
    }
    Ok(y)
}

fn read_model(path: &Path) -> Result<GpModel, Error> {
    let doc: ModelDocument = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    GpModel::from_document(&doc)
}

fn print_report(out: &mut dyn Write, report: &RankReport) {
    let _ = writeln!(
        out,
        "rank deficient: {} null relation(s) among the observations",
        report.null_vectors.len()
    );
    for rel in report.relations() {
        let _ = writeln!(out, "  {rel}");
    }
    let one_based = |v: &[usize]| v.iter().map(|i| format!("x{}", i + 1)).collect::<Vec<_>>().join(" ");
    for (k, pts) in report.implicated_points.iter().enumerate() {
        let _ = writeln!(out, "  relation {} involves: {}", k + 1, one_based(pts));
    }
    let _ = writeln!(out, "  removing {} restores full rank", one_based(&report.removable));
}

fn doe(a: DoeArgs, cfg: &ConfigFile) -> CmdResult {
    let c = &cfg.doe;
    let kind = pick(a.kind, c.kind, KindArg::Lhs);
    let (n_default, d_default) = match kind {
        KindArg::Fig1left => (4, 2),
        KindArg::Fig1right => (6, 2),
        _ => (0, 0),
    };
    let doe_cfg = DoeConfig {
        n: pick(a.n, c.n, n_default),
        d: pick(a.d, c.d, d_default),
        seed: pick(a.seed, c.seed, 0),
        kind: kind.into(),
    };
    let design = generate(&doe_cfg)?;
    write_design_files(&design, &doe_cfg, &a.out)?;
    Ok(())
}

fn fit_cmd(a: FitArgs, cfg: &ConfigFile) -> CmdResult {
    let c = &cfg.fit;
    let design = read_design(&a.design)?;
    let y = read_response(&a.response)?;
    let trend = match pick(a.trend, c.trend, TrendArg::Ordinary) {
        TrendArg::Ordinary => {
            if a.mu.is_some() {
                return Err(Failure::Usage("--mu only applies to the simple trend".into()));
            }
            TrendMode::Ordinary
        }
        TrendArg::Simple => TrendMode::simple(pick(a.mu, c.mu, 0.0))?,
    };
    let spec = match &a.kernel {
        Some(path) => {
            if a.family.is_some() || a.structure.is_some() || a.starts.is_some() || a.trace.is_some() {
                return Err(Failure::Usage(
                    "--kernel fixes the hyperparameters; estimation options do not apply".into(),
                ));
            }
            read_kernel(path)?
        }
        None => {
            let mut fit_cfg = c.optimizer.clone().unwrap_or_default();
            fit_cfg.n_starts = pick(a.starts, None, fit_cfg.n_starts);
            fit_cfg.seed = pick(a.seed, None, fit_cfg.seed);
            fit_cfg.max_evals = pick(a.max_evals, None, fit_cfg.max_evals);
            if a.anisotropic {
                fit_cfg.isotropic = false;
            }
            let family = pick(a.family, c.family, FamilyArg::Matern52).into();
            let structure = pick(a.structure, c.structure, StructureArg::Additive).into();
            let outcome = mle_fit(family, structure, &design, &y, trend, &fit_cfg)?;
            println!("log-likelihood: {}", outcome.log_likelihood);
            if outcome.degenerate {
                eprintln!("warning: an estimate sits on its search bound; the data do not identify it");
            }
            if let Some(path) = &a.trace {
                outcome.write_trace_csv(create(path)?)?;
            }
            outcome.spec
        }
    };
    let model = fit(&spec, &design, &y, trend)?;
    let doc = model.to_document()?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&doc).map_err(Error::from)?).map_err(Error::from)?;
    println!("kernel: {}", serde_json::to_string(&spec).map_err(Error::from)?);
    Ok(())
}

fn predict(a: PredictArgs) -> CmdResult {
    let model = read_model(&a.model)?;
    let points = read_design(&a.points)?;
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    let mut header: Vec<String> = (1..=points.dim()).map(|j| format!("x{j}")).collect();
    header.extend(["mean".into(), "variance".into()]);
    w.write_record(&header).map_err(Error::from)?;
    for x in points.rows() {
        let (m, v) = model.predict(x)?;
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.extend([m.to_string(), v.to_string()]);
        w.write_record(&row).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;
    Ok(())
}

fn submodel(a: SubmodelArgs, cfg: &ConfigFile) -> CmdResult {
    let c = &cfg.submodel;
    let model = read_model(&a.model)?;
    if a.dim == 0 || a.dim > model.dim() {
        return Err(Failure::Usage(format!("--dim must lie in 1..={}", model.dim())));
    }
    let grid = uniform_grid(pick(a.grid, c.grid, DEFAULT_GRID_POINTS));
    let raw = a.raw || c.raw.unwrap_or(false);
    let curve = if raw {
        raw_submodel(&model, a.dim - 1, &grid)?
    } else {
        centered_submodel(&model, a.dim - 1, &grid)?
    };
    curve.write_csv(output(a.out.as_deref())?)?;
    Ok(())
}

fn audit(a: AuditArgs, cfg: &ConfigFile) -> CmdResult {
    let design = read_design(&a.design)?;
    let spec = read_kernel(&a.kernel)?;
    let tol = pick(a.tol, cfg.audit.tol, DEFAULT_RANK_TOL);
    let report = detect_rank_deficiency(&spec, &design, tol)?;
    if let Some(path) = &a.report {
        std::fs::write(path, serde_json::to_string_pretty(&report).map_err(Error::from)?).map_err(Error::from)?;
    }
    if report.deficient {
        print_report(&mut std::io::stdout(), &report);
        return Err(Failure::Reported(2));
    }
    println!("full rank: {} points", design.n());
    Ok(())
}

fn write_records(records: &[ExperimentRecord], meta: &ExperimentMetadata, out: &Path) -> Result<(), Error> {
    write_records_csv(records, create(out)?)?;
    let meta_path = out.with_extension("meta.json");
    std::fs::write(meta_path, serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

fn check_grid(d: &[usize]) -> CmdResult {
    if d.is_empty() || d.contains(&0) {
        return Err(Failure::Usage("--d needs positive dimensions".into()));
    }
    Ok(())
}

fn bench_p(a: BenchPArgs, cfg: &ConfigFile) -> CmdResult {
    let c = &cfg.bench_p;
    let d = pick(a.d, c.d.clone(), vec![2, 5, 10, 15]);
    check_grid(&d)?;
    let theta = match (a.theta, &c.theta) {
        (Some(t), _) => t,
        (None, Some(t)) => t.iter().map(|s| s.parse()).collect::<Result<Vec<Theta>, _>>()?,
        (None, None) => vec![Theta::Fixed(0.5), Theta::Fixed(1.0), Theta::SqrtD],
    };
    let n_t = pick(a.n_t, c.n_t, 2000);
    let seed = pick(a.seed, c.seed, 0);
    let records = run_p_collapse(&d, &theta, n_t, seed)?;
    let mut meta = ExperimentMetadata::new(Experiment::PCollapse, seed, &d, n_t, 1);
    meta.theta_grid = theta.iter().map(|t| t.to_string()).collect();
    write_records(&records, &meta, &a.out)?;
    if let Some(p) = &a.plot_data {
        write_fig3_table(&records, create(p)?)?;
    }
    Ok(())
}

fn bench_addsep(a: BenchAddSepArgs, cfg: &ConfigFile) -> CmdResult {
    let c = &cfg.bench_addsep;
    let d = pick(a.d, c.d.clone(), vec![2, 5, 10, 15]);
    check_grid(&d)?;
    let n_t = pick(a.n_t, c.n_t, 2000);
    let seed = pick(a.seed, c.seed, 0);
    let records = run_add_vs_sep(&d, n_t, seed)?;
    let meta = ExperimentMetadata::new(Experiment::AddVsSep, seed, &d, n_t, 1);
    write_records(&records, &meta, &a.out)?;
    if let Some(p) = &a.plot_data {
        write_fig4_table(&records, create(p)?)?;
    }
    Ok(())
}

fn bench_gfun(a: BenchGFunArgs, cfg: &ConfigFile) -> CmdResult {
    let c = &cfg.bench_gfun;
    let d = pick(a.d, c.d.clone(), vec![5]);
    check_grid(&d)?;
    let replicates = pick(a.replicates, c.replicates, 10);
    let n_t = pick(a.n_t, c.n_t, 1000);
    let seed = pick(a.seed, c.seed, 0);
    let mut fit_cfg: FitConfig = c.optimizer.clone().unwrap_or_default();
    fit_cfg.n_starts = pick(a.starts, None, fit_cfg.n_starts);
    let opts = GFunOptions {
        fit: fit_cfg,
        family: pick(a.family, c.family, FamilyArg::Matern52).into(),
    };
    let records = run_gfun_benchmark(&d, replicates, n_t, seed, &opts)?;
    let failed = records.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        eprintln!("warning: {failed} fit(s) failed; recorded with a NaN criterion");
    }
    let meta = ExperimentMetadata::new(Experiment::GFunQ2, seed, &d, n_t, replicates);
    write_records(&records, &meta, &a.out)?;
    if let Some(p) = &a.plot_data {
        write_fig5_table(&records, create(p)?)?;
    }
    if let Some(p) = &a.main_effect {
        let rep = gfun_replicate(d[0], 0, n_t, seed, &opts)?;
        let model = rep.akm?;
        let (curve, analytic) = main_effect_table(&model, &rep.g, 0, &uniform_grid(DEFAULT_GRID_POINTS))?;
        write_fig6_table(&curve, &analytic, create(p)?)?;
    }
    Ok(())
}
