//! The `orca` command-line front end.
//!
//! Exit codes: 0 success, 1 other failures, 2 usage, 3 degenerate model,
//! 4 I/O, 5 solver non-convergence under `--strict`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::datasets::{
    generate_spiral, read_echocardiogram, Dataset, SpiralConfig, ECHO_EXPECTED_ROWS,
};
use crate::error::OrcaError;
use crate::expansion::{contract, extract_coefficients, mode_count};
use crate::kernel::KernelSpec;
use crate::orca::{analyze, OrcaReport, DEFAULT_EPSILONS};
use crate::orthopoly::JacobiParams;
use crate::svm::{train, SvmConfig, TrainedModel};

/// Default cap on the number of expansion modes `(n+1)^d`.
pub const DEFAULT_BUDGET: usize = 50_000_000;

const ECHO_URL: &str =
    "https://archive.ics.uci.edu/ml/machine-learning-databases/echocardiogram/echocardiogram.data";

#[derive(Debug, Parser)]
#[command(
    name = "orca",
    version,
    about = "Jacobi-kernel SVMs and ORCA contribution indices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the double-spiral dataset as interchange CSV.
    GenSpiral(GenSpiralArgs),
    /// Train a model on an interchange CSV and write it as JSON.
    Train(TrainArgs),
    /// Compute the ORCA report of a trained model.
    Report(ReportArgs),
    /// Train and report over a list of degrees, one CSV row per degree.
    Sweep(SweepArgs),
    /// Evaluate a d = 2 model on a uniform grid over [-1, 1]^2.
    Boundary(BoundaryArgs),
    /// Convert the raw UCI echocardiogram file to interchange CSV.
    Echo(EchoArgs),
}

#[derive(Debug, Args)]
pub struct GenSpiralArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 150)]
    pub points_per_class: usize,
    #[arg(long, default_value_t = 1.5)]
    pub turns: f64,
    #[arg(long, default_value_t = 0.02)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0.15)]
    pub inner_radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub outer_radius: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct KernelArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cost: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub kkt_tol: f64,
    /// Seed for solver tie-breaking.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with code 5 if the solver does not converge.
    #[arg(long)]
    pub strict: bool,
    /// Refuse kernels with more than this many modes (n+1)^d.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub degree: usize,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPSILONS.to_vec())]
    pub epsilons: Vec<f64>,
    /// Write the full report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the one-row table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the coefficient tensor as a binary dump.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub degrees: Vec<usize>,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_EPSILONS.to_vec())]
    pub epsilons: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BoundaryArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EchoArgs {
    /// Raw UCI file to read.
    #[arg(long, required_unless_present = "download")]
    pub input: Option<PathBuf>,
    /// Fetch the raw file from the UCI repository first (needs network).
    #[arg(long, requires = "raw_out")]
    pub download: bool,
    /// Where to store the downloaded raw file.
    #[arg(long)]
    pub raw_out: Option<PathBuf>,
    /// Skip rows with a wrong field count instead of failing.
    #[arg(long)]
    pub lenient: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<OrcaError> for Failure {
    fn from(e: OrcaError) -> Self {
        let code = match &e {
            OrcaError::DegenerateModel => 3,
            OrcaError::Io(_) | OrcaError::FileNotFound(_) => 4,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 4,
        message: format!("{}: {e}", path.display()),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().ok_or_else(|| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name")
    })?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}

fn save(path: &Path, bytes: &[u8]) -> CliResult<()> {
    write_atomic(path, bytes).map_err(|e| io_failure(path, e))
}

fn load_model(path: &Path) -> CliResult<TrainedModel> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    Ok(TrainedModel::from_json(&text)?)
}

fn check_budget(degree: usize, d: usize, budget: usize) -> CliResult<usize> {
    let modes = mode_count(degree, d)
        .map_err(|_| usage(format!("(n+1)^d overflows for n={degree}, d={d}")))?;
    if modes > budget {
        return Err(usage(format!(
            "n={degree}, d={d} needs {modes} expansion modes, above --budget {budget}"
        )));
    }
    Ok(modes)
}

fn csv_text(header: &[String], rows: &[Vec<String>]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(OrcaError::from)?;
    for row in rows {
        w.write_record(row).map_err(OrcaError::from)?;
    }
    w.into_inner().map_err(|e| usage(e.to_string()))
}

fn train_model(data: &Dataset, degree: usize, args: &KernelArgs) -> CliResult<TrainedModel> {
    let params = JacobiParams::new(args.alpha, args.beta)?;
    check_budget(degree, data.dim(), args.budget)?;
    let spec = KernelSpec::jacobi(params, degree, data.dim())?;
    let config = SvmConfig {
        cost: args.cost,
        kkt_tol: args.kkt_tol,
        max_passes: None,
        seed: args.seed,
    };
    Ok(train(&spec, data, &config)?)
}

/// Coefficient extraction plus analysis, the shared core of `report` and
/// `sweep`.
pub fn report_for(model: &TrainedModel, epsilons: &[f64]) -> crate::Result<OrcaReport> {
    analyze(&extract_coefficients(model)?, epsilons)
}

fn gen_spiral(args: GenSpiralArgs) -> CliResult<()> {
    let config = SpiralConfig {
        points_per_class: args.points_per_class,
        turns: args.turns,
        noise_sd: args.noise_sd,
        inner_radius: args.inner_radius,
        outer_radius: args.outer_radius,
        seed: args.seed,
    };
    let data = generate_spiral(&config)?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    save(&args.out, &buf)?;
    println!("m = {}, seed = {}", data.len(), config.seed);
    println!(
        "points_per_class = {}, turns = {}, noise_sd = {}, inner_radius = {}, outer_radius = {}",
        config.points_per_class,
        config.turns,
        config.noise_sd,
        config.inner_radius,
        config.outer_radius
    );
    Ok(())
}

fn train_cmd(args: TrainArgs) -> CliResult<()> {
    let data = Dataset::read_csv(&args.data)?;
    let model = train_model(&data, args.degree, &args.kernel)?;
    save(&args.out, model.to_json()?.as_bytes())?;
    println!("training accuracy: {:.4}", model.accuracy(&data)?);
    println!(
        "support vectors: {} / {}",
        model.support_vector_count(),
        data.len()
    );
    println!("converged: {}", model.converged());
    println!("dual objective: {}", model.dual_objective());
    if !model.converged() {
        if args.kernel.strict {
            return Err(Failure {
                code: 5,
                message: "solver did not converge".into(),
            });
        }
        eprintln!("warning: solver did not converge");
    }
    Ok(())
}

fn report_cmd(args: ReportArgs) -> CliResult<()> {
    let model = load_model(&args.model)?;
    check_budget(model.spec().degree(), model.spec().dim(), args.budget)?;
    let tensor = extract_coefficients(&model)?;
    if let Some(path) = &args.coeffs {
        let mut buf = Vec::new();
        tensor.write_binary(&mut buf)?;
        save(path, &buf)?;
    }
    let report = analyze(&tensor, &args.epsilons).map_err(|e| match e {
        OrcaError::InvalidConfig(m) => usage(m),
        other => other.into(),
    })?;
    if let Some(path) = &args.json {
        save(
            path,
            serde_json::to_string_pretty(&report)
                .map_err(OrcaError::from)?
                .as_bytes(),
        )?;
    }
    if let Some(path) = &args.csv {
        save(path, &csv_text(&report.csv_header(), &[report.csv_row()])?)?;
    }
    println!("{}", report.display_header());
    println!("{}", report.display_row());
    Ok(())
}

fn sweep_cmd(args: SweepArgs) -> CliResult<()> {
    if args.degrees.is_empty() {
        return Err(usage("--degrees must list at least one degree"));
    }
    if let Some(bad) = args.epsilons.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
        return Err(usage(format!("epsilon {bad} is not in (0, 1)")));
    }
    let data = Dataset::read_csv(&args.data)?;
    let d = data.dim();
    for &n in &args.degrees {
        match mode_count(n, d) {
            Ok(modes) => println!("n = {n}: (n+1)^d = {modes} coefficients"),
            Err(_) => println!("n = {n}: (n+1)^d overflows"),
        }
    }
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let width_hint = 3 + (d + 1) + d + 1 + 2 * args.epsilons.len();
    for &n in &args.degrees {
        let outcome = train_model(&data, n, &args.kernel).and_then(|model| {
            if !model.converged() && args.kernel.strict {
                return Err(Failure {
                    code: 5,
                    message: "solver did not converge".into(),
                });
            }
            let note = if model.converged() {
                String::new()
            } else {
                "not converged".into()
            };
            Ok((report_for(&model, &args.epsilons)?, note))
        });
        match outcome {
            Ok((report, note)) => {
                if header.is_none() {
                    println!("{}", report.display_header());
                }
                println!("{}", report.display_row());
                header.get_or_insert_with(|| report.csv_header());
                let mut row = report.csv_row();
                row.push(note);
                rows.push(row);
            }
            Err(f) => {
                eprintln!("n = {n}: {}", f.message);
                let mut row = vec![n.to_string()];
                row.resize(width_hint, String::new());
                row.push(f.message);
                rows.push(row);
            }
        }
    }
    let mut header = header.unwrap_or_else(|| {
        let mut h = vec!["n".to_string()];
        h.resize(width_hint, String::new());
        h
    });
    header.push("error".into());
    save(&args.out, &csv_text(&header, &rows)?)?;
    Ok(())
}

fn boundary_cmd(args: BoundaryArgs) -> CliResult<()> {
    let model = load_model(&args.model)?;
    let d = model.spec().dim();
    if d != 2 {
        return Err(OrcaError::NotTwoDimensional(d).into());
    }
    if args.grid == 0 {
        return Err(usage("--grid must be at least 1"));
    }
    let tensor = extract_coefficients(&model)?;
    let basis = model.spec().basis();
    let axis: Vec<f64> = if args.grid == 1 {
        vec![0.0]
    } else {
        (0..args.grid)
            .map(|i| -1.0 + 2.0 * i as f64 / (args.grid - 1) as f64)
            .collect()
    };
    let phi: Vec<Vec<f64>> = axis
        .iter()
        .map(|&t| basis.evaluate_all(t))
        .collect::<crate::Result<_>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x1", "x2", "g"]).map_err(OrcaError::from)?;
    for (a, pa) in axis.iter().zip(&phi) {
        for (b, pb) in axis.iter().zip(&phi) {
            let g = contract(tensor.coeffs(), &[pa.clone(), pb.clone()]) + model.bias();
            w.write_record([a.to_string(), b.to_string(), g.to_string()])
                .map_err(OrcaError::from)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| usage(e.to_string()))?;
    save(&args.out, &bytes)?;
    println!("{} grid points written", args.grid * args.grid);
    Ok(())
}

fn echo_cmd(args: EchoArgs) -> CliResult<()> {
    let input = if args.download {
        let raw_out = args.raw_out.clone().expect("clap enforces --raw-out");
        let body = ureq::get(ECHO_URL)
            .call()
            .and_then(|mut r| r.body_mut().read_to_string())
            .map_err(|e| Failure {
                code: 4,
                message: format!("download failed: {e}"),
            })?;
        save(&raw_out, body.as_bytes())?;
        raw_out
    } else {
        args.input.clone().expect("clap enforces --input")
    };
    let load = read_echocardiogram(&input, args.lenient)?;
    let mut buf = Vec::new();
    load.dataset.write_csv(&mut buf)?;
    save(&args.out, &buf)?;
    println!(
        "{} rows read, {} dropped for missing values, {} skipped as malformed, m = {}",
        load.total_rows,
        load.dropped_missing,
        load.skipped_malformed.len(),
        load.dataset.len()
    );
    if load.dataset.len() != ECHO_EXPECTED_ROWS {
        eprintln!(
            "warning: retained {} rows, expected {}",
            load.dataset.len(),
            ECHO_EXPECTED_ROWS
        );
    }
    Ok(())
}

fn configure_threads() {
    let Ok(value) = std::env::var("ORCA_THREADS") else {
        return;
    };
    match value.trim().parse::<usize>() {
        Ok(0) => {}
        Ok(n) => {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        Err(_) => eprintln!("warning: ignoring ORCA_THREADS={value:?}"),
    }
}

pub fn run(cli: Cli) -> ExitCode {
    configure_threads();
    let result = match cli.command {
        Command::GenSpiral(a) => gen_spiral(a),
        Command::Train(a) => train_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Boundary(a) => boundary_cmd(a),
        Command::Echo(a) => echo_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse())
}
