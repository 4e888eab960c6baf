use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use brsep::data::{load_dataset, Dataset, Family, FitOptions, Method};
use brsep::report::{compare, render_table, render_wald, separation_json, to_json, write_csv, Comparison, ALL_METHODS};
use brsep::separation::{detect_separation, INFINITE_SE_THRESHOLD};
use brsep::simulation::{generate_dataset, run_study_with_progress, DgpConfig, StudyConfig};
use brsep::Error;

#[derive(Parser)]
#[command(name = "brsep", version, about = "ML and bias-reduced Poisson and Tobit regression under separation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV file
    Fit(FitArgs),
    /// Check a CSV file for data separation
    Detect(DetectArgs),
    /// Run the Monte Carlo study and write per-cell metrics as CSV
    Simulate(SimulateArgs),
    /// Generate the separated illustration dataset and compare all strategies on it
    Illustrate(IllustrateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Poisson,
    Tobit,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Poisson => Family::Poisson,
            FamilyArg::Tobit => Family::Tobit,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Ml,
    Br,
    MlSub,
    MlSst,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Name of the response column; every other column is a regressor
    #[arg(long, default_value = "y")]
    response: String,
    #[arg(long, value_enum)]
    family: FamilyArg,
}

#[derive(Args)]
struct FitControl {
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

impl FitControl {
    fn options(&self) -> FitOptions {
        FitOptions { tol: self.tol, max_iter: self.max_iter, ..FitOptions::default() }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    #[command(flatten)]
    control: FitControl,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 10_000)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; results do not depend on this
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "25,50,100,200,400")]
    grid_n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.125,0.25,0.375,0.5")]
    grid_pi: Vec<f64>,
    #[command(flatten)]
    control: FitControl,
    /// Metrics CSV destination (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write one row per replicate here
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct IllustrateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    control: FitControl,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

enum Failure {
    Lib(Error),
    Convergence(String),
    Pattern(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Degenerate(_) | Error::SingularInformation { .. } | Error::Evaluation { .. } => 4,
        _ => 2,
    }
}

fn load(args: &InputArgs) -> Result<Dataset, Failure> {
    let file = File::open(&args.input)
        .map_err(|e| Error::Domain(format!("cannot open {}: {e}", args.input.display())))?;
    Ok(load_dataset(io::BufReader::new(file), &args.response, args.family.into())?)
}

fn emit(c: &Comparison, format: Format, single: bool) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    match format {
        Format::Table if single => write!(out, "{}", render_wald(&c.fits[0]))?,
        Format::Table => write!(out, "{}", render_table(c))?,
        Format::Json => writeln!(out, "{}", to_json(c)?)?,
        Format::Csv => write_csv(c, &mut out)?,
    }
    Ok(())
}

/// A fit that stopped on the iteration limit is only acceptable when it was
/// walking out along a separating direction.
fn check_convergence(c: &Comparison) -> Result<(), Failure> {
    let bad: Vec<&str> = c
        .fits
        .iter()
        .filter(|m| !m.fit.converged && !m.infinite.iter().any(|&b| b))
        .map(|m| m.fit.method.label())
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Convergence(format!("no convergence for {}", bad.join(", "))))
    }
}

fn cmd_fit(args: &FitArgs) -> Result<(), Failure> {
    let data = load(&args.input)?;
    let methods: Vec<Method> = match args.method {
        MethodArg::Ml => vec![Method::Ml],
        MethodArg::Br => vec![Method::Br],
        MethodArg::MlSub => vec![Method::MlSub],
        MethodArg::MlSst => vec![Method::MlSst],
        MethodArg::All => {
            if detect_separation(&data)?.separated {
                ALL_METHODS.to_vec()
            } else {
                vec![Method::Ml, Method::Br]
            }
        }
    };
    let c = match compare(&data, &methods, &args.control.options(), args.control.level, INFINITE_SE_THRESHOLD) {
        Err(Error::NoSeparation) => {
            let report = detect_separation(&data)?;
            eprintln!("{report}");
            return Err(Error::NoSeparation.into());
        }
        other => other?,
    };
    emit(&c, args.format, args.method != MethodArg::All)?;
    check_convergence(&c)
}

fn cmd_detect(args: &DetectArgs) -> Result<(), Failure> {
    let data = load(&args.input)?;
    let report = detect_separation(&data)?;
    match args.format {
        Format::Json => println!("{}", separation_json(&report)?),
        _ => println!("{report}"),
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let family: Family = args.family.into();
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = StudyConfig {
        grid_n: args.grid_n.clone(),
        grid_pi: args.grid_pi.clone(),
        reps: args.reps,
        seed: args.seed,
        threads,
        level: args.control.level,
        fit: args.control.options(),
        ..StudyConfig::full(family, args.seed)
    };
    let cells = cfg.grid_n.len() * cfg.grid_pi.len();
    let mut done = 0;
    let quiet = args.quiet;
    let study = run_study_with_progress(&cfg, |m| {
        done += 1;
        if !quiet {
            eprintln!(
                "[{done}/{cells}] n = {}, pi = {}: ML infinite {:.3}, BR bias {:.4}, BR coverage {:.3}",
                m.n, m.pi, m.p_infinite_ml, m.bias_br_uncond, m.coverage_br_uncond
            );
        }
    })?;
    match &args.output {
        Some(path) => study.write_metrics_csv(BufWriter::new(File::create(path)?))?,
        None => study.write_metrics_csv(io::stdout().lock())?,
    }
    if let Some(path) = &args.records {
        study.write_records_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(())
}

fn cmd_illustrate(args: &IllustrateArgs) -> Result<(), Failure> {
    let family: Family = args.family.into();
    let data = generate_dataset(&DgpConfig::illustration(family, args.seed))?;
    let report = detect_separation(&data)?;
    let methods = if report.separated { ALL_METHODS.to_vec() } else { vec![Method::Ml, Method::Br] };
    let c = compare(&data, &methods, &args.control.options(), args.control.level, INFINITE_SE_THRESHOLD)?;
    if args.format == Format::Table {
        println!("{report}\n");
    }
    emit(&c, args.format, false)?;
    if !report.separated {
        eprintln!("no separation in this sample; try another seed");
        return Ok(());
    }
    let problems = pattern_problems(&c);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::Pattern(problems.join("; ")))
    }
}

fn pattern_problems(c: &Comparison) -> Vec<String> {
    let get = |m| c.get(m).expect("all four methods fitted");
    let (ml, br, sub, sst) = (get(Method::Ml), get(Method::Br), get(Method::MlSub), get(Method::MlSst));
    let mut out = Vec::new();
    let offending = &c.separation.offending_columns;
    if !offending.iter().all(|&j| ml.infinite[j]) {
        out.push("ML estimate of a separating coefficient was not classified infinite".to_string());
    }
    if br.infinite.iter().any(|&b| b) {
        out.push("BR produced an infinite-classified estimate".to_string());
    }
    for name in &sub.fit.coef_names {
        let (a, _) = ml.fit.coefficient(name).expect("shared coefficient");
        let (b, _) = sub.fit.coefficient(name).expect("shared coefficient");
        if (a - b).abs() > 1e-3 {
            out.push(format!("ML and ML/sub differ on {name}: {a} vs {b}"));
        }
    }
    if sst.fit.loglik >= ml.fit.loglik {
        out.push("ML/SST log-likelihood is not below ML's".to_string());
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Illustrate(a) => cmd_illustrate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Convergence(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Pattern(msg)) => {
            eprintln!("unexpected pattern: {msg}");
            ExitCode::from(1)
        }
    }
}
