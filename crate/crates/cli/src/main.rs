//! `cenbar`: fit, transform, simulate and benchmark from the command line.

mod error;
mod scenario;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cenbar::{
    bar_fit, fit_cbar_cv, fit_censoring_survivor, generate, leurgans_transform, marginal_screen,
    run_monte_carlo, standardize, BarConfig, CvOptions, Method, MonteCarloOptions, Report,
    SurvivalDataset,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::table::{read_table, Table};

#[derive(Debug, Parser)]
#[command(
    name = "cenbar",
    version,
    about = "Broken adaptive ridge for censored AFT data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tune and fit CBAR on a CSV with time, event and covariate columns.
    Fit(FitArgs),
    /// Append the synthetic response as a `ystar` column.
    Transform(IoArgs),
    /// Run a Monte Carlo scenario (CBAR only unless --methods is given).
    Simulate(RunArgs),
    /// Run a Monte Carlo scenario for every method.
    Benchmark(RunArgs),
}

#[derive(Debug, Args)]
struct IoArgs {
    /// Input CSV (standard input when omitted).
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Output file (standard output when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Screen to this many columns before fitting.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fix ξ instead of cross-validating (requires --lambda).
    #[arg(long, requires = "lambda")]
    xi: Option<f64>,
    /// Fix λ instead of cross-validating (requires --xi).
    #[arg(long, requires = "xi")]
    lambda: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated subset of cbar, lasso, alasso, scad, mcp.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Marginal screening before fitting; optional screen size.
    #[arg(long, num_args = 0..=1, value_name = "K")]
    screen: Option<Option<usize>>,
    /// Overrides the scenario's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Worker threads (all cores when omitted).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write each replication's dataset as CSV into this directory.
    #[arg(long)]
    dump: Option<PathBuf>,
}

fn open_input(path: Option<&Path>) -> CliResult<Box<dyn Read>> {
    match path {
        None => Ok(Box::new(io::stdin())),
        Some(p) => File::open(p)
            .map(|f| Box::new(f) as Box<dyn Read>)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", p.display()))),
    }
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
    }
}

fn write_all(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::Input(format!("write failed: {e}")))
}

#[derive(Debug, Serialize)]
struct Coefficient<'a> {
    name: &'a str,
    estimate: f64,
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    schema: &'static str,
    n: usize,
    p: usize,
    censoring_fraction: f64,
    screened: Option<Vec<&'a str>>,
    xi: f64,
    lambda: f64,
    cv_error: Option<f64>,
    iterations: usize,
    converged: bool,
    fixed_point_residual: f64,
    intercept: f64,
    support: Vec<&'a str>,
    coefficients: Vec<Coefficient<'a>>,
}

fn cmd_fit(args: FitArgs) -> CliResult<()> {
    let input = open_input(args.io.input.as_deref())?;
    let mut out = open_output(args.io.output.as_deref())?;
    let table = read_table(input)?;
    let data = &table.data;
    if data.p() == 0 {
        return Err(CliError::Input("no covariate columns".into()));
    }
    let surv = fit_censoring_survivor(data)?;
    let ystar = leurgans_transform(data, &surv)?;
    let design = standardize(data.covariates())?;

    let kept: Vec<usize> = match args.k {
        Some(k) => marginal_screen(&design, &ystar, k.min(design.p()))?.kept,
        None => (0..design.p()).collect(),
    };
    let reduced = design.select_columns(&kept);
    let (fit, cv_error) = match (args.xi, args.lambda) {
        (Some(xi), Some(lambda)) => (
            bar_fit(&reduced, &ystar, &BarConfig::new(xi, lambda))?,
            None,
        ),
        _ => {
            let options = CvOptions {
                folds: args.folds,
                seed: args.seed,
                ..CvOptions::default()
            };
            let (cv, fit) = fit_cbar_cv(&reduced, &ystar, &options, None)?;
            (fit, Some(cv.best_error))
        }
    };
    let fit = fit.embed(&kept, &design, ystar.center());

    let names = &table.covariate_names;
    let report = FitReport {
        schema: "cenbar-fit/1",
        n: data.n(),
        p: data.p(),
        censoring_fraction: data.censoring_fraction(),
        screened: args
            .k
            .map(|_| kept.iter().map(|&j| names[j].as_str()).collect()),
        xi: fit.xi,
        lambda: fit.lambda,
        cv_error,
        iterations: fit.iterations,
        converged: fit.converged,
        fixed_point_residual: fit.fixed_point_residual,
        intercept: fit.intercept,
        support: fit.support.iter().map(|&j| names[j].as_str()).collect(),
        coefficients: names
            .iter()
            .zip(fit.beta_orig.iter())
            .map(|(name, &estimate)| Coefficient { name, estimate })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&report).expect("fit report serializes");
    write_all(out.as_mut(), &(text + "\n"))
}

fn transform_csv(table: &Table) -> CliResult<String> {
    let surv = fit_censoring_survivor(&table.data)?;
    let ystar = leurgans_transform(&table.data, &surv)?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Input(format!("write failed: {e}"));
    let mut header = table.headers.clone();
    header.push("ystar".into());
    writer.write_record(&header).map_err(fail)?;
    for (row, y) in table.rows.iter().zip(ystar.values().iter()) {
        let mut record = row.clone();
        record.push(y.to_string());
        writer.write_record(&record).map_err(fail)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Input(format!("write failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn cmd_transform(args: IoArgs) -> CliResult<()> {
    let input = open_input(args.input.as_deref())?;
    let mut out = open_output(args.output.as_deref())?;
    let table = read_table(input)?;
    write_all(out.as_mut(), &transform_csv(&table)?)
}

fn parse_methods(names: Option<&[String]>, default: &[Method]) -> CliResult<Vec<Method>> {
    match names {
        None => Ok(default.to_vec()),
        Some(names) => {
            let mut methods = Vec::new();
            for name in names {
                let m: Method = name.trim().parse()?;
                if !methods.contains(&m) {
                    methods.push(m);
                }
            }
            if methods.is_empty() {
                return Err(CliError::Input("no methods given".into()));
            }
            Ok(methods)
        }
    }
}

fn dataset_csv(data: &SurvivalDataset) -> String {
    let mut text = String::from("time,event");
    for j in 0..data.p() {
        text.push_str(&format!(",x{}", j + 1));
    }
    text.push('\n');
    for i in 0..data.n() {
        text.push_str(&format!(
            "{},{}",
            data.times()[i],
            u8::from(data.events()[i])
        ));
        for j in 0..data.p() {
            text.push_str(&format!(",{}", data.covariates()[(i, j)]));
        }
        text.push('\n');
    }
    text
}

fn cmd_run(args: RunArgs, default_methods: &[Method]) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", args.scenario.display())))?;
    let mut scenario = scenario::parse_scenario(&text)?;
    if let Some(reps) = args.reps {
        if reps == 0 {
            return Err(CliError::Input("--reps must be positive".into()));
        }
        scenario.reps = reps;
    }
    if let Some(seed) = args.seed {
        scenario.master_seed = seed;
    }
    let methods = parse_methods(args.methods.as_deref(), default_methods)?;
    if let Some(dir) = &args.dump {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut out = open_output(args.output.as_deref())?;
    let options = MonteCarloOptions {
        screening: args.screen,
        folds: args.folds,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Input(format!("cannot start worker threads: {e}")))?;
    let report: Report = pool
        .install(|| run_monte_carlo(&scenario, &methods, &options))?
        .0;

    if let Some(dir) = &args.dump {
        for rep in 0..scenario.reps as u64 {
            let (data, _) = generate(&scenario, report.censoring_mean, rep)?;
            let path = dir.join(format!("rep_{rep:04}.csv"));
            std::fs::write(&path, dataset_csv(&data))
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
        }
    }
    let text = match args.format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv(),
    };
    write_all(out.as_mut(), &text)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Transform(a) => cmd_transform(a),
        Command::Simulate(a) => cmd_run(a, &[Method::Cbar]),
        Command::Benchmark(a) => cmd_run(a, &Method::ALL),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
