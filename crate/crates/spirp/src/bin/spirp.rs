//! Command-line harness: generate benchmark instances, solve them with the
//! MH/MH+ matheuristics, validate solution files, and build benchmark CSVs.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or input error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spirp::instance::{generate_instance, Instance, Recipe, RecipeId, Requirement};
use spirp::irr::build_irr;
use spirp::mip_search::LbMode;
use spirp::orchestrator::{run, RunParams, Variant};
use spirp::report::{bench_csv, render_report, BenchRow};
use spirp::solution::{check_feasibility, evaluate_cost, CompleteSolution};

/// Environment variable overriding the default `--time-limit`.
const TIME_LIMIT_ENV: &str = "SPIRP_TIME_LIMIT";

#[derive(Parser)]
#[command(name = "spirp", version, about = "SPIRP matheuristic solver suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark-recipe instance file.
    Generate(GenerateArgs),
    /// Solve an instance and write report + solution files.
    Solve(SolveArgs),
    /// Check a solution file against its instance.
    Validate(ValidateArgs),
    /// Solve every instance in a directory and emit the benchmark CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// benchmark1-fio | benchmark1-dob | benchmark2 | benchmark3
    #[arg(long)]
    recipe: String,
    /// Collection node count (defaults to 25 for benchmark set 1).
    #[arg(long)]
    n: Option<usize>,
    /// Daily accumulation rate in liters: 30 or 60.
    #[arg(long, default_value_t = 30)]
    acc: u32,
    /// Named requirement level for benchmark set 1: low | medium | high.
    #[arg(long, conflicts_with = "r")]
    req: Option<String>,
    /// Explicit daily requirement in liters (benchmark sets 2/3).
    #[arg(long)]
    r: Option<f64>,
    /// Purchase price per liter.
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file, or directory to place `<name>.json` in.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SolverOpts {
    /// mh | mh+
    #[arg(long, default_value = "mh+")]
    variant: String,
    /// Elite pool width in percent.
    #[arg(long, default_value_t = 5.0)]
    delta: f64,
    /// Solver budget in seconds for the IRR solve and each MIP-search
    /// period (default 60, or the SPIRP_TIME_LIMIT environment variable).
    #[arg(long)]
    time_limit: Option<f64>,
    /// Number of complete solutions kept for improvement.
    #[arg(long, default_value_t = 1)]
    elite_k: usize,
    /// Vehicle floor for MIP-search: literal | ceiling.
    #[arg(long, default_value = "literal")]
    lbt: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    /// Instance file.
    instance: PathBuf,
    #[command(flatten)]
    opts: SolverOpts,
    /// Directory receiving `<name>.<variant>.report.json` and
    /// `<name>.<variant>.solution.json`.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also dump the IRR model in MPS format to this path.
    #[arg(long)]
    dump_mps: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    instance: PathBuf,
    solution: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of instance files (*.json).
    dir: PathBuf,
    #[command(flatten)]
    opts: SolverOpts,
    /// Reference CSV (`instance,z`) enabling the win-rate summary row.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Solve(args) => cmd_solve(&args),
        Command::Validate(args) => cmd_validate(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    match s.to_ascii_lowercase().as_str() {
        "mh" => Ok(Variant::Mh),
        "mh+" | "mhplus" => Ok(Variant::MhPlus),
        other => Err(format!("unknown variant `{other}` (expected mh or mh+)")),
    }
}

fn parse_lbt(s: &str) -> Result<LbMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "literal" => Ok(LbMode::Literal),
        "ceiling" => Ok(LbMode::Ceiling),
        other => Err(format!("unknown lb mode `{other}` (expected literal or ceiling)")),
    }
}

fn default_time_limit() -> Result<f64, String> {
    match std::env::var(TIME_LIMIT_ENV) {
        Ok(raw) => raw
            .parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0)
            .ok_or_else(|| format!("{TIME_LIMIT_ENV} must be a positive number, got `{raw}`")),
        Err(_) => Ok(60.0),
    }
}

fn run_params(opts: &SolverOpts) -> Result<(Variant, RunParams), String> {
    let variant = parse_variant(&opts.variant)?;
    let time_limit = match opts.time_limit {
        Some(v) if v > 0.0 => v,
        Some(v) => return Err(format!("time limit must be positive, got {v}")),
        None => default_time_limit()?,
    };
    let params = RunParams {
        delta: opts.delta,
        elite_complete_k: opts.elite_k,
        irr_time_limit: time_limit,
        mip_time_limit: time_limit,
        lb_mode: parse_lbt(&opts.lbt)?,
        seed: opts.seed,
    };
    Ok((variant, params))
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write(path: &Path, content: &str) -> Result<(), String> {
    fs::write(path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance, String> {
    Instance::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_generate(args: &GenerateArgs) -> Result<ExitCode, String> {
    let id = RecipeId::parse(&args.recipe).map_err(|e| e.to_string())?;
    let requirement = match (&args.req, args.r) {
        (Some(level), None) => match level.to_ascii_lowercase().as_str() {
            "low" => Requirement::Low,
            "medium" => Requirement::Medium,
            "high" => Requirement::High,
            other => return Err(format!("unknown requirement level `{other}`")),
        },
        (None, Some(value)) => Requirement::Value(value),
        (None, None) => return Err("one of --req or --r is required".into()),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let recipe =
        Recipe { id, n: args.n, accumulation: args.acc, requirement, price: args.p };
    let instance = generate_instance(&recipe, args.seed).map_err(|e| e.to_string())?;
    let path = if args.out.is_dir() {
        args.out.join(format!("{}.json", instance.name))
    } else {
        args.out.clone()
    };
    write(&path, &instance.serialize())?;
    println!("{}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(args: &SolveArgs) -> Result<ExitCode, String> {
    let (variant, params) = run_params(&args.opts)?;
    let instance = load_instance(&args.instance)?;
    if let Some(mps_path) = &args.dump_mps {
        let (model, _) = build_irr(&instance, true);
        let mut buf = Vec::new();
        model.write_mps(&mut buf).map_err(|e| e.to_string())?;
        write(mps_path, &String::from_utf8(buf).expect("mps is ascii"))?;
    }
    let report = run(&instance, variant, &params).map_err(|e| e.to_string())?;
    let solution_text =
        report.best.serialize(&instance).map_err(|e| e.to_string())?;
    if !args.out.is_dir() {
        fs::create_dir_all(&args.out)
            .map_err(|e| format!("cannot create {}: {e}", args.out.display()))?;
    }
    let stem = format!("{}.{}", instance.name, variant.to_string().to_ascii_lowercase());
    let report_path = args.out.join(format!("{stem}.report.json"));
    let solution_path = args.out.join(format!("{stem}.solution.json"));
    write(&report_path, &render_report(&report))?;
    write(&solution_path, &solution_text)?;
    println!(
        "{} {} z={} lb={} gap={}% time={}s",
        instance.name,
        variant,
        report.upper_bound,
        report.lower_bound,
        report.gap,
        report.times.total
    );
    println!("report: {}", report_path.display());
    println!("solution: {}", solution_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode, String> {
    let instance = load_instance(&args.instance)?;
    let text = read(&args.solution)?;
    let (solution, claimed) = CompleteSolution::parse(&text, &instance)
        .map_err(|e| format!("{}: {e}", args.solution.display()))?;
    let report = check_feasibility(&solution, &instance);
    if !report.is_feasible() {
        println!("infeasible: {} violation(s)", report.violations.len());
        for violation in &report.violations {
            println!("  {violation}");
        }
        return Ok(ExitCode::from(1));
    }
    let actual = evaluate_cost(&solution, &instance).map_err(|e| e.to_string())?;
    let fields = [
        ("traveling", claimed.traveling, actual.traveling),
        ("vehicles", claimed.vehicles, actual.vehicles),
        ("holding", claimed.holding, actual.holding),
        ("purchase", claimed.purchase, actual.purchase),
        ("total", claimed.total, actual.total),
    ];
    for (name, want, got) in fields {
        if (want - got).abs() > 1e-6 {
            println!("cost mismatch in `{name}`: file says {want}, recomputed {got}");
            return Ok(ExitCode::from(1));
        }
    }
    println!(
        "feasible; cost: traveling={} vehicles={} holding={} purchase={} total={}",
        actual.traveling, actual.vehicles, actual.holding, actual.purchase, actual.total
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_reference(path: &Path) -> Result<Vec<(String, f64)>, String> {
    let mut reference = Vec::new();
    for line in read(path)?.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let name = cells.next().unwrap_or_default().trim().to_string();
        let value = cells.next().and_then(|v| v.trim().parse::<f64>().ok());
        match value {
            Some(z) => reference.push((name, z)),
            None => continue, // header or malformed line
        }
    }
    if reference.is_empty() {
        return Err(format!("no `instance,z` rows in {}", path.display()));
    }
    Ok(reference)
}

fn cmd_bench(args: &BenchArgs) -> Result<ExitCode, String> {
    let (variant, params) = run_params(&args.opts)?;
    let entries = fs::read_dir(&args.dir)
        .map_err(|e| format!("cannot read {}: {e}", args.dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(format!("no instance files (*.json) in {}", args.dir.display()));
    }
    let reference = args.reference.as_deref().map(parse_reference).transpose()?;

    let mut rows = Vec::with_capacity(paths.len());
    for path in &paths {
        let instance = load_instance(path)?;
        let report = run(&instance, variant, &params).map_err(|e| e.to_string())?;
        rows.push(BenchRow::from_report(&report));
    }
    rows.sort_by(|a, b| a.instance.cmp(&b.instance));
    let csv = bench_csv(&rows, reference.as_deref());
    match &args.out {
        Some(path) => {
            write(path, &csv)?;
            println!("{}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}
