//! Command-line front end: `analyze` runs the estimation pipeline on a
//! CSV of user-level rows, `simulate` generates synthetic data with
//! ground truth, `validate` runs the self-checking Monte Carlo suites.
//!
//! Exit codes are stable: 0 success, 1 validation-suite failure,
//! 2 input error, 3 estimation error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use abmediate::data::{ingest_csv_path, ColumnBindings, DataError};
use abmediate::effects::{build_report, EffectEstimate, EffectReport, InferenceError};
use abmediate::gmm::{itgmm_fit, Bandwidth, EstimationError, HacConfig, Kernel};
use abmediate::sim::{simulate, true_effects_from_structural, LsemSpec, SimError};
use abmediate::validation::{run_suite, Suite};

#[derive(Parser)]
#[command(
    name = "abmediate",
    version,
    about = "Direct and mediated A/B test effect estimation"
)]
struct Cli {
    /// Worker threads for simulation and estimation (default: all cores)
    #[arg(long, global = true, env = "ABMEDIATE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate direct and mediated effects from a CSV of user-level rows
    Analyze(AnalyzeArgs),
    /// Generate a synthetic dataset and its ground truth from a model spec
    Simulate(SimulateArgs),
    /// Run a self-checking Monte Carlo validation suite
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KernelArg {
    Lag0,
    Bartlett,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

fn parse_bandwidth(s: &str) -> Result<Bandwidth, String> {
    if s == "auto" {
        Ok(Bandwidth::Auto)
    } else {
        s.parse::<usize>()
            .map(Bandwidth::Fixed)
            .map_err(|_| format!("expected \"auto\" or a nonnegative integer, got {s:?}"))
    }
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV (decompressed on the fly when the name ends in .gz)
    #[arg(long)]
    input: PathBuf,
    /// Column holding the 0/1 treatment indicator
    #[arg(long = "treatment-col")]
    treatment_col: String,
    /// Column holding the mediating metric
    #[arg(long = "mediator-col")]
    mediator_col: String,
    /// Column holding the outcome metric
    #[arg(long = "outcome-col")]
    outcome_col: String,
    /// HAC kernel; lag0 is right for exchangeable users
    #[arg(long, value_enum, default_value_t = KernelArg::Lag0)]
    kernel: KernelArg,
    /// Bartlett bandwidth: "auto" or a lag count
    #[arg(long, value_parser = parse_bandwidth, default_value = "auto")]
    bandwidth: Bandwidth,
    /// Convergence tolerance on the coefficient update norm
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap for the GMM loop
    #[arg(long = "max-iter", default_value_t = 100)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with the structural model specification
    #[arg(long)]
    spec: PathBuf,
    /// Number of units to draw
    #[arg(long)]
    n: usize,
    /// Generator seed; identical seeds give identical files
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes <prefix>.csv and <prefix>.truth.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Suite to run: identity, consistency, coverage, or delta
    #[arg(long, value_parser = parse_suite)]
    suite: Suite,
    /// Replications (defaults to the suite's standard count)
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Anything that can stop a command, mapped onto the exit-code contract.
enum CliError {
    Input(String, String),
    Estimation(String, String),
}

impl CliError {
    fn report(&self) -> ExitCode {
        let (code, name, msg) = match self {
            CliError::Input(name, msg) => (2, name, msg),
            CliError::Estimation(name, msg) => (3, name, msg),
        };
        eprintln!("error: {name}: {msg}");
        ExitCode::from(code)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.name().to_string(), e.to_string())
    }
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        CliError::Estimation(e.name().to_string(), e.to_string())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        CliError::Estimation(e.name().to_string(), e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Input(e.name().to_string(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input("Io".to_string(), e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: Threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Validate(args) => return cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let bindings = ColumnBindings::new(
        args.treatment_col.clone(),
        args.mediator_col.clone(),
        args.outcome_col.clone(),
    );
    let table = ingest_csv_path(&args.input, &bindings)?;
    if args.tol <= 0.0 {
        return Err(CliError::Input(
            "BadFlag".into(),
            "--tol must be positive".into(),
        ));
    }
    if args.max_iter == 0 {
        return Err(CliError::Input(
            "BadFlag".into(),
            "--max-iter must be at least 1".into(),
        ));
    }
    let config = HacConfig {
        kernel: match args.kernel {
            KernelArg::Lag0 => Kernel::Lag0,
            KernelArg::Bartlett => Kernel::Bartlett,
        },
        bandwidth: args.bandwidth,
    };
    let fit = itgmm_fit(&table, &config, args.tol, args.max_iter)?;
    let summaries = abmediate::data::summarize(&table);
    let report = build_report(&fit, &summaries)?;

    match args.format {
        Format::Text => {
            let meta = FitMeta::new(&config, &fit, &table);
            print!("{}", render_text(&report, &meta));
        }
        Format::Json => {
            let doc = json_report(&report, &config, fit.iterations, fit.converged, &table);
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("serializable report")
            );
        }
        Format::Csv => print!("{}", render_csv(&report)),
    }
    Ok(())
}

struct FitMeta {
    kernel: String,
    bandwidth: String,
    n: usize,
    n_control: usize,
    n_treated: usize,
    iterations: usize,
}

impl FitMeta {
    fn new(
        config: &HacConfig,
        fit: &abmediate::gmm::GmmFit,
        table: &abmediate::data::ObservationTable,
    ) -> Self {
        FitMeta {
            kernel: match config.kernel {
                Kernel::Lag0 => "lag0".into(),
                Kernel::Bartlett => "bartlett".into(),
            },
            bandwidth: match config.bandwidth {
                Bandwidth::Auto => "auto".into(),
                Bandwidth::Fixed(h) => h.to_string(),
            },
            n: table.len(),
            n_control: table.n_control(),
            n_treated: table.n_treated(),
            iterations: fit.iterations,
        }
    }
}

/// Decimal rendering with a fixed number of significant figures.
fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if mag >= sig as i32 || mag < -9 {
        format!("{:.*e}", sig - 1, x)
    } else {
        let decimals = (sig as i32 - 1 - mag).max(0) as usize;
        format!("{:.*}", decimals, x)
    }
}

fn render_text(report: &EffectReport, meta: &FitMeta) -> String {
    let mut out = String::new();
    out.push_str("Estimates of Causal Effects\n");
    out.push_str(&format!(
        "N = {} (control {}, treatment {}); kernel {}, bandwidth {}, {} iteration(s)\n",
        meta.n, meta.n_control, meta.n_treated, meta.kernel, meta.bandwidth, meta.iterations
    ));
    out.push_str(&format!(
        "Mean of control outcome: {}\n\n",
        fmt_sig(report.arm_summaries.control.mean_outcome, 6)
    ));
    out.push_str(&format!(
        "{:<9} {:>12} {:>14} {:>14} {:>14}  {}\n",
        "Effect", "% Change", "SE (% pts)", "Effect", "Std Error", "Sig"
    ));
    for est in report.estimates() {
        out.push_str(&format!(
            "{:<9} {:>11.4}% {:>14} {:>14} {:>14}  {}\n",
            est.label(),
            est.pct_change * 100.0,
            fmt_sig(est.pct_std_error * 100.0, 6),
            fmt_sig(est.value, 6),
            fmt_sig(est.std_error, 6),
            est.stars(),
        ));
    }
    out.push_str("\n% Change = Effect/Mean of Control\n");
    out.push_str("Signif. codes: '***' p<0.001, '**' p<0.01, '*' p<0.05, '.' p<0.1\n");
    if report.estimates().iter().any(|e| e.p_underflow) {
        out.push_str("note: p-values shown as 0 underflowed double precision\n");
    }
    out
}

fn render_csv(report: &EffectReport) -> String {
    let mut out = String::from("effect,arm,pct_change,pct_std_error,value,std_error,z,p,sig\n");
    for est in report.estimates() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            est.kind,
            est.arm.map(|t| t.to_string()).unwrap_or_default(),
            est.pct_change,
            est.pct_std_error,
            est.value,
            est.std_error,
            est.z_stat,
            est.p_value,
            est.stars(),
        ));
    }
    out
}

fn json_report(
    report: &EffectReport,
    config: &HacConfig,
    iterations: usize,
    converged: bool,
    table: &abmediate::data::ObservationTable,
) -> serde_json::Value {
    let mut doc = serde_json::to_value(report).expect("serializable report");
    let obj = doc.as_object_mut().expect("report is an object");
    obj.insert("n".into(), table.len().into());
    obj.insert("n_control".into(), table.n_control().into());
    obj.insert("n_treated".into(), table.n_treated().into());
    obj.insert(
        "kernel".into(),
        serde_json::to_value(config.kernel).expect("kernel"),
    );
    obj.insert(
        "bandwidth".into(),
        match config.bandwidth {
            Bandwidth::Auto => "auto".into(),
            Bandwidth::Fixed(h) => h.into(),
        },
    );
    obj.insert("iterations".into(), iterations.into());
    obj.insert("converged".into(), converged.into());
    for est in report.estimates() {
        let key = estimate_key(est);
        doc[key]
            .as_object_mut()
            .expect("estimate object")
            .insert("sig".into(), est.stars().into());
    }
    doc
}

fn estimate_key(est: &EffectEstimate) -> &'static str {
    use abmediate::effects::EffectKind;
    match (est.kind, est.arm) {
        (EffectKind::Gade, Some(0)) => "gade0",
        (EffectKind::Gade, _) => "gade1",
        (EffectKind::Gacme, Some(0)) => "gacme0",
        (EffectKind::Gacme, _) => "gacme1",
        (EffectKind::Ate, _) => "ate",
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.spec)?;
    let spec: LsemSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Input("SpecParse".into(), e.to_string()))?;
    let truth = true_effects_from_structural(&spec)?;
    let table = simulate(&spec, args.n, args.seed)?;

    let csv_path = args.out.with_extension("csv");
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "T,M1,Y")?;
    for r in table.records() {
        writeln!(
            w,
            "{},{},{}",
            r.treatment.indicator() as u8,
            r.mediator,
            r.outcome
        )?;
    }
    w.flush()?;

    let truth_path = args.out.with_extension("truth.json");
    let mut w = BufWriter::new(File::create(&truth_path)?);
    serde_json::to_writer_pretty(&mut w, &truth).expect("serializable ground truth");
    writeln!(w)?;
    w.flush()?;

    eprintln!(
        "wrote {} ({} rows) and {}",
        csv_path.display(),
        table.len(),
        truth_path.display()
    );
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> ExitCode {
    let report = run_suite(args.suite, args.reps, args.seed);
    print!("{}", report.render());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
