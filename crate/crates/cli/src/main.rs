//! Command-line front end for the bivariate curtailed sequential test.

mod error;
mod output;

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::result::Result;

use bicurtail::par::{map_slice, Execution};
use bicurtail::simulator::{replicate_records, summarize, EventSampler};
use bicurtail::*;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use error::CliError;
use output::{emit_object, emit_rows, Format};

#[derive(Parser)]
#[command(name = "bicurtail", version, about = "Curtailed sequential test for two correlated binary side effects")]
struct Cli {
    /// Output format; defaults to csv for `pmf` and `export-grid`, json otherwise.
    #[arg(long, global = true, value_enum)]
    output: Option<Format>,
    /// Suppress notes on standard error.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design the test from error rates and hypothesized rates.
    Design(DesignArgs),
    /// Rejection probability of a design.
    Power(EvalArgs),
    /// Average sample number, variance and bounds.
    Asn(EvalArgs),
    /// Stopping-time distribution split by boundary.
    Pmf(EvalArgs),
    /// Monte Carlo study of a design.
    Simulate(SimulateArgs),
    /// Post-test estimates, confidence region and relative risk.
    Analyze(AnalyzeArgs),
    /// Apply a stream of events to a saved monitoring state.
    Monitor(MonitorArgs),
    /// Power surface over a (theta_x, theta_y) grid.
    ExportGrid(GridArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundingArg {
    Nearest,
    Floor,
}

#[derive(Args)]
struct DesignArgs {
    /// Overall type I error; each margin gets half.
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    theta_x0: f64,
    #[arg(long)]
    theta_x1: f64,
    #[arg(long)]
    theta_y0: f64,
    #[arg(long)]
    theta_y1: f64,
    #[arg(long, value_enum, default_value = "nearest")]
    rounding: RoundingArg,
    /// Search for the smallest N meeting the error rates under the exact binomial law.
    #[arg(long)]
    exact_refine: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Asymptotic,
    Dp,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    CurtailedNormal,
    Gut,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    theta_x: f64,
    #[arg(long)]
    theta_y: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rho: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<JointBernoulliParams, CliError> {
        Ok(make_params(self.theta_x, self.theta_y, self.rho)?)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Design JSON as written by `design`.
    #[arg(long)]
    design: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    /// Normal approximation used by `--method asymptotic` for power.
    #[arg(long, value_enum, default_value = "curtailed-normal")]
    form: FormArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    design: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Confidence level of the coverage check.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Run on one thread.
    #[arg(long)]
    sequential: bool,
    /// Write each replicate's observed events as JSONL into this directory.
    #[arg(long)]
    emit_streams: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Cell counts `n00,n10,n01,n11`.
    #[arg(long, value_delimiter = ',', conflicts_with = "counts_file")]
    counts: Option<Vec<u64>>,
    /// JSON file `{"n00": .., "n10": .., "n01": .., "n11": ..}`.
    #[arg(long)]
    counts_file: Option<PathBuf>,
    /// Terminal sample size; must equal the total count.
    #[arg(long)]
    m_star: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Number of ellipse boundary points to write.
    #[arg(long, requires = "ellipse_file")]
    emit_ellipse_points: Option<usize>,
    /// CSV file receiving the ellipse points.
    #[arg(long)]
    ellipse_file: Option<PathBuf>,
}

#[derive(Args)]
struct MonitorArgs {
    #[arg(long)]
    design: PathBuf,
    /// State document; created if missing, rewritten after every event.
    #[arg(long)]
    state: PathBuf,
    /// JSONL events; standard input if omitted.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    design: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    rho: f64,
    #[arg(long, default_value_t = 0.01)]
    theta_x_min: f64,
    #[arg(long, default_value_t = 0.2)]
    theta_x_max: f64,
    #[arg(long, default_value_t = 20)]
    theta_x_steps: usize,
    #[arg(long, default_value_t = 0.01)]
    theta_y_min: f64,
    #[arg(long, default_value_t = 0.3)]
    theta_y_max: f64,
    #[arg(long, default_value_t = 30)]
    theta_y_steps: usize,
    #[arg(long, value_enum, default_value = "exact")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "curtailed-normal")]
    form: FormArg,
}

struct Ctx {
    output: Option<Format>,
    quiet: bool,
}

impl Ctx {
    fn format(&self, default: Format) -> Format {
        self.output.unwrap_or(default)
    }

    fn note(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_design(path: &Path) -> Result<BivariateDesign, CliError> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: invalid design: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn power_method(method: MethodArg, form: FormArg) -> PowerMethod {
    match (method, form) {
        (MethodArg::Exact, _) => PowerMethod::Exact,
        (MethodArg::Dp, _) => PowerMethod::Dp,
        (MethodArg::Asymptotic, FormArg::CurtailedNormal) => PowerMethod::CurtailedNormal,
        (MethodArg::Asymptotic, FormArg::Gut) => PowerMethod::Gut,
    }
}

fn pmf_for(design: &BivariateDesign, params: &JointBernoulliParams, method: MethodArg) -> Result<StoppingPmf, CliError> {
    Ok(match method {
        MethodArg::Exact => stopping_pmf_exact(design, params),
        MethodArg::Dp => lattice_forward_dp(design, params),
        MethodArg::Asymptotic => stopping_pmf_asymptotic(design, params)?,
    })
}

fn cmd_design(ctx: &Ctx, a: &DesignArgs) -> Result<(), CliError> {
    let rounding = match a.rounding {
        RoundingArg::Nearest => Rounding::Nearest,
        RoundingArg::Floor => Rounding::Floor,
    };
    let method = if a.exact_refine {
        DesignMethod::ExactRefine
    } else {
        DesignMethod::Approx
    };
    let d = design_bivariate(a.alpha, a.beta, a.theta_x0, a.theta_x1, a.theta_y0, a.theta_y1, method, rounding)?;
    emit_object(io::stdout().lock(), &d, ctx.format(Format::Json))
}

#[derive(Serialize)]
struct PowerReport {
    method: PowerMethod,
    theta_x: f64,
    theta_y: f64,
    rho: f64,
    power: f64,
}

fn cmd_power(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    let d = read_design(&a.design)?;
    let p = a.params.params()?;
    let method = power_method(a.method, a.form);
    let report = PowerReport {
        method,
        theta_x: p.theta_x(),
        theta_y: p.theta_y(),
        rho: p.rho(),
        power: power(&d, &p, method)?,
    };
    emit_object(io::stdout().lock(), &report, ctx.format(Format::Json))
}

#[derive(Serialize)]
struct AsnReport {
    asn: f64,
    second_moment: f64,
    variance: f64,
    cv: f64,
    lower_bound: f64,
    upper_bound: f64,
    rejection_prob: f64,
}

fn cmd_asn(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    let d = read_design(&a.design)?;
    let p = a.params.params()?;
    let pmf = pmf_for(&d, &p, a.method)?;
    let (variance, cv) = variance_cv_from(&pmf)?;
    let (lower_bound, upper_bound) = asn_bounds(&d, &p);
    let report = AsnReport {
        asn: pmf.asn(),
        second_moment: pmf.second_moment(),
        variance,
        cv,
        lower_bound,
        upper_bound,
        rejection_prob: pmf.rejection_prob(),
    };
    emit_object(io::stdout().lock(), &report, ctx.format(Format::Json))
}

fn cmd_pmf(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    let d = read_design(&a.design)?;
    let p = a.params.params()?;
    let pmf = pmf_for(&d, &p, a.method)?;
    ctx.note(format!(
        "rejection probability {:.6}, non-rejection mass at N* {:.6}",
        pmf.rejection_prob(),
        pmf.continue_mass
    ));
    emit_rows(io::stdout().lock(), &pmf.rows(), ctx.format(Format::Csv))
}

fn write_stream(dir: &Path, r: u64, events: impl Iterator<Item = Event>) -> Result<(), CliError> {
    let path = dir.join(format!("replicate_{r:06}.jsonl"));
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = io::BufWriter::new(file);
    for ev in events {
        serde_json::to_writer(&mut w, &ev).map_err(CliError::internal)?;
        writeln!(w).map_err(|e| CliError::io(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

fn cmd_simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<(), CliError> {
    let d = read_design(&a.design)?;
    let p = a.params.params()?;
    if a.reps == 0 {
        return Err(CliError::Input("--reps must be at least 1".into()));
    }
    let exec = if a.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let records = replicate_records(&d, &p, a.reps, a.seed, a.level, exec)?;
    let summary = summarize(&records, &p, a.seed, a.level);
    if let Some(dir) = &a.emit_streams {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (r, rec) in records.iter().enumerate() {
            let events = EventSampler::new(&p, a.seed, r as u64).take(rec.m_star as usize);
            write_stream(dir, r as u64, events)?;
        }
        ctx.note(format!("wrote {} streams to {}", records.len(), dir.display()));
    }
    emit_object(io::stdout().lock(), &summary, ctx.format(Format::Json))
}

#[derive(Serialize)]
struct AnalyzeReport {
    counts: LatticeCounts,
    estimate: PostTestEstimate,
    region: ConfidenceRegion,
    /// Absent when the denominator estimate is zero.
    relative_risk: Option<RelativeRiskEstimate>,
    inverse_relative_risk: Option<RelativeRiskEstimate>,
}

fn ratio_or_note(ctx: &Ctx, r: bicurtail::Result<RelativeRiskEstimate>) -> Result<Option<RelativeRiskEstimate>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ Error::ZeroDenominator(_)) => {
            ctx.note(format!("note: {e}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<(), CliError> {
    let counts = match (&a.counts, &a.counts_file) {
        (Some(c), None) if c.len() != 4 => {
            return Err(CliError::Input(format!("--counts takes four values n00,n10,n01,n11, got {}", c.len())))
        }
        (Some(c), None) => LatticeCounts {
            n00: c[0],
            n10: c[1],
            n01: c[2],
            n11: c[3],
        },
        (None, Some(path)) => serde_json::from_str(&read_file(path)?)
            .map_err(|e| CliError::Input(format!("{}: invalid counts: {e}", path.display())))?,
        _ => return Err(CliError::Input("give either --counts or --counts-file".into())),
    };
    let m_star = a.m_star.unwrap_or(counts.total());
    let estimate = post_test_estimate(&counts, m_star)?;
    let region = confidence_region(&estimate, a.level)?;
    if region.singular {
        ctx.note("note: estimated covariance is singular; intervals are degenerate");
    }
    let report = AnalyzeReport {
        counts,
        estimate,
        region,
        relative_risk: ratio_or_note(ctx, relative_risk(&estimate, a.level))?,
        inverse_relative_risk: ratio_or_note(ctx, inverse_relative_risk(&estimate, a.level))?,
    };
    if let (Some(n), Some(path)) = (a.emit_ellipse_points, &a.ellipse_file) {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Input(e.to_string()))?;
        let io_err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
        w.write_record(["theta_x", "theta_y"]).map_err(io_err)?;
        for [x, y] in region.boundary_points(n) {
            w.write_record([x.to_string(), y.to_string()]).map_err(io_err)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    emit_object(io::stdout().lock(), &report, ctx.format(Format::Json))
}

#[derive(Serialize)]
struct MonitorCsvRow {
    seq: u64,
    s_x: u64,
    s_y: u64,
    k_x: usize,
    k_y: usize,
    n_star: usize,
    status: Status,
    theta_hat_x: Option<f64>,
    theta_hat_y: Option<f64>,
}

/// Writes via a temporary file and rename so a crash never leaves a
/// truncated state document.
fn save_state(path: &Path, state: &MonitorState) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    write_file(&tmp, &state_save(state))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

fn cmd_monitor(ctx: &Ctx, a: &MonitorArgs) -> Result<(), CliError> {
    let design = read_design(&a.design)?;
    let mut state = if a.state.exists() {
        state_load_for(&read_file(&a.state)?, &design)?
    } else {
        let s = MonitorState::new(design);
        save_state(&a.state, &s)?;
        s
    };
    let input: Box<dyn BufRead> = match &a.input {
        Some(path) => Box::new(BufReader::new(fs::File::open(path).map_err(|e| CliError::io(path, e))?)),
        None => Box::new(io::stdin().lock()),
    };
    let source = a.input.as_deref().map_or("stdin".into(), |p| p.display().to_string());
    let format = ctx.format(Format::Json);
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut csv_out = (format == Format::Csv).then(|| csv::Writer::from_writer(io::stdout()));
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(&source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line)
            .map_err(|e| CliError::Input(format!("{source}:{}: invalid event: {e}", lineno + 1)))?;
        let (next, record) = monitor_step(&state, event)?;
        state = next;
        save_state(&a.state, &state)?;
        match csv_out.as_mut() {
            Some(w) => {
                let row = MonitorCsvRow {
                    seq: record.seq,
                    s_x: record.s_x,
                    s_y: record.s_y,
                    k_x: record.k_x,
                    k_y: record.k_y,
                    n_star: record.n_star,
                    status: record.status,
                    theta_hat_x: record.estimate.map(|e| e.theta_hat_x),
                    theta_hat_y: record.estimate.map(|e| e.theta_hat_y),
                };
                w.serialize(row).map_err(|e| CliError::Input(e.to_string()))?;
                w.flush().map_err(|e| CliError::io("stdout", e))?;
            }
            None => {
                serde_json::to_writer(&mut out, &record).map_err(CliError::internal)?;
                writeln!(out).and_then(|_| out.flush()).map_err(|e| CliError::io("stdout", e))?;
            }
        }
        if !state.status().is_open() {
            ctx.note(format!("test closed at observation {}: {:?}", record.seq, record.status));
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct GridRow {
    theta_x: f64,
    theta_y: f64,
    power: f64,
}

fn axis(min: f64, max: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if !(min <= max) || steps == 0 {
        return Err(CliError::Input(format!("bad grid axis [{min}, {max}] with {steps} steps")));
    }
    Ok((0..=steps).map(|i| min + (max - min) * i as f64 / steps as f64).collect())
}

fn cmd_export_grid(ctx: &Ctx, a: &GridArgs) -> Result<(), CliError> {
    let d = read_design(&a.design)?;
    let method = power_method(a.method, a.form);
    let xs = axis(a.theta_x_min, a.theta_x_max, a.theta_x_steps)?;
    let ys = axis(a.theta_y_min, a.theta_y_max, a.theta_y_steps)?;
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let results = map_slice(Execution::default(), &points, |&(tx, ty)| {
        make_params(tx, ty, a.rho).and_then(|p| power(&d, &p, method)).map(|v| GridRow {
            theta_x: tx,
            theta_y: ty,
            power: v,
        })
    });
    let mut rows = Vec::with_capacity(results.len());
    let mut skipped = 0;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(Error::Infeasible { .. }) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if skipped > 0 {
        ctx.note(format!("skipped {skipped} grid points outside the feasible region for rho = {}", a.rho));
    }
    emit_rows(io::stdout().lock(), &rows, ctx.format(Format::Csv))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        output: cli.output,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Design(a) => cmd_design(&ctx, a),
        Command::Power(a) => cmd_power(&ctx, a),
        Command::Asn(a) => cmd_asn(&ctx, a),
        Command::Pmf(a) => cmd_pmf(&ctx, a),
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Analyze(a) => cmd_analyze(&ctx, a),
        Command::Monitor(a) => cmd_monitor(&ctx, a),
        Command::ExportGrid(a) => cmd_export_grid(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
