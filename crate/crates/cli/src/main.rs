//! Command-line entry point: validate and run scenario files, sweep
//! parameters, and emit machine-readable reports.
//!
//! Exit codes are stable: `0` clean run, `1` invariant violation (the
//! report is still written), `2` parse or validation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crosspool_core::sim::scenario::ScenarioError;
use crosspool_core::sim::{run_scenario, Report, Scenario};

#[derive(Parser)]
#[command(
    name = "crosspool",
    about = "Deterministic multi-chain AMM swap simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its report.
    Run(RunArgs),
    /// Validate a scenario file without running it.
    Check { scenario: PathBuf },
    /// Run a scenario across an amplification × fee grid and emit a
    /// delimited summary.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Override the scenario's relay seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Report format.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Override the inversion value tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Override the relay drop rate.
    #[arg(long)]
    drop_rate: Option<f64>,
    /// Override the relay duplication rate.
    #[arg(long)]
    dup_rate: Option<f64>,
    /// Override relay reordering.
    #[arg(long)]
    reorder: Option<bool>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    scenario: PathBuf,
    /// Comma-separated amplification values applied to every stable asset.
    #[arg(long)]
    amplification: Option<String>,
    /// Comma-separated fee rates.
    #[arg(long)]
    fee: Option<String>,
    /// Override the scenario's relay seed (same seed for every grid point).
    #[arg(long)]
    seed: Option<u64>,
    /// Write the summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Table,
    Structured,
    Delimited,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Check { scenario } => cmd_check(&scenario),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn load(path: &Path) -> Result<Scenario, ScenarioError> {
    Scenario::from_path(path)
}

fn fail_validation(err: &ScenarioError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(2)
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), ExitCode> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            ExitCode::from(2)
        }),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Table => report.render_table(),
        Format::Structured => report.render_structured(),
        Format::Delimited => report.render_delimited(),
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let mut scenario = match load(&args.scenario) {
        Ok(s) => s,
        Err(e) => return fail_validation(&e),
    };
    if let Some(seed) = args.seed {
        scenario.relay.seed = seed;
    }
    if let Some(tol) = args.tol {
        scenario.run.inversion_tol = tol;
    }
    if let Some(rate) = args.drop_rate {
        scenario.relay.drop_rate = rate;
    }
    if let Some(rate) = args.dup_rate {
        scenario.relay.dup_rate = rate;
    }
    if let Some(reorder) = args.reorder {
        scenario.relay.reorder = reorder;
    }
    let report = match run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => return fail_validation(&e),
    };
    let rendered = render(&report, args.format);
    if let Err(code) = write_output(args.out.as_deref(), &rendered) {
        return code;
    }
    if report.violations.is_empty() {
        ExitCode::SUCCESS
    } else {
        for v in &report.violations {
            eprintln!("violation: {}", v.lines().next().unwrap_or(v));
        }
        ExitCode::from(1)
    }
}

fn cmd_check(path: &Path) -> ExitCode {
    match load(path) {
        Ok(_) => {
            println!("ok: {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail_validation(&e),
    }
}

fn parse_grid_axis(raw: Option<&str>, name: &str) -> Result<Option<Vec<f64>>, String> {
    let Some(raw) = raw else { return Ok(None) };
    let mut values = Vec::new();
    for piece in raw.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            continue;
        }
        let v: f64 = piece
            .parse()
            .map_err(|e| format!("--{name}: cannot parse {piece:?}: {e}"))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(format!("--{name}: empty grid"));
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    Ok(Some(values))
}

fn cmd_sweep(args: SweepArgs) -> ExitCode {
    let base = match load(&args.scenario) {
        Ok(s) => s,
        Err(e) => return fail_validation(&e),
    };
    let amps = match parse_grid_axis(args.amplification.as_deref(), "amplification") {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let fees = match parse_grid_axis(args.fee.as_deref(), "fee") {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    // A missing axis is a single point at the scenario's own value.
    let amp_axis: Vec<Option<f64>> = match amps {
        Some(v) => v.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let fee_axis: Vec<Option<f64>> = match fees {
        Some(v) => v.into_iter().map(Some).collect(),
        None => vec![None],
    };

    let mut summary = String::from(
        "amplification,fee_rate,swaps,finalized,refunded,max_slippage,max_abs_deviation,final_deviation,quiescent,violations\n",
    );
    let mut worst = ExitCode::SUCCESS;
    for amp in &amp_axis {
        for fee in &fee_axis {
            let mut scenario = base.clone();
            if let Some(seed) = args.seed {
                scenario.relay.seed = seed;
            }
            if let Some(a) = amp {
                for chain in &mut scenario.chains {
                    for asset in &mut chain.assets {
                        if let Some(slot) = asset.curve.amplification_mut() {
                            *slot = *a;
                        }
                    }
                }
            }
            if let Some(f) = fee {
                scenario.run.fee_rate = *f;
            }
            let amp_label = amp.map_or_else(|| "scenario".to_string(), |a| format!("{a}"));
            let fee_label =
                fee.map_or_else(|| format!("{}", base.run.fee_rate), |f| format!("{f}"));
            match run_scenario(&scenario) {
                Ok(report) => {
                    let max_slippage = report
                        .receipts
                        .iter()
                        .map(|r| r.slippage)
                        .fold(0.0f64, f64::max);
                    let max_abs_dev = report
                        .deviation_trace
                        .iter()
                        .map(|p| p.deviation.abs())
                        .fold(0.0f64, f64::max);
                    summary.push_str(&format!(
                        "{},{},{},{},{},{},{},{},{},{}\n",
                        amp_label,
                        fee_label,
                        report.swaps.initiated,
                        report.swaps.finalized,
                        report.swaps.refunded,
                        max_slippage,
                        max_abs_dev,
                        report.final_deviation,
                        report.quiescent,
                        report.violations.len()
                    ));
                    if !report.violations.is_empty() {
                        worst = ExitCode::from(1);
                    }
                }
                Err(e) => {
                    summary.push_str(&format!(
                        "{amp_label},{fee_label},0,0,0,,,,false,validation: {e}\n"
                    ));
                    worst = ExitCode::from(1);
                }
            }
        }
    }
    if let Err(code) = write_output(args.out.as_deref(), &summary) {
        return code;
    }
    worst
}
