//! Command-line front end.
//!
//! Every failure is reported as one `ERROR <code>: <detail>` line on stderr.
//! Exit status is 1 for bad input (arguments, files, LUTs, scenarios) and 2
//! when a mission fails while running.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::harness::{
    run_comparison, run_prepared, run_sweep, sweep_grid, write_frontier_csv, write_summary_csv,
    write_timeline_csv, MissionSummary, Scenario, ScenarioError,
};
use crate::model::{derive_threshold, load_lut, MissionGoal, SystemLut};
use crate::sim::{MissionTimeline, Policy, SimError};
use crate::svg;

#[derive(Debug, Parser)]
#[command(name = "avery-sim", version, about = "Adaptive split-computing mission simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario's own policy.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write SVG charts.
        #[arg(long)]
        plot: bool,
        /// Override the trace seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the adaptive controller and the three single-tier baselines.
    Compare {
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        plot: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep constant bandwidths, e.g. `sweep 8..20 --step 1`.
    Sweep {
        range: String,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value = "PrioritizeAccuracy")]
        goal: MissionGoal,
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long, default_value_t = 1200.0)]
        duration_s: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        plot: bool,
    },
    /// Write the scenario's bandwidth trace as CSV.
    GenTrace {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a LUT file and print its tiers.
    ValidateLut { path: PathBuf },
    /// Bandwidth needed to ship `size-mb` megabytes at `pps` packets per second.
    DeriveThreshold {
        #[arg(long)]
        size_mb: f64,
        #[arg(long)]
        pps: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: &'static str,
    pub detail: String,
    pub exit: i32,
}

impl CliError {
    fn input(code: &'static str, detail: impl Into<String>) -> Self {
        CliError { code, detail: one_line(&detail.into()), exit: 1 }
    }

    fn runtime(detail: impl Into<String>) -> Self {
        CliError { code: "E_SIM", detail: one_line(&detail.into()), exit: 2 }
    }

    pub fn line(&self) -> String {
        format!("ERROR {}: {}", self.code, self.detail)
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        let detail = e.to_string();
        match e {
            ScenarioError::Io { .. } => CliError::input("E_IO", detail),
            ScenarioError::Parse { .. } => CliError::input("E_PARSE", detail),
            ScenarioError::Lut(_) => CliError::input("E_LUT", detail),
            ScenarioError::Trace(_) | ScenarioError::Invalid(_) => CliError::input("E_SCENARIO", detail),
            ScenarioError::Sim(SimError::TraceTooShort { .. } | SimError::InvalidConfig(_) | SimError::Profile(_)) => {
                CliError::input("E_SCENARIO", detail)
            }
            ScenarioError::Sim(_) | ScenarioError::ContextPacketNotScorable(_) => CliError::runtime(detail),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::input("E_IO", format!("{}: {e}", path.display()))
}

/// Parses `args` (including the program name) and runs the command, writing
/// human-readable output to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return Ok(());
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::input("E_ARGS", first.trim_start_matches("error: ")));
        }
    };
    execute(cli.command, stdout)
}

/// Entry point for the binary: returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(args, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Run { scenario, out, plot, seed } => cmd_run(&scenario, &out, plot, seed, stdout),
        Command::Compare { scenario, out, plot, seed } => cmd_compare(&scenario, &out, plot, seed, stdout),
        Command::Sweep { range, step, goal, lut, duration_s, out, plot } => {
            cmd_sweep(&range, step, goal, lut.as_deref(), duration_s, &out, plot, stdout)
        }
        Command::GenTrace { scenario, out, seed } => cmd_gen_trace(&scenario, &out, seed, stdout),
        Command::ValidateLut { path } => cmd_validate_lut(&path, stdout),
        Command::DeriveThreshold { size_mb, pps } => {
            let v = derive_threshold(size_mb, pps).map_err(|e| CliError::input("E_ARGS", e.to_string()))?;
            writeln!(stdout, "{}", trim_number(v)).map_err(|e| CliError::input("E_IO", e.to_string()))
        }
    }
}

/// Shortest decimal rendering at six-digit precision.
fn trim_number(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

/// Loads the scenario and checks every input and output path before anything runs.
fn load_scenario(path: &Path, out_dir: Option<&Path>, seed: Option<u64>) -> Result<Scenario, CliError> {
    if !path.is_file() {
        return Err(CliError::input("E_IO", format!("{}: scenario file not found", path.display())));
    }
    let mut scenario = Scenario::from_file(path)?;
    for f in scenario.referenced_files() {
        if !f.is_file() {
            return Err(CliError::input("E_IO", format!("{}: file not found", f.display())));
        }
    }
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
    }
    if let Some(seed) = seed {
        scenario.trace.seed = seed;
    }
    Ok(scenario)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| io_error(path, e))?;
    fs::write(path, buf).map_err(|e| io_error(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn print_summaries(summaries: &[MissionSummary], stdout: &mut dyn Write) -> Result<(), CliError> {
    write_summary_csv(summaries, &mut *stdout).map_err(|e| CliError::input("E_IO", e.to_string()))
}

fn write_plots(
    out: &Path,
    timelines: &[MissionTimeline],
    lut: &SystemLut<f64>,
    trace: &crate::trace::BandwidthTrace<f64>,
) -> Result<(), CliError> {
    write_text(&out.join("bandwidth.svg"), &svg::bandwidth_chart(trace, lut.bandwidth_threshold_mbps()))?;
    write_text(&out.join("tiers.svg"), &svg::tier_chart(timelines))?;
    write_text(&out.join("accuracy.svg"), &svg::accuracy_chart(timelines, lut))?;
    write_text(&out.join("throughput.svg"), &svg::throughput_chart(timelines))
}

fn cmd_run(path: &Path, out: &Path, plot: bool, seed: Option<u64>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let scenario = load_scenario(path, Some(out), seed)?;
    let prepared = scenario.prepare()?;
    let (timeline, summary) = run_prepared(&scenario, &prepared, scenario.policy)?;
    write_file(&out.join("timeline.csv"), |b| write_timeline_csv(&timeline, b))?;
    let summaries = [summary];
    write_file(&out.join("summary.csv"), |b| write_summary_csv(&summaries, b))?;
    if plot {
        write_plots(out, std::slice::from_ref(&timeline), &prepared.lut, &prepared.trace)?;
    }
    print_summaries(&summaries, stdout)
}

fn cmd_compare(
    path: &Path,
    out: &Path,
    plot: bool,
    seed: Option<u64>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let scenario = load_scenario(path, Some(out), seed)?;
    let prepared = scenario.prepare()?;
    let runs = run_comparison(&scenario)?;
    for (timeline, _) in &runs {
        let name = format!("timeline_{}.csv", timeline.policy.as_str());
        write_file(&out.join(name), |b| write_timeline_csv(timeline, b))?;
    }
    let (timelines, summaries): (Vec<_>, Vec<_>) = runs.into_iter().unzip();
    write_file(&out.join("summary.csv"), |b| write_summary_csv(&summaries, b))?;
    if plot {
        write_plots(out, &timelines, &prepared.lut, &prepared.trace)?;
    }
    print_summaries(&summaries, stdout)
}

/// Parses `from..to` (also accepts `from..=to`).
pub fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::input("E_ARGS", format!("invalid range '{s}', expected FROM..TO"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let from: f64 = a.trim().parse().map_err(|_| bad())?;
    let to: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(from > 0.0) || !(to >= from) || !to.is_finite() {
        return Err(CliError::input("E_ARGS", format!("range '{s}' must be positive and ordered")));
    }
    Ok((from, to))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    range: &str,
    step: f64,
    goal: MissionGoal,
    lut: Option<&Path>,
    duration_s: f64,
    out: &Path,
    plot: bool,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let (from, to) = parse_range(range)?;
    if !(step > 0.0) || !step.is_finite() {
        return Err(CliError::input("E_ARGS", format!("invalid step {step}, must be positive")));
    }
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(CliError::input("E_ARGS", format!("invalid duration {duration_s}")));
    }
    if let Some(p) = lut {
        if !p.is_file() {
            return Err(CliError::input("E_IO", format!("{}: LUT file not found", p.display())));
        }
    }
    ensure_dir(out)?;
    let grid = sweep_grid(from, to, step)?;
    let mut base = Scenario::constant(from, duration_s, Policy::Avery, goal);
    base.lut_path = lut.map(Path::to_path_buf);
    base.load_lut()?;
    let points = run_sweep(&base, &grid)?;
    write_file(&out.join("frontier.csv"), |b| write_frontier_csv(&points, b))?;
    if plot {
        write_text(&out.join("frontier.svg"), &svg::frontier_chart(&points))?;
    }
    write_frontier_csv(&points, &mut *stdout).map_err(|e| CliError::input("E_IO", e.to_string()))
}

fn cmd_gen_trace(path: &Path, out: &Path, seed: Option<u64>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let scenario = load_scenario(path, None, seed)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let trace = scenario.build_trace()?;
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).map_err(|e| CliError::input("E_IO", e.to_string()))?;
    fs::write(out, buf).map_err(|e| io_error(out, e))?;
    let threshold = scenario.load_lut()?.bandwidth_threshold_mbps();
    writeln!(
        stdout,
        "wrote {} ({} samples, mean {:.3} Mbps, {:.1}% below {threshold} Mbps)",
        out.display(),
        trace.samples().len(),
        trace.mean_mbps(),
        100.0 * trace.fraction_below(threshold)
    )
    .map_err(|e| CliError::input("E_IO", e.to_string()))
}

fn cmd_validate_lut(path: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let lut: SystemLut<f64> = load_lut(&text).map_err(|e| CliError::input("E_LUT", format!("{}: {e}", path.display())))?;
    let mut s = String::new();
    s.push_str(&format!(
        "{:<16}{:>8}{:>16}{:>16}{:>10}\n",
        "tier", "ratio", "iou_original", "iou_finetuned", "size_mb"
    ));
    for t in lut.tiers() {
        s.push_str(&format!(
            "{:<16}{:>8.2}{:>16.2}{:>16.2}{:>10.2}\n",
            t.name.as_str(),
            t.compression_ratio,
            t.accuracy_original,
            t.accuracy_finetuned,
            t.data_size_mb
        ));
    }
    s.push_str(&format!("bandwidth_threshold_mbps {}\n", trim_number(lut.bandwidth_threshold_mbps())));
    if let Some(pps) = lut.min_insight_pps() {
        s.push_str(&format!("min_insight_pps {}\n", trim_number(pps)));
    }
    stdout.write_all(s.as_bytes()).map_err(|e| CliError::input("E_IO", e.to_string()))
}
