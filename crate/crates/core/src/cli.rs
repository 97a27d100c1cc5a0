//! The `sbq` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_config, RunConfig};
use crate::diagnostics::{update_stopping_report, DiagnosticsRecord, StoppingTimeReport};
use crate::ensemble::{run_ensemble, EnsembleConfig, RealizationResult, RealizationStatus};
use crate::error::{ConfigError, IoError};
use crate::integrator::{run_with, Observer, SimState, Stepper};
use crate::io::{
    read_diagnostics_csv, render_report, run_dir, snapshot_name, write_json, write_realization, write_snapshot,
    write_summary, Manifest,
};
use crate::noise::{realization_seed, rng_from_seed};
use crate::verify::{conservation_report, operators_report, Report};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_ASSERTION: u8 = 3;
pub const EXIT_BLOWUP: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "sbq", version, about = "Stochastic Boussinesq pseudospectral simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` of the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides `seed` of the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of realizations (overrides `realizations` of the config).
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Worker threads for ensembles; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Suppress progress output.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one realization.
    Simulate(CommonArgs),
    /// Run independent realizations in parallel and summarise them.
    Ensemble(CommonArgs),
    /// Run the operator battery and print a JSON report.
    VerifyOperators(CommonArgs),
    /// Run the deterministic conservation studies and print a JSON report.
    VerifyConservation(CommonArgs),
    /// Render a diagnostics CSV as a plain-text table.
    Report {
        /// Path to a `diagnostics.csv`.
        input: PathBuf,
    },
}

/// Failure of a subcommand, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Assertion(String),
    Blowup(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Assertion(_) => EXIT_ASSERTION,
            CliError::Blowup(_) => EXIT_BLOWUP,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Assertion(m) | CliError::Blowup(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Config(e.to_string())
    }
}

pub fn load_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let path = args.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(m) = args.realizations {
        cfg.realizations = m;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn progress(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

/// Writes snapshots every `interval` steps and keeps the first I/O error.
struct SnapshotWriter<'a> {
    dir: &'a Path,
    interval: usize,
    error: Option<IoError>,
}

impl Observer for SnapshotWriter<'_> {
    fn observe(&mut self, step: usize, state: &SimState, _record: Option<&DiagnosticsRecord>) {
        let due = step == 0 || (self.interval > 0 && step.is_multiple_of(self.interval));
        if due && self.error.is_none() {
            if let Err(e) = write_snapshot(&self.dir.join(snapshot_name(step)), state) {
                self.error = Some(e);
            }
        }
    }
}

pub fn simulate(args: &CommonArgs) -> Result<PathBuf, CliError> {
    let cfg = load_config(args)?;
    let out = PathBuf::from(&cfg.output_dir);
    let dir = run_dir(&out, 0);
    fs::create_dir_all(&dir).map_err(IoError::from)?;
    let basis = cfg.basis()?;
    let initial = cfg.initial_state()?;
    let seed = realization_seed(cfg.seed, 0);
    let stepper = Stepper::new(&basis, cfg.scheme_config()).map_err(|e| CliError::Config(e.to_string()))?;
    let mut writer = SnapshotWriter { dir: &dir, interval: cfg.snapshot_interval, error: None };
    progress(args.quiet, format!("simulate: n = {}, T = {}, dt = {}", cfg.n, cfg.end_time, cfg.dt));
    let tr = run_with(&stepper, &initial, &cfg.run_options(), &mut rng_from_seed(seed), &mut [&mut writer])
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(e) = writer.error {
        return Err(e.into());
    }
    write_snapshot(&dir.join(snapshot_name(tr.steps)), &tr.state)?;
    let result = RealizationResult {
        index: 0,
        seed,
        status: (&tr.status).into(),
        records: tr.records,
        final_state: Some(tr.state),
    };
    write_realization(&out, &result)?;
    let mut report = StoppingTimeReport::new(&cfg.stopping_levels);
    for r in &result.records {
        report = update_stopping_report(report, r).map_err(|e| CliError::Assertion(e.to_string()))?;
    }
    let mut manifest = Manifest::new("simulate", &cfg, 1, std::slice::from_ref(&result));
    manifest.stopping_times = Some(report);
    write_json(&out.join("manifest.json"), &manifest)?;
    match result.status {
        RealizationStatus::Completed => {
            progress(args.quiet, format!("simulate: {} records written to {}", result.records.len(), dir.display()));
            Ok(out)
        }
        RealizationStatus::BlowupSuspected { step } => {
            Err(CliError::Blowup(format!("blow-up suspected at step {step}; last finite state saved")))
        }
        RealizationStatus::CflViolation { step, dt_max } => {
            Err(CliError::Blowup(format!("CFL guard stopped the run at step {step}: dt exceeds {dt_max:e}")))
        }
        RealizationStatus::Failed { ref message } => Err(CliError::Config(message.clone())),
    }
}

pub fn ensemble(args: &CommonArgs) -> Result<PathBuf, CliError> {
    let cfg = load_config(args)?;
    let workers = args.workers.unwrap_or_else(default_workers);
    let out = PathBuf::from(&cfg.output_dir);
    progress(args.quiet, format!("ensemble: {} realizations on {workers} workers", cfg.realizations));
    let ens = EnsembleConfig::from_run(cfg.clone(), workers);
    let output = run_ensemble(&ens)?;
    for r in &output.realizations {
        write_realization(&out, r)?;
    }
    write_summary(&out, &output.summary)?;
    write_json(&out.join("manifest.json"), &Manifest::new("ensemble", &cfg, workers, &output.realizations))?;
    progress(
        args.quiet,
        format!(
            "ensemble: {} completed, {} aborted, {} failed; summary in {}",
            output.summary.count,
            output.summary.aborted,
            output.summary.failed,
            out.join("summary.csv").display()
        ),
    );
    Ok(out)
}

fn emit_report(report: &Report, args: &CommonArgs, file: &str) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(IoError::from)?;
        fs::write(out.join(file), format!("{text}\n")).map_err(IoError::from)?;
    }
    println!("{text}");
    if report.passed {
        Ok(())
    } else {
        Err(CliError::Assertion(format!("failed checks: {}", report.failures.join(", "))))
    }
}

pub fn verify_operators(args: &CommonArgs) -> Result<(), CliError> {
    let report = operators_report().map_err(|e| CliError::Assertion(e.to_string()))?;
    emit_report(&report, args, "operators.json")
}

pub fn verify_conservation(args: &CommonArgs) -> Result<(), CliError> {
    let report = conservation_report().map_err(|e| CliError::Assertion(e.to_string()))?;
    emit_report(&report, args, "conservation.json")
}

pub fn report(input: &Path) -> Result<String, CliError> {
    let file = fs::File::open(input).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    let records = read_diagnostics_csv(file)?;
    Ok(render_report(&records)?)
}

/// Run a parsed command line and return the process exit code.
pub fn execute(cli: Cli) -> u8 {
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a).map(|_| ()),
        Command::Ensemble(a) => ensemble(a).map(|_| ()),
        Command::VerifyOperators(a) => verify_operators(a),
        Command::VerifyConservation(a) => verify_conservation(a),
        Command::Report { input } => report(input).map(|text| {
            let _ = std::io::stdout().write_all(text.as_bytes());
        }),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    ExitCode::from(execute(cli))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_line_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "sbq",
            "ensemble",
            "--config",
            "c.json",
            "--out",
            "o",
            "--seed",
            "9",
            "--realizations",
            "4",
            "--workers",
            "2",
            "--quiet",
        ])
        .unwrap();
        match cli.command {
            Command::Ensemble(a) => {
                assert_eq!(a.seed, Some(9));
                assert_eq!(a.realizations, Some(4));
                assert_eq!(a.workers, Some(2));
                assert!(a.quiet);
            }
            other => panic!("{other:?}"),
        }
        assert!(Cli::try_parse_from(["sbq", "simulate", "--bogus"]).is_err());
    }

    #[test]
    fn missing_config_is_a_config_error() {
        let e = simulate(&CommonArgs::default()).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_CONFIG);
    }
}
