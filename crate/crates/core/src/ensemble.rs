//! Independent noise realizations run in parallel and reduced to per-time
//! statistics.
//!
//! Realization `i` draws its increments from `ChaCha8` seeded with
//! [`realization_seed`]`(master_seed, i)`, so every series depends only on
//! `(config, master_seed, i)` and never on the worker count. Reduction runs
//! on one thread over results in index order.

use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{ConfigError, DiagnosticsError, IntegratorError};
use crate::integrator::{run_with, RunStatus, SimState, Stepper};
use crate::noise::{realization_seed, rng_from_seed, NoiseBasis};

const FIELDS: usize = DiagnosticsRecord::COLUMNS.len();

#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    pub run: RunConfig,
    pub realizations: usize,
    pub master_seed: u64,
    pub workers: usize,
}

impl EnsembleConfig {
    /// Take `realizations` and `seed` from the run config.
    pub fn from_run(run: RunConfig, workers: usize) -> Self {
        EnsembleConfig { realizations: run.realizations, master_seed: run.seed, run, workers }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.realizations == 0 {
            return Err(ConfigError::invalid("realizations", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(ConfigError::invalid("workers", "must be at least 1"));
        }
        self.run.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RealizationStatus {
    Completed,
    BlowupSuspected { step: usize },
    CflViolation { step: usize, dt_max: f64 },
    Failed { message: String },
}

impl From<&RunStatus> for RealizationStatus {
    fn from(s: &RunStatus) -> Self {
        match *s {
            RunStatus::Completed => RealizationStatus::Completed,
            RunStatus::BlowupSuspected { step } => RealizationStatus::BlowupSuspected { step },
            RunStatus::CflViolation { step, dt_max } => RealizationStatus::CflViolation { step, dt_max },
        }
    }
}

#[derive(Clone, Debug)]
pub struct RealizationResult {
    pub index: usize,
    pub seed: u64,
    pub status: RealizationStatus,
    pub records: Vec<DiagnosticsRecord>,
    /// Last accepted state; absent only when the run failed outright.
    pub final_state: Option<SimState>,
}

/// Per-time statistics over the completed realizations. Variances are
/// population variances (divide by the count), so a single realization gives 0.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSummary {
    pub times: Vec<f64>,
    pub mean: Vec<[f64; FIELDS]>,
    pub variance: Vec<[f64; FIELDS]>,
    pub max: Vec<[f64; FIELDS]>,
    /// Number of realizations entering the statistics.
    pub count: usize,
    /// Runs stopped by the NaN/Inf or CFL guards.
    pub aborted: usize,
    pub failed: usize,
    pub seeds: Vec<u64>,
    /// Series of the realizations entering the statistics, in index order.
    pub series: Vec<Vec<DiagnosticsRecord>>,
}

pub struct EnsembleOutput {
    pub summary: EnsembleSummary,
    pub realizations: Vec<RealizationResult>,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "worker panicked".to_string())
}

/// Run realization `index` of an ensemble.
pub fn run_realization(
    run: &RunConfig,
    basis: &NoiseBasis,
    initial: &SimState,
    master_seed: u64,
    index: usize,
) -> RealizationResult {
    let seed = realization_seed(master_seed, index as u64);
    let outcome = catch_unwind(AssertUnwindSafe(|| -> Result<_, IntegratorError> {
        let stepper = Stepper::new(basis, run.scheme_config())?;
        let mut rng = rng_from_seed(seed);
        run_with(&stepper, initial, &run.run_options(), &mut rng, &mut [])
    }));
    match outcome {
        Ok(Ok(tr)) => RealizationResult {
            index,
            seed,
            status: (&tr.status).into(),
            records: tr.records,
            final_state: Some(tr.state),
        },
        Ok(Err(e)) => failed(index, seed, e.to_string()),
        Err(p) => failed(index, seed, panic_message(p)),
    }
}

fn failed(index: usize, seed: u64, message: String) -> RealizationResult {
    RealizationResult {
        index,
        seed,
        status: RealizationStatus::Failed { message },
        records: Vec::new(),
        final_state: None,
    }
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleOutput, ConfigError> {
    cfg.validate()?;
    let basis = cfg.run.basis()?;
    let initial = cfg.run.initial_state()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| ConfigError::invalid("workers", e.to_string()))?;
    let realizations: Vec<RealizationResult> = pool.install(|| {
        (0..cfg.realizations)
            .into_par_iter()
            .map(|i| run_realization(&cfg.run, &basis, &initial, cfg.master_seed, i))
            .collect()
    });
    let summary = summarize(&realizations);
    Ok(EnsembleOutput { summary, realizations })
}

/// Reduce realization results, in the order given, to per-time statistics.
/// Only completed runs whose time grid matches the first completed run count.
pub fn summarize(results: &[RealizationResult]) -> EnsembleSummary {
    let seeds = results.iter().map(|r| r.seed).collect();
    let mut aborted = 0;
    let mut failed = 0;
    let mut series: Vec<Vec<DiagnosticsRecord>> = Vec::new();
    for r in results {
        match r.status {
            RealizationStatus::Completed => {
                let same_grid = series
                    .first()
                    .is_none_or(|s0| s0.len() == r.records.len() && s0.iter().zip(&r.records).all(|(a, b)| a.t == b.t));
                if same_grid {
                    series.push(r.records.clone());
                } else {
                    failed += 1;
                }
            }
            RealizationStatus::BlowupSuspected { .. } | RealizationStatus::CflViolation { .. } => aborted += 1,
            RealizationStatus::Failed { .. } => failed += 1,
        }
    }
    let len = series.first().map_or(0, Vec::len);
    let count = series.len();
    let mut times = Vec::with_capacity(len);
    let mut mean = Vec::with_capacity(len);
    let mut variance = Vec::with_capacity(len);
    let mut max = Vec::with_capacity(len);
    for j in 0..len {
        let rows: Vec<[f64; FIELDS]> = series.iter().map(|s| s[j].values()).collect();
        // Welford updates: exact for constant samples.
        let mut m = [0.0; FIELDS];
        let mut v = [0.0; FIELDS];
        let mut mx = [f64::NEG_INFINITY; FIELDS];
        for (k, row) in rows.iter().enumerate() {
            for c in 0..FIELDS {
                let delta = row[c] - m[c];
                m[c] += delta / (k + 1) as f64;
                v[c] += delta * (row[c] - m[c]);
                mx[c] = mx[c].max(row[c]);
            }
        }
        for x in &mut v {
            *x /= count as f64;
        }
        times.push(rows[0][0]);
        mean.push(m);
        variance.push(v);
        max.push(mx);
    }
    EnsembleSummary { times, mean, variance, max, count, aborted, failed, seeds, series }
}

/// Sample mean with its jackknife standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// `None` with fewer than two samples.
    pub std_error: Option<f64>,
    pub samples: usize,
}

/// Mean of `samples` with the leave-one-out jackknife standard error.
pub fn jackknife_mean(samples: &[f64]) -> Result<MomentEstimate, DiagnosticsError> {
    let m = samples.len();
    if m == 0 {
        return Err(DiagnosticsError::EmptySeries);
    }
    let total: f64 = samples.iter().sum();
    let value = total / m as f64;
    let std_error = (m >= 2).then(|| {
        let loo: Vec<f64> = samples.iter().map(|x| (total - x) / (m - 1) as f64).collect();
        let centre = loo.iter().sum::<f64>() / m as f64;
        let ss: f64 = loo.iter().map(|v| (v - centre).powi(2)).sum();
        ((m - 1) as f64 / m as f64 * ss).sqrt()
    });
    Ok(MomentEstimate { value, std_error, samples: m })
}

/// Estimate `E[field(t)^moment]`. A field name of the form `sup:<column>`
/// uses the running supremum of that column over `[0, t]`.
pub fn moment_estimate(
    summary: &EnsembleSummary,
    field: &str,
    moment: u32,
    t: f64,
) -> Result<MomentEstimate, DiagnosticsError> {
    let (sup, column) = match field.strip_prefix("sup:") {
        Some(c) => (true, c),
        None => (false, field),
    };
    let col = DiagnosticsRecord::COLUMNS
        .iter()
        .position(|c| *c == column)
        .ok_or_else(|| DiagnosticsError::UnknownField(field.to_string()))?;
    if !(1..=2).contains(&moment) {
        return Err(DiagnosticsError::InvalidMoment(moment));
    }
    let tol = 1e-9 * t.abs().max(1.0);
    let j = summary.times.iter().position(|&s| (s - t).abs() <= tol).ok_or(DiagnosticsError::TimeNotFound(t))?;
    let samples: Vec<f64> = summary
        .series
        .iter()
        .map(|s| {
            let x = if sup {
                s[..=j].iter().map(|r| r.values()[col]).fold(f64::NEG_INFINITY, f64::max)
            } else {
                s[j].values()[col]
            };
            x.powi(moment as i32)
        })
        .collect();
    jackknife_mean(&samples)
}
