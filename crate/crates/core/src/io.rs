//! File formats: binary snapshots, diagnostics/summary CSV, run manifests and
//! plain-text reports.
//!
//! Snapshot layout (all little-endian):
//!
//! | offset | size     | content                                |
//! |--------|----------|----------------------------------------|
//! | 0      | 4        | magic `SBQ1`                           |
//! | 4      | 2        | format version (u16)                   |
//! | 6      | 4        | grid size `n` (u32)                    |
//! | 10     | 4        | field count (u32, always 2)            |
//! | 14     | 8        | time (f64)                             |
//! | 22     | 16 n^2   | omega then theta, row-major f64 values |

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{conservation_defects, DiagnosticsRecord, StoppingTimeReport};
use crate::ensemble::{EnsembleSummary, RealizationResult};
use crate::error::IoError;
use crate::integrator::SimState;
use crate::spectral::{Grid, SpectralField};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"SBQ1";
pub const SNAPSHOT_VERSION: u16 = 1;
pub const SNAPSHOT_HEADER_LEN: usize = 22;
pub const CSV_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;

/// Physical-space fields as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub version: u16,
    pub n: u32,
    pub time: f64,
    pub omega: Vec<f64>,
    pub theta: Vec<f64>,
}

pub fn snapshot_len(n: usize) -> usize {
    SNAPSHOT_HEADER_LEN + 2 * n * n * 8
}

impl Snapshot {
    pub fn from_state(state: &SimState) -> Self {
        Snapshot {
            version: SNAPSHOT_VERSION,
            n: state.grid().n() as u32,
            time: state.t,
            omega: state.omega.to_physical(),
            theta: state.theta.to_physical(),
        }
    }

    /// Spectral state at the stored time; `blowup_accum` is not stored and starts at 0.
    pub fn to_state(&self) -> Result<SimState, IoError> {
        let bad = |e: crate::error::SpectralError| IoError::Snapshot(e.to_string());
        let grid = Grid::new(self.n as usize).map_err(bad)?;
        let omega = SpectralField::from_physical(grid, &self.omega).map_err(bad)?;
        let theta = SpectralField::from_physical(grid, &self.theta).map_err(bad)?;
        let mut s = SimState::new(omega, theta).map_err(bad)?;
        s.t = self.time;
        Ok(s)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(snapshot_len(self.n as usize));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&2u32.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for v in self.omega.iter().chain(&self.theta) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IoError> {
        let bad = |m: &str| IoError::Snapshot(m.to_string());
        if bytes.len() < SNAPSHOT_HEADER_LEN {
            return Err(bad("truncated header"));
        }
        if &bytes[..4] != SNAPSHOT_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SNAPSHOT_VERSION {
            return Err(IoError::Snapshot(format!("unsupported version {version}")));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let n = u32_at(6);
        let fields = u32_at(10);
        if fields != 2 {
            return Err(IoError::Snapshot(format!("expected 2 fields, found {fields}")));
        }
        let time = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
        let cells = (n as usize).checked_mul(n as usize).ok_or_else(|| bad("grid too large"))?;
        if bytes.len() != snapshot_len(n as usize) {
            return Err(IoError::Snapshot(format!(
                "size {} does not match n = {n} (expected {})",
                bytes.len(),
                snapshot_len(n as usize)
            )));
        }
        let mut values =
            bytes[SNAPSHOT_HEADER_LEN..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let omega = values.by_ref().take(cells).collect();
        let theta = values.collect();
        Ok(Snapshot { version, n, time, omega, theta })
    }
}

pub fn write_snapshot(path: &Path, state: &SimState) -> Result<(), IoError> {
    fs::write(path, Snapshot::from_state(state).to_bytes())?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, IoError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    Snapshot::from_bytes(&bytes)
}

/// 17 significant digits, enough to round-trip any f64.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_row(w: &mut impl Write, values: impl IntoIterator<Item = f64>) -> std::io::Result<()> {
    let line: Vec<String> = values.into_iter().map(format_value).collect();
    writeln!(w, "{}", line.join(","))
}

pub fn write_diagnostics_csv(w: &mut impl Write, records: &[DiagnosticsRecord]) -> Result<(), IoError> {
    writeln!(w, "{}", DiagnosticsRecord::COLUMNS.join(","))?;
    for r in records {
        write_row(w, r.values())?;
    }
    Ok(())
}

pub fn read_diagnostics_csv(r: impl Read) -> Result<Vec<DiagnosticsRecord>, IoError> {
    let mut lines = BufReader::new(r).lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(IoError::EmptySeries),
    };
    if header.trim() != DiagnosticsRecord::COLUMNS.join(",") {
        return Err(IoError::Csv(format!("unexpected header `{}`", header.trim())));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| IoError::Csv(format!("row {}: {e}", i + 1)))?;
        let arr: [f64; 12] = vals
            .try_into()
            .map_err(|v: Vec<f64>| IoError::Csv(format!("row {}: {} columns, expected 12", i + 1, v.len())))?;
        out.push(DiagnosticsRecord::from_values(arr));
    }
    if out.is_empty() {
        return Err(IoError::EmptySeries);
    }
    Ok(out)
}

pub fn summary_header() -> Vec<String> {
    let mut h = vec!["t".to_string(), "count".to_string()];
    for c in &DiagnosticsRecord::COLUMNS[1..] {
        for stat in ["mean", "var", "max"] {
            h.push(format!("{c}_{stat}"));
        }
    }
    h
}

pub fn write_summary_csv(w: &mut impl Write, summary: &EnsembleSummary) -> Result<(), IoError> {
    writeln!(w, "{}", summary_header().join(","))?;
    for (j, &t) in summary.times.iter().enumerate() {
        let mut row = vec![t, summary.count as f64];
        for c in 1..DiagnosticsRecord::COLUMNS.len() {
            row.extend([summary.mean[j][c], summary.variance[j][c], summary.max[j][c]]);
        }
        write_row(w, row)?;
    }
    Ok(())
}

/// Identifier of this build, `<version>+<git revision>` when the revision is
/// supplied through `SBQ_GIT_REV` at compile time.
pub fn build_id() -> String {
    match option_env!("SBQ_GIT_REV") {
        Some(rev) => format!("{}+{rev}", env!("CARGO_PKG_VERSION")),
        None => format!("{}+unknown", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizationEntry {
    pub index: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub status: crate::ensemble::RealizationStatus,
    pub records: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FormatVersions {
    pub manifest: u32,
    pub snapshot: u16,
    pub csv: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub build: String,
    pub formats: FormatVersions,
    pub command: String,
    pub config: RunConfig,
    pub master_seed: u64,
    pub workers: usize,
    pub csv_columns: Vec<String>,
    pub realizations: Vec<RealizationEntry>,
    pub aborted: usize,
    pub failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopping_times: Option<StoppingTimeReport>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, workers: usize, results: &[RealizationResult]) -> Self {
        let is_abort = |r: &&RealizationResult| {
            matches!(
                r.status,
                crate::ensemble::RealizationStatus::BlowupSuspected { .. }
                    | crate::ensemble::RealizationStatus::CflViolation { .. }
            )
        };
        Manifest {
            tool: "sbq".to_string(),
            build: build_id(),
            formats: FormatVersions { manifest: MANIFEST_VERSION, snapshot: SNAPSHOT_VERSION, csv: CSV_SCHEMA_VERSION },
            command: command.to_string(),
            config: config.clone(),
            master_seed: config.seed,
            workers,
            csv_columns: DiagnosticsRecord::COLUMNS.iter().map(|s| s.to_string()).collect(),
            realizations: results
                .iter()
                .map(|r| RealizationEntry {
                    index: r.index,
                    seed: r.seed,
                    status: r.status.clone(),
                    records: r.records.len(),
                })
                .collect(),
            aborted: results.iter().filter(is_abort).count(),
            failed: results
                .iter()
                .filter(|r| matches!(r.status, crate::ensemble::RealizationStatus::Failed { .. }))
                .count(),
            stopping_times: None,
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// `out/run_<i>`.
pub fn run_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("run_{index}"))
}

pub fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step:08}.sbq")
}

/// Write `run_<i>/diagnostics.csv` and a final snapshot for one realization.
pub fn write_realization(out: &Path, result: &RealizationResult) -> Result<PathBuf, IoError> {
    let dir = run_dir(out, result.index);
    fs::create_dir_all(&dir)?;
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("diagnostics.csv"))?);
    write_diagnostics_csv(&mut f, &result.records)?;
    f.flush()?;
    if let Some(state) = &result.final_state {
        write_snapshot(&dir.join("final.sbq"), state)?;
    }
    Ok(dir)
}

pub fn write_summary(out: &Path, summary: &EnsembleSummary) -> Result<(), IoError> {
    fs::create_dir_all(out)?;
    let mut f = std::io::BufWriter::new(fs::File::create(out.join("summary.csv"))?);
    write_summary_csv(&mut f, summary)?;
    f.flush()?;
    Ok(())
}

/// Plain-text table of a diagnostics series: first, last, min and max of
/// every column, then the conservation defects.
pub fn render_report(records: &[DiagnosticsRecord]) -> Result<String, IoError> {
    if records.is_empty() {
        return Err(IoError::EmptySeries);
    }
    let first = records[0].values();
    let last = records[records.len() - 1].values();
    let mut out = String::new();
    let _ = writeln!(out, "records: {}  t: [{}, {}]", records.len(), first[0], last[0]);
    let _ = writeln!(out, "{:<16} {:>24} {:>24} {:>24} {:>24}", "column", "first", "last", "min", "max");
    for (c, name) in DiagnosticsRecord::COLUMNS.iter().enumerate().skip(1) {
        let (lo, hi) = records
            .iter()
            .map(|r| r.values()[c])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let _ = writeln!(
            out,
            "{:<16} {:>24} {:>24} {:>24} {:>24}",
            name,
            format_value(first[c]),
            format_value(last[c]),
            format_value(lo),
            format_value(hi)
        );
    }
    if let Ok(d) = conservation_defects(records) {
        let _ = writeln!(out, "enstrophy2 defect     {}", format_value(d.enstrophy2));
        let _ = writeln!(out, "enstrophy4 defect     {}", format_value(d.enstrophy4));
        let _ = writeln!(out, "energy balance defect {}", format_value(d.energy_balance));
    }
    Ok(out)
}
