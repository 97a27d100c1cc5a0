use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size {0} is invalid: need an even n >= 8")]
    InvalidGrid(usize),
    #[error("grid mismatch: {left} vs {right}")]
    GridMismatch { left: usize, right: usize },
    #[error("physical data has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("exponent must be non-negative, got {0}")]
    NegativeExponent(f64),
    #[error("vorticity has nonzero mean {0:e}; no periodic velocity reconstructs it")]
    NonzeroMean(f64),
    #[error("L^p exponent must satisfy p >= 2, got {0}")]
    InvalidExponent(f64),
    #[error("oversampling factor must be at least 1")]
    InvalidOversample,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise mode has zero wavevector")]
    ZeroWavevector,
    #[error("wavevector ({0}, {1}) lies outside the dealiasing cutoff {2}")]
    OutsideDealiasBall(i64, i64, i64),
    #[error("noise amplitude must be positive and finite, got {0}")]
    InvalidAmplitude(f64),
    #[error("time increment must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("the test function is identically zero")]
    ZeroField,
    #[error("commutator order must be at least 1, got {0}")]
    InvalidOrder(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error)]
pub enum IntegratorError {
    #[error("increment dt {got} does not match scheme dt {expected}")]
    DtMismatch { got: f64, expected: f64 },
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("{count} increments supplied for a basis of {expected} modes")]
    IncrementCount { count: usize, expected: usize },
    #[error("non-finite values after step at t = {t}")]
    BlowupSuspected { t: f64, last_state: Box<crate::integrator::SimState> },
    #[error("final time {end} precedes the current time {start}")]
    EndBeforeStart { start: f64, end: f64 },
    #[error("vorticity mean drifted to {0:e}")]
    MeanDrift(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("empty series")]
    EmptySeries,
    #[error("record at t = {got} arrived after t = {last}")]
    OutOfOrder { last: f64, got: f64 },
    #[error("record contains non-finite values")]
    NonFinite,
    #[error("unknown diagnostics field `{0}`")]
    UnknownField(String),
    #[error("moment must be 1 or 2, got {0}")]
    InvalidMoment(u32),
    #[error("no record at t = {0}")]
    TimeNotFound(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{0}")]
    Parse(String),
}

impl ConfigError {
    pub fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad snapshot: {0}")]
    Snapshot(String),
    #[error("bad csv: {0}")]
    Csv(String),
    #[error("empty series")]
    EmptySeries,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
