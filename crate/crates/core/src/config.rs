//! Run configuration: strict JSON parsing, validation and the presets for
//! initial data.

use serde::{Deserialize, Deserializer, Serialize};

use crate::diagnostics::DEFAULT_LEVELS;
use crate::error::ConfigError;
use crate::integrator::{RunOptions, Scheme, SchemeConfig, SimState, Variant};
use crate::noise::{build_basis, constant_shift_basis, default_family, rng_from_seed, NoiseBasis, NoiseMode};
use crate::spectral::{random_band_limited, Axis, Grid, SpectralField};

/// Largest grid accepted from a config file.
pub const MAX_GRID: usize = 4096;

/// Default CFL factor when the guard is on.
pub const DEFAULT_CFL: f64 = 0.5;

/// Regularity margin of `random_hs`: coefficients decay like `(1+|k|^2)^{-(s+1)/2 - EPS/2}`.
pub const RANDOM_HS_EPS: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    #[default]
    Plain,
    Truncated,
    Hyper,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    #[default]
    None,
    Modes(Vec<NoiseMode>),
    DefaultFamily {
        gamma: f64,
        sigma: f64,
        k_max: f64,
        /// Keep only the first `count` modes of the family.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count: Option<usize>,
    },
    Constant {
        direction: Axis,
        amplitude: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Omega,
    Theta,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `amp * cos(k . x)` in the chosen field, the other field zero.
    SingleMode {
        k: (i64, i64),
        #[serde(default = "one")]
        amp: f64,
        target: Target,
    },
    /// `omega = 2 amp sin x sin y`, `theta = 0`.
    TaylorGreen {
        #[serde(default = "one")]
        amp: f64,
    },
    /// Random band-limited data, almost surely in `H^s` in the continuum limit.
    RandomHs {
        s_omega: f64,
        s_theta: f64,
        seed: u64,
        #[serde(default = "one")]
        amp: f64,
    },
    /// Taylor-Green vorticity with random `H^s` temperature.
    TaylorGreenRandomTheta {
        #[serde(default = "one")]
        amp: f64,
        s_theta: f64,
        seed: u64,
    },
}

impl InitialSpec {
    fn from_name(name: &str) -> Result<Self, String> {
        match name {
            "taylor_green" => Ok(InitialSpec::TaylorGreen { amp: 1.0 }),
            "single_mode" | "random_hs" | "taylor_green_random_theta" => {
                Err(format!("preset `{name}` needs parameters, write it as an object"))
            }
            other => Err(format!("unknown preset `{other}`")),
        }
    }
}

/// Accepts either a bare preset name or a tagged object.
fn deserialize_initial<'de, D: Deserializer<'de>>(d: D) -> Result<InitialSpec, D::Error> {
    use serde::de::Error;
    let v = serde_json::Value::deserialize(d)?;
    match v {
        serde_json::Value::String(s) => InitialSpec::from_name(&s).map_err(D::Error::custom),
        other => serde_json::from_value(other).map_err(D::Error::custom),
    }
}

fn default_output() -> String {
    "out".to_string()
}
fn default_interval() -> usize {
    1
}
fn default_p() -> f64 {
    4.0
}
fn default_levels() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}
fn default_true() -> bool {
    true
}
fn default_cfl_factor() -> f64 {
    DEFAULT_CFL
}

/// Everything needed to reproduce a run. Parsed with unknown keys rejected;
/// serializing a parsed config gives the fully defaulted form echoed into
/// `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(rename = "T")]
    pub end_time: f64,
    pub dt: f64,
    pub scheme: Scheme,
    #[serde(default)]
    pub variant: VariantKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(deserialize_with = "deserialize_initial")]
    pub initial: InitialSpec,
    #[serde(default = "default_output")]
    pub output_dir: String,
    /// Steps between snapshots; 0 writes only the initial and final state.
    #[serde(default)]
    pub snapshot_interval: usize,
    #[serde(default = "default_interval")]
    pub diagnostics_interval: usize,
    /// Exponent of the `lp_grad_theta` diagnostic.
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_levels")]
    pub stopping_levels: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_interval")]
    pub realizations: usize,
    #[serde(default = "default_true")]
    pub cfl: bool,
    #[serde(default = "default_cfl_factor")]
    pub cfl_factor: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
}

/// Parse and validate a JSON config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        if path == "." {
            ConfigError::Parse(message)
        } else {
            ConfigError::Invalid { path, message }
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(path, format!("must be positive and finite, got {v}")))
    }
}

fn finite(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(path, "must be finite"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 8 || !self.n.is_multiple_of(2) || self.n > MAX_GRID {
            return Err(ConfigError::invalid("n", format!("must be even and in [8, {MAX_GRID}], got {}", self.n)));
        }
        if !(self.end_time >= 0.0) || !self.end_time.is_finite() {
            return Err(ConfigError::invalid("T", format!("must be non-negative, got {}", self.end_time)));
        }
        positive("dt", self.dt)?;
        match self.variant {
            VariantKind::Plain => {
                if self.r.is_some() {
                    return Err(ConfigError::invalid("r", "only allowed with variant truncated or hyper"));
                }
                if self.nu.is_some() {
                    return Err(ConfigError::invalid("nu", "only allowed with variant hyper"));
                }
            }
            VariantKind::Truncated => {
                positive("r", self.r.ok_or_else(|| ConfigError::invalid("r", "required by variant truncated"))?)?;
                if self.nu.is_some() {
                    return Err(ConfigError::invalid("nu", "only allowed with variant hyper"));
                }
            }
            VariantKind::Hyper => {
                positive("r", self.r.ok_or_else(|| ConfigError::invalid("r", "required by variant hyper"))?)?;
                positive("nu", self.nu.ok_or_else(|| ConfigError::invalid("nu", "required by variant hyper"))?)?;
            }
        }
        if self.diagnostics_interval == 0 {
            return Err(ConfigError::invalid("diagnostics_interval", "must be at least 1"));
        }
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return Err(ConfigError::invalid("p", format!("must be finite and at least 2, got {}", self.p)));
        }
        for (i, &l) in self.stopping_levels.iter().enumerate() {
            positive(&format!("stopping_levels[{i}]"), l)?;
        }
        if self.stopping_levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(ConfigError::invalid("stopping_levels", "must be nondecreasing"));
        }
        if self.realizations == 0 {
            return Err(ConfigError::invalid("realizations", "must be at least 1"));
        }
        positive("cfl_factor", self.cfl_factor)?;
        if self.output_dir.is_empty() {
            return Err(ConfigError::invalid("output_dir", "must not be empty"));
        }
        self.validate_initial()?;
        self.basis()?;
        Ok(())
    }

    fn validate_initial(&self) -> Result<(), ConfigError> {
        match &self.initial {
            InitialSpec::SingleMode { k, amp, target } => {
                finite("initial.single_mode.amp", *amp)?;
                let half = self.n as i64 / 2;
                if k.0.abs() >= half || k.1.abs() >= half {
                    return Err(ConfigError::invalid("initial.single_mode.k", "wavevector not resolved by the grid"));
                }
                if *k == (0, 0) && *target == Target::Omega {
                    return Err(ConfigError::invalid("initial.single_mode.k", "vorticity must have zero mean"));
                }
            }
            InitialSpec::TaylorGreen { amp } => finite("initial.taylor_green.amp", *amp)?,
            InitialSpec::RandomHs { s_omega, s_theta, amp, .. } => {
                finite("initial.random_hs.amp", *amp)?;
                for (name, s) in [("s_omega", s_omega), ("s_theta", s_theta)] {
                    if !(*s >= 0.0) || !s.is_finite() {
                        return Err(ConfigError::invalid(format!("initial.random_hs.{name}"), "must be non-negative"));
                    }
                }
            }
            InitialSpec::TaylorGreenRandomTheta { amp, s_theta, .. } => {
                finite("initial.taylor_green_random_theta.amp", *amp)?;
                if !(*s_theta >= 0.0) || !s_theta.is_finite() {
                    return Err(ConfigError::invalid(
                        "initial.taylor_green_random_theta.s_theta",
                        "must be non-negative",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.n).expect("validated grid size")
    }

    pub fn variant(&self) -> Variant {
        match self.variant {
            VariantKind::Plain => Variant::Plain,
            VariantKind::Truncated => Variant::Truncated { r: self.r.unwrap_or(f64::NAN) },
            VariantKind::Hyper => Variant::Hyper { nu: self.nu.unwrap_or(f64::NAN), r: self.r.unwrap_or(f64::NAN) },
        }
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let mut cfg = SchemeConfig::new(self.scheme, self.dt).with_variant(self.variant());
        cfg.dealias = self.dealias;
        cfg.cfl = self.cfl.then_some(self.cfl_factor);
        cfg
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions { end_time: self.end_time, diagnostics_every: self.diagnostics_interval, lp_exponent: self.p }
    }

    /// Noise modes listed in order, or empty for constant or absent noise.
    pub fn noise_modes(&self) -> Vec<NoiseMode> {
        match &self.noise {
            NoiseSpec::Modes(m) => m.clone(),
            NoiseSpec::DefaultFamily { gamma, sigma, k_max, count } => {
                let mut modes = default_family(*gamma, *sigma, *k_max);
                if let Some(c) = count {
                    modes.truncate(*c);
                }
                modes
            }
            NoiseSpec::None | NoiseSpec::Constant { .. } => Vec::new(),
        }
    }

    pub fn basis(&self) -> Result<NoiseBasis, ConfigError> {
        let grid = Grid::new(self.n).map_err(|e| ConfigError::invalid("n", e.to_string()))?;
        let wrap = |e: crate::error::NoiseError| ConfigError::invalid("noise", e.to_string());
        match &self.noise {
            NoiseSpec::None => Ok(NoiseBasis::empty(grid)),
            NoiseSpec::Constant { direction, amplitude } => {
                constant_shift_basis(grid, *direction, *amplitude).map_err(wrap)
            }
            NoiseSpec::DefaultFamily { gamma, sigma, k_max, .. } => {
                finite("noise.default_family.gamma", *gamma)?;
                positive("noise.default_family.sigma", *sigma)?;
                if !(*k_max >= 1.0) || !k_max.is_finite() {
                    return Err(ConfigError::invalid("noise.default_family.k_max", "must be at least 1"));
                }
                build_basis(&self.noise_modes(), grid).map_err(wrap)
            }
            NoiseSpec::Modes(m) => build_basis(m, grid).map_err(wrap),
        }
    }

    pub fn initial_state(&self) -> Result<SimState, ConfigError> {
        initial_condition(&self.initial, self.grid())
    }
}

fn random_hs_field(grid: Grid, s: f64, amp: f64, zero_mean: bool, rng: &mut crate::noise::NoiseRng) -> SpectralField {
    let exponent = -(s + 1.0) / 2.0 - RANDOM_HS_EPS / 2.0;
    random_band_limited(grid, grid.dealias_cutoff(), zero_mean, |k| amp * (1.0 + k * k).powf(exponent), rng).dealiased()
}

/// Build the `t = 0` state for a preset.
pub fn initial_condition(spec: &InitialSpec, grid: Grid) -> Result<SimState, ConfigError> {
    let wrap = |e: crate::error::SpectralError| ConfigError::invalid("initial", e.to_string());
    let zero = SpectralField::zeros(grid);
    match *spec {
        InitialSpec::SingleMode { k, amp, target } => {
            let f = SpectralField::from_fn(grid, |x, y| amp * (k.0 as f64 * x + k.1 as f64 * y).cos());
            match target {
                Target::Omega => SimState::new(f, zero),
                Target::Theta => SimState::new(zero, f),
            }
            .map_err(wrap)
        }
        InitialSpec::TaylorGreen { amp } => SimState::new(taylor_green_vorticity(grid, amp), zero).map_err(wrap),
        InitialSpec::RandomHs { s_omega, s_theta, seed, amp } => {
            let mut rng = rng_from_seed(seed);
            let omega = random_hs_field(grid, s_omega, amp, true, &mut rng);
            let theta = random_hs_field(grid, s_theta, amp, false, &mut rng);
            SimState::new(omega, theta).map_err(wrap)
        }
        InitialSpec::TaylorGreenRandomTheta { amp, s_theta, seed } => {
            let mut rng = rng_from_seed(seed);
            let theta = random_hs_field(grid, s_theta, amp, false, &mut rng);
            SimState::new(taylor_green_vorticity(grid, amp), theta).map_err(wrap)
        }
    }
}

/// Vorticity of `u = amp (sin x cos y, -cos x sin y)`.
pub fn taylor_green_vorticity(grid: Grid, amp: f64) -> SpectralField {
    SpectralField::from_fn(grid, |x, y| 2.0 * amp * x.sin() * y.sin())
}
