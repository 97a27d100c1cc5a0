//! Time stepping for the vorticity/temperature system
//!
//! ```text
//! d omega + L_u omega dt + sum_i L_{xi_i} omega (o) dB^i = d_x theta dt
//! d theta + L_u theta dt + sum_i L_{xi_i} theta (o) dB^i = 0
//! ```
//!
//! in Ito form (Euler-Maruyama with the `1/2 sum L_{xi_i}^2` correction) or
//! Stratonovich form (Heun), optionally with the advection terms damped by
//! the cutoff `eta_r` and with `nu Delta^5`, `nu Delta^7` hyper-dissipation.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{compute_record, scalar_gradient_linf, velocity_gradient_linf, DiagnosticsRecord};
use crate::error::{IntegratorError, NoiseError, SpectralError};
use crate::noise::{sample_increments, BrownianIncrements, BrownianPath, NoiseBasis, NoiseRng};
use crate::operators::Transport;
use crate::spectral::{biot_savart, derivative, Axis, Grid, SpectralField, VelocityField};

/// Relative tolerance on the vorticity mean after each step.
const MEAN_TOLERANCE: f64 = 1e-12;

/// Full dynamical state of one realisation.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub omega: SpectralField,
    pub theta: SpectralField,
    pub t: f64,
    /// Left-endpoint quadrature of `||grad u||_inf + ||grad theta||_inf`.
    pub blowup_accum: f64,
}

impl SimState {
    pub fn new(omega: SpectralField, theta: SpectralField) -> Result<Self, SpectralError> {
        if omega.grid() != theta.grid() {
            return Err(SpectralError::GridMismatch { left: omega.grid().n(), right: theta.grid().n() });
        }
        Ok(SimState { omega, theta, t: 0.0, blowup_accum: 0.0 })
    }

    pub fn grid(&self) -> Grid {
        self.omega.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.omega.is_finite() && self.theta.is_finite()
    }

    pub fn velocity(&self) -> Result<VelocityField, SpectralError> {
        biot_savart(&self.omega)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ItoEuler,
    StratonovichHeun,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Variant {
    Plain,
    Truncated { r: f64 },
    Hyper { nu: f64, r: f64 },
}

impl Variant {
    fn radius(&self) -> Option<f64> {
        match *self {
            Variant::Plain => None,
            Variant::Truncated { r } | Variant::Hyper { r, .. } => Some(r),
        }
    }
}

/// Switches for individual right-hand-side terms. All on in normal use;
/// tests turn pieces off to isolate one mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Terms {
    pub advection: bool,
    pub buoyancy: bool,
    pub noise: bool,
}

impl Default for Terms {
    fn default() -> Self {
        Terms { advection: true, buoyancy: true, noise: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub variant: Variant,
    pub dealias: bool,
    /// CFL factor; when set, steps with `dt > cfl h / max(1, |u|_inf + sum |xi_i|_inf)` abort the run.
    pub cfl: Option<f64>,
    pub terms: Terms,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        SchemeConfig { scheme, dt, variant: Variant::Plain, dealias: true, cfl: None, terms: Terms::default() }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |m: &str| Err(IntegratorError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad("dt must be positive");
        }
        match self.variant {
            Variant::Plain => {}
            Variant::Truncated { r } => {
                if !(r > 0.0) {
                    return bad("truncation radius r must be positive");
                }
            }
            Variant::Hyper { nu, r } => {
                if !(r > 0.0) {
                    return bad("truncation radius r must be positive");
                }
                if !(nu >= 0.0) || !nu.is_finite() {
                    return bad("hyper-viscosity nu must be non-negative");
                }
            }
        }
        if let Some(c) = self.cfl {
            if !(c > 0.0) {
                return bad("cfl factor must be positive");
            }
        }
        Ok(())
    }
}

/// Smooth non-increasing cutoff: 1 on `[0, r]`, 0 on `[2r, inf)`, quintic
/// smoothstep in between (C^2).
pub fn cutoff(r: f64, x: f64) -> f64 {
    let x = x.abs();
    if x <= r {
        1.0
    } else if x >= 2.0 * r {
        0.0
    } else {
        let s = (x - r) / r;
        1.0 - s * s * s * (s * (6.0 * s - 15.0) + 10.0)
    }
}

/// `||grad u||_inf` (Frobenius) and `||grad theta||_inf` of a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientNorms {
    pub grad_u: f64,
    pub grad_theta: f64,
}

impl GradientNorms {
    pub fn of(u: &VelocityField, theta: &SpectralField) -> Self {
        GradientNorms { grad_u: velocity_gradient_linf(u), grad_theta: scalar_gradient_linf(theta) }
    }

    pub fn sum(&self) -> f64 {
        self.grad_u + self.grad_theta
    }
}

/// Deterministic tendencies `(-L_u omega + d_x theta, -L_u theta)`.
pub fn drift_deterministic(state: &SimState) -> Result<(SpectralField, SpectralField), IntegratorError> {
    let u = biot_savart(&state.omega)?;
    let t = Transport::new(&u, true);
    let mut d_omega = -&t.apply(&state.omega)?;
    d_omega.axpy(1.0, &derivative(&state.theta, Axis::X, 1));
    let d_theta = -&t.apply(&state.theta)?;
    Ok((d_omega, d_theta))
}

/// `(1/2 sum_i L_{xi_i}^2 omega, 1/2 sum_i L_{xi_i}^2 theta)`.
pub fn ito_correction(state: &SimState, basis: &NoiseBasis) -> Result<(SpectralField, SpectralField), IntegratorError> {
    let stepper = Stepper::new(basis, SchemeConfig::new(Scheme::ItoEuler, 1.0))?;
    stepper.correction(state)
}

/// A basis and configuration prepared for repeated stepping.
#[derive(Clone, Debug)]
pub struct Stepper<'a> {
    basis: &'a NoiseBasis,
    transports: Vec<Transport>,
    cfg: SchemeConfig,
}

struct Tendency {
    omega: SpectralField,
    theta: SpectralField,
}

impl Tendency {
    fn axpy_into(&self, a: f64, omega: &mut SpectralField, theta: &mut SpectralField) {
        omega.axpy(a, &self.omega);
        theta.axpy(a, &self.theta);
    }
}

impl<'a> Stepper<'a> {
    pub fn new(basis: &'a NoiseBasis, cfg: SchemeConfig) -> Result<Self, IntegratorError> {
        cfg.validate()?;
        let transports = basis.fields().iter().map(|xi| Transport::new(xi, cfg.dealias)).collect();
        Ok(Stepper { basis, transports, cfg })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &NoiseBasis {
        self.basis
    }

    /// Drift at a stage state. `norms` are the stage gradient norms, needed
    /// only for the truncated variants.
    fn drift(
        &self,
        omega: &SpectralField,
        theta: &SpectralField,
        u: &VelocityField,
        norms: Option<GradientNorms>,
    ) -> Result<Tendency, SpectralError> {
        let grid = omega.grid();
        let mut d_omega = SpectralField::zeros(grid);
        let mut d_theta = SpectralField::zeros(grid);
        if self.cfg.terms.advection {
            let (eta_u, eta_theta) = match (self.cfg.variant.radius(), norms) {
                (Some(r), Some(n)) => (cutoff(r, n.grad_u), cutoff(r, n.grad_theta)),
                _ => (1.0, 1.0),
            };
            let t = Transport::new(u, self.cfg.dealias);
            if eta_u != 0.0 {
                d_omega.axpy(-eta_u, &t.apply(omega)?);
            }
            if eta_theta != 0.0 {
                d_theta.axpy(-eta_theta, &t.apply(theta)?);
            }
        }
        if self.cfg.terms.buoyancy {
            d_omega.axpy(1.0, &derivative(theta, Axis::X, 1));
        }
        Ok(Tendency { omega: d_omega, theta: d_theta })
    }

    /// `sum_i dB_i L_{xi_i}` applied to both fields.
    fn noise(
        &self,
        omega: &SpectralField,
        theta: &SpectralField,
        inc: &BrownianIncrements,
    ) -> Result<Tendency, SpectralError> {
        let grid = omega.grid();
        let mut n_omega = SpectralField::zeros(grid);
        let mut n_theta = SpectralField::zeros(grid);
        if self.cfg.terms.noise {
            for (t, &db) in self.transports.iter().zip(&inc.values) {
                if db == 0.0 {
                    continue;
                }
                n_omega.axpy(db, &t.apply(omega)?);
                n_theta.axpy(db, &t.apply(theta)?);
            }
        }
        Ok(Tendency { omega: n_omega, theta: n_theta })
    }

    pub fn correction(&self, state: &SimState) -> Result<(SpectralField, SpectralField), IntegratorError> {
        let c = self.correction_tendency(state)?;
        Ok((c.omega, c.theta))
    }

    fn correction_tendency(&self, state: &SimState) -> Result<Tendency, SpectralError> {
        let grid = state.grid();
        let mut c_omega = SpectralField::zeros(grid);
        let mut c_theta = SpectralField::zeros(grid);
        if self.cfg.terms.noise {
            for t in &self.transports {
                c_omega.axpy(0.5, &t.apply_twice(&state.omega)?);
                c_theta.axpy(0.5, &t.apply_twice(&state.theta)?);
            }
        }
        Ok(Tendency { omega: c_omega, theta: c_theta })
    }

    fn needs_stage_norms(&self) -> bool {
        self.cfg.variant.radius().is_some() && self.cfg.terms.advection
    }

    fn check_increments(&self, inc: &BrownianIncrements, dt: f64) -> Result<(), IntegratorError> {
        if (inc.dt - dt).abs() > 1e-12 * dt {
            return Err(IntegratorError::DtMismatch { got: inc.dt, expected: dt });
        }
        if inc.values.len() != self.basis.len() {
            return Err(IntegratorError::IncrementCount { count: inc.values.len(), expected: self.basis.len() });
        }
        Ok(())
    }

    /// Advance by the configured `dt`.
    pub fn step(&self, state: &SimState, inc: &BrownianIncrements) -> Result<SimState, IntegratorError> {
        self.step_by(state, inc, self.cfg.dt)
    }

    /// Advance by an explicit `dt` (used for the final partial step of a run).
    pub fn step_by(&self, state: &SimState, inc: &BrownianIncrements, dt: f64) -> Result<SimState, IntegratorError> {
        self.check_increments(inc, dt)?;
        if state.omega.grid() != self.basis.grid() {
            return Err(SpectralError::GridMismatch { left: state.grid().n(), right: self.basis.grid().n() }.into());
        }
        let u = biot_savart(&state.omega)?;
        let norms = GradientNorms::of(&u, &state.theta);
        let stage_norms = self.needs_stage_norms().then_some(norms);

        let mut omega = state.omega.clone();
        let mut theta = state.theta.clone();
        let f0 = self.drift(&state.omega, &state.theta, &u, stage_norms)?;
        let g0 = self.noise(&state.omega, &state.theta, inc)?;
        match self.cfg.scheme {
            Scheme::ItoEuler => {
                f0.axpy_into(dt, &mut omega, &mut theta);
                self.correction_tendency(state)?.axpy_into(dt, &mut omega, &mut theta);
                g0.axpy_into(-1.0, &mut omega, &mut theta);
            }
            Scheme::StratonovichHeun => {
                let mut p_omega = state.omega.clone();
                let mut p_theta = state.theta.clone();
                f0.axpy_into(dt, &mut p_omega, &mut p_theta);
                g0.axpy_into(-1.0, &mut p_omega, &mut p_theta);
                let pu = biot_savart(&p_omega)?;
                let p_norms = self.needs_stage_norms().then(|| GradientNorms::of(&pu, &p_theta));
                let f1 = self.drift(&p_omega, &p_theta, &pu, p_norms)?;
                let g1 = self.noise(&p_omega, &p_theta, inc)?;
                f0.axpy_into(0.5 * dt, &mut omega, &mut theta);
                f1.axpy_into(0.5 * dt, &mut omega, &mut theta);
                g0.axpy_into(-0.5, &mut omega, &mut theta);
                g1.axpy_into(-0.5, &mut omega, &mut theta);
            }
        }
        if let Variant::Hyper { nu, .. } = self.cfg.variant {
            if nu > 0.0 {
                dissipate(&mut omega, &mut theta, nu, dt);
            }
        }
        let next = SimState { omega, theta, t: state.t + dt, blowup_accum: state.blowup_accum + dt * norms.sum() };
        if !next.is_finite() || !next.blowup_accum.is_finite() {
            return Err(IntegratorError::BlowupSuspected { t: next.t, last_state: Box::new(state.clone()) });
        }
        let mean = next.omega.mean();
        if mean.abs() > MEAN_TOLERANCE * (1.0 + next.omega.l2_norm()) {
            return Err(IntegratorError::MeanDrift(mean));
        }
        Ok(next)
    }

    /// Largest step the CFL guard admits at `state`, if the guard is on.
    pub fn cfl_limit(&self, state: &SimState) -> Result<Option<f64>, IntegratorError> {
        let Some(c) = self.cfg.cfl else { return Ok(None) };
        let u = biot_savart(&state.omega)?;
        let speed = u.linf_magnitude() + self.basis.linf_sum();
        Ok(Some(c * state.grid().spacing() / speed.max(1.0)))
    }
}

/// Exact decay `omega_k *= exp(-nu |k|^10 dt)`, `theta_k *= exp(-nu |k|^14 dt)`.
fn dissipate(omega: &mut SpectralField, theta: &mut SpectralField, nu: f64, dt: f64) {
    let grid = omega.grid();
    let apply = |f: &mut SpectralField, power: i32| {
        for (idx, c) in f.coeffs_mut().iter_mut().enumerate() {
            let (k1, k2) = grid.wavevector(idx);
            let k2sum = (k1 * k1 + k2 * k2) as f64;
            *c *= (-nu * k2sum.powi(power / 2) * dt).exp();
        }
    };
    apply(omega, 10);
    apply(theta, 14);
}

/// Euler-Maruyama step of the Ito system.
pub fn step_ito_euler(
    state: &SimState,
    basis: &NoiseBasis,
    inc: &BrownianIncrements,
    cfg: &SchemeConfig,
) -> Result<SimState, IntegratorError> {
    Stepper::new(basis, SchemeConfig { scheme: Scheme::ItoEuler, ..*cfg })?.step(state, inc)
}

/// Heun step of the Stratonovich system.
pub fn step_stratonovich_heun(
    state: &SimState,
    basis: &NoiseBasis,
    inc: &BrownianIncrements,
    cfg: &SchemeConfig,
) -> Result<SimState, IntegratorError> {
    Stepper::new(basis, SchemeConfig { scheme: Scheme::StratonovichHeun, ..*cfg })?.step(state, inc)
}

/// Step of the truncated system with `cfg.scheme` as the base scheme.
pub fn step_truncated(
    state: &SimState,
    basis: &NoiseBasis,
    inc: &BrownianIncrements,
    cfg: &SchemeConfig,
) -> Result<SimState, IntegratorError> {
    if !matches!(cfg.variant, Variant::Truncated { .. }) {
        return Err(IntegratorError::InvalidConfig("step_truncated needs the truncated variant".into()));
    }
    Stepper::new(basis, *cfg)?.step(state, inc)
}

/// Truncated step followed by exact hyper-dissipation.
pub fn step_hyper(
    state: &SimState,
    basis: &NoiseBasis,
    inc: &BrownianIncrements,
    cfg: &SchemeConfig,
) -> Result<SimState, IntegratorError> {
    if !matches!(cfg.variant, Variant::Hyper { .. }) {
        return Err(IntegratorError::InvalidConfig("step_hyper needs the hyper variant".into()));
    }
    Stepper::new(basis, *cfg)?.step(state, inc)
}

/// Supplies the Brownian increments for successive steps.
pub trait IncrementSource {
    fn next_increments(&mut self, dt: f64, m: usize) -> Result<BrownianIncrements, IntegratorError>;
}

impl IncrementSource for NoiseRng {
    fn next_increments(&mut self, dt: f64, m: usize) -> Result<BrownianIncrements, IntegratorError> {
        Ok(sample_increments(self, dt, m)?)
    }
}

/// Replays a sampled path step by step.
#[derive(Clone, Debug)]
pub struct PathIncrements<'a> {
    path: &'a BrownianPath,
    cursor: usize,
}

impl<'a> PathIncrements<'a> {
    pub fn new(path: &'a BrownianPath) -> Self {
        PathIncrements { path, cursor: 0 }
    }
}

impl IncrementSource for PathIncrements<'_> {
    fn next_increments(&mut self, dt: f64, m: usize) -> Result<BrownianIncrements, IntegratorError> {
        if (dt - self.path.dt()).abs() > 1e-12 * dt {
            return Err(IntegratorError::DtMismatch { got: self.path.dt(), expected: dt });
        }
        if self.cursor >= self.path.len() {
            return Err(IntegratorError::InvalidConfig("Brownian path exhausted".into()));
        }
        let inc = self.path.increment(self.cursor);
        if inc.values.len() != m {
            return Err(IntegratorError::IncrementCount { count: inc.values.len(), expected: m });
        }
        self.cursor += 1;
        Ok(inc)
    }
}

/// Zero increments; for deterministic runs.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoNoise;

impl IncrementSource for NoNoise {
    fn next_increments(&mut self, dt: f64, m: usize) -> Result<BrownianIncrements, IntegratorError> {
        if !(dt > 0.0) {
            return Err(NoiseError::NonPositiveDt(dt).into());
        }
        Ok(BrownianIncrements::zeros(dt, m))
    }
}

/// Receives every accepted state; `record` is present at diagnostics steps.
pub trait Observer {
    fn observe(&mut self, step: usize, state: &SimState, record: Option<&DiagnosticsRecord>);
}

impl<F: FnMut(usize, &SimState, Option<&DiagnosticsRecord>)> Observer for F {
    fn observe(&mut self, step: usize, state: &SimState, record: Option<&DiagnosticsRecord>) {
        self(step, state, record)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub end_time: f64,
    /// Record diagnostics every this many steps (and always at the start and end).
    pub diagnostics_every: usize,
    /// Exponent for `lp_grad_theta`.
    pub lp_exponent: f64,
}

impl RunOptions {
    pub fn new(end_time: f64) -> Self {
        RunOptions { end_time, diagnostics_every: 1, lp_exponent: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RunStatus {
    Completed,
    /// A step produced NaN/Inf; `state` is the last finite one.
    BlowupSuspected {
        step: usize,
    },
    /// The CFL guard refused the step.
    CflViolation {
        step: usize,
        dt_max: f64,
    },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub state: SimState,
    pub records: Vec<DiagnosticsRecord>,
    pub steps: usize,
    pub status: RunStatus,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

/// Step from `initial` to `options.end_time`; the last step is shortened to
/// land exactly on the end time.
pub fn run(
    initial: &SimState,
    basis: &NoiseBasis,
    cfg: &SchemeConfig,
    options: &RunOptions,
    increments: &mut dyn IncrementSource,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory, IntegratorError> {
    let stepper = Stepper::new(basis, *cfg)?;
    run_with(&stepper, initial, options, increments, observers)
}

pub fn run_with(
    stepper: &Stepper<'_>,
    initial: &SimState,
    options: &RunOptions,
    increments: &mut dyn IncrementSource,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory, IntegratorError> {
    let end = options.end_time;
    if !(end >= initial.t) {
        return Err(IntegratorError::EndBeforeStart { start: initial.t, end });
    }
    let dt = stepper.cfg.dt;
    let every = options.diagnostics_every.max(1);
    let total_steps = {
        let span = (end - initial.t) / dt;
        let whole = span.round();
        if (span - whole).abs() <= 1e-9 * span.max(1.0) {
            whole as usize
        } else {
            span.ceil() as usize
        }
    };
    let m = stepper.basis.len();

    let mut records = Vec::new();
    let mut state = initial.clone();
    let first = compute_record(&state, options.lp_exponent)
        .map_err(|_| IntegratorError::BlowupSuspected { t: state.t, last_state: Box::new(state.clone()) })?;
    records.push(first);
    for obs in observers.iter_mut() {
        obs.observe(0, &state, Some(&first));
    }

    let mut status = RunStatus::Completed;
    let mut done = 0;
    for step in 1..=total_steps {
        let last = step == total_steps;
        let h = if last { end - state.t } else { dt };
        let h = if (h - dt).abs() <= 1e-9 * dt { dt } else { h };
        if h <= 0.0 {
            break;
        }
        if let Some(dt_max) = stepper.cfl_limit(&state)? {
            if h > dt_max {
                status = RunStatus::CflViolation { step, dt_max };
                break;
            }
        }
        let inc = increments.next_increments(h, m)?;
        let next = match stepper.step_by(&state, &inc, h) {
            Ok(s) => s,
            Err(IntegratorError::BlowupSuspected { .. }) => {
                status = RunStatus::BlowupSuspected { step };
                break;
            }
            Err(e) => return Err(e),
        };
        state = next;
        if last {
            state.t = end;
        }
        done = step;
        let record = if step % every == 0 || last {
            match compute_record(&state, options.lp_exponent) {
                Ok(r) => Some(r),
                Err(_) => {
                    status = RunStatus::BlowupSuspected { step };
                    break;
                }
            }
        } else {
            None
        };
        if let Some(r) = &record {
            records.push(*r);
        }
        for obs in observers.iter_mut() {
            obs.observe(step, &state, record.as_ref());
        }
    }
    Ok(Trajectory { state, records, steps: done, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_basis, constant_shift_basis, rng_from_seed, NoiseMode, Phase};
    use crate::spectral::random_band_limited;

    fn grid() -> Grid {
        Grid::new(32).unwrap()
    }

    fn field(g: Grid, f: impl Fn(f64, f64) -> f64) -> SpectralField {
        SpectralField::from_fn(g, f)
    }

    fn stationary(g: Grid) -> SimState {
        SimState::new(field(g, |x, _| x.cos()), SpectralField::zeros(g)).unwrap()
    }

    fn assert_close(a: &SpectralField, b: &SpectralField, tol: f64) {
        let d = (a - b).l2_norm();
        assert!(d <= tol * (1.0 + b.l2_norm()), "diff {d}");
    }

    fn random_state(g: Grid, seed: u64) -> SimState {
        let mut rng = rng_from_seed(seed);
        let w = random_band_limited(g, 5, true, |k| 1.0 / (1.0 + k * k), &mut rng);
        let t = random_band_limited(g, 5, true, |k| 1.0 / (1.0 + k * k), &mut rng);
        SimState::new(w, t).unwrap()
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(1.0, 0.5), 1.0);
        assert_eq!(cutoff(1.0, 1.0), 1.0);
        assert_eq!(cutoff(1.0, 2.0), 0.0);
        assert_eq!(cutoff(1.0, 3.0), 0.0);
        assert!((cutoff(1.0, 1.5) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = cutoff(2.0, 2.0 + i as f64 * 0.02);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn drift_examples() {
        let g = grid();
        let (dw, dt) = drift_deterministic(&stationary(g)).unwrap();
        assert!(dw.l2_norm() < 1e-12 && dt.l2_norm() < 1e-12);
        let s = SimState::new(SpectralField::zeros(g), field(g, |x, _| x.cos())).unwrap();
        let (dw, dt) = drift_deterministic(&s).unwrap();
        assert_close(&dw, &field(g, |x, _| -x.sin()), 1e-13);
        assert!(dt.l2_norm() < 1e-13);
    }

    #[test]
    fn correction_examples() {
        let g = grid();
        let b = constant_shift_basis(g, Axis::X, 1.0).unwrap();
        let s = SimState::new(field(g, |x, _| x.sin()), SpectralField::zeros(g)).unwrap();
        let (cw, _) = ito_correction(&s, &b).unwrap();
        assert_close(&cw, &field(g, |x, _| -0.5 * x.sin()), 1e-13);
        let (cw, ct) = ito_correction(&random_state(g, 1), &NoiseBasis::empty(g)).unwrap();
        assert_eq!(cw.l2_norm() + ct.l2_norm(), 0.0);
    }

    #[test]
    fn correction_is_sum_over_modes() {
        let g = grid();
        let m1 = NoiseMode { wavevector: (1, 0), phase: Phase::Cosine, amplitude: 0.3 };
        let m2 = NoiseMode { wavevector: (1, 2), phase: Phase::Sine, amplitude: 0.2 };
        let both = build_basis(&[m1, m2], g).unwrap();
        let s = random_state(g, 3);
        let (cw, ct) = ito_correction(&s, &both).unwrap();
        let mut ew = SpectralField::zeros(g);
        let mut et = SpectralField::zeros(g);
        for m in [m1, m2] {
            let b = build_basis(&[m], g).unwrap();
            let xi = &b.fields()[0];
            ew.axpy(0.5, &crate::operators::lie_second(xi, &s.omega).unwrap());
            et.axpy(0.5, &crate::operators::lie_second(xi, &s.theta).unwrap());
        }
        assert_close(&cw, &ew, 1e-13);
        assert_close(&ct, &et, 1e-13);
    }

    #[test]
    fn ito_stationary_and_buoyancy() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let cfg = SchemeConfig::new(Scheme::ItoEuler, 0.1);
        let inc = BrownianIncrements::zeros(0.1, 0);
        let s0 = stationary(g);
        let s1 = step_ito_euler(&s0, &b, &inc, &cfg).unwrap();
        assert_close(&s1.omega, &s0.omega, 1e-12);
        assert!((s1.t - 0.1).abs() < 1e-15);

        let s0 = SimState::new(SpectralField::zeros(g), field(g, |x, _| x.cos())).unwrap();
        let s1 = step_ito_euler(&s0, &b, &inc, &cfg).unwrap();
        assert_close(&s1.omega, &field(g, |x, _| -0.1 * x.sin()), 1e-13);
        assert_close(&s1.theta, &s0.theta, 1e-13);
    }

    #[test]
    fn ito_constant_noise_leaves_y_mode_alone() {
        let g = grid();
        let b = constant_shift_basis(g, Axis::X, 1.0).unwrap();
        let cfg = SchemeConfig::new(Scheme::ItoEuler, 0.01);
        let mut rng = rng_from_seed(5);
        let mut s = SimState::new(SpectralField::zeros(g), field(g, |_, y| y.cos())).unwrap();
        let theta0 = s.theta.clone();
        for _ in 0..50 {
            let inc = sample_increments(&mut rng, 0.01, 1).unwrap();
            s = step_ito_euler(&s, &b, &inc, &cfg).unwrap();
        }
        assert!((&s.theta - &theta0).l2_norm() <= 1e-12 * theta0.l2_norm());
        assert!(s.omega.l2_norm() < 1e-12);
    }

    #[test]
    fn heun_stationary() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let cfg = SchemeConfig::new(Scheme::StratonovichHeun, 0.05);
        let s0 = stationary(g);
        let s1 = step_stratonovich_heun(&s0, &b, &BrownianIncrements::zeros(0.05, 0), &cfg).unwrap();
        assert_close(&s1.omega, &s0.omega, 1e-12);
    }

    #[test]
    fn heun_pure_transport_shift() {
        let g = grid();
        let b = constant_shift_basis(g, Axis::X, 1.0).unwrap();
        let mut cfg = SchemeConfig::new(Scheme::StratonovichHeun, 0.01);
        cfg.terms.advection = false;
        cfg.terms.buoyancy = false;
        let s0 = SimState::new(SpectralField::zeros(g), field(g, |x, _| x.cos())).unwrap();
        let mut errs = Vec::new();
        for db in [0.1, 0.05, 0.025] {
            let inc = BrownianIncrements { values: vec![db], dt: 0.01 };
            let s1 = step_stratonovich_heun(&s0, &b, &inc, &cfg).unwrap();
            let exact = field(g, |x, _| (x - db).cos());
            errs.push((&s1.theta - &exact).l2_norm() / exact.l2_norm());
        }
        // Local error of the quadratic exponential truncation is O(dB^3).
        for (e, db) in errs.iter().zip([0.1f64, 0.05, 0.025]) {
            assert!(*e <= db.powi(2), "{e}");
        }
        assert!(errs[0] / errs[1] > 6.0 && errs[1] / errs[2] > 6.0);
    }

    #[test]
    fn truncation_limits() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let s = random_state(g, 7);
        let u = s.velocity().unwrap();
        let norms = GradientNorms::of(&u, &s.theta);
        let inc = BrownianIncrements::zeros(0.01, 0);
        let plain = SchemeConfig::new(Scheme::StratonovichHeun, 0.01);
        let big_r = norms.grad_u.max(norms.grad_theta) * 10.0;
        let a = step_stratonovich_heun(&s, &b, &inc, &plain).unwrap();
        let t = step_truncated(&s, &b, &inc, &plain.with_variant(Variant::Truncated { r: big_r })).unwrap();
        assert_eq!(a, t);

        // r so small that eta vanishes: only buoyancy remains in the omega tendency.
        let small = Variant::Truncated { r: norms.grad_u.min(norms.grad_theta) * 1e-3 };
        let ito = SchemeConfig::new(Scheme::ItoEuler, 0.01).with_variant(small);
        let s1 = step_truncated(&s, &b, &inc, &ito).unwrap();
        let mut want = s.omega.clone();
        want.axpy(0.01, &derivative(&s.theta, Axis::X, 1));
        assert_eq!(s1.omega, want);
        assert_eq!(s1.theta, s.theta);
    }

    #[test]
    fn hyper_limits() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let s = random_state(g, 9);
        let inc = BrownianIncrements::zeros(0.01, 0);
        let base = SchemeConfig::new(Scheme::StratonovichHeun, 0.01);
        let tr = step_truncated(&s, &b, &inc, &base.with_variant(Variant::Truncated { r: 0.5 })).unwrap();
        let hy = step_hyper(&s, &b, &inc, &base.with_variant(Variant::Hyper { nu: 0.0, r: 0.5 })).unwrap();
        assert_eq!(tr, hy);

        let mut cfg = base.with_variant(Variant::Hyper { nu: 1e-4, r: 1.0 });
        cfg.terms = Terms { advection: false, buoyancy: false, noise: false };
        let s0 = SimState::new(field(g, |x, _| (2.0 * x).cos()), SpectralField::zeros(g)).unwrap();
        let s1 = step_hyper(&s0, &b, &inc, &cfg).unwrap();
        let want = s0.omega.scaled((-1e-4 * 1024.0 * 0.01f64).exp());
        assert!((&s1.omega - &want).l2_norm() <= 1e-12 * want.l2_norm());
    }

    #[test]
    fn bad_increments_rejected() {
        let g = grid();
        let b = constant_shift_basis(g, Axis::X, 1.0).unwrap();
        let cfg = SchemeConfig::new(Scheme::ItoEuler, 0.01);
        let s = stationary(g);
        assert!(matches!(
            step_ito_euler(&s, &b, &BrownianIncrements::zeros(0.02, 1), &cfg),
            Err(IntegratorError::DtMismatch { .. })
        ));
        assert!(matches!(
            step_ito_euler(&s, &b, &BrownianIncrements::zeros(0.01, 3), &cfg),
            Err(IntegratorError::IncrementCount { .. })
        ));
    }

    #[test]
    fn nan_state_signals_blowup() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let mut s = stationary(g);
        s.theta = SpectralField::constant(g, f64::INFINITY);
        let cfg = SchemeConfig::new(Scheme::ItoEuler, 0.01);
        match step_ito_euler(&s, &b, &BrownianIncrements::zeros(0.01, 0), &cfg) {
            Err(IntegratorError::BlowupSuspected { last_state, .. }) => assert_eq!(*last_state, s),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn run_zero_length_and_partial_step() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let cfg = SchemeConfig::new(Scheme::StratonovichHeun, 0.3);
        let s0 = stationary(g);
        let tr = run(&s0, &b, &cfg, &RunOptions::new(0.0), &mut NoNoise, &mut []).unwrap();
        assert_eq!(tr.steps, 0);
        assert_eq!(tr.state, s0);
        assert_eq!(tr.records.len(), 1);

        let tr = run(&s0, &b, &cfg, &RunOptions::new(1.0), &mut NoNoise, &mut []).unwrap();
        assert_eq!(tr.steps, 4);
        assert_eq!(tr.state.t, 1.0);
        assert_eq!(tr.records.len(), 5);
        assert!(tr.completed());
    }

    #[test]
    fn run_rejects_backwards_time() {
        let g = grid();
        let mut s0 = stationary(g);
        s0.t = 2.0;
        let cfg = SchemeConfig::new(Scheme::ItoEuler, 0.1);
        assert!(run(&s0, &NoiseBasis::empty(g), &cfg, &RunOptions::new(1.0), &mut NoNoise, &mut []).is_err());
        let bad = SchemeConfig::new(Scheme::ItoEuler, -0.1);
        assert!(run(&s0, &NoiseBasis::empty(g), &bad, &RunOptions::new(3.0), &mut NoNoise, &mut []).is_err());
    }

    #[test]
    fn cfl_guard_stops_run() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let mut cfg = SchemeConfig::new(Scheme::StratonovichHeun, 1.0);
        cfg.cfl = Some(0.5);
        let tr = run(&stationary(g), &b, &cfg, &RunOptions::new(3.0), &mut NoNoise, &mut []).unwrap();
        assert!(matches!(tr.status, RunStatus::CflViolation { step: 1, .. }));
    }

    #[test]
    fn observers_see_every_step() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let cfg = SchemeConfig::new(Scheme::StratonovichHeun, 0.1);
        let mut seen = Vec::new();
        let mut obs = |step: usize, _: &SimState, rec: Option<&DiagnosticsRecord>| seen.push((step, rec.is_some()));
        let opts = RunOptions { end_time: 0.5, diagnostics_every: 2, lp_exponent: 2.0 };
        run(&stationary(g), &b, &cfg, &opts, &mut NoNoise, &mut [&mut obs]).unwrap();
        assert_eq!(seen, vec![(0, true), (1, false), (2, true), (3, false), (4, true), (5, true)]);
    }

    #[test]
    fn path_replay_matches_rng() {
        let g = grid();
        let modes = crate::noise::default_family(5.0, 0.1, 1.0);
        let b = build_basis(&modes[..3], g).unwrap();
        let cfg = SchemeConfig::new(Scheme::StratonovichHeun, 0.05);
        let s0 = random_state(g, 11);
        let path = BrownianPath::sample(&mut rng_from_seed(3), 0.05, 4, 3).unwrap();
        let a = run(&s0, &b, &cfg, &RunOptions::new(0.2), &mut PathIncrements::new(&path), &mut []).unwrap();
        let mut rng = rng_from_seed(3);
        let c = run(&s0, &b, &cfg, &RunOptions::new(0.2), &mut rng, &mut []).unwrap();
        assert_eq!(a.state, c.state);
    }

    #[test]
    fn drift_matches_refined_finite_differences() {
        let g = grid();
        let s = random_state(g, 21);
        let (dw, dt) = drift_deterministic(&s).unwrap();
        let fine = 4;
        let nf = g.n() * fine;
        let up = |f: &SpectralField| f.padded(fine).unwrap().to_physical();
        let u = s.velocity().unwrap();
        let (u1, u2, w, th) = (up(&u.u1), up(&u.u2), up(&s.omega), up(&s.theta));
        let h = 2.0 * std::f64::consts::PI / nf as f64;
        // Eighth-order central differences on the refined grid.
        let c = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let at = |v: &[f64], i: usize, j: usize| v[(i % nf) * nf + (j % nf)];
        let dx = |v: &[f64], i: usize, j: usize| {
            (1..=4).map(|m| c[m - 1] * (at(v, i + m, j) - at(v, i + nf - m, j))).sum::<f64>() / h
        };
        let dy = |v: &[f64], i: usize, j: usize| {
            (1..=4).map(|m| c[m - 1] * (at(v, i, j + m) - at(v, i, j + nf - m))).sum::<f64>() / h
        };
        let dtheta_x = derivative(&s.theta, Axis::X, 1).to_physical();
        let (dw_p, dt_p) = (dw.to_physical(), dt.to_physical());
        let scale = dw_p.iter().chain(&dt_p).fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..g.n() {
            for j in 0..g.n() {
                let (fi, fj) = (i * fine, j * fine);
                let adv_w = at(&u1, fi, fj) * dx(&w, fi, fj) + at(&u2, fi, fj) * dy(&w, fi, fj);
                let adv_t = at(&u1, fi, fj) * dx(&th, fi, fj) + at(&u2, fi, fj) * dy(&th, fi, fj);
                let k = i * g.n() + j;
                assert!((dw_p[k] - (dtheta_x[k] - adv_w)).abs() <= 1e-6 * scale);
                assert!((dt_p[k] + adv_t).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn mid_band_truncation_scales_advection() {
        let g = grid();
        let b = NoiseBasis::empty(g);
        let s = random_state(g, 13);
        let u = s.velocity().unwrap();
        let norms = GradientNorms::of(&u, &s.theta);
        let r = 0.75 * norms.grad_u;
        let (eu, et) = (cutoff(r, norms.grad_u), cutoff(r, norms.grad_theta));
        assert!(eu > 0.0 && eu < 1.0);
        let cfg = SchemeConfig::new(Scheme::ItoEuler, 0.01).with_variant(Variant::Truncated { r });
        let s1 = step_truncated(&s, &b, &BrownianIncrements::zeros(0.01, 0), &cfg).unwrap();
        let t = Transport::new(&u, true);
        let mut want_w = s.omega.clone();
        want_w.axpy(-0.01 * eu, &t.apply(&s.omega).unwrap());
        want_w.axpy(0.01, &derivative(&s.theta, Axis::X, 1));
        let mut want_t = s.theta.clone();
        want_t.axpy(-0.01 * et, &t.apply(&s.theta).unwrap());
        assert_close(&s1.omega, &want_w, 1e-14);
        assert_close(&s1.theta, &want_t, 1e-14);
    }

    #[test]
    fn dissipative_substep_never_increases_norms() {
        let g = grid();
        for seed in 0..10 {
            let s = random_state(g, 100 + seed);
            let (mut w, mut t) = (s.omega.clone(), s.theta.clone());
            dissipate(&mut w, &mut t, 1e-6, 0.01);
            assert!(w.l2_norm() <= s.omega.l2_norm());
            assert!(t.l2_norm() <= s.theta.l2_norm());
        }
    }

    #[test]
    fn ito_without_noise_is_forward_euler() {
        let g = grid();
        let s = random_state(g, 17);
        let cfg = SchemeConfig::new(Scheme::ItoEuler, 0.01);
        let s1 = step_ito_euler(&s, &NoiseBasis::empty(g), &BrownianIncrements::zeros(0.01, 0), &cfg).unwrap();
        let (dw, dt) = drift_deterministic(&s).unwrap();
        let mut w = s.omega.clone();
        w.axpy(0.01, &dw);
        let mut t = s.theta.clone();
        t.axpy(0.01, &dt);
        assert_eq!(s1.omega, w);
        assert_eq!(s1.theta, t);
    }
}
