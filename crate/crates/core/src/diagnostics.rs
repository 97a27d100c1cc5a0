//! Monitored quantities of a state, stopping-time bookkeeping and
//! conservation-defect summaries.

use serde::{Deserialize, Serialize};

use crate::error::{DiagnosticsError, SpectralError};
use crate::integrator::SimState;
use crate::spectral::{biot_savart, derivative, sobolev_norm, Axis, SpectralField, VelocityField};

/// Default stopping levels `n`.
pub const DEFAULT_LEVELS: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

/// One row of the diagnostics time series. Field order is the CSV column order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub kinetic_energy: f64,
    pub buoyancy_flux: f64,
    pub enstrophy2: f64,
    pub enstrophy4: f64,
    pub h2_omega: f64,
    pub h3_theta: f64,
    pub linf_grad_u: f64,
    pub linf_grad_theta: f64,
    pub lp_grad_theta: f64,
    pub blowup_accum: f64,
    pub embedding_ratio: f64,
}

impl DiagnosticsRecord {
    pub const COLUMNS: [&'static str; 12] = [
        "t",
        "kinetic_energy",
        "buoyancy_flux",
        "enstrophy2",
        "enstrophy4",
        "h2_omega",
        "h3_theta",
        "linf_grad_u",
        "linf_grad_theta",
        "lp_grad_theta",
        "blowup_accum",
        "embedding_ratio",
    ];

    pub fn values(&self) -> [f64; 12] {
        [
            self.t,
            self.kinetic_energy,
            self.buoyancy_flux,
            self.enstrophy2,
            self.enstrophy4,
            self.h2_omega,
            self.h3_theta,
            self.linf_grad_u,
            self.linf_grad_theta,
            self.lp_grad_theta,
            self.blowup_accum,
            self.embedding_ratio,
        ]
    }

    pub fn from_values(v: [f64; 12]) -> Self {
        DiagnosticsRecord {
            t: v[0],
            kinetic_energy: v[1],
            buoyancy_flux: v[2],
            enstrophy2: v[3],
            enstrophy4: v[4],
            h2_omega: v[5],
            h3_theta: v[6],
            linf_grad_u: v[7],
            linf_grad_theta: v[8],
            lp_grad_theta: v[9],
            blowup_accum: v[10],
            embedding_ratio: v[11],
        }
    }

    /// Value of a named column.
    pub fn field(&self, name: &str) -> Option<f64> {
        Self::COLUMNS.iter().position(|c| *c == name).map(|i| self.values()[i])
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// Integrand of the blow-up functional, `||grad u||_inf + ||grad theta||_inf`.
    pub fn blowup_integrand(&self) -> f64 {
        self.linf_grad_u + self.linf_grad_theta
    }

    /// `||omega||_{H^2} + ||theta||_{H^3}`.
    pub fn sobolev_sum(&self) -> f64 {
        self.h2_omega + self.h3_theta
    }
}

/// `max_x |grad u|_F`, the Frobenius norm of the velocity gradient.
pub fn velocity_gradient_linf(u: &VelocityField) -> f64 {
    let parts = [
        derivative(&u.u1, Axis::X, 1).to_physical(),
        derivative(&u.u1, Axis::Y, 1).to_physical(),
        derivative(&u.u2, Axis::X, 1).to_physical(),
        derivative(&u.u2, Axis::Y, 1).to_physical(),
    ];
    (0..parts[0].len()).map(|i| parts.iter().map(|p| p[i] * p[i]).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

fn gradient_magnitude(f: &SpectralField) -> Vec<f64> {
    let fx = derivative(f, Axis::X, 1).to_physical();
    let fy = derivative(f, Axis::Y, 1).to_physical();
    fx.iter().zip(&fy).map(|(a, b)| a.hypot(*b)).collect()
}

/// `max_x |grad f|`.
pub fn scalar_gradient_linf(f: &SpectralField) -> f64 {
    gradient_magnitude(f).into_iter().fold(0.0, f64::max)
}

/// `|| |grad f| ||_{L^p}` on the collocation grid.
pub fn scalar_gradient_lp(f: &SpectralField, p: f64) -> Result<f64, SpectralError> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(SpectralError::InvalidExponent(p));
    }
    let h = f.grid().spacing();
    let sum: f64 = gradient_magnitude(f).iter().map(|v| v.powf(p)).sum();
    Ok((sum * h * h).powf(1.0 / p))
}

/// `integral theta^4`, evaluated on a 2x zero-padded grid where the quartic
/// of a dealiased field is integrated exactly.
pub fn quartic_integral(theta: &SpectralField) -> Result<f64, SpectralError> {
    let fine = theta.padded(2)?;
    let h = fine.grid().spacing();
    Ok(fine.to_physical().iter().map(|v| v.powi(4)).sum::<f64>() * h * h)
}

/// `integral theta y dV` with `y` in `[-pi, pi)`. Not a torus invariant; kept
/// for reference only.
pub fn potential_moment(theta: &SpectralField) -> f64 {
    let g = theta.grid();
    let n = g.n();
    let h = g.spacing();
    theta.to_physical().iter().enumerate().map(|(idx, v)| v * g.coordinate(idx % n)).sum::<f64>() * h * h
}

pub fn compute_record(state: &SimState, p: f64) -> Result<DiagnosticsRecord, DiagnosticsError> {
    if !state.omega.is_finite() || !state.theta.is_finite() || !state.t.is_finite() {
        return Err(DiagnosticsError::NonFinite);
    }
    let u = biot_savart(&state.omega)?;
    let linf_grad_u = velocity_gradient_linf(&u);
    let linf_grad_theta = scalar_gradient_linf(&state.theta);
    let h2_omega = sobolev_norm(&state.omega, 2.0);
    let h3_theta = sobolev_norm(&state.theta, 3.0);
    let denom = h2_omega + h3_theta;
    let embedding_ratio = if denom > 0.0 { (linf_grad_u + linf_grad_theta) / denom } else { 0.0 };
    let record = DiagnosticsRecord {
        t: state.t,
        kinetic_energy: 0.5 * (u.u1.inner(&u.u1) + u.u2.inner(&u.u2)),
        buoyancy_flux: state.theta.inner(&u.u2),
        enstrophy2: state.theta.inner(&state.theta),
        enstrophy4: quartic_integral(&state.theta)?,
        h2_omega,
        h3_theta,
        linf_grad_u,
        linf_grad_theta,
        lp_grad_theta: scalar_gradient_lp(&state.theta, p)?,
        blowup_accum: state.blowup_accum,
        embedding_ratio,
    };
    if !record.is_finite() {
        return Err(DiagnosticsError::NonFinite);
    }
    Ok(record)
}

/// First-crossing times of the Sobolev monitor (`tau^2_n`) and of the
/// accumulated blow-up integral (`tau^inf_n`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StoppingTimeReport {
    pub levels: Vec<f64>,
    pub tau2_crossings: Vec<(f64, Option<f64>)>,
    pub tauinf_crossings: Vec<(f64, Option<f64>)>,
    last_t: Option<f64>,
}

impl StoppingTimeReport {
    pub fn new(levels: &[f64]) -> Self {
        let mut levels = levels.to_vec();
        levels.sort_by(f64::total_cmp);
        StoppingTimeReport {
            tau2_crossings: levels.iter().map(|&l| (l, None)).collect(),
            tauinf_crossings: levels.iter().map(|&l| (l, None)).collect(),
            levels,
            last_t: None,
        }
    }

    /// Crossing times nondecreasing in the level, within each list.
    pub fn is_monotone(&self) -> bool {
        fn check(list: &[(f64, Option<f64>)]) -> bool {
            let mut prev = f64::NEG_INFINITY;
            let mut seen_none = false;
            for (_, t) in list {
                match t {
                    Some(t) => {
                        if seen_none || *t < prev {
                            return false;
                        }
                        prev = *t;
                    }
                    None => seen_none = true,
                }
            }
            true
        }
        check(&self.tau2_crossings) && check(&self.tauinf_crossings)
    }
}

pub fn update_stopping_report(
    mut report: StoppingTimeReport,
    record: &DiagnosticsRecord,
) -> Result<StoppingTimeReport, DiagnosticsError> {
    if let Some(last) = report.last_t {
        if record.t < last {
            return Err(DiagnosticsError::OutOfOrder { last, got: record.t });
        }
    }
    report.last_t = Some(record.t);
    let s = record.sobolev_sum();
    for (level, hit) in report.tau2_crossings.iter_mut() {
        if hit.is_none() && s >= *level {
            *hit = Some(record.t);
        }
    }
    for (level, hit) in report.tauinf_crossings.iter_mut() {
        if hit.is_none() && record.blowup_accum >= *level {
            *hit = Some(record.t);
        }
    }
    Ok(report)
}

/// Checks that, with `c = max embedding_ratio`, the Sobolev monitor reaches
/// `n / c` no later than the gradient monitor reaches `n`, for each level.
pub fn crossing_consistency(series: &[DiagnosticsRecord], levels: &[f64]) -> bool {
    let c = series.iter().map(|r| r.embedding_ratio).fold(0.0, f64::max);
    if c == 0.0 {
        return true;
    }
    levels.iter().all(|&n| {
        let grad_hit = series.iter().find(|r| r.blowup_integrand() >= n).map(|r| r.t);
        let sob_hit = series.iter().find(|r| r.sobolev_sum() >= n / c).map(|r| r.t);
        match (grad_hit, sob_hit) {
            (Some(g), Some(s)) => s <= g,
            (Some(_), None) => false,
            _ => true,
        }
    })
}

/// Left-endpoint quadrature of the blow-up integrand over a record series
/// sampled at every step.
pub fn offline_blowup_integral(series: &[DiagnosticsRecord]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(series.len());
    let mut total = series.first().map_or(0.0, |r| r.blowup_accum);
    acc.extend(series.first().map(|_| total));
    for w in series.windows(2) {
        total += (w[1].t - w[0].t) * w[0].blowup_integrand();
        acc.push(total);
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConservationDefects {
    /// `max_t |C(t) - C(0)| / |C(0)|` for `Phi = theta^2`.
    pub enstrophy2: f64,
    /// Same for `Phi = theta^4`.
    pub enstrophy4: f64,
    /// `max |dKE/dt - midpoint buoyancy flux|` over consecutive records.
    pub energy_balance: f64,
}

pub fn conservation_defects(series: &[DiagnosticsRecord]) -> Result<ConservationDefects, DiagnosticsError> {
    let first = series.first().ok_or(DiagnosticsError::EmptySeries)?;
    let rel = |now: f64, start: f64| {
        let d = (now - start).abs();
        if start != 0.0 {
            d / start.abs()
        } else {
            d
        }
    };
    let enstrophy2 = series.iter().map(|r| rel(r.enstrophy2, first.enstrophy2)).fold(0.0, f64::max);
    let enstrophy4 = series.iter().map(|r| rel(r.enstrophy4, first.enstrophy4)).fold(0.0, f64::max);
    let energy_balance = series
        .windows(2)
        .filter(|w| w[1].t > w[0].t)
        .map(|w| {
            let rate = (w[1].kinetic_energy - w[0].kinetic_energy) / (w[1].t - w[0].t);
            (rate - 0.5 * (w[0].buoyancy_flux + w[1].buoyancy_flux)).abs()
        })
        .fold(0.0, f64::max);
    Ok(ConservationDefects { enstrophy2, enstrophy4, energy_balance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_band_limited, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn state(omega: SpectralField, theta: SpectralField) -> SimState {
        SimState::new(omega, theta).unwrap()
    }

    fn record_at(t: f64, sob: f64, accum: f64) -> DiagnosticsRecord {
        let mut v = [0.0; 12];
        v[0] = t;
        v[5] = sob;
        v[10] = accum;
        DiagnosticsRecord::from_values(v)
    }

    #[test]
    fn stationary_state_record() {
        let g = Grid::new(32).unwrap();
        let s = state(SpectralField::from_fn(g, |x, _| x.cos()), SpectralField::zeros(g));
        let r = compute_record(&s, 2.0).unwrap();
        assert!((r.kinetic_energy - PI * PI).abs() < 1e-12);
        assert!(r.buoyancy_flux.abs() < 1e-14);
        assert!((r.linf_grad_u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enstrophy_of_sine() {
        let g = Grid::new(32).unwrap();
        let s = state(SpectralField::zeros(g), SpectralField::from_fn(g, |x, _| x.sin()));
        let r = compute_record(&s, 4.0).unwrap();
        assert!((r.enstrophy2 - 2.0 * PI * PI).abs() < 1e-12);
        // integral sin^4 x over the torus = (3/8) (2 pi)^2
        assert!((r.enstrophy4 - 1.5 * PI * PI).abs() < 1e-12);
        assert_eq!(r.embedding_ratio, r.linf_grad_theta / r.h3_theta);
    }

    #[test]
    fn random_state_matches_dense_quadrature() {
        let n = 32;
        let g = Grid::new(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let omega = random_band_limited(g, 6, true, |k| 1.0 / (1.0 + k * k), &mut rng);
        let theta = random_band_limited(g, 6, false, |k| 1.0 / (1.0 + k * k), &mut rng);
        let s = state(omega.clone(), theta.clone());
        let r = compute_record(&s, 4.0).unwrap();

        // Oracle: evaluate every field directly from its Fourier series on a
        // dense 4n grid and integrate with the rectangle rule.
        let m = 4 * n;
        let h = 2.0 * PI / m as f64;
        let modes = |f: &SpectralField| -> Vec<(f64, f64, f64, f64)> {
            f.coeffs()
                .iter()
                .enumerate()
                .filter(|(_, c)| c.norm() > 0.0)
                .map(|(idx, c)| {
                    let (k1, k2) = (crate::fft::wavenumber(idx / n, n), crate::fft::wavenumber(idx % n, n));
                    (k1 as f64, k2 as f64, c.re / (n * n) as f64, c.im / (n * n) as f64)
                })
                .collect()
        };
        let wm = modes(&omega);
        let tm = modes(&theta);
        // value, d/dx, d/dy of a series (phase measured from -pi)
        let eval = |ms: &[(f64, f64, f64, f64)], x: f64, y: f64, scale: &dyn Fn(f64, f64) -> f64| {
            let mut v = [0.0; 3];
            for &(k1, k2, re, im) in ms {
                let s = scale(k1, k2);
                let ph = k1 * (x + PI) + k2 * (y + PI);
                let (c, sn) = (ph.cos(), ph.sin());
                v[0] += s * (re * c - im * sn);
                v[1] += s * k1 * (-re * sn - im * c);
                v[2] += s * k2 * (-re * sn - im * c);
            }
            v
        };
        let psi_scale = |k1: f64, k2: f64| if k1 == 0.0 && k2 == 0.0 { 0.0 } else { -1.0 / (k1 * k1 + k2 * k2) };
        let one = |_: f64, _: f64| 1.0;
        let (mut ke, mut flux, mut e2, mut e4) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                let (x, y) = (-PI + i as f64 * h, -PI + j as f64 * h);
                let psi = eval(&wm, x, y, &psi_scale);
                let th = eval(&tm, x, y, &one);
                let (u1, u2) = (-psi[2], psi[1]);
                ke += 0.5 * (u1 * u1 + u2 * u2);
                flux += th[0] * u2;
                e2 += th[0] * th[0];
                e4 += th[0].powi(4);
            }
        }
        let w = h * h;
        for (got, want) in
            [(r.kinetic_energy, ke * w), (r.buoyancy_flux, flux * w), (r.enstrophy2, e2 * w), (r.enstrophy4, e4 * w)]
        {
            assert!((got - want).abs() <= 1e-8 * want.abs().max(1e-3), "{got} vs {want}");
        }
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let g = Grid::new(16).unwrap();
        let mut s = state(SpectralField::zeros(g), SpectralField::zeros(g));
        s.theta = SpectralField::constant(g, f64::NAN);
        assert_eq!(compute_record(&s, 2.0), Err(DiagnosticsError::NonFinite));
    }

    #[test]
    fn constant_series_levels() {
        let mut rep = StoppingTimeReport::new(&[1.0, 10.0]);
        for i in 0..5 {
            rep = update_stopping_report(rep, &record_at(i as f64 * 0.5, 5.0, 0.0)).unwrap();
        }
        assert_eq!(rep.tau2_crossings, vec![(1.0, Some(0.0)), (10.0, None)]);
    }

    #[test]
    fn linear_accumulator_crossing() {
        let mut rep = StoppingTimeReport::new(&[4.0]);
        for i in 0..=40 {
            let t = i as f64 * 0.1;
            rep = update_stopping_report(rep, &record_at(t, 0.0, 2.0 * t)).unwrap();
        }
        let hit = rep.tauinf_crossings[0].1.unwrap();
        assert!((hit - 2.0).abs() < 1e-12);
    }

    #[test]
    fn doubling_series_table() {
        // S(t_i) = 2^i at t_i = i: level 2^j first crossed at t = j.
        let levels = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let mut rep = StoppingTimeReport::new(&levels);
        for i in 0..6 {
            let v = 2f64.powi(i);
            rep = update_stopping_report(rep, &record_at(i as f64, v * 0.75, v * 1.5)).unwrap();
        }
        // Sobolev: 0.75 * 2^i >= 2^j  <=> i >= j + log2(4/3) => i = j + 1.
        let want2: Vec<_> =
            levels.iter().enumerate().map(|(j, &l)| (l, if j < 5 { Some((j + 1) as f64) } else { None })).collect();
        // Accum: 1.5 * 2^i >= 2^j <=> i >= j - 0.58 => i = j (j=0 at t=0).
        let wantinf: Vec<_> = levels.iter().enumerate().map(|(j, &l)| (l, Some(j as f64))).collect();
        assert_eq!(rep.tau2_crossings, want2);
        assert_eq!(rep.tauinf_crossings, wantinf);
        assert!(rep.is_monotone());
    }

    #[test]
    fn out_of_order_rejected() {
        let rep = StoppingTimeReport::new(&[1.0]);
        let rep = update_stopping_report(rep, &record_at(1.0, 0.0, 0.0)).unwrap();
        assert!(matches!(
            update_stopping_report(rep, &record_at(0.5, 0.0, 0.0)),
            Err(DiagnosticsError::OutOfOrder { .. })
        ));
    }

    #[test]
    fn defects_of_constant_series() {
        let mut r = record_at(0.0, 1.0, 0.0);
        r.enstrophy2 = 3.0;
        r.enstrophy4 = 5.0;
        r.kinetic_energy = 2.0;
        let series: Vec<_> = (0..4).map(|i| DiagnosticsRecord { t: i as f64, ..r }).collect();
        let d = conservation_defects(&series).unwrap();
        assert_eq!(d, ConservationDefects { enstrophy2: 0.0, enstrophy4: 0.0, energy_balance: 0.0 });
        assert_eq!(conservation_defects(&[]), Err(DiagnosticsError::EmptySeries));
    }

    #[test]
    fn offline_quadrature() {
        let mut series = Vec::new();
        for i in 0..4 {
            let mut r = record_at(i as f64 * 0.5, 0.0, 0.0);
            r.linf_grad_u = i as f64;
            r.linf_grad_theta = 1.0;
            series.push(r);
        }
        let acc = offline_blowup_integral(&series);
        assert_eq!(acc, vec![0.0, 0.5, 1.5, 3.0]);
    }
}
