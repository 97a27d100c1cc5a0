//! Fourier representation of real periodic fields on the torus `[-pi, pi]^2`
//! and the multiplier operators built on it.
//!
//! Coefficients follow the unnormalised forward DFT of the collocation
//! samples, so `f(x_j) = n^-2 * sum_k c_k e^{i k . (x_j - x_0)}`. Every
//! operator here is diagonal in `k`, so the grid origin at `-pi` only
//! enters through [`SpectralField::from_fn`] and never through a multiplier.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::SpectralError;
use crate::fft;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Mean-vorticity tolerance used by [`biot_savart`].
pub const MEAN_TOLERANCE: f64 = 1e-12;

/// Uniform square grid with `n` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
}

#[allow(clippy::len_without_is_empty)]
impl Grid {
    pub fn new(n: usize) -> Result<Self, SpectralError> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(SpectralError::InvalidGrid(n));
        }
        Ok(Grid { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored coefficients, `n^2`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    /// Largest wavenumber kept by the real-transform convention, `n/2 - 1`.
    pub fn k_max(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// `x_j = -pi + j h`.
    pub fn coordinate(&self, j: usize) -> f64 {
        -PI + j as f64 * self.spacing()
    }

    /// Largest |k_i| that survives the 2/3 rule.
    ///
    /// This is `floor((n - 1) / 3)`: modes above `n/3` are removed, and when
    /// `3 | n` the mode `n/3` itself goes too, since its quadratic alias
    /// would land back on a retained mode.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n as i64 - 1) / 3
    }

    #[inline]
    pub(crate) fn wavevector(&self, idx: usize) -> (i64, i64) {
        (fft::wavenumber(idx / self.n, self.n), fft::wavenumber(idx % self.n, self.n))
    }

    #[inline]
    pub(crate) fn index(&self, k1: i64, k2: i64) -> usize {
        fft::index_of(k1, self.n) * self.n + fft::index_of(k2, self.n)
    }

    /// Whether `(k1, k2)` survives dealiasing.
    pub fn in_dealias_ball(&self, k1: i64, k2: i64) -> bool {
        let c = self.dealias_cutoff();
        k1.abs() <= c && k2.abs() <= c
    }

    /// Measure of the torus, `(2 pi)^2`.
    pub fn volume(&self) -> f64 {
        4.0 * PI * PI
    }

    fn check_same(&self, other: &Grid) -> Result<(), SpectralError> {
        if self.n != other.n {
            return Err(SpectralError::GridMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Real periodic scalar field held as Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        SpectralField { grid, coeffs: vec![ZERO; grid.len()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = Complex64::new(value * grid.len() as f64, 0.0);
        f
    }

    /// Transform collocation values (layout `[i * n + j]` = value at `(x_i, y_j)`).
    pub fn from_physical(grid: Grid, values: &[f64]) -> Result<Self, SpectralError> {
        if values.len() != grid.len() {
            return Err(SpectralError::LengthMismatch { got: values.len(), expected: grid.len() });
        }
        let mut coeffs: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::forward(&mut coeffs, grid.n);
        Ok(SpectralField { grid, coeffs })
    }

    /// Sample `f(x, y)` on the collocation grid.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n;
        let values: Vec<f64> =
            (0..grid.len()).map(|idx| f(grid.coordinate(idx / n), grid.coordinate(idx % n))).collect();
        Self::from_physical(grid, &values).expect("length matches by construction")
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self, SpectralError> {
        if coeffs.len() != grid.len() {
            return Err(SpectralError::LengthMismatch { got: coeffs.len(), expected: grid.len() });
        }
        Ok(SpectralField { grid, coeffs })
    }

    #[inline]
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of wavevector `(k1, k2)`, indices taken modulo `n`.
    pub fn coeff(&self, k1: i64, k2: i64) -> Complex64 {
        self.coeffs[self.grid.index(k1, k2)]
    }

    /// Collocation values (real part of the inverse transform).
    pub fn to_physical(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        fft::inverse(&mut data, self.grid.n);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Spatial mean `(2 pi)^-2 * integral f`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re / self.grid.len() as f64
    }

    /// Apply a real diagonal multiplier `m(k1, k2)`.
    pub fn map_real_multiplier(&self, m: impl Fn(i64, i64) -> f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let (k1, k2) = self.grid.wavevector(idx);
                c * m(k1, k2)
            })
            .collect();
        SpectralField { grid: self.grid, coeffs }
    }

    /// Largest violation of `c(-k) = conj(c(k))` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let (k1, k2) = self.grid.wavevector(idx);
            let mirror = self.coeffs[self.grid.index(-k1, -k2)];
            worst = worst.max((self.coeffs[idx] - mirror.conj()).norm());
        }
        worst / scale
    }

    /// `<f, g>_{L^2}` with the torus measure, evaluated via Parseval.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let sum: f64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a * b.conj()).re).sum();
        sum * self.grid.volume() / (self.grid.len() as f64).powi(2)
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// Zero every mode outside the 2/3 ball.
    pub fn dealiased(&self) -> Self {
        let mut out = self.clone();
        out.dealias_in_place();
        out
    }

    pub fn dealias_in_place(&mut self) {
        let grid = self.grid;
        for (idx, c) in self.coeffs.iter_mut().enumerate() {
            let (k1, k2) = grid.wavevector(idx);
            if !grid.in_dealias_ball(k1, k2) {
                *c = ZERO;
            }
        }
    }

    /// Largest `max(|k1|, |k2|)` carrying a nonzero coefficient.
    pub fn bandwidth(&self) -> i64 {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 1e-13 * scale)
            .map(|(idx, _)| {
                let (k1, k2) = self.grid.wavevector(idx);
                k1.abs().max(k2.abs())
            })
            .max()
            .unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.grid, other.grid);
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += o * a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        SpectralField { grid: self.grid, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    /// Translate along x: `g(x, y) = f(x - shift, y)`.
    pub fn shifted_x(&self, shift: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &c)| {
                let (k1, _) = self.grid.wavevector(idx);
                c * Complex64::from_polar(1.0, -(k1 as f64) * shift)
            })
            .collect();
        let mut out = SpectralField { grid: self.grid, coeffs };
        out.zero_nyquist();
        out
    }

    fn zero_nyquist(&mut self) {
        let n = self.grid.n;
        let ny = n / 2;
        for t in 0..n {
            self.coeffs[ny * n + t] = ZERO;
            self.coeffs[t * n + ny] = ZERO;
        }
    }

    /// Resample onto a finer grid by zero padding. Nyquist content is split
    /// evenly between `+n/2` and `-n/2` so the padded field stays real.
    pub fn padded(&self, factor: usize) -> Result<SpectralField, SpectralError> {
        if factor == 0 {
            return Err(SpectralError::InvalidOversample);
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let big = Grid::new(self.grid.n * factor)?;
        let mut out = SpectralField::zeros(big);
        let half = self.grid.n as i64 / 2;
        let scale = (factor * factor) as f64;
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if c == ZERO {
                continue;
            }
            let (k1, k2) = self.grid.wavevector(idx);
            let t1: &[i64] = if k1 == -half { &[-half, half] } else { &[k1] };
            let t2: &[i64] = if k2 == -half { &[-half, half] } else { &[k2] };
            let w = scale / (t1.len() * t2.len()) as f64;
            for &a in t1 {
                for &b in t2 {
                    let j = big.index(a, b);
                    out.coeffs[j] += c * w;
                }
            }
        }
        Ok(out)
    }
}

impl Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

/// Velocity (or noise) vector field `(u1, u2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    pub u1: SpectralField,
    pub u2: SpectralField,
}

impl VelocityField {
    pub fn new(u1: SpectralField, u2: SpectralField) -> Result<Self, SpectralError> {
        u1.grid.check_same(&u2.grid)?;
        Ok(VelocityField { u1, u2 })
    }

    pub fn zeros(grid: Grid) -> Self {
        VelocityField { u1: SpectralField::zeros(grid), u2: SpectralField::zeros(grid) }
    }

    pub fn grid(&self) -> Grid {
        self.u1.grid
    }

    /// `d_x u1 + d_y u2`.
    pub fn divergence(&self) -> SpectralField {
        let mut d = derivative(&self.u1, Axis::X, 1);
        d.axpy(1.0, &derivative(&self.u2, Axis::Y, 1));
        d
    }

    /// Scalar curl `d_x u2 - d_y u1`.
    pub fn curl(&self) -> SpectralField {
        let mut c = derivative(&self.u2, Axis::X, 1);
        c.axpy(-1.0, &derivative(&self.u1, Axis::Y, 1));
        c
    }

    pub fn l2_norm(&self) -> f64 {
        (self.u1.inner(&self.u1) + self.u2.inner(&self.u2)).sqrt()
    }

    /// `(||u1||_{H^s}^2 + ||u2||_{H^s}^2)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        sobolev_norm(&self.u1, s).hypot(sobolev_norm(&self.u2, s))
    }

    /// Pointwise `max |u|` on the collocation grid.
    pub fn linf_magnitude(&self) -> f64 {
        let a = self.u1.to_physical();
        let b = self.u2.to_physical();
        a.iter().zip(&b).map(|(x, y)| x.hypot(*y)).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite()
    }
}

/// `(i k_axis)^order` applied to every coefficient; for odd orders the
/// Nyquist row/column is zeroed.
pub fn derivative(f: &SpectralField, axis: Axis, order: u32) -> SpectralField {
    let grid = f.grid;
    let half = grid.n as i64 / 2;
    let i_pow = match order % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    let coeffs = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, &c)| {
            let (k1, k2) = grid.wavevector(idx);
            let k = match axis {
                Axis::X => k1,
                Axis::Y => k2,
            };
            if order % 2 == 1 && k == -half {
                return ZERO;
            }
            c * i_pow * (k as f64).powi(order as i32)
        })
        .collect();
    SpectralField { grid, coeffs }
}

/// `Lambda^s = (-Delta)^{s/2}` via the multiplier `|k|^s`, zero mode sent to 0.
pub fn fractional_laplacian(f: &SpectralField, s: f64) -> Result<SpectralField, SpectralError> {
    if !(s >= 0.0) {
        return Err(SpectralError::NegativeExponent(s));
    }
    Ok(f.map_real_multiplier(
        |k1, k2| {
            if k1 == 0 && k2 == 0 {
                0.0
            } else {
                ((k1 * k1 + k2 * k2) as f64).powf(s / 2.0)
            }
        },
    ))
}

/// Bessel potential `(I - Delta)^{s/2}`.
pub fn bessel_multiplier(f: &SpectralField, s: f64) -> SpectralField {
    if s == 0.0 {
        return f.clone();
    }
    f.map_real_multiplier(|k1, k2| (1.0 + (k1 * k1 + k2 * k2) as f64).powf(s / 2.0))
}

/// `||(I - Delta)^{s/2} f||_{L^2}` with the `(2 pi)^2` measure.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let grid = f.grid;
    let sum: f64 = f
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, c)| {
            let (k1, k2) = grid.wavevector(idx);
            c.norm_sqr() * (1.0 + (k1 * k1 + k2 * k2) as f64).powf(s)
        })
        .sum();
    (sum * grid.volume()).sqrt() / grid.len() as f64
}

/// Stream function `psi = Delta^{-1} omega` (zero mean).
pub fn inverse_laplacian(omega: &SpectralField) -> SpectralField {
    omega.map_real_multiplier(|k1, k2| {
        let k2sum = (k1 * k1 + k2 * k2) as f64;
        if k2sum == 0.0 {
            0.0
        } else {
            -1.0 / k2sum
        }
    })
}

/// `u = grad^perp psi = (-d_y psi, d_x psi)`.
pub fn stream_to_velocity(psi: &SpectralField) -> VelocityField {
    VelocityField { u1: -&derivative(psi, Axis::Y, 1), u2: derivative(psi, Axis::X, 1) }
}

/// Biot-Savart law `u = grad^perp Delta^{-1} omega`.
pub fn biot_savart(omega: &SpectralField) -> Result<VelocityField, SpectralError> {
    let mean = omega.mean();
    let scale = 1.0f64.max(omega.l2_norm() / (2.0 * PI));
    if mean.abs() > MEAN_TOLERANCE * scale {
        return Err(SpectralError::NonzeroMean(mean));
    }
    Ok(stream_to_velocity(&inverse_laplacian(omega)))
}

/// Pseudospectral product under the 2/3 rule: inputs and output are
/// truncated to the dealiasing ball.
pub fn dealiased_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField, SpectralError> {
    f.grid.check_same(&g.grid)?;
    let a = f.dealiased().to_physical();
    let b = g.dealiased().to_physical();
    let prod: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let mut out = SpectralField::from_physical(f.grid, &prod)?;
    out.dealias_in_place();
    Ok(out)
}

/// `max |f|` over the collocation grid.
pub fn linf_norm(f: &SpectralField) -> f64 {
    f.to_physical().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `max |f|` on a zero-padded grid `factor` times finer.
pub fn linf_norm_oversampled(f: &SpectralField, factor: usize) -> Result<f64, SpectralError> {
    Ok(linf_norm(&f.padded(factor)?))
}

/// `((sum |f|^p) h^2)^{1/p}` on the collocation grid.
pub fn lp_norm(f: &SpectralField, p: f64) -> Result<f64, SpectralError> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(SpectralError::InvalidExponent(p));
    }
    let h = f.grid.spacing();
    let sum: f64 = f.to_physical().iter().map(|v| v.abs().powf(p)).sum();
    Ok((sum * h * h).powf(1.0 / p))
}

/// Random real field whose coefficients with `max(|k1|,|k2|) <= band` are
/// independent Gaussians scaled by `amplitude(|k|)`; all other modes are zero.
/// The mean mode is left out when `zero_mean` is set.
pub fn random_band_limited<R: Rng + ?Sized>(
    grid: Grid,
    band: i64,
    zero_mean: bool,
    amplitude: impl Fn(f64) -> f64,
    rng: &mut R,
) -> SpectralField {
    let n = grid.n;
    let band = band.min(grid.n as i64 / 2 - 1);
    let mut coeffs = vec![ZERO; grid.len()];
    // Draw in a fixed wavevector order so the output does not depend on n.
    for k1 in -band..=band {
        for k2 in -band..=band {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            if zero_mean && k1 == 0 && k2 == 0 {
                continue;
            }
            let a = amplitude(((k1 * k1 + k2 * k2) as f64).sqrt());
            coeffs[grid.index(k1, k2)] = Complex64::new(re, im) * a * (n * n) as f64;
        }
    }
    // Project onto real fields: c(k) <- (c(k) + conj(c(-k))) / 2.
    let mut sym = coeffs.clone();
    for idx in 0..grid.len() {
        let (k1, k2) = grid.wavevector(idx);
        sym[idx] = (coeffs[idx] + coeffs[grid.index(-k1, -k2)].conj()) * 0.5;
    }
    SpectralField { grid, coeffs: sym }
}
