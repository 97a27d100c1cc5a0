//! Divergence-free noise fields `xi_i` and the Brownian increments driving them.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::NoiseError;
use crate::spectral::{stream_to_velocity, Axis, Grid, SpectralField, VelocityField};

/// Generator used for every noise stream.
pub type NoiseRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed of realization `index`: `mix64(master ^ (index * 0x9E3779B97F4A7C15))`.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    mix64(master_seed ^ index.wrapping_mul(GOLDEN_GAMMA))
}

pub fn rng_from_seed(seed: u64) -> NoiseRng {
    NoiseRng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    #[serde(alias = "cos")]
    Cosine,
    #[serde(alias = "sin")]
    Sine,
}

/// One stream-function mode `psi = amplitude * trig(k . x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseMode {
    pub wavevector: (i64, i64),
    pub phase: Phase,
    pub amplitude: f64,
}

/// How a basis element was produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseSource {
    Mode(NoiseMode),
    /// Spatially constant `xi`, pointing along `direction`.
    Constant {
        direction: Axis,
        amplitude: f64,
    },
}

/// Finite family of divergence-free transport fields.
#[derive(Clone, Debug)]
pub struct NoiseBasis {
    grid: Grid,
    sources: Vec<NoiseSource>,
    fields: Vec<VelocityField>,
    h3_budget: f64,
}

impl NoiseBasis {
    /// Basis with no noise at all.
    pub fn empty(grid: Grid) -> Self {
        NoiseBasis { grid, sources: Vec::new(), fields: Vec::new(), h3_budget: 0.0 }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn sources(&self) -> &[NoiseSource] {
        &self.sources
    }

    pub fn fields(&self) -> &[VelocityField] {
        &self.fields
    }

    /// Stored `sum_i ||xi_i||_{H^3}^2`.
    pub fn h3_budget(&self) -> f64 {
        self.h3_budget
    }

    /// `sum_i ||xi_i||_{H^3}^2` recomputed from the realised fields.
    pub fn recompute_h3_budget(&self) -> f64 {
        self.fields.iter().map(|xi| xi.sobolev_norm(3.0).powi(2)).sum()
    }

    /// `sum_i max |xi_i|` on the collocation grid.
    pub fn linf_sum(&self) -> f64 {
        self.fields.iter().map(VelocityField::linf_magnitude).sum()
    }
}

/// Realise each mode as `xi = grad^perp psi`.
pub fn build_basis(modes: &[NoiseMode], grid: Grid) -> Result<NoiseBasis, NoiseError> {
    let mut fields = Vec::with_capacity(modes.len());
    for m in modes {
        let (k1, k2) = m.wavevector;
        if k1 == 0 && k2 == 0 {
            return Err(NoiseError::ZeroWavevector);
        }
        if !grid.in_dealias_ball(k1, k2) {
            return Err(NoiseError::OutsideDealiasBall(k1, k2, grid.dealias_cutoff()));
        }
        if !(m.amplitude > 0.0) || !m.amplitude.is_finite() {
            return Err(NoiseError::InvalidAmplitude(m.amplitude));
        }
        let (a, phase) = (m.amplitude, m.phase);
        let psi = SpectralField::from_fn(grid, |x, y| {
            let arg = k1 as f64 * x + k2 as f64 * y;
            match phase {
                Phase::Cosine => a * arg.cos(),
                Phase::Sine => a * arg.sin(),
            }
        });
        fields.push(stream_to_velocity(&psi));
    }
    let mut basis =
        NoiseBasis { grid, sources: modes.iter().copied().map(NoiseSource::Mode).collect(), fields, h3_budget: 0.0 };
    basis.h3_budget = basis.recompute_h3_budget();
    Ok(basis)
}

/// Single constant field `(amplitude, 0)` or `(0, amplitude)`.
pub fn constant_shift_basis(grid: Grid, direction: Axis, amplitude: f64) -> Result<NoiseBasis, NoiseError> {
    if amplitude == 0.0 || !amplitude.is_finite() {
        return Err(NoiseError::InvalidAmplitude(amplitude));
    }
    let c = SpectralField::constant(grid, amplitude);
    let z = SpectralField::zeros(grid);
    let xi = match direction {
        Axis::X => VelocityField::new(c, z)?,
        Axis::Y => VelocityField::new(z, c)?,
    };
    let h3_budget = xi.sobolev_norm(3.0).powi(2);
    Ok(NoiseBasis { grid, sources: vec![NoiseSource::Constant { direction, amplitude }], fields: vec![xi], h3_budget })
}

/// Mode list of the default family `a_k = sigma |k|^-gamma` over
/// `0 < |k| <= k_max`, one wavevector per `+-k` pair, cosine then sine.
///
/// Modes are ordered by `|k|`, then by angle in `[0, pi)`, so truncating the
/// list to its first `m` entries keeps the largest-scale modes.
pub fn default_family(gamma: f64, sigma: f64, k_max: f64) -> Vec<NoiseMode> {
    let r = k_max.floor() as i64;
    let mut ks: Vec<(i64, i64)> = Vec::new();
    for k1 in 0..=r {
        for k2 in -r..=r {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            if ((k1 * k1 + k2 * k2) as f64) <= k_max * k_max {
                ks.push((k1, k2));
            }
        }
    }
    let angle = |k: &(i64, i64)| {
        let a = (k.1 as f64).atan2(k.0 as f64);
        if a < 0.0 {
            a + PI
        } else {
            a
        }
    };
    ks.sort_by(|a, b| {
        let na = a.0 * a.0 + a.1 * a.1;
        let nb = b.0 * b.0 + b.1 * b.1;
        na.cmp(&nb).then(angle(a).total_cmp(&angle(b)))
    });
    ks.into_iter()
        .flat_map(|k| {
            let amp = sigma * ((k.0 * k.0 + k.1 * k.1) as f64).sqrt().powf(-gamma);
            [Phase::Cosine, Phase::Sine].map(|phase| NoiseMode { wavevector: k, phase, amplitude: amp })
        })
        .collect()
}

/// One `Delta B_i` per basis element over a step of length `dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianIncrements {
    pub values: Vec<f64>,
    pub dt: f64,
}

impl BrownianIncrements {
    pub fn zeros(dt: f64, m: usize) -> Self {
        BrownianIncrements { values: vec![0.0; m], dt }
    }
}

/// `m` independent `N(0, dt)` draws.
pub fn sample_increments<R: Rng + ?Sized>(rng: &mut R, dt: f64, m: usize) -> Result<BrownianIncrements, NoiseError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(NoiseError::NonPositiveDt(dt));
    }
    let sd = dt.sqrt();
    let values = (0..m).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(BrownianIncrements { values, dt })
}

/// A pre-sampled discrete Brownian path on a uniform fine grid, so that the
/// same path can be replayed at several step sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    dt: f64,
    steps: Vec<Vec<f64>>,
}

impl BrownianPath {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dt: f64, steps: usize, m: usize) -> Result<Self, NoiseError> {
        let steps = (0..steps).map(|_| sample_increments(rng, dt, m).map(|b| b.values)).collect::<Result<_, _>>()?;
        Ok(BrownianPath { dt, steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn increment(&self, step: usize) -> BrownianIncrements {
        BrownianIncrements { values: self.steps[step].clone(), dt: self.dt }
    }

    /// Sum consecutive blocks of `factor` increments. Trailing steps that do
    /// not fill a block are dropped.
    pub fn coarsen(&self, factor: usize) -> BrownianPath {
        assert!(factor >= 1);
        let m = self.steps.first().map_or(0, Vec::len);
        let steps = self
            .steps
            .chunks_exact(factor)
            .map(|block| {
                let mut acc = vec![0.0; m];
                for inc in block {
                    for (a, v) in acc.iter_mut().zip(inc) {
                        *a += v;
                    }
                }
                acc
            })
            .collect();
        BrownianPath { dt: self.dt * factor as f64, steps }
    }

    /// `B_i` at the end of the path.
    pub fn endpoint(&self, i: usize) -> f64 {
        self.steps.iter().map(|s| s[i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::linf_norm;

    fn grid() -> Grid {
        Grid::new(32).unwrap()
    }

    fn close(a: &SpectralField, b: &SpectralField) -> bool {
        (a - b).l2_norm() <= 1e-12 * (1.0 + b.l2_norm())
    }

    #[test]
    fn single_sine_mode() {
        let g = grid();
        let b = build_basis(&[NoiseMode { wavevector: (0, 1), phase: Phase::Sine, amplitude: 1.0 }], g).unwrap();
        let xi = &b.fields()[0];
        assert!(close(&xi.u1, &SpectralField::from_fn(g, |_, y| -y.cos())));
        assert!(linf_norm(&xi.u2) < 1e-14);
        assert!(xi.divergence().l2_norm() < 1e-12);
    }

    #[test]
    fn single_cosine_mode_budget() {
        let g = grid();
        let a = 0.7;
        let b = build_basis(&[NoiseMode { wavevector: (1, 0), phase: Phase::Cosine, amplitude: a }], g).unwrap();
        let xi = &b.fields()[0];
        assert!(linf_norm(&xi.u1) < 1e-14);
        assert!(close(&xi.u2, &SpectralField::from_fn(g, |x, _| -a * x.sin())));
        let want = 16.0 * PI * PI * a * a;
        assert!((b.h3_budget() - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn rejects_bad_modes() {
        let g = grid();
        let zero = NoiseMode { wavevector: (0, 0), phase: Phase::Sine, amplitude: 1.0 };
        assert_eq!(build_basis(&[zero], g).unwrap_err(), NoiseError::ZeroWavevector);
        let far = NoiseMode { wavevector: (11, 0), phase: Phase::Sine, amplitude: 1.0 };
        assert!(matches!(build_basis(&[far], g), Err(NoiseError::OutsideDealiasBall(11, 0, 10))));
    }

    #[test]
    fn default_family_h3_budget_matches_quadrature() {
        let g = Grid::new(48).unwrap();
        let modes = default_family(5.0, 1.0, 4.0);
        let b = build_basis(&modes, g).unwrap();
        // Oracle: differentiate the stream functions analytically and integrate
        // (I - Delta)^{3/2} xi squared as sum of |k|-weighted mode energies on a
        // dense quadrature grid.
        let m = 96;
        let h = 2.0 * PI / m as f64;
        let mut total = 0.0;
        for mode in &modes {
            let (k1, k2) = (mode.wavevector.0 as f64, mode.wavevector.1 as f64);
            let kk = k1 * k1 + k2 * k2;
            let weight = (1.0 + kk).powi(3);
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let (x, y) = (-PI + i as f64 * h, -PI + j as f64 * h);
                    let arg = k1 * x + k2 * y;
                    // |grad psi|^2 for psi = a trig(arg)
                    let d = match mode.phase {
                        Phase::Cosine => -arg.sin(),
                        Phase::Sine => arg.cos(),
                    };
                    s += mode.amplitude * mode.amplitude * kk * d * d;
                }
            }
            total += weight * s * h * h;
        }
        assert!((b.h3_budget() - total).abs() <= 1e-8 * total, "{} vs {}", b.h3_budget(), total);
        assert!((b.recompute_h3_budget() - b.h3_budget()).abs() <= 1e-10 * total);
        for xi in b.fields() {
            assert!(xi.divergence().l2_norm() <= 1e-10 * xi.l2_norm());
        }
    }

    #[test]
    fn default_family_order() {
        let modes = default_family(5.0, 0.1, 1.0);
        let ks: Vec<_> = modes.iter().map(|m| (m.wavevector, m.phase)).collect();
        assert_eq!(
            ks,
            vec![((1, 0), Phase::Cosine), ((1, 0), Phase::Sine), ((0, 1), Phase::Cosine), ((0, 1), Phase::Sine)]
        );
        assert_eq!(default_family(5.0, 0.1, 4.0).len(), 2 * 24);
    }

    #[test]
    fn constant_basis() {
        let g = grid();
        let b = constant_shift_basis(g, Axis::X, 1.0).unwrap();
        assert!((b.fields()[0].u1.mean() - 1.0).abs() < 1e-15);
        assert_eq!(b.fields()[0].divergence().l2_norm(), 0.0);
        let b = constant_shift_basis(g, Axis::Y, 2.0).unwrap();
        assert!((b.fields()[0].u2.mean() - 2.0).abs() < 1e-15);
        assert_eq!(b.fields()[0].u1.l2_norm(), 0.0);
        assert!(constant_shift_basis(g, Axis::Y, 0.0).is_err());
    }

    #[test]
    fn increments_are_reproducible() {
        let a = sample_increments(&mut rng_from_seed(11), 0.1, 5).unwrap();
        let b = sample_increments(&mut rng_from_seed(11), 0.1, 5).unwrap();
        assert_eq!(a, b);
        assert!(sample_increments(&mut rng_from_seed(11), 0.0, 5).is_err());
    }

    #[test]
    fn increment_variance() {
        let dt = 0.01;
        let inc = sample_increments(&mut rng_from_seed(2024), dt, 1_000_000).unwrap();
        let n = inc.values.len() as f64;
        let mean = inc.values.iter().sum::<f64>() / n;
        let var = inc.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((0.0097..=0.0103).contains(&var), "variance {var}");
    }

    #[test]
    fn seeds_mix_and_repeat() {
        assert_eq!(realization_seed(7, 3), realization_seed(7, 3));
        assert_ne!(realization_seed(7, 3), realization_seed(7, 4));
        assert_ne!(realization_seed(7, 0), realization_seed(8, 0));
        // SplitMix64 reference output for input 0x9E3779B97F4A7C15.
        assert_eq!(mix64(GOLDEN_GAMMA), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn path_coarsening_sums_blocks() {
        let p = BrownianPath::sample(&mut rng_from_seed(1), 0.25, 8, 2).unwrap();
        let c = p.coarsen(4);
        assert_eq!(c.len(), 2);
        assert!((c.dt() - 1.0).abs() < 1e-15);
        for i in 0..2 {
            assert!((c.endpoint(i) - p.endpoint(i)).abs() < 1e-14);
        }
    }
}
