//! Square 2D complex FFTs with a per-thread plan cache.
//!
//! Data is stored row-major with the x index as the row: `data[i * n + j]`
//! holds the value at `(x_i, y_j)`. The forward transform carries no
//! normalisation; the inverse divides by `n^2`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<usize, Plans>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn with_plans<R>(n: usize, f: impl FnOnce(&Plans) -> R) -> R {
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        let plans = cache
            .entry(n)
            .or_insert_with(|| Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) });
        f(plans)
    })
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

fn run_2d(data: &mut [Complex64], n: usize, plan: &Arc<dyn Fft<f64>>) {
    debug_assert_eq!(data.len(), n * n);
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    plan.process_with_scratch(data, &mut scratch);
    transpose(data, n);
    plan.process_with_scratch(data, &mut scratch);
    transpose(data, n);
}

/// Unnormalised forward transform, in place.
pub(crate) fn forward(data: &mut [Complex64], n: usize) {
    with_plans(n, |p| run_2d(data, n, &p.forward));
}

/// Inverse transform including the `1/n^2` factor, in place.
pub(crate) fn inverse(data: &mut [Complex64], n: usize) {
    with_plans(n, |p| run_2d(data, n, &p.inverse));
    let scale = 1.0 / (n * n) as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Signed wavenumber stored at FFT index `idx`; the Nyquist slot maps to `-n/2`.
#[inline]
pub(crate) fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// FFT index holding wavenumber `k` (taken modulo `n`).
#[inline]
pub(crate) fn index_of(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        let n = 16;
        let orig: Vec<Complex64> =
            (0..n * n).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let mut data = orig.clone();
        forward(&mut data, n);
        inverse(&mut data, n);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn single_mode_lands_in_its_slot() {
        let n = 8;
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                let phase = 2.0 * std::f64::consts::PI * (i as f64 * 1.0 + j as f64 * -2.0) / n as f64;
                Complex64::new(phase.cos(), phase.sin())
            })
            .collect();
        forward(&mut data, n);
        let hit = index_of(1, n) * n + index_of(-2, n);
        assert!((data[hit] - Complex64::new(64.0, 0.0)).norm() < 1e-10);
        let rest: f64 = data.iter().enumerate().filter(|(i, _)| *i != hit).map(|(_, v)| v.norm()).sum();
        assert!(rest < 1e-10);
    }

    #[test]
    fn wavenumber_mapping() {
        assert_eq!(wavenumber(0, 8), 0);
        assert_eq!(wavenumber(3, 8), 3);
        assert_eq!(wavenumber(4, 8), -4);
        assert_eq!(wavenumber(7, 8), -1);
        assert_eq!(index_of(-1, 8), 7);
        assert_eq!(index_of(3, 8), 3);
    }
}
