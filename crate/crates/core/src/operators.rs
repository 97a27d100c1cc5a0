//! Lie derivatives, first-order operators with variable coefficients and the
//! weighted cancellation quantities built from them.

use crate::error::{OperatorError, SpectralError};
use crate::spectral::{derivative, fractional_laplacian, sobolev_norm, Axis, Grid, SpectralField, VelocityField};

fn check_grid(a: Grid, b: Grid) -> Result<(), SpectralError> {
    if a != b {
        return Err(SpectralError::GridMismatch { left: a.n(), right: b.n() });
    }
    Ok(())
}

/// A transport field sampled on the collocation grid, ready to be applied to
/// many scalars without re-transforming it.
#[derive(Clone, Debug)]
pub struct Transport {
    grid: Grid,
    v1: Vec<f64>,
    v2: Vec<f64>,
    dealias: bool,
}

impl Transport {
    pub fn new(xi: &VelocityField, dealias: bool) -> Self {
        let (a, b) = if dealias { (xi.u1.dealiased(), xi.u2.dealiased()) } else { (xi.u1.clone(), xi.u2.clone()) };
        Transport { grid: xi.grid(), v1: a.to_physical(), v2: b.to_physical(), dealias }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// `xi . grad f`.
    pub fn apply(&self, f: &SpectralField) -> Result<SpectralField, SpectralError> {
        check_grid(self.grid, f.grid())?;
        let base = if self.dealias { f.dealiased() } else { f.clone() };
        let fx = derivative(&base, Axis::X, 1).to_physical();
        let fy = derivative(&base, Axis::Y, 1).to_physical();
        let vals: Vec<f64> = (0..fx.len()).map(|i| self.v1[i] * fx[i] + self.v2[i] * fy[i]).collect();
        let mut out = SpectralField::from_physical(self.grid, &vals)?;
        if self.dealias {
            out.dealias_in_place();
        }
        Ok(out)
    }

    /// `xi . grad (xi . grad f)`, as two first-order applications.
    pub fn apply_twice(&self, f: &SpectralField) -> Result<SpectralField, SpectralError> {
        self.apply(&self.apply(f)?)
    }
}

/// `L_xi f = xi . grad f` with 2/3 dealiasing.
pub fn lie_derivative(xi: &VelocityField, f: &SpectralField) -> Result<SpectralField, SpectralError> {
    check_grid(xi.grid(), f.grid())?;
    Transport::new(xi, true).apply(f)
}

/// `L_xi^2 f`.
pub fn lie_second(xi: &VelocityField, f: &SpectralField) -> Result<SpectralField, SpectralError> {
    check_grid(xi.grid(), f.grid())?;
    Transport::new(xi, true).apply_twice(f)
}

/// `<L_xi^2 f, f> + <L_xi f, L_xi f>`, which vanishes for divergence-free `xi`.
pub fn cancellation_residual(xi: &VelocityField, f: &SpectralField) -> Result<f64, SpectralError> {
    check_grid(xi.grid(), f.grid())?;
    let t = Transport::new(xi, true);
    let lf = t.apply(f)?;
    let llf = t.apply(&lf)?;
    Ok(llf.inner(f) + lf.inner(&lf))
}

/// `(<Lambda^k L^2 f, Lambda^k f> + ||Lambda^k L f||^2) / ||f||_{H^k}^2`.
pub fn weighted_cancellation_ratio(k: f64, xi: &VelocityField, f: &SpectralField) -> Result<f64, OperatorError> {
    check_grid(xi.grid(), f.grid())?;
    let t = Transport::new(xi, true);
    weighted_ratio(k, f, |g| t.apply(g))
}

fn weighted_ratio(
    k: f64,
    f: &SpectralField,
    op: impl Fn(&SpectralField) -> Result<SpectralField, SpectralError>,
) -> Result<f64, OperatorError> {
    let denom = sobolev_norm(f, k).powi(2);
    if denom == 0.0 {
        return Err(OperatorError::ZeroField);
    }
    let qf = op(f)?;
    let qqf = op(&qf)?;
    let pqqf = fractional_laplacian(&qqf, k)?;
    let pf = fractional_laplacian(f, k)?;
    let pqf = fractional_laplacian(&qf, k)?;
    Ok((pqqf.inner(&pf) + pqf.inner(&pqf)) / denom)
}

/// `Q f = a d_x f + b d_y f + c f`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderOp {
    pub a: SpectralField,
    pub b: SpectralField,
    pub c: SpectralField,
}

/// Multiplication by `e = 2c - d_x a - d_y b`, the defect in `Q* = -Q + E`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroOrderDefect {
    pub e: SpectralField,
}

impl ZeroOrderDefect {
    pub fn apply(&self, f: &SpectralField) -> Result<SpectralField, SpectralError> {
        crate::spectral::dealiased_product(&self.e, f)
    }
}

impl FirstOrderOp {
    /// Coefficients are truncated to the dealiasing ball.
    pub fn new(a: SpectralField, b: SpectralField, c: SpectralField) -> Result<Self, SpectralError> {
        check_grid(a.grid(), b.grid())?;
        check_grid(a.grid(), c.grid())?;
        Ok(FirstOrderOp { a: a.dealiased(), b: b.dealiased(), c: c.dealiased() })
    }

    /// Transport along a divergence-free field: `a = xi_1`, `b = xi_2`, `c = 0`.
    pub fn from_transport(xi: &VelocityField) -> Self {
        FirstOrderOp { a: xi.u1.dealiased(), b: xi.u2.dealiased(), c: SpectralField::zeros(xi.grid()) }
    }

    pub fn grid(&self) -> Grid {
        self.a.grid()
    }

    pub fn apply(&self, f: &SpectralField) -> Result<SpectralField, SpectralError> {
        check_grid(self.grid(), f.grid())?;
        let grid = self.grid();
        let base = f.dealiased();
        let a = self.a.to_physical();
        let b = self.b.to_physical();
        let c = self.c.to_physical();
        let fx = derivative(&base, Axis::X, 1).to_physical();
        let fy = derivative(&base, Axis::Y, 1).to_physical();
        let fv = base.to_physical();
        let vals: Vec<f64> = (0..grid.len()).map(|i| a[i] * fx[i] + b[i] * fy[i] + c[i] * fv[i]).collect();
        let mut out = SpectralField::from_physical(grid, &vals)?;
        out.dealias_in_place();
        Ok(out)
    }

    pub fn defect(&self) -> ZeroOrderDefect {
        let mut e = self.c.scaled(2.0);
        e.axpy(-1.0, &derivative(&self.a, Axis::X, 1));
        e.axpy(-1.0, &derivative(&self.b, Axis::Y, 1));
        ZeroOrderDefect { e }
    }
}

pub fn apply_first_order(q: &FirstOrderOp, f: &SpectralField) -> Result<SpectralField, SpectralError> {
    q.apply(f)
}

/// `(<Lambda^k Q^2 f, Lambda^k f> + ||Lambda^k Q f||^2) / ||f||_{H^k}^2`;
/// `k = 0` gives the unweighted pairing.
pub fn general_estimate_ratio(k: f64, q: &FirstOrderOp, f: &SpectralField) -> Result<f64, OperatorError> {
    check_grid(q.grid(), f.grid())?;
    if k == 0.0 {
        let denom = sobolev_norm(f, 0.0).powi(2);
        if denom == 0.0 {
            return Err(OperatorError::ZeroField);
        }
        let qf = q.apply(f)?;
        let qqf = q.apply(&qf)?;
        return Ok((qqf.inner(f) + qf.inner(&qf)) / denom);
    }
    weighted_ratio(k, f, |g| q.apply(g))
}

/// `T1 = [Lambda^k, Q]` and `T2 = [T1, Q]`.
#[derive(Clone, Debug)]
pub struct Commutators<'a> {
    k: f64,
    q: &'a FirstOrderOp,
}

pub fn commutators(k: f64, q: &FirstOrderOp) -> Result<Commutators<'_>, OperatorError> {
    if !(k >= 1.0) {
        return Err(OperatorError::InvalidOrder(k));
    }
    Ok(Commutators { k, q })
}

impl Commutators<'_> {
    pub fn order(&self) -> f64 {
        self.k
    }

    pub fn t1(&self, f: &SpectralField) -> Result<SpectralField, OperatorError> {
        let pqf = fractional_laplacian(&self.q.apply(f)?, self.k)?;
        let qpf = self.q.apply(&fractional_laplacian(f, self.k)?)?;
        Ok(&pqf - &qpf)
    }

    pub fn t2(&self, f: &SpectralField) -> Result<SpectralField, OperatorError> {
        let a = self.t1(&self.q.apply(f)?)?;
        let b = self.q.apply(&self.t1(f)?)?;
        Ok(&a - &b)
    }
}
