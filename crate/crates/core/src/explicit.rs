//! Explicit solution formula `q(t, z) = (2 pi i)^{-1} I+[(X + 2t L_{q0} - z)^{-1} q0]`.
//!
//! With `A0 = exp(-itDelta) (X - z)^{-1} exp(itDelta)` the resolvent
//! `A = (X + 2t L - z)^{-1}` satisfies `A = A0 +/- 2t A0 T A` where
//! `T f = q0 C+(conj(q0) f)`. So `u = A q0` solves
//! `u -/+ 2t A0 T u = A0 q0`, and `I+(A0 f) = 2 pi i [exp(itDelta) f](z)` turns
//! the formula into two point evaluations:
//! `q(t, z) = [exp(itDelta) q0](z) +/- 2t [exp(itDelta) T u](z)`.
//!
//! `(X - z)^{-1} f = (f - f(z))/(x - z)` is computed as `C+(f/(x - z))`, which
//! is the same function on the line because `f(z)/(x - z)` has no Hardy part.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{eval_coeffs, Grid, GridError, HardyField};
use crate::krylov::{gmres, GmresSettings};
use crate::observables::Sign;

#[derive(Debug, Error)]
pub enum ExplicitError {
    #[error("evaluation point must lie in the upper half-plane, got Im z = {0}")]
    NotUpperHalfPlane(f64),
    #[error("line height must be positive, got {0}")]
    BadHeight(f64),
    #[error("solver tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("no convergence at z = {z}: relative residual {residual:.3e} after {iterations} iterations and {ladder_depth} continuation rungs")]
    NoConvergence { z: Complex64, residual: f64, iterations: usize, ladder_depth: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Solver settings for resolvent solves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplicitEvalPlan {
    /// Residual target relative to `||q0||`.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Geometric ratio between continuation rungs in `Im z`.
    pub ladder_ratio: f64,
    /// Maximal number of continuation rungs.
    pub max_rungs: usize,
}

impl Default for ExplicitEvalPlan {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 400, restart: 120, ladder_ratio: 2.0, max_rungs: 30 }
    }
}

impl ExplicitEvalPlan {
    fn validate(&self) -> Result<(), ExplicitError> {
        if !(self.tol > 0.0) {
            return Err(ExplicitError::BadTolerance(self.tol));
        }
        Ok(())
    }
}

fn check_z(z: Complex64) -> Result<(), ExplicitError> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(ExplicitError::NotUpperHalfPlane(z.im))
    }
}

fn schrodinger_coeffs(grid: &Grid, c: &mut [Complex64], t: f64) {
    for (k, v) in c.iter_mut().enumerate() {
        let xi = grid.xi(k);
        *v *= Complex64::from_polar(1.0, -t * xi * xi);
    }
}

/// `1/(x - z)` on the twice refined grid.
fn cauchy_weights(grid: &Grid, z: Complex64) -> Vec<Complex64> {
    let big = 2 * grid.n_points();
    let h = grid.domain_length() / big as f64;
    (0..big).map(|j| 1.0 / (Complex64::new(-0.5 * grid.domain_length() + j as f64 * h, 0.0) - z)).collect()
}

fn x_resolvent_coeffs(grid: &Grid, c: &[Complex64], w: &[Complex64]) -> Vec<Complex64> {
    let s = grid.synthesize(c, 2);
    let p: Vec<Complex64> = s.iter().zip(w).map(|(a, b)| a * b).collect();
    grid.project_padded(&p, 2, grid.ladder_len())
}

/// `(X - z)^{-1} f`.
pub fn x_resolvent(f: &HardyField, z: Complex64) -> Result<HardyField, ExplicitError> {
    check_z(z)?;
    let g = f.grid();
    let c = x_resolvent_coeffs(g, f.coeffs(), &cauchy_weights(g, z));
    Ok(HardyField::from_coeffs(g, c)?)
}

/// `A0(t, z) f = exp(-itDelta) (X - z)^{-1} exp(itDelta) f`.
pub fn a0_apply(f: &HardyField, t: f64, z: Complex64) -> Result<HardyField, ExplicitError> {
    check_z(z)?;
    let g = f.grid();
    let mut c = f.coeffs().to_vec();
    schrodinger_coeffs(g, &mut c, t);
    let mut r = x_resolvent_coeffs(g, &c, &cauchy_weights(g, z));
    schrodinger_coeffs(g, &mut r, -t);
    Ok(HardyField::from_coeffs(g, r)?)
}

/// `I+(g) = sqrt(2 pi) g^(0)`, the renormalized total integral.
pub fn i_plus(g: &HardyField) -> Complex64 {
    g.coeffs()[0] * g.grid().domain_length()
}

/// `I+(A0(t, z) f) = 2 pi i [exp(itDelta) f](z)`.
pub fn i_plus_a0(f: &HardyField, t: f64, z: Complex64) -> Result<Complex64, ExplicitError> {
    check_z(z)?;
    Ok(Complex64::new(0.0, 2.0 * PI) * free_value(f.grid(), f.coeffs(), t, z))
}

/// `[exp(itDelta) f](z)`.
fn free_value(grid: &Grid, c: &[Complex64], t: f64, z: Complex64) -> Complex64 {
    let mut v = c.to_vec();
    schrodinger_coeffs(grid, &mut v, t);
    eval_coeffs(grid, &v, z)
}

/// Precomputed pieces of the linear system `u -/+ 2t A0 T u = A0 q0`.
struct System<'a> {
    grid: &'a Grid,
    q: &'a [Complex64],
    qs: Vec<Complex64>,
    t: f64,
    sigma: f64,
}

impl<'a> System<'a> {
    fn new(q0: &'a HardyField, t: f64, sign: Sign) -> Self {
        let grid = q0.grid();
        Self { grid, q: q0.coeffs(), qs: grid.synthesize(q0.coeffs(), 2), t, sigma: sign.sigma() }
    }

    fn toeplitz(&self, u: &[Complex64]) -> Vec<Complex64> {
        let g = self.grid;
        let us = g.synthesize(u, 2);
        let prod: Vec<Complex64> = self.qs.iter().zip(&us).map(|(a, b)| a.conj() * b).collect();
        let inner = g.project_padded(&prod, 2, g.ladder_len());
        let is = g.synthesize(&inner, 2);
        let outer: Vec<Complex64> = self.qs.iter().zip(&is).map(|(a, b)| a * b).collect();
        g.project_padded(&outer, 2, g.ladder_len())
    }

    fn a0(&self, f: &[Complex64], w: &[Complex64]) -> Vec<Complex64> {
        let mut c = f.to_vec();
        schrodinger_coeffs(self.grid, &mut c, self.t);
        let mut r = x_resolvent_coeffs(self.grid, &c, w);
        schrodinger_coeffs(self.grid, &mut r, -self.t);
        r
    }

    fn apply(&self, u: &[Complex64], w: &[Complex64]) -> Vec<Complex64> {
        let s = 2.0 * self.t * self.sigma;
        let v = self.a0(&self.toeplitz(u), w);
        u.iter().zip(&v).map(|(a, b)| a - s * b).collect()
    }

    fn rhs(&self, w: &[Complex64]) -> Vec<Complex64> {
        self.a0(self.q, w)
    }

    fn value(&self, u: &[Complex64], z: Complex64) -> Complex64 {
        let first = free_value(self.grid, self.q, self.t, z);
        let second = free_value(self.grid, &self.toeplitz(u), self.t, z);
        first + 2.0 * self.t * self.sigma * second
    }
}

/// A certified solution `u = A(t, z; q0) q0`.
#[derive(Clone, Debug)]
pub struct ResolventState {
    pub u: HardyField,
    /// `||u -/+ 2t A0 T u - A0 q0|| / ||q0||`.
    pub residual: f64,
    pub iterations: usize,
    /// Number of continuation rungs used; zero for a direct solve.
    pub ladder_depth: usize,
}

fn euclid(c: &[Complex64]) -> f64 {
    c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn solve_with(
    sys: &System<'_>,
    z: Complex64,
    plan: &ExplicitEvalPlan,
    warm: Option<&[Complex64]>,
) -> Result<(Vec<Complex64>, f64, usize, usize), ExplicitError> {
    let scale = euclid(sys.q);
    if scale == 0.0 {
        return Ok((vec![Complex64::default(); sys.grid.ladder_len()], 0.0, 0, 0));
    }
    let settings = GmresSettings { abs_tol: plan.tol * scale, restart: plan.restart, max_iter: plan.max_iter };
    let solve_at = |z: Complex64, x0: Option<&[Complex64]>| {
        let w = cauchy_weights(sys.grid, z);
        let b = sys.rhs(&w);
        gmres(|u| sys.apply(u, &w), &b, x0, &settings)
    };
    let direct = solve_at(z, warm);
    if direct.converged {
        return Ok((direct.x, direct.residual / scale, direct.iterations, 0));
    }
    // continuation: find a height where the perturbation is small, then descend
    let mut iterations = direct.iterations;
    let mut b = z.im;
    for _ in 0..60 {
        let w = cauchy_weights(sys.grid, Complex64::new(z.re, b));
        let pert = 2.0 * sys.t.abs() * euclid(&sys.a0(&sys.toeplitz(sys.q), &w)) / scale;
        if pert <= 0.5 {
            break;
        }
        b *= plan.ladder_ratio;
    }
    let mut heights = vec![b];
    while *heights.last().unwrap() > z.im && heights.len() <= plan.max_rungs {
        let next = (heights.last().unwrap() / plan.ladder_ratio).max(z.im);
        heights.push(next);
    }
    let mut x: Option<Vec<Complex64>> = None;
    let mut last = direct;
    for (depth, h) in heights.iter().enumerate() {
        let out = solve_at(Complex64::new(z.re, *h), x.as_deref());
        iterations += out.iterations;
        x = Some(out.x.clone());
        last = out;
        if *h == z.im {
            if last.converged {
                return Ok((last.x, last.residual / scale, iterations, depth + 1));
            }
            break;
        }
    }
    Err(ExplicitError::NoConvergence { z, residual: last.residual / scale, iterations, ladder_depth: heights.len() })
}

/// Solves `u = A0 q0 +/- 2t A0(q0 C+(conj(q0) u))` for `u = A(t, z; q0) q0`.
pub fn solve_resolvent_state(
    q0: &HardyField,
    t: f64,
    z: Complex64,
    sign: Sign,
    plan: &ExplicitEvalPlan,
) -> Result<ResolventState, ExplicitError> {
    check_z(z)?;
    plan.validate()?;
    let sys = System::new(q0, t, sign);
    let (u, residual, iterations, ladder_depth) = solve_with(&sys, z, plan, None)?;
    Ok(ResolventState { u: HardyField::from_coeffs(q0.grid(), u)?, residual, iterations, ladder_depth })
}

/// `A(t, z; q0) f` for an arbitrary right-hand side `f`.
pub fn resolvent_apply(
    q0: &HardyField,
    f: &HardyField,
    t: f64,
    z: Complex64,
    sign: Sign,
    plan: &ExplicitEvalPlan,
) -> Result<ResolventState, ExplicitError> {
    check_z(z)?;
    plan.validate()?;
    q0.check_grid(f)?;
    let sys = System::new(q0, t, sign);
    let w = cauchy_weights(q0.grid(), z);
    let b = sys.a0(f.coeffs(), &w);
    let scale = euclid(f.coeffs()).max(f64::MIN_POSITIVE);
    let settings = GmresSettings { abs_tol: plan.tol * scale, restart: plan.restart, max_iter: plan.max_iter };
    let out = gmres(|u| sys.apply(u, &w), &b, None, &settings);
    if !out.converged {
        return Err(ExplicitError::NoConvergence {
            z,
            residual: out.residual / scale,
            iterations: out.iterations,
            ladder_depth: 0,
        });
    }
    Ok(ResolventState {
        u: HardyField::from_coeffs(q0.grid(), out.x)?,
        residual: out.residual / scale,
        iterations: out.iterations,
        ladder_depth: 0,
    })
}

/// One evaluation of the explicit formula with its solver diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct ExplicitValue {
    pub value: Complex64,
    pub residual: f64,
    pub iterations: usize,
    pub ladder_depth: usize,
}

/// `q(t, z) = [exp(itDelta) q0](z) +/- 2t [exp(itDelta)(q0 C+(conj(q0) u))](z)`.
pub fn explicit_value(
    q0: &HardyField,
    t: f64,
    z: Complex64,
    sign: Sign,
    plan: &ExplicitEvalPlan,
) -> Result<ExplicitValue, ExplicitError> {
    check_z(z)?;
    plan.validate()?;
    let sys = System::new(q0, t, sign);
    let (u, residual, iterations, ladder_depth) = solve_with(&sys, z, plan, None)?;
    Ok(ExplicitValue { value: sys.value(&u, z), residual, iterations, ladder_depth })
}

/// Explicit-formula samples along `Im z = b` at every grid abscissa.
#[derive(Clone, Debug)]
pub struct LineEvaluation {
    pub t: f64,
    pub b: f64,
    pub values: Vec<Complex64>,
    pub iterations: Vec<usize>,
    pub ladder_depths: Vec<usize>,
    /// Grid indices where the solve failed, with the error text.
    pub failures: Vec<(usize, String)>,
}

impl LineEvaluation {
    /// Counts of solver iterations in bins of width `width`.
    pub fn iteration_histogram(&self, width: usize) -> Vec<(usize, usize)> {
        let width = width.max(1);
        let mut bins = std::collections::BTreeMap::new();
        for it in &self.iterations {
            *bins.entry(it / width * width).or_insert(0) += 1;
        }
        bins.into_iter().collect()
    }

    pub fn max_ladder_depth(&self) -> usize {
        self.ladder_depths.iter().copied().max().unwrap_or(0)
    }
}

/// Evaluates the formula at `x_j + i b` for all grid points, warm-starting each
/// solve from its left neighbour.
pub fn explicit_line(
    q0: &HardyField,
    t: f64,
    b: f64,
    sign: Sign,
    plan: &ExplicitEvalPlan,
) -> Result<LineEvaluation, ExplicitError> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(ExplicitError::BadHeight(b));
    }
    plan.validate()?;
    let g = q0.grid();
    let sys = System::new(q0, t, sign);
    let n = g.n_points();
    let mut out = LineEvaluation {
        t,
        b,
        values: vec![Complex64::new(f64::NAN, f64::NAN); n],
        iterations: vec![0; n],
        ladder_depths: vec![0; n],
        failures: Vec::new(),
    };
    let mut warm: Option<Vec<Complex64>> = None;
    for j in 0..n {
        let z = Complex64::new(g.x(j), b);
        match solve_with(&sys, z, plan, warm.as_deref()) {
            Ok((u, _, it, depth)) => {
                out.values[j] = sys.value(&u, z);
                out.iterations[j] = it;
                out.ladder_depths[j] = depth;
                warm = Some(u);
            }
            Err(e) => {
                out.failures.push((j, e.to_string()));
                warm = None;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{halfplane_eval, make_grid};
    use crate::observables::soliton;

    #[test]
    fn rejects_lower_half_plane() {
        let g = make_grid(32, 10.0).unwrap();
        let f = HardyField::zero(&g);
        assert!(matches!(x_resolvent(&f, Complex64::new(0.0, -1.0)), Err(ExplicitError::NotUpperHalfPlane(_))));
        assert!(a0_apply(&f, 0.1, Complex64::new(0.0, 0.0)).is_err());
        assert!(matches!(
            explicit_line(&f, 0.1, 0.0, Sign::Focusing, &ExplicitEvalPlan::default()),
            Err(ExplicitError::BadHeight(_))
        ));
    }

    #[test]
    fn zero_data_gives_zero_state() {
        let g = make_grid(64, 20.0).unwrap();
        let f = HardyField::zero(&g);
        let z = Complex64::new(0.5, 1.0);
        let s = solve_resolvent_state(&f, 0.7, z, Sign::Defocusing, &ExplicitEvalPlan::default()).unwrap();
        assert_eq!(s.u.norm(), 0.0);
        let v = explicit_value(&f, 0.7, z, Sign::Defocusing, &ExplicitEvalPlan::default()).unwrap();
        assert_eq!(v.value, Complex64::default());
    }

    #[test]
    fn time_zero_reduces_to_cauchy_resolvent() {
        let g = make_grid(512, 80.0).unwrap();
        let r = soliton(1.0, 0.0, &g).unwrap();
        let z = Complex64::new(0.3, 0.8);
        let plan = ExplicitEvalPlan::default();
        let s = solve_resolvent_state(&r, 0.0, z, Sign::Focusing, &plan).unwrap();
        let x = x_resolvent(&r, z).unwrap();
        let diff: f64 = s.u.coeffs().iter().zip(x.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14 * x.norm(), "{diff}");
        let v = explicit_value(&r, 0.0, z, Sign::Focusing, &plan).unwrap();
        assert!((v.value - halfplane_eval(&r, z).unwrap()).norm() < 1e-14);
    }
}
