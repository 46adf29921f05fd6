//! Periodic grid and Hardy-space fields.
//!
//! A field on `[-L/2, L/2)` is stored by its Fourier-series coefficients
//! `c_k` on the nonnegative ladder `k = 0..n/2-1`, so that
//! `f(x) = sum_k c_k exp(i xi_k x)` with `xi_k = 2 pi k / L`. The Nyquist
//! mode and all negative modes are zero by construction.
//!
//! Spectral values in the continuum normalization
//! `f^(xi) = (2 pi)^{-1/2} int exp(-i xi x) f(x) dx` are `c_k L / sqrt(2 pi)`,
//! so `sum |f^|^2 dxi = L sum |c|^2 = sum |f|^2 dx`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

/// Errors raised by grid construction and field operations.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("n_points must be an even integer >= 8, got {0}")]
    BadPointCount(usize),
    #[error("domain_length must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("evaluation point must lie in the upper half-plane, got Im z = {0}")]
    NotUpperHalfPlane(f64),
    #[error("Poisson height must be nonnegative, got {0}")]
    NegativeHeight(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("malformed field dump: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid with its Hardy frequency ladder.
#[derive(Clone)]
pub struct Grid {
    n: usize,
    length: f64,
    plans: Arc<Plans>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("n_points", &self.n).field("domain_length", &self.length).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length.to_bits() == other.length.to_bits()
    }
}

/// Builds a grid of `n_points` samples on `[-L/2, L/2)`.
pub fn make_grid(n_points: usize, domain_length: f64) -> Result<Grid, GridError> {
    Grid::new(n_points, domain_length)
}

impl Grid {
    pub fn new(n_points: usize, domain_length: f64) -> Result<Self, GridError> {
        if n_points < 8 || !n_points.is_multiple_of(2) {
            return Err(GridError::BadPointCount(n_points));
        }
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(GridError::BadLength(domain_length));
        }
        let mut planner = FftPlanner::new();
        let plans = Plans {
            fwd: planner.plan_fft_forward(n_points),
            inv: planner.plan_fft_inverse(n_points),
            fwd2: planner.plan_fft_forward(2 * n_points),
            inv2: planner.plan_fft_inverse(2 * n_points),
        };
        Ok(Self { n: n_points, length: domain_length, plans: Arc::new(plans) })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn domain_length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Ladder spacing `2 pi / L`.
    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Number of Hardy modes, `n/2`.
    pub fn ladder_len(&self) -> usize {
        self.n / 2
    }

    pub fn x(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    pub fn xi(&self, k: usize) -> f64 {
        k as f64 * self.dxi()
    }

    pub fn ladder(&self) -> Vec<f64> {
        (0..self.ladder_len()).map(|k| self.xi(k)).collect()
    }

    /// Largest retained frequency.
    pub fn xi_max(&self) -> f64 {
        self.xi(self.ladder_len() - 1)
    }

    fn plan(&self, pad: usize, forward: bool) -> &Arc<dyn Fft<f64>> {
        match (pad, forward) {
            (1, true) => &self.plans.fwd,
            (1, false) => &self.plans.inv,
            (2, true) => &self.plans.fwd2,
            (2, false) => &self.plans.inv2,
            _ => unreachable!("padding factor must be 1 or 2"),
        }
    }

    /// Samples on the `pad * n` point grid from nonnegative-mode coefficients.
    pub(crate) fn synthesize(&self, coeffs: &[Complex64], pad: usize) -> Vec<Complex64> {
        let big = pad * self.n;
        let mut buf = vec![Complex64::new(0.0, 0.0); big];
        for (k, c) in coeffs.iter().enumerate().take(big / 2) {
            buf[k] = if k % 2 == 0 { *c } else { -*c };
        }
        self.plan(pad, false).process(&mut buf);
        buf
    }

    /// Full coefficient vector (FFT ordering) of samples on the `pad * n` grid.
    pub(crate) fn analyze(&self, samples: &[Complex64], pad: usize) -> Vec<Complex64> {
        let big = pad * self.n;
        debug_assert_eq!(samples.len(), big);
        let mut buf = samples.to_vec();
        self.plan(pad, true).process(&mut buf);
        let scale = 1.0 / big as f64;
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= if k % 2 == 0 { scale } else { -scale };
        }
        buf
    }

    /// `C+(g)` for `g` given by samples on the padded grid, truncated to the first `keep` modes.
    pub(crate) fn project_padded(&self, samples: &[Complex64], pad: usize, keep: usize) -> Vec<Complex64> {
        let mut full = self.analyze(samples, pad);
        full.truncate(keep);
        full
    }

    /// `q C+(conj(q) f)` truncated to the ladder, with 2x padded products.
    pub(crate) fn toeplitz_coeffs(&self, q: &[Complex64], f: &[Complex64]) -> Vec<Complex64> {
        let qs = self.synthesize(q, 2);
        let fs = self.synthesize(f, 2);
        let prod: Vec<Complex64> = qs.iter().zip(&fs).map(|(a, b)| a.conj() * b).collect();
        let inner = self.project_padded(&prod, 2, self.n);
        let inner_s = self.synthesize(&inner, 2);
        let outer: Vec<Complex64> = qs.iter().zip(&inner_s).map(|(a, b)| a * b).collect();
        self.project_padded(&outer, 2, self.ladder_len())
    }

    /// Coefficients of `|q|^2` on the padded grid in FFT ordering, exact for ladder fields.
    pub(crate) fn modulus_squared_coeffs(&self, q: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let qs = self.synthesize(q, 2);
        let w: Vec<Complex64> = qs.iter().map(|v| Complex64::new(v.norm_sqr(), 0.0)).collect();
        (qs, self.analyze(&w, 2))
    }

    /// `q C+(|q|^2)'` truncated to the ladder.
    pub(crate) fn ccm_nonlinearity(&self, q: &[Complex64]) -> Vec<Complex64> {
        let (qs, mut w) = self.modulus_squared_coeffs(q);
        let a = self.dxi();
        w.truncate(self.n);
        for (k, v) in w.iter_mut().enumerate() {
            *v *= Complex64::new(0.0, a * k as f64);
        }
        let ds = self.synthesize(&w, 2);
        let prod: Vec<Complex64> = qs.iter().zip(&ds).map(|(a, b)| a * b).collect();
        self.project_padded(&prod, 2, self.ladder_len())
    }
}

/// A Hardy field on a grid, held as ladder coefficients together with its samples.
#[derive(Clone, Debug)]
pub struct HardyField {
    grid: Grid,
    coeffs: Vec<Complex64>,
    samples: Vec<Complex64>,
}

impl PartialEq for HardyField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.coeffs == other.coeffs
    }
}

impl HardyField {
    /// Field from Fourier-series coefficients `c_k`, `k = 0..n/2-1`.
    pub fn from_coeffs(grid: &Grid, coeffs: Vec<Complex64>) -> Result<Self, GridError> {
        if coeffs.len() != grid.ladder_len() {
            return Err(GridError::LengthMismatch { expected: grid.ladder_len(), got: coeffs.len() });
        }
        if let Some(i) = coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(GridError::NonFinite(i));
        }
        let samples = grid.synthesize(&coeffs, 1);
        Ok(Self { grid: grid.clone(), coeffs, samples })
    }

    /// Field from continuum-normalized spectral values at the ladder frequencies.
    pub fn from_spectrum(grid: &Grid, spectrum: &[Complex64]) -> Result<Self, GridError> {
        let s = (2.0 * PI).sqrt() / grid.domain_length();
        Self::from_coeffs(grid, spectrum.iter().map(|v| v * s).collect())
    }

    pub fn zero(grid: &Grid) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); grid.ladder_len()];
        Self { grid: grid.clone(), samples: vec![Complex64::new(0.0, 0.0); grid.n_points()], coeffs }
    }

    pub(crate) fn from_coeffs_unchecked(grid: &Grid, coeffs: Vec<Complex64>) -> Self {
        let samples = grid.synthesize(&coeffs, 1);
        Self { grid: grid.clone(), coeffs, samples }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Continuum-normalized spectrum `f^(xi_k)`.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let s = self.grid.domain_length() / (2.0 * PI).sqrt();
        self.coeffs.iter().map(|c| c * s).collect()
    }

    /// L2 norm computed from the spectrum.
    pub fn norm(&self) -> f64 {
        (self.grid.domain_length() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// L2 norm computed from the samples.
    pub fn sample_norm(&self) -> f64 {
        (self.grid.dx() * self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `<self, other>` in L2, conjugate-linear in `self`.
    pub fn inner(&self, other: &HardyField) -> Result<Complex64, GridError> {
        self.check_grid(other)?;
        let s: Complex64 = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.grid.domain_length())
    }

    pub(crate) fn check_grid(&self, other: &HardyField) -> Result<(), GridError> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }

    /// Relative energy of the samples outside the Hardy ladder.
    pub fn hardy_defect(&self) -> f64 {
        let full = self.grid.analyze(&self.samples, 1);
        let k = self.grid.ladder_len();
        let outside: f64 = full[k..].iter().map(|c| c.norm_sqr()).sum();
        let total: f64 = full.iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            0.0
        } else {
            (outside / total).sqrt()
        }
    }

    pub fn scale(&self, s: Complex64) -> HardyField {
        HardyField::from_coeffs_unchecked(&self.grid, self.coeffs.iter().map(|c| c * s).collect())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &HardyField, b: Complex64) -> Result<HardyField, GridError> {
        self.check_grid(other)?;
        let c = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect();
        Ok(HardyField::from_coeffs_unchecked(&self.grid, c))
    }

    /// Max norm of the samples.
    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Writes the CSV field dump.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), GridError> {
        let g = &self.grid;
        writeln!(w, "# n_points={},domain_length={:.17e}", g.n_points(), g.domain_length())?;
        writeln!(w, "x,re_q,im_q,k,xi,re_qhat,im_qhat")?;
        let spec = self.spectrum();
        for (j, v) in self.samples.iter().enumerate() {
            write!(w, "{:.17e},{:.17e},{:.17e}", g.x(j), v.re, v.im)?;
            if let Some(s) = spec.get(j) {
                writeln!(w, ",{},{:.17e},{:.17e},{:.17e}", j, g.xi(j), s.re, s.im)?;
            } else {
                writeln!(w, ",,,,")?;
            }
        }
        Ok(())
    }

    /// Reads a CSV field dump written by [`HardyField::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<HardyField, GridError> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| GridError::Parse("empty file".into()))??;
        let mut n = None;
        let mut len = None;
        for part in header.trim_start_matches('#').trim().split(',') {
            let (k, v) = part.split_once('=').ok_or_else(|| GridError::Parse(format!("bad header `{part}`")))?;
            match k.trim() {
                "n_points" => n = v.trim().parse::<usize>().ok(),
                "domain_length" => len = v.trim().parse::<f64>().ok(),
                other => return Err(GridError::Parse(format!("unknown header key `{other}`"))),
            }
        }
        let (n, len) = match (n, len) {
            (Some(n), Some(l)) => (n, l),
            _ => return Err(GridError::Parse("header must give n_points and domain_length".into())),
        };
        let grid = Grid::new(n, len)?;
        lines.next().ok_or_else(|| GridError::Parse("missing column header".into()))??;
        let mut spec = Vec::with_capacity(grid.ladder_len());
        for (i, line) in lines.enumerate() {
            let line = line?;
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(GridError::Parse(format!("row {i}: expected 7 columns")));
            }
            if cols[3].is_empty() {
                continue;
            }
            let re: f64 = cols[5].parse().map_err(|_| GridError::Parse(format!("row {i}: bad re_qhat")))?;
            let im: f64 = cols[6].parse().map_err(|_| GridError::Parse(format!("row {i}: bad im_qhat")))?;
            spec.push(Complex64::new(re, im));
        }
        HardyField::from_spectrum(&grid, &spec)
    }
}

/// Cauchy-Szego projection of samples: keeps modes `0..n/2-1`, drops negative
/// frequencies and the Nyquist mode.
pub fn szego_project(grid: &Grid, samples: &[Complex64]) -> Result<HardyField, GridError> {
    if samples.len() != grid.n_points() {
        return Err(GridError::LengthMismatch { expected: grid.n_points(), got: samples.len() });
    }
    if let Some(i) = samples.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(GridError::NonFinite(i));
    }
    let coeffs = grid.project_padded(samples, 1, grid.ladder_len());
    Ok(HardyField::from_coeffs_unchecked(grid, coeffs))
}

/// Holomorphic extension `f(z) = sum_k c_k exp(i xi_k z)` for `Im z > 0`.
pub fn halfplane_eval(f: &HardyField, z: Complex64) -> Result<Complex64, GridError> {
    if !(z.im > 0.0) {
        return Err(GridError::NotUpperHalfPlane(z.im));
    }
    Ok(eval_coeffs(f.grid(), f.coeffs(), z))
}

/// Evaluation of a coefficient vector, also valid on the real axis.
pub(crate) fn eval_coeffs(grid: &Grid, coeffs: &[Complex64], z: Complex64) -> Complex64 {
    let step = (Complex64::i() * grid.dxi() * z).exp();
    let mut w = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, c) in coeffs.iter().enumerate() {
        // refresh the power periodically to keep rounding from accumulating
        if k % 64 == 0 {
            w = (Complex64::i() * grid.xi(k) * z).exp();
        }
        acc += c * w;
        w *= step;
    }
    acc
}

fn apply_multiplier(f: &HardyField, m: impl Fn(f64) -> Complex64) -> HardyField {
    let g = f.grid();
    let c = f.coeffs().iter().enumerate().map(|(k, c)| c * m(g.xi(k))).collect();
    HardyField::from_coeffs_unchecked(g, c)
}

/// Poisson semigroup `exp(-b |D|)`.
pub fn poisson_semigroup(f: &HardyField, b: f64) -> Result<HardyField, GridError> {
    if !(b >= 0.0) {
        return Err(GridError::NegativeHeight(b));
    }
    Ok(apply_multiplier(f, |xi| Complex64::new((-b * xi).exp(), 0.0)))
}

/// Free Schrodinger flow `exp(i t Delta)`, multiplier `exp(-i t xi^2)`.
pub fn schrodinger_flow(f: &HardyField, t: f64) -> HardyField {
    apply_multiplier(f, |xi| Complex64::from_polar(1.0, -t * xi * xi))
}

/// `(sum_k (xi_k + 1)^{2s} |f^(xi_k)|^2 dxi)^{1/2}`.
pub fn sobolev_norm(f: &HardyField, s: f64) -> f64 {
    let g = f.grid();
    let l = g.domain_length();
    let sum: f64 = f.coeffs().iter().enumerate().map(|(k, c)| (g.xi(k) + 1.0).powf(2.0 * s) * c.norm_sqr()).sum();
    (l * sum).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn small_grid_arithmetic() {
        let g = make_grid(8, 2.0 * PI).unwrap();
        assert!((g.dx() - PI / 4.0).abs() < 1e-15);
        assert_eq!(g.ladder(), vec![0.0, 1.0, 2.0, 3.0]);
        let g = make_grid(1024, 100.0).unwrap();
        assert!((g.dx() - 100.0 / 1024.0).abs() < 1e-15);
        assert!((g.xi(1) - 2.0 * PI / 100.0).abs() < 1e-15);
        assert!((g.dx() * g.n_points() as f64 - g.domain_length()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(make_grid(7, 10.0), Err(GridError::BadPointCount(7))));
        assert!(matches!(make_grid(6, 10.0), Err(GridError::BadPointCount(6))));
        assert!(matches!(make_grid(16, 0.0), Err(GridError::BadLength(_))));
        assert!(matches!(make_grid(16, -1.0), Err(GridError::BadLength(_))));
    }

    #[test]
    fn cosine_projects_to_half_exponential() {
        let g = make_grid(64, 10.0).unwrap();
        let a = g.dxi();
        let f: Vec<Complex64> = g.xs().iter().map(|x| c((a * x).cos(), 0.0)).collect();
        let p = szego_project(&g, &f).unwrap();
        for (j, x) in g.xs().iter().enumerate() {
            let want = Complex64::from_polar(0.5, a * x);
            assert!((p.samples()[j] - want).norm() < 1e-14);
        }
    }

    #[test]
    fn nyquist_mode_is_dropped() {
        let g = make_grid(16, 4.0).unwrap();
        let f: Vec<Complex64> = (0..16).map(|j| c(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).collect();
        let p = szego_project(&g, &f).unwrap();
        assert!(p.norm() < 1e-14);
    }

    #[test]
    fn halfplane_eval_rejects_lower_half() {
        let g = make_grid(16, 4.0).unwrap();
        let f = HardyField::zero(&g);
        assert!(halfplane_eval(&f, c(0.0, 0.0)).is_err());
        assert_eq!(halfplane_eval(&f, c(0.3, 1.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn poisson_rejects_negative_height() {
        let g = make_grid(16, 4.0).unwrap();
        assert!(poisson_semigroup(&HardyField::zero(&g), -0.1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = make_grid(16, 5.0).unwrap();
        let coeffs: Vec<Complex64> = (0..8).map(|k| c(1.0 / (k as f64 + 1.0), 0.3 * k as f64)).collect();
        let f = HardyField::from_coeffs(&g, coeffs).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = HardyField::read_csv(std::io::Cursor::new(buf)).unwrap();
        for (a, b) in f.coeffs().iter().zip(back.coeffs()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn from_coeffs_rejects_nan() {
        let g = make_grid(8, 1.0).unwrap();
        let mut v = vec![c(0.0, 0.0); 4];
        v[2] = c(f64::NAN, 0.0);
        assert!(matches!(HardyField::from_coeffs(&g, v), Err(GridError::NonFinite(2))));
    }
}
