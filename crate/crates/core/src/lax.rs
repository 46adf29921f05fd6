//! The Lax operator `L_q = -i d/dx -/+ q C+ conj(q)` as a Hermitian matrix on
//! the Hardy ladder, with resolvent traces, `beta(kappa, q)` and bound states.
//!
//! In the coefficient basis the matrix is
//! `M_kj = xi_k delta_kj -/+ sum_{m <= min(k,j)} c_{k-m} conj(c_{j-m})`.
//! The basis `exp(i xi_k x)/sqrt(L)` is orthonormal, so the operator trace is
//! the plain diagonal sum.
//!
//! The trace defect `tr(R(kappa) - R0(kappa))` on a finite ladder misses the
//! modes above the cut. For modes well above the support of the field the
//! missing diagonal is `+/- (M/L)/(xi+kappa)^2 + (int|q|^4 / L)/(xi+kappa)^3`
//! to leading orders, and [`TraceMethod::TailCorrected`] adds both sums in
//! closed form. [`TraceMethod::Extrapolated`] also repeats the computation on
//! a doubled, zero-padded ladder and removes the next `xi_K^{-3}` term.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, HardyField};
use crate::observables::{kappa_key, mass, quartic, Sign};
use crate::special::{ladder_tail_cube, ladder_tail_sq, trigamma};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("L_q + kappa is not positive definite at kappa = {kappa} (lambda_min = {lambda_min})")]
    NotPositive { kappa: f64, lambda_min: f64 },
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("kappa must be positive, got {0}")]
    BadKappa(f64),
    #[error("margin must be positive, got {0}")]
    BadMargin(f64),
    #[error("vector length {got} does not match matrix size {expected}")]
    Size { expected: usize, got: usize },
}

/// `T = q C+ conj(q)` on the first `size` ladder modes, `q` zero-padded if needed.
pub fn toeplitz_matrix(q: &HardyField, size: usize) -> Mat<Complex64> {
    let c = q.coeffs();
    let at = |k: usize| c.get(k).copied().unwrap_or_default();
    let mut t = Mat::<Complex64>::zeros(size, size);
    for j in 0..size {
        t[(0, j)] = at(0) * at(j).conj();
    }
    for k in 1..size {
        t[(k, 0)] = at(k) * at(0).conj();
        for j in 1..size {
            t[(k, j)] = at(k) * at(j).conj() + t[(k - 1, j - 1)];
        }
    }
    t
}

/// Hermitian matrix of `L_q` in the ladder coefficient basis.
#[derive(Clone, Debug)]
pub struct LaxOperatorMatrix {
    grid: Grid,
    sign: Sign,
    entries: Mat<Complex64>,
}

/// Builds the Lax matrix on the field's own ladder.
pub fn lax_matrix(q: &HardyField, sign: Sign) -> LaxOperatorMatrix {
    LaxOperatorMatrix::with_size(q, sign, q.grid().ladder_len())
}

impl LaxOperatorMatrix {
    /// Lax matrix on a ladder of `size` modes; `size` may exceed the field ladder.
    pub fn with_size(q: &HardyField, sign: Sign, size: usize) -> Self {
        let mut m = toeplitz_matrix(q, size);
        let s = -sign.sigma();
        let a = q.grid().dxi();
        for j in 0..size {
            for k in 0..size {
                m[(k, j)] *= s;
            }
            m[(j, j)] += Complex64::new(a * j as f64, 0.0);
        }
        Self { grid: q.grid().clone(), sign, entries: m }
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn entries(&self) -> &Mat<Complex64> {
        &self.entries
    }

    /// Matrix-vector product on a coefficient vector.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>, SpectralError> {
        let n = self.size();
        if v.len() != n {
            return Err(SpectralError::Size { expected: n, got: v.len() });
        }
        let mut out = vec![Complex64::default(); n];
        for (j, vj) in v.iter().enumerate() {
            if *vj == Complex64::default() {
                continue;
            }
            let col = self.entries.col(j);
            for (k, o) in out.iter_mut().enumerate() {
                *o += col[k] * vj;
            }
        }
        Ok(out)
    }

    /// Largest entrywise deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.size();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..=j {
                worst = worst.max((self.entries[(k, j)] - self.entries[(j, k)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, SpectralError> {
        let mut ev =
            self.entries.self_adjoint_eigenvalues(Side::Lower).map_err(|e| SpectralError::Eigen(format!("{e:?}")))?;
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }

    pub fn spectrum(&self) -> Result<LaxSpectrum, SpectralError> {
        Ok(LaxSpectrum { eigenvalues: self.eigenvalues()?, dxi: self.grid.dxi() })
    }
}

/// Eigenvalues of a Lax matrix together with its ladder spacing.
#[derive(Clone, Debug)]
pub struct LaxSpectrum {
    pub eigenvalues: Vec<f64>,
    pub dxi: f64,
}

impl LaxSpectrum {
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    /// `tr((M + kappa)^{-1}) - tr((D + kappa)^{-1})` on the matrix ladder.
    pub fn trace_defect(&self, kappa: f64) -> Result<f64, SpectralError> {
        let lmin = self.lambda_min();
        if !(lmin + kappa > 0.0) {
            return Err(SpectralError::NotPositive { kappa, lambda_min: lmin });
        }
        let mut s = 0.0;
        for (j, l) in self.eigenvalues.iter().enumerate() {
            s += 1.0 / (l + kappa) - 1.0 / (self.dxi * j as f64 + kappa);
        }
        Ok(s)
    }
}

/// `max(margin, -lambda_min + margin)`.
pub fn kappa0(q: &HardyField, sign: Sign, margin: f64) -> Result<f64, SpectralError> {
    if !(margin > 0.0) {
        return Err(SpectralError::BadMargin(margin));
    }
    let lmin = lax_matrix(q, sign).spectrum()?.lambda_min();
    Ok(margin.max(margin - lmin))
}

/// `tr(R(kappa, q) - R0(kappa))` on the field ladder, no tail handling.
pub fn resolvent_trace_defect(q: &HardyField, sign: Sign, kappa: f64) -> Result<f64, SpectralError> {
    lax_matrix(q, sign).spectrum()?.trace_defect(kappa)
}

/// How the infinite-ladder trace defect is approximated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMethod {
    /// Diagonal sum on the field ladder only.
    Truncated,
    /// Field ladder plus closed-form first and second order tails.
    TailCorrected,
    /// Tail-corrected traces on the ladder and its zero-padded double, extrapolated.
    Extrapolated,
}

impl std::str::FromStr for TraceMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truncated" => Ok(Self::Truncated),
            "tail_corrected" => Ok(Self::TailCorrected),
            "extrapolated" => Ok(Self::Extrapolated),
            other => Err(format!("unknown trace method `{other}`")),
        }
    }
}

/// Tail sums for modes `k >= size` of the trace defect.
fn trace_tail(sign: Sign, m_over_l: f64, q4_over_l: f64, size: usize, a: f64, kappa: f64) -> f64 {
    sign.sigma() * m_over_l * ladder_tail_sq(size, a, kappa) + q4_over_l * ladder_tail_cube(size, a, kappa)
}

/// Infinite-ladder trace defects for several `kappa` at once.
pub fn trace_defects(
    q: &HardyField,
    sign: Sign,
    kappas: &[f64],
    method: TraceMethod,
) -> Result<Vec<f64>, SpectralError> {
    let g = q.grid();
    let a = g.dxi();
    let len = g.domain_length();
    let k = g.ladder_len();
    let m_over_l = mass(q) / len;
    let q4_over_l = quartic(q) / len;
    let corrected = |size: usize| -> Result<Vec<f64>, SpectralError> {
        let spec = LaxOperatorMatrix::with_size(q, sign, size).spectrum()?;
        kappas
            .iter()
            .map(|&kap| {
                let t = spec.trace_defect(kap)?;
                Ok(t + trace_tail(sign, m_over_l, q4_over_l, size, a, kap))
            })
            .collect()
    };
    match method {
        TraceMethod::Truncated => {
            let spec = lax_matrix(q, sign).spectrum()?;
            kappas.iter().map(|&kap| spec.trace_defect(kap)).collect()
        }
        TraceMethod::TailCorrected => corrected(k),
        TraceMethod::Extrapolated => {
            let t1 = corrected(k)?;
            let t2 = corrected(2 * k)?;
            Ok(t1.iter().zip(&t2).map(|(x, y)| (8.0 * y - x) / 7.0).collect())
        }
    }
}

/// `beta(kappa, q) = M(q) -/+ 2 pi kappa tr(R - R0)` for each `kappa`.
pub fn beta_many(q: &HardyField, sign: Sign, kappas: &[f64], method: TraceMethod) -> Result<Vec<f64>, SpectralError> {
    if let Some(&k) = kappas.iter().find(|k| !(**k > 0.0)) {
        return Err(SpectralError::BadKappa(k));
    }
    let m = mass(q);
    if m == 0.0 {
        // L_0 = D exactly; the eigensolver would only contribute rounding
        return Ok(vec![0.0; kappas.len()]);
    }
    let tr = trace_defects(q, sign, kappas, method)?;
    Ok(kappas.iter().zip(&tr).map(|(k, t)| m - sign.sigma() * 2.0 * PI * k * t).collect())
}

/// `beta(kappa, q)` with the tail-corrected trace.
pub fn beta(q: &HardyField, sign: Sign, kappa: f64) -> Result<f64, SpectralError> {
    Ok(beta_many(q, sign, &[kappa], TraceMethod::TailCorrected)?[0])
}

/// `sum_k xi_k/(xi_k + kappa) |q^(xi_k)|^2 dxi`.
pub fn beta_quadratic(q: &HardyField, kappa: f64) -> f64 {
    let g = q.grid();
    let s: f64 = q
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let xi = g.xi(k);
            xi / (xi + kappa) * c.norm_sqr()
        })
        .sum();
    g.domain_length() * s
}

/// Quadratic part of `beta` for the infinite ladder:
/// `L sum_j |c_j|^2 (1 - kappa a sum_{m>=0} (xi_{j+m} + kappa)^{-2})`.
pub fn beta_quadratic_lattice(q: &HardyField, kappa: f64) -> f64 {
    let g = q.grid();
    let a = g.dxi();
    let s: f64 = q
        .coeffs()
        .iter()
        .enumerate()
        .map(|(j, c)| c.norm_sqr() * (1.0 - kappa / a * trigamma(j as f64 + kappa / a)))
        .sum();
    g.domain_length() * s
}

/// Negative eigenvalues split by the edge guard `10 dxi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundStates {
    pub bound_states: Vec<f64>,
    pub edge_candidates: Vec<f64>,
}

impl BoundStates {
    pub fn from_spectrum(spec: &LaxSpectrum) -> Self {
        let guard = 10.0 * spec.dxi;
        let bound_states = spec.eigenvalues.iter().copied().filter(|l| *l < -guard).collect();
        let edge_candidates = spec.eigenvalues.iter().copied().filter(|l| *l >= -guard && *l < 0.0).collect();
        Self { bound_states, edge_candidates }
    }
}

/// Negative eigenvalues below `-10 dxi`, ascending, plus edge candidates.
pub fn bound_states(q: &HardyField, sign: Sign) -> Result<BoundStates, SpectralError> {
    Ok(BoundStates::from_spectrum(&lax_matrix(q, sign).spectrum()?))
}

/// The spectral report of one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub kappa0: f64,
    pub bound_states: Vec<f64>,
    pub edge_candidates: Vec<f64>,
    pub beta: BTreeMap<String, f64>,
    pub beta2: BTreeMap<String, f64>,
}

impl SpectralReport {
    pub fn compute(
        q: &HardyField,
        sign: Sign,
        kappas: &[f64],
        margin: f64,
        method: TraceMethod,
    ) -> Result<Self, SpectralError> {
        if !(margin > 0.0) {
            return Err(SpectralError::BadMargin(margin));
        }
        let spec = lax_matrix(q, sign).spectrum()?;
        let bs = BoundStates::from_spectrum(&spec);
        let betas = beta_many(q, sign, kappas, method)?;
        Ok(Self {
            kappa0: margin.max(margin - spec.lambda_min()),
            bound_states: bs.bound_states,
            edge_candidates: bs.edge_candidates,
            beta: kappas.iter().zip(&betas).map(|(k, b)| (kappa_key(*k), *b)).collect(),
            beta2: kappas.iter().map(|k| (kappa_key(*k), beta_quadratic(q, *k))).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::observables::soliton;

    #[test]
    fn zero_field_gives_diagonal() {
        let g = make_grid(32, 10.0).unwrap();
        let z = HardyField::zero(&g);
        let m = lax_matrix(&z, Sign::Focusing);
        for j in 0..16 {
            for k in 0..16 {
                let want = if j == k { g.xi(k) } else { 0.0 };
                assert_eq!(m.entries()[(k, j)], Complex64::new(want, 0.0));
            }
        }
        assert_eq!(kappa0(&z, Sign::Focusing, 1.0).unwrap(), 1.0);
        assert_eq!(resolvent_trace_defect(&z, Sign::Defocusing, 2.0).unwrap(), 0.0);
        assert_eq!(beta(&z, Sign::Focusing, 3.0).unwrap(), 0.0);
        assert_eq!(beta_quadratic(&z, 3.0), 0.0);
        let bs = bound_states(&z, Sign::Focusing).unwrap();
        assert!(bs.bound_states.is_empty() && bs.edge_candidates.is_empty());
    }

    #[test]
    fn trace_defect_rejects_indefinite_shift() {
        let g = make_grid(256, 40.0).unwrap();
        let q = soliton(1.0, 0.0, &g).unwrap().scale(Complex64::new(1.5, 0.0));
        let spec = lax_matrix(&q, Sign::Focusing).spectrum().unwrap();
        let lmin = spec.lambda_min();
        assert!(lmin < 0.0);
        match spec.trace_defect(-lmin * 0.5) {
            Err(SpectralError::NotPositive { kappa, lambda_min }) => {
                assert_eq!(kappa, -lmin * 0.5);
                assert_eq!(lambda_min, lmin);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn soliton_eigenvector_on_circle() {
        // on the circle L_R R = -a R
        let g = make_grid(512, 60.0).unwrap();
        let r = soliton(1.0, 0.0, &g).unwrap();
        let m = lax_matrix(&r, Sign::Focusing);
        let out = m.apply(r.coeffs()).unwrap();
        let a = g.dxi();
        let err: f64 = out.iter().zip(r.coeffs()).map(|(o, c)| (o + c * a).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = r.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-10 * scale, "{err}");
        let bs = bound_states(&r, Sign::Focusing).unwrap();
        assert!(bs.bound_states.is_empty());
        assert_eq!(bs.edge_candidates.len(), 1);
        assert!((bs.edge_candidates[0] + a).abs() < 1e-10);
        assert!((kappa0(&r, Sign::Focusing, 1.0).unwrap() - (1.0 + a)).abs() < 1e-10);
    }

    #[test]
    fn trace_method_parsing() {
        assert_eq!("extrapolated".parse::<TraceMethod>().unwrap(), TraceMethod::Extrapolated);
        assert!("exact".parse::<TraceMethod>().is_err());
    }
}
