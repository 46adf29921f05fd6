//! Exact solitons, conserved functionals and the Toeplitz building block.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, GridError, HardyField};

#[derive(Debug, Error)]
pub enum ObservableError {
    #[error("soliton scale must be positive, got {0}")]
    BadScale(f64),
    #[error("kappa must be nonnegative, got {0}")]
    NegativeKappa(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Focusing takes the upper sign of the equation, defocusing the lower.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Focusing,
    Defocusing,
}

impl Sign {
    /// `+1` for focusing, `-1` for defocusing.
    pub fn sigma(self) -> f64 {
        match self {
            Sign::Focusing => 1.0,
            Sign::Defocusing => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Focusing => "focusing",
            Sign::Defocusing => "defocusing",
        }
    }
}

impl std::str::FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "focusing" => Ok(Sign::Focusing),
            "defocusing" => Ok(Sign::Defocusing),
            other => Err(format!("sign must be `focusing` or `defocusing`, got `{other}`")),
        }
    }
}

/// Periodic soliton with the pole of `sqrt(lambda) sqrt(2)/(lambda x + x0 + i)`.
///
/// The coefficients `c_k = C r^k exp(i a k x0/lambda)` with `r = exp(-a/lambda)`
/// and `|C|^2 = a (1 - r^2)` give mass exactly `2 pi` on the full ladder. As
/// `L` grows the field converges to the line soliton. On the circle it is a
/// traveling wave `q(t, x) = q(0, x + a t)`.
pub fn soliton(lambda: f64, x0: f64, grid: &Grid) -> Result<HardyField, ObservableError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(ObservableError::BadScale(lambda));
    }
    let a = grid.dxi();
    let r = (-a / lambda).exp();
    let amp = Complex64::new(0.0, -(a * (1.0 - r * r)).sqrt());
    let coeffs = (0..grid.ladder_len())
        .map(|k| {
            let kf = k as f64;
            amp * r.powf(kf) * Complex64::from_polar(1.0, a * kf * x0 / lambda)
        })
        .collect();
    Ok(HardyField::from_coeffs(grid, coeffs)?)
}

/// `q C+(conj(q) f)` with dealiased products, truncated to the ladder.
pub fn toeplitz_apply(q: &HardyField, f: &HardyField) -> Result<HardyField, ObservableError> {
    q.check_grid(f)?;
    let c = q.grid().toeplitz_coeffs(q.coeffs(), f.coeffs());
    Ok(HardyField::from_coeffs(q.grid(), c)?)
}

/// `M(q) = int |q|^2`.
pub fn mass(q: &HardyField) -> f64 {
    q.grid().domain_length() * q.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// `int |q|^4`, exact for ladder fields.
pub fn quartic(q: &HardyField) -> f64 {
    let (_, w) = q.grid().modulus_squared_coeffs(q.coeffs());
    q.grid().domain_length() * w.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// `P(q) = int (-i conj(q) q' -/+ |q|^4 / 2)`, upper sign focusing.
pub fn momentum(q: &HardyField, sign: Sign) -> f64 {
    let g = q.grid();
    let kinetic: f64 =
        g.domain_length() * q.coeffs().iter().enumerate().map(|(k, c)| g.xi(k) * c.norm_sqr()).sum::<f64>();
    kinetic - 0.5 * sign.sigma() * quartic(q)
}

/// `H(q) = 1/2 int |q' -/+ i q C+(|q|^2)|^2`, upper sign focusing.
pub fn hamiltonian(q: &HardyField, sign: Sign) -> f64 {
    let g = q.grid();
    let n = g.n_points();
    let (qs, mut w) = g.modulus_squared_coeffs(q.coeffs());
    w.truncate(n);
    let ws = g.synthesize(&w, 2);
    let prod: Vec<Complex64> = qs.iter().zip(&ws).map(|(a, b)| a * b).collect();
    // q C+(|q|^2) occupies modes 0..n-1, so nothing is truncated here
    let p = g.project_padded(&prod, 2, n);
    let s = Complex64::new(0.0, sign.sigma());
    let mut sum = 0.0;
    for (k, pk) in p.iter().enumerate() {
        let dq = q.coeffs().get(k).map_or(Complex64::new(0.0, 0.0), |c| c * Complex64::new(0.0, g.xi(k)));
        sum += (dq - s * pk).norm_sqr();
    }
    0.5 * g.domain_length() * sum
}

/// `sum_{xi_k >= kappa} |q^(xi_k)|^2 dxi`.
pub fn tail_mass(q: &HardyField, kappa: f64) -> Result<f64, ObservableError> {
    if !(kappa >= 0.0) {
        return Err(ObservableError::NegativeKappa(kappa));
    }
    let g = q.grid();
    let s: f64 = q.coeffs().iter().enumerate().filter(|(k, _)| g.xi(*k) >= kappa).map(|(_, c)| c.norm_sqr()).sum();
    Ok(g.domain_length() * s)
}

/// Formats a frequency or spectral parameter as a stable JSON map key.
pub fn kappa_key(kappa: f64) -> String {
    format!("{kappa}")
}

/// Conserved functionals of one field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub mass: f64,
    pub momentum: f64,
    pub hamiltonian: f64,
    pub tails: BTreeMap<String, f64>,
}

impl ObservableSet {
    pub fn compute(q: &HardyField, sign: Sign, kappas: &[f64]) -> Result<Self, ObservableError> {
        let mut tails = BTreeMap::new();
        for &k in kappas {
            tails.insert(kappa_key(k), tail_mass(q, k)?);
        }
        Ok(Self { mass: mass(q), momentum: momentum(q, sign), hamiltonian: hamiltonian(q, sign), tails })
    }

    /// One JSON record with the time stamp first.
    pub fn to_json(&self, t: f64) -> serde_json::Value {
        serde_json::json!({
            "t": t,
            "mass": self.mass,
            "momentum": self.momentum,
            "hamiltonian": self.hamiltonian,
            "tails": self.tails,
        })
    }
}

/// Mass of the soliton family, the focusing threshold.
pub const SOLITON_MASS: f64 = 2.0 * PI;
