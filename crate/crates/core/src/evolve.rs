//! Time integration of `dq/dt = i q'' +/- 2 q C+(|q|^2)'` on the Hardy ladder.
//!
//! The linear part is diagonal with multiplier `exp(-i xi^2 t)`; the step is
//! classical RK4 in the interaction picture `v = exp(-i t Delta) q`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Grid, HardyField};
use crate::lax::{beta_many, SpectralError, TraceMethod};
use crate::observables::{kappa_key, ObservableError, ObservableSet, Sign, SOLITON_MASS};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("record_stride must be at least 1")]
    BadStride,
    #[error("drift tolerance `{0}` must be positive")]
    BadTolerance(&'static str),
    #[error("non-finite field at t = {0}")]
    NonFinite(f64),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Relative drift budgets for the monitored invariants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftTolerances {
    pub mass: f64,
    pub momentum: f64,
    pub hamiltonian: f64,
    pub beta: f64,
}

impl Default for DriftTolerances {
    fn default() -> Self {
        Self { mass: 1e-10, momentum: 1e-8, hamiltonian: 1e-8, beta: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub sign: Sign,
    pub dt: f64,
    /// May be negative to run backwards.
    pub t_final: f64,
    pub record_stride: usize,
    /// Ladder for tail-mass diagnostics.
    pub tail_kappas: Vec<f64>,
    /// Ladder for `beta` monitoring; empty disables it.
    pub beta_kappas: Vec<f64>,
    pub beta_method: TraceMethod,
    pub tolerances: DriftTolerances,
}

impl EvolutionConfig {
    pub fn new(sign: Sign, dt: f64, t_final: f64) -> Self {
        Self {
            sign,
            dt,
            t_final,
            record_stride: usize::MAX,
            tail_kappas: Vec::new(),
            beta_kappas: Vec::new(),
            beta_method: TraceMethod::TailCorrected,
            tolerances: DriftTolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(EvolveError::BadStep(self.dt));
        }
        if self.record_stride == 0 {
            return Err(EvolveError::BadStride);
        }
        let t = &self.tolerances;
        for (name, v) in [("mass", t.mass), ("momentum", t.momentum), ("hamiltonian", t.hamiltonian), ("beta", t.beta)]
        {
            if !(v > 0.0) {
                return Err(EvolveError::BadTolerance(name));
            }
        }
        Ok(())
    }

    /// Number of steps and the signed step that lands exactly on `t_final`.
    pub fn schedule(&self) -> (usize, f64) {
        let n = (self.t_final.abs() / self.dt).ceil().max(0.0) as usize;
        if n == 0 {
            (0, 0.0)
        } else {
            (n, self.t_final / n as f64)
        }
    }
}

/// Mass drift beyond which a run is treated as blown up.
pub const BLOWUP_MASS_DRIFT: f64 = 1e-3;

fn rhs_coeffs(grid: &Grid, h: &[Complex64], sign: Sign) -> Vec<Complex64> {
    let nl = grid.ccm_nonlinearity(h);
    let s = 2.0 * sign.sigma();
    h.iter()
        .zip(&nl)
        .enumerate()
        .map(|(k, (c, n))| {
            let xi = grid.xi(k);
            Complex64::new(0.0, -xi * xi) * c + s * n
        })
        .collect()
}

/// `dq/dt = i q'' +/- 2 q C+(|q|^2)'`.
pub fn ccm_rhs(q: &HardyField, sign: Sign) -> HardyField {
    HardyField::from_coeffs_unchecked(q.grid(), rhs_coeffs(q.grid(), q.coeffs(), sign))
}

/// The Lax-pair operator `P f = i f'' +/- 2 q (C+(conj(q) f))'`.
pub fn lax_pair_apply(q: &HardyField, f: &HardyField, sign: Sign) -> Result<HardyField, ObservableError> {
    q.check_grid(f)?;
    let g = q.grid();
    let qs = g.synthesize(q.coeffs(), 2);
    let fs = g.synthesize(f.coeffs(), 2);
    let prod: Vec<Complex64> = qs.iter().zip(&fs).map(|(a, b)| a.conj() * b).collect();
    let mut inner = g.project_padded(&prod, 2, g.n_points());
    for (k, v) in inner.iter_mut().enumerate() {
        *v *= Complex64::new(0.0, g.dxi() * k as f64);
    }
    let ds = g.synthesize(&inner, 2);
    let outer: Vec<Complex64> = qs.iter().zip(&ds).map(|(a, b)| a * b).collect();
    let pq = g.project_padded(&outer, 2, g.ladder_len());
    let s = 2.0 * sign.sigma();
    let c = f
        .coeffs()
        .iter()
        .zip(&pq)
        .enumerate()
        .map(|(k, (c, p))| Complex64::new(0.0, -g.xi(k) * g.xi(k)) * c + s * p)
        .collect();
    Ok(HardyField::from_coeffs_unchecked(g, c))
}

fn nonlinear(grid: &Grid, h: &[Complex64], sign: Sign) -> Vec<Complex64> {
    let s = 2.0 * sign.sigma();
    grid.ccm_nonlinearity(h).into_iter().map(|v| v * s).collect()
}

/// One integrating-factor RK4 step of signed size `dt` on coefficients.
pub(crate) fn step_coeffs(grid: &Grid, h: &[Complex64], dt: f64, sign: Sign) -> Vec<Complex64> {
    let e: Vec<Complex64> = (0..h.len())
        .map(|k| {
            let xi = grid.xi(k);
            Complex64::from_polar(1.0, -0.5 * xi * xi * dt)
        })
        .collect();
    let half = 0.5 * dt;
    let k1 = nonlinear(grid, h, sign);
    let a: Vec<Complex64> = (0..h.len()).map(|k| e[k] * (h[k] + half * k1[k])).collect();
    let k2 = nonlinear(grid, &a, sign);
    let b: Vec<Complex64> = (0..h.len()).map(|k| e[k] * h[k] + half * k2[k]).collect();
    let k3 = nonlinear(grid, &b, sign);
    let c: Vec<Complex64> = (0..h.len()).map(|k| e[k] * e[k] * h[k] + dt * e[k] * k3[k]).collect();
    let k4 = nonlinear(grid, &c, sign);
    (0..h.len())
        .map(|k| {
            let e2 = e[k] * e[k];
            e2 * h[k] + dt / 6.0 * (e2 * k1[k] + 2.0 * e[k] * (k2[k] + k3[k]) + k4[k])
        })
        .collect()
}

/// One step of size `config.dt`, signed like `config.t_final`.
pub fn step(q: &HardyField, config: &EvolutionConfig) -> Result<HardyField, EvolveError> {
    config.validate()?;
    let dt = if config.t_final < 0.0 { -config.dt } else { config.dt };
    let c = step_coeffs(q.grid(), q.coeffs(), dt, config.sign);
    HardyField::from_coeffs(q.grid(), c).map_err(|_| EvolveError::NonFinite(dt))
}

/// Evolves without monitoring; errors on non-finite output.
pub fn propagate(q: &HardyField, sign: Sign, dt: f64, t_final: f64) -> Result<HardyField, EvolveError> {
    let cfg = EvolutionConfig::new(sign, dt, t_final);
    cfg.validate()?;
    let (n, h) = cfg.schedule();
    let mut c = q.coeffs().to_vec();
    for i in 0..n {
        c = step_coeffs(q.grid(), &c, h, sign);
        if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(EvolveError::NonFinite(h * (i + 1) as f64));
        }
    }
    Ok(HardyField::from_coeffs_unchecked(q.grid(), c))
}

/// One trajectory entry; diagnostics are recomputed from the stored field.
#[derive(Clone, Debug)]
pub struct EvolutionRecord {
    pub t: f64,
    pub field: HardyField,
    pub observables: ObservableSet,
    pub beta_samples: BTreeMap<String, f64>,
    /// Names of invariants whose drift exceeded the budget at this record.
    pub flags: Vec<String>,
    pub drifts: BTreeMap<String, f64>,
}

impl EvolutionRecord {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = self.observables.to_json(self.t);
        let obj = v.as_object_mut().expect("observables serialize to an object");
        obj.insert("beta".into(), serde_json::json!(self.beta_samples));
        obj.insert("drifts".into(), serde_json::json!(self.drifts));
        obj.insert("flags".into(), serde_json::json!(self.flags));
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    DriftFlagged,
    Blowup { t: f64, reason: String },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<EvolutionRecord>,
    pub status: RunStatus,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn last(&self) -> &EvolutionRecord {
        self.records.last().expect("a trajectory holds at least the initial record")
    }

    /// Largest drift of each invariant over all records.
    pub fn max_drifts(&self) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> = BTreeMap::new();
        for r in &self.records {
            for (k, v) in &r.drifts {
                let e = out.entry(k.clone()).or_insert(0.0);
                *e = e.max(*v);
            }
        }
        out
    }
}

fn rel_drift(now: f64, start: f64) -> f64 {
    (now - start).abs() / start.abs().max(1e-300)
}

struct Monitor<'a> {
    config: &'a EvolutionConfig,
    start: Option<(ObservableSet, Vec<f64>)>,
}

impl Monitor<'_> {
    fn record(&mut self, t: f64, field: HardyField) -> Result<EvolutionRecord, EvolveError> {
        let cfg = self.config;
        let obs = ObservableSet::compute(&field, cfg.sign, &cfg.tail_kappas)?;
        let betas = if cfg.beta_kappas.is_empty() {
            Vec::new()
        } else {
            beta_many(&field, cfg.sign, &cfg.beta_kappas, cfg.beta_method)?
        };
        let (o0, b0) = self.start.get_or_insert_with(|| (obs.clone(), betas.clone()));
        let tol = &cfg.tolerances;
        let mut drifts = BTreeMap::new();
        let mut flags = Vec::new();
        let mut check = |name: String, d: f64, budget: f64| {
            if d > budget {
                flags.push(name.clone());
            }
            drifts.insert(name, d);
        };
        check("mass".into(), rel_drift(obs.mass, o0.mass), tol.mass);
        check("momentum".into(), rel_drift(obs.momentum, o0.momentum), tol.momentum);
        check("hamiltonian".into(), rel_drift(obs.hamiltonian, o0.hamiltonian), tol.hamiltonian);
        for ((k, b), b_start) in cfg.beta_kappas.iter().zip(&betas).zip(b0.iter()) {
            check(format!("beta[{}]", kappa_key(*k)), rel_drift(*b, *b_start), tol.beta);
        }
        let beta_samples = cfg.beta_kappas.iter().zip(&betas).map(|(k, b)| (kappa_key(*k), *b)).collect();
        Ok(EvolutionRecord { t, field, observables: obs, beta_samples, flags, drifts })
    }
}

/// Evolves `q0` to `config.t_final`, recording every `record_stride` steps and at the end.
pub fn evolve(q0: &HardyField, config: &EvolutionConfig) -> Result<Trajectory, EvolveError> {
    config.validate()?;
    let mut warnings = Vec::new();
    let m0 = crate::observables::mass(q0);
    if config.sign == Sign::Focusing && m0 >= SOLITON_MASS {
        warnings.push(format!("focusing data with mass {m0:.6} >= 2 pi: outside the below-threshold regime"));
    }
    let grid = q0.grid().clone();
    let mut mon = Monitor { config, start: None };
    let mut records = vec![mon.record(0.0, q0.clone())?];
    let (n, h) = config.schedule();
    let mut c = q0.coeffs().to_vec();
    let mut status = RunStatus::Completed;
    for i in 1..=n {
        let t = h * i as f64;
        c = step_coeffs(&grid, &c, h, config.sign);
        if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            status = RunStatus::Blowup { t, reason: "non-finite field".into() };
            break;
        }
        let m: f64 = grid.domain_length() * c.iter().map(|v| v.norm_sqr()).sum::<f64>();
        if rel_drift(m, m0) > BLOWUP_MASS_DRIFT {
            status = RunStatus::Blowup { t, reason: format!("mass drift {:.3e}", rel_drift(m, m0)) };
            break;
        }
        if i % config.record_stride == 0 || i == n {
            let rec = mon.record(t, HardyField::from_coeffs_unchecked(&grid, c.clone()))?;
            records.push(rec);
        }
    }
    if status == RunStatus::Completed && records.iter().any(|r| !r.flags.is_empty()) {
        status = RunStatus::DriftFlagged;
    }
    Ok(Trajectory { records, status, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn zero_is_fixed() {
        let g = make_grid(64, 20.0).unwrap();
        let z = HardyField::zero(&g);
        assert_eq!(ccm_rhs(&z, Sign::Focusing).norm(), 0.0);
        let cfg = EvolutionConfig::new(Sign::Focusing, 1e-2, 0.1);
        assert_eq!(step(&z, &cfg).unwrap().norm(), 0.0);
    }

    #[test]
    fn schedule_lands_on_final_time() {
        let cfg = EvolutionConfig::new(Sign::Defocusing, 0.3, 1.0);
        let (n, h) = cfg.schedule();
        assert_eq!(n, 4);
        assert!((h * n as f64 - 1.0).abs() < 1e-15);
        let back = EvolutionConfig::new(Sign::Defocusing, 0.3, -1.0);
        assert!(back.schedule().1 < 0.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = EvolutionConfig::new(Sign::Focusing, 0.0, 1.0);
        assert!(matches!(cfg.validate(), Err(EvolveError::BadStep(_))));
        cfg.dt = 1e-3;
        cfg.record_stride = 0;
        assert!(matches!(cfg.validate(), Err(EvolveError::BadStride)));
        cfg.record_stride = 1;
        cfg.tolerances.beta = 0.0;
        assert!(matches!(cfg.validate(), Err(EvolveError::BadTolerance("beta"))));
    }
}
