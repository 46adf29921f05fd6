//! The `simulate`, `compare` and `spectral` commands.

use std::fs::File;
use std::io::BufReader;

use ccm_core::evolve::{evolve, propagate, EvolutionConfig, EvolveError, RunStatus, Trajectory};
use ccm_core::explicit::{explicit_line, ExplicitEvalPlan};
use ccm_core::lax::{SpectralError, SpectralReport};
use ccm_core::observables::SOLITON_MASS;
use ccm_core::random::{packet, random_packets, random_spectral, with_mass};
use ccm_core::{make_grid, mass, poisson_semigroup, soliton, HardyField, Sign};
use num_complex::Complex64;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, DataSpec, RunConfig};
use crate::output::{envelope, OutputDir};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_DRIFT: u8 = 2;
pub const EXIT_BLOWUP: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;
pub const EXIT_SPECTRAL: u8 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("initial data: {0}")]
    Data(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("evolution failed: {0}")]
    Evolve(EvolveError),
    #[error("spectral computation failed: {0}")]
    Spectral(#[from] SpectralError),
    #[error("explicit-formula solver failed: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Data(_) | CliError::Io(_) => EXIT_CONFIG,
            CliError::Evolve(EvolveError::NonFinite(_)) => EXIT_BLOWUP,
            CliError::Evolve(EvolveError::Spectral(_)) | CliError::Spectral(_) => EXIT_SPECTRAL,
            CliError::Evolve(_) => EXIT_CONFIG,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl From<EvolveError> for CliError {
    fn from(e: EvolveError) -> Self {
        CliError::Evolve(e)
    }
}

/// Builds the initial field described by `[grid]` and `[data]`.
pub fn initial_field(cfg: &RunConfig) -> Result<HardyField, CliError> {
    let data = |e: &dyn std::fmt::Display| CliError::Data(e.to_string());
    let g = make_grid(cfg.grid.n_points, cfg.grid.domain_length).map_err(|e| data(&e))?;
    let rescale = |q: HardyField, m: Option<f64>| m.map_or_else(|| q.clone(), |m| with_mass(&q, m));
    Ok(match &cfg.data {
        DataSpec::Soliton { lambda, x0 } => soliton(*lambda, *x0, &g).map_err(|e| data(&e))?,
        DataSpec::File { path } => {
            let f = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let q = HardyField::read_csv(BufReader::new(f)).map_err(|e| data(&e))?;
            let fg = q.grid();
            if fg.n_points() != g.n_points()
                || (fg.domain_length() - g.domain_length()).abs() > 1e-12 * g.domain_length()
            {
                return Err(CliError::Data(format!(
                    "{} holds a field on n_points = {}, domain_length = {}, which does not match [grid]",
                    path.display(),
                    fg.n_points(),
                    fg.domain_length()
                )));
            }
            q
        }
        DataSpec::Random { seed, decay, amplitude, mass } => {
            rescale(random_spectral(&g, *seed, *amplitude, *decay), *mass)
        }
        DataSpec::Gaussian { x0, k0, width, amplitude } => packet(&g, *x0, *k0, *width, *amplitude),
        DataSpec::Packets { seed, count, spread, mass } => rescale(random_packets(&g, *seed, *count, *spread), *mass),
    })
}

fn evolution_config(cfg: &RunConfig, beta_kappas: &[f64]) -> EvolutionConfig {
    let mut e = EvolutionConfig::new(cfg.run.sign, cfg.run.dt, cfg.run.t_final);
    e.record_stride = cfg.run.record_stride;
    e.tail_kappas = cfg.run.tail_kappas.clone();
    e.beta_kappas = beta_kappas.to_vec();
    e.beta_method = cfg.run.beta_method;
    e.tolerances = (&cfg.tolerances).into();
    e
}

fn status_code(status: &RunStatus) -> u8 {
    match status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::DriftFlagged => EXIT_DRIFT,
        RunStatus::Blowup { .. } => EXIT_BLOWUP,
    }
}

fn rel_l2(a: &HardyField, b: &HardyField) -> f64 {
    let d = a.combine(Complex64::new(1.0, 0.0), b, Complex64::new(-1.0, 0.0)).expect("same grid");
    d.norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn io_err(e: impl std::fmt::Display) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Per-invariant initial value, final value, largest drift and budget.
fn conservation_table(traj: &Trajectory, cfg: &RunConfig) -> Value {
    let (first, last) = (&traj.records[0], traj.last());
    let drifts = traj.max_drifts();
    let tol = &cfg.tolerances;
    let mut table = serde_json::Map::new();
    for (name, a, b, budget) in [
        ("mass", first.observables.mass, last.observables.mass, tol.mass),
        ("momentum", first.observables.momentum, last.observables.momentum, tol.momentum),
        ("hamiltonian", first.observables.hamiltonian, last.observables.hamiltonian, tol.hamiltonian),
    ] {
        table.insert(
            name.into(),
            json!({ "initial": a, "final": b, "max_drift": drifts.get(name), "tolerance": budget }),
        );
    }
    for (k, b0) in &first.beta_samples {
        let name = format!("beta[{k}]");
        let row = json!({ "initial": b0, "final": last.beta_samples.get(k), "max_drift": drifts.get(&name), "tolerance": tol.beta });
        table.insert(name, row);
    }
    Value::Object(table)
}

pub fn simulate(cfg: &RunConfig) -> Result<u8, CliError> {
    let q0 = initial_field(cfg)?;
    let traj = evolve(&q0, &evolution_config(cfg, &cfg.run.beta_kappas))?;
    let code = status_code(&traj.status);
    let mut out = OutputDir::create(&cfg.output.dir)?;
    let rows: Vec<Value> = traj.records.iter().map(|r| r.to_json()).collect();
    out.write_jsonl("trajectory.jsonl", &rows)?;
    if cfg.output.field_dumps {
        for (i, r) in traj.records.iter().enumerate() {
            out.write_with(&format!("field_{i:05}.csv"), |w| r.field.write_csv(w).map_err(io_err))?;
        }
    }
    let last = traj.last();
    let mut report = envelope("simulate", cfg);
    report.insert("status".into(), serde_json::to_value(&traj.status).expect("status serializes"));
    report.insert("warnings".into(), json!(traj.warnings));
    report.insert("t_reached".into(), json!(last.t));
    report.insert("conservation".into(), conservation_table(&traj, cfg));
    report.insert("final_vs_initial_l2".into(), json!(rel_l2(&last.field, &q0)));
    if let DataSpec::Soliton { lambda, x0 } = cfg.data {
        // on the circle the soliton drifts rigidly with speed lambda * dxi
        let g = q0.grid();
        let moved = soliton(lambda, x0 + lambda * g.dxi() * last.t, g).expect("valid soliton parameters");
        report.insert("soliton_comoving_l2".into(), json!(rel_l2(&last.field, &moved)));
    }
    out.write_json("report.json", &Value::Object(report))?;
    out.finish("simulate", code)?;
    Ok(code)
}

fn sup_and_l2(a: &[Complex64], b: &[Complex64], dx: f64) -> (f64, f64, usize) {
    let mut sup = 0.0;
    let mut arg = 0;
    let mut s2 = 0.0;
    for (j, (u, v)) in a.iter().zip(b).enumerate() {
        let d = (u - v).norm();
        s2 += d * d;
        if d > sup {
            sup = d;
            arg = j;
        }
    }
    (sup, (s2 * dx).sqrt(), arg)
}

pub fn compare(cfg: &RunConfig) -> Result<u8, CliError> {
    let q0 = initial_field(cfg)?;
    let g = q0.grid().clone();
    let (sign, dt) = (cfg.run.sign, cfg.run.dt);
    let plan = ExplicitEvalPlan { tol: cfg.compare.solver_tol, max_iter: cfg.compare.max_iter, ..Default::default() };
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut exceeded = false;
    for &t in &cfg.compare.times {
        let qt = propagate(&q0, sign, dt, t)?;
        let mut half: Option<Option<HardyField>> = None;
        for &b in &cfg.compare.heights {
            let line = explicit_line(&q0, t, b, sign, &plan)
                .map_err(|e| CliError::Solver(format!("t = {t}, b = {b}: {e}")))?;
            for (j, msg) in &line.failures {
                failures.push(json!({ "t": t, "x": g.x(*j), "b": b, "error": msg }));
            }
            let stepped = poisson_semigroup(&qt, b).map_err(|e| CliError::Solver(e.to_string()))?;
            let (sup, l2, arg) = sup_and_l2(&line.values, stepped.samples(), g.dx());
            let mut row = json!({
                "t": t,
                "b": b,
                "sup_error": sup,
                "l2_error": l2,
                "worst_x": g.x(arg),
                "solver_iterations_histogram": line.iteration_histogram(cfg.compare.histogram_width),
                "ladder_depth": line.max_ladder_depth(),
                "within_bound": sup <= cfg.compare.bound,
            });
            if line.failures.is_empty() && sup > cfg.compare.bound {
                exceeded = true;
                // Richardson estimate of the stepper's own time error from a half-step run
                // a half-step run that blows up marks the step as the culprit
                let half = half.get_or_insert_with(|| propagate(&q0, sign, dt / 2.0, t).ok());
                let time_err = half.as_ref().map_or(f64::INFINITY, |h| {
                    let fine = poisson_semigroup(h, b).expect("valid height");
                    sup_and_l2(stepped.samples(), fine.samples(), g.dx()).0 * 16.0 / 15.0
                });
                let cause = if time_err > 0.5 * sup { "time_step" } else { "explicit_or_truncation" };
                row["attribution"] = json!({ "time_step_error_estimate": time_err, "dominant": cause });
            }
            rows.push(row);
        }
    }
    let code = if !failures.is_empty() {
        EXIT_SOLVER
    } else if exceeded {
        EXIT_DRIFT
    } else {
        EXIT_OK
    };
    let mut report = envelope("compare", cfg);
    report.insert("bound".into(), json!(cfg.compare.bound));
    let outside = sign == Sign::Focusing && mass(&q0) >= SOLITON_MASS;
    report.insert("above_focusing_threshold".into(), json!(outside));
    report.insert("comparisons".into(), Value::Array(rows));
    report.insert("solver_failures".into(), Value::Array(failures));
    let mut out = OutputDir::create(&cfg.output.dir)?;
    out.write_json("compare.json", &Value::Object(report))?;
    out.finish("compare", code)?;
    Ok(code)
}

pub fn spectral(cfg: &RunConfig) -> Result<u8, CliError> {
    let q0 = initial_field(cfg)?;
    let sp = &cfg.spectral;
    let rep = SpectralReport::compute(&q0, cfg.run.sign, &sp.kappas, sp.margin, cfg.run.beta_method)?;
    let mut report = envelope("spectral", cfg);
    report.insert("sign".into(), json!(cfg.run.sign));
    report.insert("spectral".into(), serde_json::to_value(&rep).expect("report serializes"));
    let mut code = EXIT_OK;
    if sp.trajectory {
        let traj = evolve(&q0, &evolution_config(cfg, &sp.kappas))?;
        code = status_code(&traj.status);
        let drifts = traj.max_drifts();
        let table: serde_json::Map<String, Value> = traj.records[0]
            .beta_samples
            .iter()
            .map(|(k, b0)| {
                let series: Vec<Value> = traj.records.iter().map(|r| json!([r.t, r.beta_samples.get(k)])).collect();
                (k.clone(), json!({ "initial": b0, "max_drift": drifts.get(&format!("beta[{k}]")), "series": series }))
            })
            .collect();
        let worst = drifts.iter().filter(|(k, _)| k.starts_with("beta")).map(|(_, v)| *v).fold(0.0, f64::max);
        report.insert(
            "beta_drift".into(),
            json!({ "status": traj.status, "max_drift": worst, "tolerance": cfg.tolerances.beta, "kappas": table }),
        );
    }
    let mut out = OutputDir::create(&cfg.output.dir)?;
    out.write_json("spectral.json", &Value::Object(report))?;
    out.finish("spectral", code)?;
    Ok(code)
}
