//! Run configuration: a sectioned TOML file plus `section.key=value` overrides.
//!
//! Every section rejects unknown keys, so a typo is a hard error rather than a
//! silently ignored setting.

use std::path::{Path, PathBuf};

use ccm_core::evolve::DriftTolerances;
use ccm_core::lax::TraceMethod;
use ccm_core::Sign;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("override `{0}` must have the form section.key=value")]
    BadOverride(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub data: DataSpec,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub spectral: SpectralSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_points: usize,
    pub domain_length: f64,
}

/// Initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Soliton {
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default)]
        x0: f64,
    },
    /// A CSV field dump; its grid must match `[grid]`.
    File { path: PathBuf },
    /// Gaussian spectrum with standard deviation `amplitude (1 + xi)^-decay`.
    Random {
        seed: u64,
        decay: f64,
        #[serde(default = "one")]
        amplitude: f64,
        mass: Option<f64>,
    },
    /// Szego projection of `amplitude exp(-(x - x0)^2/(2 width^2) + i k0 x)`.
    Gaussian {
        #[serde(default)]
        x0: f64,
        k0: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Random superposition of Gaussian packets.
    Packets {
        seed: u64,
        #[serde(default = "three")]
        count: usize,
        #[serde(default = "eight")]
        spread: f64,
        mass: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub sign: Sign,
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub tail_kappas: Vec<f64>,
    pub beta_kappas: Vec<f64>,
    pub beta_method: TraceMethod,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            sign: Sign::Focusing,
            dt: 1e-3,
            t_final: 1.0,
            record_stride: 100,
            tail_kappas: Vec::new(),
            beta_kappas: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            beta_method: TraceMethod::TailCorrected,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    pub mass: f64,
    pub momentum: f64,
    pub hamiltonian: f64,
    pub beta: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        let d = DriftTolerances::default();
        Self { mass: d.mass, momentum: d.momentum, hamiltonian: d.hamiltonian, beta: d.beta }
    }
}

impl From<&ToleranceSection> for DriftTolerances {
    fn from(t: &ToleranceSection) -> Self {
        DriftTolerances { mass: t.mass, momentum: t.momentum, hamiltonian: t.hamiltonian, beta: t.beta }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    pub times: Vec<f64>,
    pub heights: Vec<f64>,
    /// Largest accepted sup discrepancy.
    pub bound: f64,
    pub solver_tol: f64,
    pub max_iter: usize,
    pub histogram_width: usize,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self { times: vec![0.5], heights: vec![1.0], bound: 1e-4, solver_tol: 1e-11, max_iter: 400, histogram_width: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSection {
    pub kappas: Vec<f64>,
    pub margin: f64,
    /// Also evolve with `[run]` and tabulate the drift of beta.
    pub trajectory: bool,
}

impl Default for SpectralSection {
    fn default() -> Self {
        Self { kappas: vec![1.0, 2.0, 4.0, 8.0, 16.0], margin: 0.5, trajectory: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write a CSV field dump for every trajectory record.
    pub field_dumps: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("ccm-out"), field_dumps: true }
    }
}

fn one() -> f64 {
    1.0
}

fn three() -> usize {
    3
}

fn eight() -> f64 {
    8.0
}

impl RunConfig {
    /// Reads `path` and applies `overrides` in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = Self::parse(&text, overrides)?;
        // data files are relative to the config file
        if let DataSpec::File { path: p } = &mut cfg.data {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new("")).join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key, reason: &str| Err(ConfigError::Invalid { key, reason: reason.into() });
        if let Err(e) = ccm_core::make_grid(self.grid.n_points, self.grid.domain_length) {
            return bad("grid", &e.to_string());
        }
        if !(self.run.dt > 0.0) || !self.run.t_final.is_finite() {
            return bad("run.dt", "needs dt > 0 and a finite t_final");
        }
        if self.run.record_stride == 0 {
            return bad("run.record_stride", "must be at least 1");
        }
        if self.compare.heights.iter().any(|b| !(*b > 0.0)) {
            return bad("compare.heights", "heights must be positive");
        }
        if self.compare.times.is_empty() || self.compare.heights.is_empty() {
            return bad("compare.times", "times and heights must be non-empty");
        }
        if self.spectral.kappas.iter().chain(&self.run.beta_kappas).any(|k| !(*k > 0.0)) {
            return bad("spectral.kappas", "kappas must be positive");
        }
        Ok(())
    }
}

/// `section.key=value`; the value is read as TOML and falls back to a bare string.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), ConfigError> {
    let bad = || ConfigError::BadOverride(item.to_string());
    let (path, raw) = item.split_once('=').ok_or_else(bad)?;
    let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
    if section.is_empty() || key.is_empty() || key.contains('.') {
        return Err(bad());
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let entry = table.entry(section.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let toml::Value::Table(sec) = entry else {
        return Err(ConfigError::BadOverride(format!("{item}: `{section}` is not a section")));
    };
    sec.insert(key.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[grid]
n_points = 256
domain_length = 40.0

[data]
kind = "soliton"
"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::parse(BASE, &[]).unwrap();
        assert_eq!(cfg.data, DataSpec::Soliton { lambda: 1.0, x0: 0.0 });
        assert_eq!(cfg.run.sign, Sign::Focusing);
        assert_eq!(cfg.spectral.kappas.len(), 5);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = RunConfig::parse(&format!("{BASE}\n[run]\nstep = 0.1\n"), &[]).unwrap_err().to_string();
        assert!(err.contains("step"), "{err}");
        let err = RunConfig::parse(&format!("{BASE}\n[extra]\nx = 1\n"), &[]).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
        assert!(RunConfig::parse(BASE, &["data.width=2".into()]).is_err());
    }

    #[test]
    fn overrides_parse_values_and_bare_strings() {
        let cfg = RunConfig::parse(
            BASE,
            &["run.sign=defocusing".into(), "run.dt=5e-4".into(), "compare.times=[0.25, 1]".into()],
        )
        .unwrap();
        assert_eq!(cfg.run.sign, Sign::Defocusing);
        assert_eq!(cfg.run.dt, 5e-4);
        assert_eq!(cfg.compare.times, vec![0.25, 1.0]);
        assert!(matches!(RunConfig::parse(BASE, &["nodot=1".into()]), Err(ConfigError::BadOverride(_))));
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let err = RunConfig::parse("[grid]\nn_points = \n", &[]).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn validation_names_the_key() {
        let err = RunConfig::parse(BASE, &["grid.n_points=101".into()]).unwrap_err().to_string();
        assert!(err.contains("grid") && err.contains("101"), "{err}");
        let err = RunConfig::parse(BASE, &["compare.heights=[0.0]".into()]).unwrap_err().to_string();
        assert!(err.contains("compare.heights"), "{err}");
    }
}
