//! Config file parsing: `key = value` under `[section]` headers (a TOML
//! subset). Unknown keys are hard errors with line-anchored messages.

use crate::classical_opt::FlowForm;
use crate::evolution::{HamiltonianParams, Splitting};
use crate::analysis::LyapunovKind;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GradQhd,
    Qhd,
    Nag,
    Sgdm,
    HamFlow,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GradQhd => "grad_qhd",
            Method::Qhd => "qhd",
            Method::Nag => "nag",
            Method::Sgdm => "sgdm",
            Method::HamFlow => "ham_flow",
        }
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, Method::GradQhd | Method::Qhd)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub objective: String,
    pub method: Method,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_observe_every")]
    pub observe_every: usize,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Optional cube override of the search box (applied to every axis).
    #[serde(default)]
    pub box_lo: Option<f64>,
    #[serde(default)]
    pub box_hi: Option<f64>,
    /// Shift the objective so its first minimizer sits at the origin with
    /// value 0 (required for Lyapunov recording).
    #[serde(default)]
    pub center_objective: bool,
    /// Also write `final_density.csv` (quantum methods only).
    #[serde(default)]
    pub final_density: bool,
}

fn default_grid_n() -> usize {
    128
}

fn default_delta() -> f64 {
    1.0
}

fn default_observe_every() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub gamma: f64,
    pub t0: f64,
    pub h: f64,
    pub steps: usize,
    #[serde(default = "default_splitting")]
    pub splitting: Splitting,
    #[serde(default)]
    pub lyapunov: Option<LyapunovKind>,
}

fn default_splitting() -> Splitting {
    Splitting::Gauged
}

impl HamiltonianSection {
    pub fn params(&self) -> HamiltonianParams {
        HamiltonianParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            t0: self.t0,
            h: self.h,
            steps: self.steps,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum InitialStateSection {
    Uniform,
    Gaussian { center: Vec<f64>, sigma: f64 },
}

impl Default for InitialStateSection {
    fn default() -> Self {
        InitialStateSection::Uniform
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdmSection {
    #[serde(default = "default_s")]
    pub s0: f64,
    pub steps: usize,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NagSection {
    #[serde(default = "default_s")]
    pub s: f64,
    pub steps: usize,
    #[serde(default)]
    pub y0_zero: bool,
}

fn default_s() -> f64 {
    0.01
}

fn default_noise() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSection {
    #[serde(default = "default_n_runs")]
    pub n_runs: usize,
}

fn default_n_runs() -> usize {
    1000
}

impl Default for ClassicalSection {
    fn default() -> Self {
        Self {
            n_runs: default_n_runs(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub x0: Vec<f64>,
    #[serde(default)]
    pub p0: Option<Vec<f64>>,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default = "default_form")]
    pub form: FlowForm,
}

fn default_form() -> FlowForm {
    FlowForm::Printed
}

/// Fully resolved experiment configuration, echoed verbatim (with defaults
/// filled in) into the output manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSection>,
    #[serde(default)]
    pub initial_state: Option<InitialStateSection>,
    #[serde(default)]
    pub sgdm: Option<SgdmSection>,
    #[serde(default)]
    pub nag: Option<NagSection>,
    #[serde(default)]
    pub classical: Option<ClassicalSection>,
    #[serde(default)]
    pub flow: Option<FlowSection>,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let src = std::fs::read_to_string(path)?;
    parse_config_str(&src, &path.display().to_string())
}

pub fn parse_config_str(src: &str, path: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| {
        if let Some(span) = e.span() {
            let line = src[..span.start.min(src.len())]
                .bytes()
                .filter(|&b| b == b'\n')
                .count()
                + 1;
            Error::Config {
                path: path.to_string(),
                line,
                msg: e.message().to_string(),
            }
        } else {
            Error::ConfigGeneral {
                path: path.to_string(),
                msg: e.message().to_string(),
            }
        }
    })?;
    validate(&cfg, path)?;
    Ok(cfg)
}

fn bad(path: &str, msg: impl Into<String>) -> Error {
    Error::ConfigGeneral {
        path: path.to_string(),
        msg: msg.into(),
    }
}

fn validate(cfg: &ExperimentConfig, path: &str) -> Result<()> {
    let exp = &cfg.experiment;
    if exp.observe_every == 0 {
        return Err(bad(path, "observe_every must be >= 1"));
    }
    if !(exp.delta > 0.0) {
        return Err(bad(path, "delta must be > 0"));
    }
    match (exp.box_lo, exp.box_hi) {
        (None, None) => {}
        (Some(lo), Some(hi)) if lo < hi => {}
        _ => {
            return Err(bad(
                path,
                "box_lo and box_hi must be given together with box_lo < box_hi",
            ))
        }
    }
    let need = |present: bool, section: &str| -> Result<()> {
        if present {
            Ok(())
        } else {
            Err(bad(
                path,
                format!(
                    "method `{}` requires a [{section}] section",
                    exp.method.name()
                ),
            ))
        }
    };
    match exp.method {
        Method::GradQhd => need(cfg.hamiltonian.is_some(), "hamiltonian")?,
        Method::Qhd => {
            need(cfg.hamiltonian.is_some(), "hamiltonian")?;
            let ham = cfg.hamiltonian.as_ref().unwrap();
            if ham.alpha != 0.0 || ham.beta != 0.0 || ham.gamma != 0.0 {
                return Err(bad(
                    path,
                    "method `qhd` requires alpha = beta = gamma = 0; use method `grad_qhd` for nonzero parameters",
                ));
            }
        }
        Method::Nag => need(cfg.nag.is_some(), "nag")?,
        Method::Sgdm => need(cfg.sgdm.is_some(), "sgdm")?,
        Method::HamFlow => {
            need(cfg.hamiltonian.is_some(), "hamiltonian")?;
            need(cfg.flow.is_some(), "flow")?;
        }
    }
    for (name, present, allowed) in [
        (
            "hamiltonian",
            cfg.hamiltonian.is_some(),
            matches!(exp.method, Method::GradQhd | Method::Qhd | Method::HamFlow),
        ),
        (
            "initial_state",
            cfg.initial_state.is_some(),
            exp.method.is_quantum(),
        ),
        ("sgdm", cfg.sgdm.is_some(), exp.method == Method::Sgdm),
        ("nag", cfg.nag.is_some(), exp.method == Method::Nag),
        (
            "classical",
            cfg.classical.is_some(),
            matches!(exp.method, Method::Nag | Method::Sgdm),
        ),
        ("flow", cfg.flow.is_some(), exp.method == Method::HamFlow),
    ] {
        if present && !allowed {
            return Err(bad(
                path,
                format!(
                    "section [{name}] is not applicable to method `{}`",
                    exp.method.name()
                ),
            ));
        }
    }
    Ok(())
}
