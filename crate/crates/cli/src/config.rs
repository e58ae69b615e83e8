//! JSON run configuration. Every section and field is optional; missing
//! values fall back to the reference model and the default encircling loop.
//! Unknown keys are rejected.

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tase_core::num_complex::Complex64;
use tase_core::{Direction, Error, FieldPoint, IntegratorConfig, LoopSpec, StateVector, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub e1: f64,
    pub e2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub d12_re: f64,
    pub d12_im: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::reference();
        SystemSection {
            e1: p.e1,
            e2: p.e2,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
            d12_re: p.d12.re,
            d12_im: p.d12.im,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopSection {
    pub center_omega: f64,
    pub center_eps0: f64,
    pub semi_axis_omega: f64,
    pub semi_axis_eps: f64,
    pub direction: Direction,
    #[serde(rename = "duration_T")]
    pub duration_t: f64,
    pub start_phase: f64,
}

impl Default for LoopSection {
    fn default() -> Self {
        LoopSection {
            center_omega: 1.0,
            center_eps0: 0.2,
            semi_axis_omega: 0.05,
            semi_axis_eps: 0.05,
            direction: Direction::Ccw,
            duration_t: 800.0,
            start_phase: FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub initial_step: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let c = IntegratorConfig::default();
        IntegratorSection {
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            max_step: c.max_step,
            initial_step: c.initial_step,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub c1_re: f64,
    pub c1_im: f64,
    pub c2_re: f64,
    pub c2_im: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            c1_re: 1.0,
            c1_im: 0.0,
            c2_re: 0.0,
            c2_im: 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub system: SystemSection,
    #[serde(rename = "loop")]
    pub loop_: LoopSection,
    pub integrator: IntegratorSection,
    pub initial: InitialSection,
    pub output: OutputSection,
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: SystemParams,
    pub lp: LoopSpec,
    pub integrator: IntegratorConfig,
    pub initial: StateVector,
    pub output: OutputSection,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn section(name: &str, e: Error) -> ConfigError {
    ConfigError(format!("config section `{name}`: {e}"))
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            ConfigError(format!("config: {}", e.inner()))
        } else {
            ConfigError(format!("config key `{path}`: {}", e.inner()))
        }
    })?;
    raw.validate()
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
    match path {
        None => RawConfig::default().validate(),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
            parse(&text)
        }
    }
}

impl RawConfig {
    pub fn validate(&self) -> Result<RunConfig, ConfigError> {
        let s = &self.system;
        let params = SystemParams::new(s.e1, s.e2, s.gamma1, s.gamma2, Complex64::new(s.d12_re, s.d12_im))
            .map_err(|e| section("system", e))?;
        let l = &self.loop_;
        let center = FieldPoint::new(l.center_omega, l.center_eps0).map_err(|e| match e {
            Error::InvalidParameter { reason, .. } => section(
                "loop",
                Error::InvalidParameter {
                    field: if l.center_omega.is_finite() {
                        "center_eps0"
                    } else {
                        "center_omega"
                    },
                    reason,
                },
            ),
            other => section("loop", other),
        })?;
        let lp = LoopSpec::new(
            center,
            l.semi_axis_omega,
            l.semi_axis_eps,
            l.direction,
            l.duration_t,
            l.start_phase,
        )
        .map_err(|e| section("loop", e))?;
        let i = &self.integrator;
        let integrator = IntegratorConfig::new(i.rel_tol, i.abs_tol, i.max_step, i.initial_step)
            .map_err(|e| section("integrator", e))?;
        let c = &self.initial;
        let initial =
            StateVector::new(Complex64::new(c.c1_re, c.c1_im), Complex64::new(c.c2_re, c.c2_im)).map_err(|_| {
                ConfigError(
                    "config section `initial`: c1_re, c1_im, c2_re, c2_im must be finite and not all zero".into(),
                )
            })?;
        Ok(RunConfig {
            params,
            lp,
            integrator,
            initial,
            output: self.output.clone(),
        })
    }
}
