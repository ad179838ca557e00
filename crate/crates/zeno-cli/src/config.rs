//! JSON run configuration: parsing, validation and resolution into core
//! types. Validation failures carry field-level diagnostics and map to exit
//! code 2.

use serde::{Deserialize, Serialize};
use zeno_core::renorm::{CavityAnchor, SystemBuilder};
use zeno_core::spectra::{BathModel, CompositeSpectrum};
use zeno_core::QuadSpec;

use crate::CliError;

fn default_delta() -> f64 {
    1.0
}
fn default_scale() -> f64 {
    1.0
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BathConfig {
    Lorentzian {
        g: f64,
        omega_cav: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        lambda: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        q_factor: Option<f64>,
    },
    LowFrequency {
        alpha_low: f64,
        omega_low: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        delta_ref: Option<f64>,
    },
    OhmicDrude {
        alpha_ohm: f64,
        omega_ohm: f64,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorConfig {
    Absolute,
    Renormalized,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig::Absolute
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    #[serde(default = "QuadConfig::default_rel")]
    pub rel_tol: f64,
    #[serde(default = "QuadConfig::default_abs")]
    pub abs_tol: f64,
    #[serde(default = "QuadConfig::default_subdiv")]
    pub max_subdivisions: usize,
}

impl QuadConfig {
    fn default_rel() -> f64 {
        1e-9
    }
    fn default_abs() -> f64 {
        1e-14
    }
    fn default_subdiv() -> usize {
        10_000
    }
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: Self::default_rel(),
            abs_tol: Self::default_abs(),
            max_subdivisions: Self::default_subdiv(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub log: bool,
}

impl AxisConfig {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let n = self.count;
        if self.log {
            let (la, lb) = (self.min.ln(), self.max.ln());
            (0..n)
                .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
                .collect()
        } else {
            (0..n)
                .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
                .collect()
        }
    }

    fn validate(&self, field: &str) -> Result<(), CliError> {
        if self.count < 1 {
            return Err(CliError::Config(format!("{field}.count must be >= 1")));
        }
        if self.count > 1 && !(self.min < self.max) {
            return Err(CliError::Config(format!(
                "{field}: min ({}) must be < max ({})",
                self.min, self.max
            )));
        }
        if self.log && !(self.min > 0.0) {
            return Err(CliError::Config(format!(
                "{field}: log axis requires min > 0"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum XParam {
    CavityFrequency,
    CavityWidth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub tau: AxisConfig,
    pub x_param: XParam,
    pub x: AxisConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleScheme {
    Uniform,
    PeakRefined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub modes: usize,
    pub omega_max: f64,
    #[serde(default = "OracleConfig::default_scheme")]
    pub scheme: OracleScheme,
    #[serde(default = "OracleConfig::default_measurements")]
    pub measurements: usize,
}

impl OracleConfig {
    fn default_scheme() -> OracleScheme {
        OracleScheme::PeakRefined
    }
    fn default_measurements() -> usize {
        20
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub tau: f64,
    pub measurements: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub baths: Vec<BathConfig>,
    #[serde(default = "default_scale")]
    pub coupling_scale: f64,
    #[serde(default)]
    pub rwa_mode: bool,
    #[serde(default)]
    pub per_bath_f: bool,
    #[serde(default)]
    pub cavity_anchor: AnchorConfig,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!(
                "config parse error at line {}, column {}: {}",
                e.line(),
                e.column(),
                e
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.delta > 0.0) {
            return Err(CliError::Config(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if self.baths.is_empty() {
            return Err(CliError::Config("baths: list must be nonempty".into()));
        }
        if !(self.coupling_scale > 0.0) {
            return Err(CliError::Config(format!(
                "coupling_scale must be > 0, got {}",
                self.coupling_scale
            )));
        }
        if self.workers < 1 {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        for (i, b) in self.baths.iter().enumerate() {
            if let BathConfig::Lorentzian {
                lambda, q_factor, ..
            } = b
            {
                match (lambda, q_factor) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config(format!(
                            "baths[{i}]: give exactly one of lambda or q_factor, not both"
                        )))
                    }
                    (None, None) => {
                        return Err(CliError::Config(format!(
                            "baths[{i}]: a lorentzian bath needs lambda or q_factor"
                        )))
                    }
                    _ => {}
                }
            }
        }
        if let Some(s) = &self.sweep {
            s.tau.validate("sweep.tau")?;
            s.x.validate("sweep.x")?;
        }
        if let Some(o) = &self.oracle {
            if o.modes < 1 {
                return Err(CliError::Config("oracle.modes must be >= 1".into()));
            }
            if o.measurements < 1 {
                return Err(CliError::Config("oracle.measurements must be >= 1".into()));
            }
        }
        if let Some(d) = &self.dynamics {
            if !(d.tau > 0.0) || d.measurements < 1 {
                return Err(CliError::Config(
                    "dynamics needs tau > 0 and measurements >= 1".into(),
                ));
            }
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return Err(CliError::Config(format!("tau must be > 0, got {t}")));
            }
        }
        Ok(())
    }

    /// q_factor resolves to λ = ω_cav/Q at parse time.
    pub fn bath_models(&self) -> Result<Vec<BathModel>, CliError> {
        self.baths
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let m = match *b {
                    BathConfig::Lorentzian {
                        g,
                        omega_cav,
                        lambda,
                        q_factor,
                    } => BathModel::Lorentzian {
                        g,
                        omega_cav,
                        lambda: match (lambda, q_factor) {
                            (Some(l), None) => l,
                            (None, Some(q)) => omega_cav / q,
                            _ => unreachable!("validated"),
                        },
                    },
                    BathConfig::LowFrequency {
                        alpha_low,
                        omega_low,
                        delta_ref,
                    } => BathModel::LowFrequency {
                        alpha_low,
                        omega_low,
                        delta_ref: delta_ref.unwrap_or(self.delta),
                    },
                    BathConfig::OhmicDrude {
                        alpha_ohm,
                        omega_ohm,
                    } => BathModel::OhmicDrude {
                        alpha_ohm,
                        omega_ohm,
                    },
                };
                m.validate()
                    .map_err(|e| CliError::Config(format!("baths[{i}]: {e}")))?;
                Ok(m)
            })
            .collect()
    }

    pub fn quad_spec(&self) -> QuadSpec {
        QuadSpec {
            rel_tol: self.quad.rel_tol,
            abs_tol: self.quad.abs_tol,
            max_subdivisions: self.quad.max_subdivisions,
            hints: Vec::new(),
        }
    }

    pub fn system_builder(&self) -> Result<SystemBuilder, CliError> {
        let spectrum = CompositeSpectrum::new(self.bath_models()?, self.coupling_scale)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(SystemBuilder::new(spectrum, self.delta)
            .rwa_mode(self.rwa_mode)
            .per_bath_f(self.per_bath_f)
            .anchor(match self.cavity_anchor {
                AnchorConfig::Absolute => CavityAnchor::Absolute,
                AnchorConfig::Renormalized => CavityAnchor::Renormalized,
            }))
    }
}
