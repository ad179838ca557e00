//! Bath interacting density spectra and their composite.
//!
//! Three parametric forms are supported: a Lorentzian cavity bath
//! J(ω) = g²λ / π[(ω−ω_cav)² + λ²], a low-frequency intrinsic bath
//! J(ω) = 2αω / [(ω/Δ)² + (ω_low/Δ)²], and an Ohmic bath with Drude cutoff
//! J(ω) = 2αω / [1 + (ω/ω_Ohm)²]. All three are rational in ω, so they also
//! evaluate at complex arguments (used by the pole continuation in
//! [`crate::dynamics`]).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SpectraError {
    #[error("spectral density evaluated at negative frequency {0}")]
    NegativeFrequency(f64),
    #[error("invalid bath parameter: {0}")]
    InvalidParameter(String),
    #[error("composite spectrum accepts at most one Lorentzian cavity component")]
    MultipleCavities,
    #[error("composite spectrum accepts at most one intrinsic-bath component")]
    MultipleIntrinsicBaths,
}

/// A peak position and characteristic width, used as a quadrature hint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feature {
    pub position: f64,
    pub width: f64,
}

impl Feature {
    pub fn new(position: f64, width: f64) -> Self {
        Feature { position, width }
    }
}

/// One bath's interacting spectral density J_i(ω).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BathModel {
    /// Lorentzian cavity bath with coupling `g`, central frequency
    /// `omega_cav` and spectral half-width `lambda`.
    Lorentzian { g: f64, omega_cav: f64, lambda: f64 },
    /// Low-frequency intrinsic bath; `delta_ref` is the qubit spacing used in
    /// the denominator, carried explicitly so the spectrum is self-contained.
    LowFrequency {
        alpha_low: f64,
        omega_low: f64,
        delta_ref: f64,
    },
    /// Ohmic intrinsic bath with Drude cutoff `omega_ohm`.
    OhmicDrude { alpha_ohm: f64, omega_ohm: f64 },
}

impl BathModel {
    pub fn validate(&self) -> Result<(), SpectraError> {
        let bad = |msg: String| Err(SpectraError::InvalidParameter(msg));
        match *self {
            BathModel::Lorentzian {
                g,
                omega_cav,
                lambda,
            } => {
                if !(g >= 0.0) || !g.is_finite() {
                    return bad(format!("lorentzian g must be >= 0, got {g}"));
                }
                if !(omega_cav > 0.0) || !omega_cav.is_finite() {
                    return bad(format!("lorentzian omega_cav must be > 0, got {omega_cav}"));
                }
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return bad(format!("lorentzian lambda must be > 0, got {lambda}"));
                }
                // quality factor must be finite and above unity
                if !(omega_cav / lambda > 1.0) {
                    return bad(format!(
                        "lorentzian quality factor omega_cav/lambda = {} must exceed 1",
                        omega_cav / lambda
                    ));
                }
                Ok(())
            }
            BathModel::LowFrequency {
                alpha_low,
                omega_low,
                delta_ref,
            } => {
                if !(alpha_low >= 0.0) || !alpha_low.is_finite() {
                    return bad(format!("alpha_low must be >= 0, got {alpha_low}"));
                }
                if !(omega_low > 0.0) || !omega_low.is_finite() {
                    return bad(format!("omega_low must be > 0, got {omega_low}"));
                }
                if !(delta_ref > 0.0) || !delta_ref.is_finite() {
                    return bad(format!("delta_ref must be > 0, got {delta_ref}"));
                }
                Ok(())
            }
            BathModel::OhmicDrude {
                alpha_ohm,
                omega_ohm,
            } => {
                if !(alpha_ohm >= 0.0) || !alpha_ohm.is_finite() {
                    return bad(format!("alpha_ohm must be >= 0, got {alpha_ohm}"));
                }
                if !(omega_ohm > 0.0) || !omega_ohm.is_finite() {
                    return bad(format!("omega_ohm must be > 0, got {omega_ohm}"));
                }
                Ok(())
            }
        }
    }

    /// Evaluate J_i(ω). Negative `omega` is a domain error.
    pub fn density(&self, omega: f64) -> Result<f64, SpectraError> {
        if omega < 0.0 {
            return Err(SpectraError::NegativeFrequency(omega));
        }
        Ok(self.density_raw(omega))
    }

    /// Unchecked evaluation on ω ≥ 0. Hot path for integrands.
    #[inline]
    pub fn density_raw(&self, omega: f64) -> f64 {
        match *self {
            BathModel::Lorentzian {
                g,
                omega_cav,
                lambda,
            } => {
                let d = omega - omega_cav;
                g * g * lambda / (std::f64::consts::PI * (d * d + lambda * lambda))
            }
            BathModel::LowFrequency {
                alpha_low,
                omega_low,
                delta_ref,
            } => {
                let x = omega / delta_ref;
                let xl = omega_low / delta_ref;
                2.0 * alpha_low * omega / (x * x + xl * xl)
            }
            BathModel::OhmicDrude {
                alpha_ohm,
                omega_ohm,
            } => {
                let x = omega / omega_ohm;
                2.0 * alpha_ohm * omega / (1.0 + x * x)
            }
        }
    }

    /// Analytic continuation of the closed form to complex ω.
    pub fn density_complex(&self, z: Complex64) -> Complex64 {
        match *self {
            BathModel::Lorentzian {
                g,
                omega_cav,
                lambda,
            } => {
                let d = z - omega_cav;
                g * g * lambda / (std::f64::consts::PI * (d * d + lambda * lambda))
            }
            BathModel::LowFrequency {
                alpha_low,
                omega_low,
                delta_ref,
            } => {
                let x = z / delta_ref;
                let xl = omega_low / delta_ref;
                2.0 * alpha_low * z / (x * x + xl * xl)
            }
            BathModel::OhmicDrude {
                alpha_ohm,
                omega_ohm,
            } => {
                let x = z / omega_ohm;
                2.0 * alpha_ohm * z / (1.0 + x * x)
            }
        }
    }

    /// Peak locations and characteristic widths for adaptive subdivision.
    pub fn feature_points(&self) -> Vec<Feature> {
        match *self {
            BathModel::Lorentzian {
                omega_cav, lambda, ..
            } => vec![Feature::new(omega_cav, lambda)],
            BathModel::LowFrequency { omega_low, .. } => vec![Feature::new(omega_low, omega_low)],
            BathModel::OhmicDrude { omega_ohm, .. } => vec![Feature::new(omega_ohm, omega_ohm)],
        }
    }

    pub fn is_cavity(&self) -> bool {
        matches!(self, BathModel::Lorentzian { .. })
    }

    /// True when the bath couples to nothing (g = 0 or α = 0).
    pub fn is_zero_coupling(&self) -> bool {
        match *self {
            BathModel::Lorentzian { g, .. } => g == 0.0,
            BathModel::LowFrequency { alpha_low, .. } => alpha_low == 0.0,
            BathModel::OhmicDrude { alpha_ohm, .. } => alpha_ohm == 0.0,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BathModel::Lorentzian { .. } => "cavity",
            BathModel::LowFrequency { .. } => "low_frequency",
            BathModel::OhmicDrude { .. } => "ohmic",
        }
    }
}

/// Ordered collection of bath components forming the total J(ω) = Σ J_i(ω).
///
/// `coupling_scale` multiplies the Lorentzian amplitude by `coupling_scale²`;
/// the default 1.0 keeps ∫J_cav dω = g², while the dressed-splitting
/// calibration uses 0.5 so the quasi-mode amplitude coupling is g/2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpectrum {
    components: Vec<BathModel>,
    coupling_scale: f64,
}

impl CompositeSpectrum {
    pub fn new(components: Vec<BathModel>, coupling_scale: f64) -> Result<Self, SpectraError> {
        if !(coupling_scale > 0.0) || !coupling_scale.is_finite() {
            return Err(SpectraError::InvalidParameter(format!(
                "coupling_scale must be finite and > 0, got {coupling_scale}"
            )));
        }
        let mut cavities = 0usize;
        let mut intrinsic = 0usize;
        for c in &components {
            c.validate()?;
            if c.is_cavity() {
                cavities += 1;
            } else {
                intrinsic += 1;
            }
        }
        if cavities > 1 {
            return Err(SpectraError::MultipleCavities);
        }
        if intrinsic > 1 {
            return Err(SpectraError::MultipleIntrinsicBaths);
        }
        Ok(CompositeSpectrum {
            components,
            coupling_scale,
        })
    }

    pub fn components(&self) -> &[BathModel] {
        &self.components
    }

    pub fn coupling_scale(&self) -> f64 {
        self.coupling_scale
    }

    /// Amplitude scale squared applied to component `i`.
    #[inline]
    pub fn component_scale(&self, i: usize) -> f64 {
        if self.components[i].is_cavity() {
            self.coupling_scale * self.coupling_scale
        } else {
            1.0
        }
    }

    /// Total density and the per-component breakdown at ω.
    pub fn density(&self, omega: f64) -> Result<(f64, Vec<f64>), SpectraError> {
        if omega < 0.0 {
            return Err(SpectraError::NegativeFrequency(omega));
        }
        let per: Vec<f64> = self
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| self.component_scale(i) * c.density_raw(omega))
            .collect();
        Ok((per.iter().sum(), per))
    }

    /// Total density on ω ≥ 0, unchecked.
    #[inline]
    pub fn density_total_raw(&self, omega: f64) -> f64 {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| self.component_scale(i) * c.density_raw(omega))
            .sum()
    }

    #[inline]
    pub fn density_component_raw(&self, i: usize, omega: f64) -> f64 {
        self.component_scale(i) * self.components[i].density_raw(omega)
    }

    pub fn density_total_complex(&self, z: Complex64) -> Complex64 {
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| c.density_complex(z) * self.component_scale(i))
            .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
    }

    /// Concatenated feature points of all components.
    pub fn features(&self) -> Vec<Feature> {
        self.components
            .iter()
            .flat_map(|c| c.feature_points())
            .collect()
    }

    /// Index of the Lorentzian component, if present.
    pub fn cavity_index(&self) -> Option<usize> {
        self.components.iter().position(|c| c.is_cavity())
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}
