//! Self-consistent renormalization of the qubit spacing by the
//! counter-rotating couplings.
//!
//! Each bath contributes a factor η_i solving the fixed point
//!
//! ```text
//! η_i = exp(−2 ∫₀^∞ J_i(ω)/(ω + η_i Δ)² dω)
//! ```
//!
//! the continuum transcription of the discrete sums Σ_k 2 c_k² ξ_k²/ω_k² with
//! ξ_k = ω_k/(ω_k + η_i Δ). The global factor is η = Π η_i, the observed
//! spacing ηΔ, and the counter-rotating dressing of the couplings appears
//! downstream as the factor f(ω) = (2ηΔ/(ω+ηΔ))² multiplying J(ω).
//! Cross-bath terms are dropped; the factors solve independently.

use crate::quad::{self, QuadError, QuadSpec};
use crate::spectra::{BathModel, CompositeSpectrum, Feature};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum RenormError {
    #[error("fixed point for {label} bath did not converge in {iterations} iterations: last eta = {last}, residual = {residual}")]
    NoConvergence {
        label: &'static str,
        last: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("quadrature failure while solving eta: {0}")]
    Quadrature(#[from] QuadError),
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spectra(#[from] crate::spectra::SpectraError),
}

pub const DEFAULT_FP_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200;

/// ∫₀^∞ J(ω)/(ω+ηΔ)² dω for one (possibly amplitude-scaled) bath.
fn eta_map_integral(
    bath: &BathModel,
    scale_sq: f64,
    eta: f64,
    delta: f64,
    spec: &QuadSpec,
) -> Result<f64, QuadError> {
    let shift = eta * delta;
    let f = |w: f64| {
        let d = w + shift;
        scale_sq * bath.density_raw(w) / (d * d)
    };
    let hints = bath.feature_points();
    let inner = QuadSpec {
        rel_tol: spec.rel_tol.min(1e-11),
        abs_tol: spec.abs_tol.min(1e-16),
        max_subdivisions: spec.max_subdivisions.max(20_000),
        hints,
    };
    Ok(quad::integrate_semi_infinite(f, 0.0, &inner)?.value)
}

/// Solve the per-bath fixed point η_i with damped iteration from η = 1.
///
/// Oscillating iterates trigger a 0.5 damping factor; convergence is declared
/// on |η − map(η)| < `fp_tol`.
pub fn solve_eta(
    bath: &BathModel,
    delta: f64,
    spec: &QuadSpec,
    fp_tol: f64,
    max_iter: usize,
) -> Result<f64, RenormError> {
    solve_eta_scaled(bath, 1.0, delta, spec, fp_tol, max_iter)
}

pub(crate) fn solve_eta_scaled(
    bath: &BathModel,
    scale_sq: f64,
    delta: f64,
    spec: &QuadSpec,
    fp_tol: f64,
    max_iter: usize,
) -> Result<f64, RenormError> {
    if !(delta > 0.0) {
        return Err(RenormError::Invalid(format!(
            "delta must be > 0, got {delta}"
        )));
    }
    bath.validate()?;
    if bath.is_zero_coupling() || scale_sq == 0.0 {
        return Ok(1.0);
    }
    let mut eta = 1.0f64;
    let mut prev_step = 0.0f64;
    let mut damped = false;
    for it in 0..max_iter {
        let mapped = (-2.0 * eta_map_integral(bath, scale_sq, eta, delta, spec)?).exp();
        let step = mapped - eta;
        if step.abs() < fp_tol {
            return Ok(mapped);
        }
        if it > 0 && step * prev_step < 0.0 {
            damped = true;
        }
        eta = if damped { eta + 0.5 * step } else { mapped };
        prev_step = step;
        if it + 1 == max_iter {
            return Err(RenormError::NoConvergence {
                label: bath.label(),
                last: eta,
                residual: step.abs(),
                iterations: max_iter,
            });
        }
    }
    unreachable!("loop returns")
}

/// How a Lorentzian cavity frequency in a configuration is interpreted.
///
/// `Absolute` takes ω_cav as given. `Renormalized` reads it as a multiple of
/// the renormalized spacing ηΔ and re-solves self-consistently, so that
/// detunings are measured from the observed qubit line; the intrinsic baths
/// shift ηΔ by several cavity linewidths at high Q, which is what an
/// experiment tuning the cavity against the dressed qubit would compensate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CavityAnchor {
    Absolute,
    Renormalized,
}

/// Transformed-frame system: the spectrum, the bare spacing Δ and the solved
/// renormalization factors.
#[derive(Debug, Clone)]
pub struct RenormalizedSystem {
    delta: f64,
    spectrum: CompositeSpectrum,
    eta_per_bath: Vec<f64>,
    eta: f64,
    rwa_mode: bool,
    per_bath_f: bool,
}

/// Solve every η_i and assemble a [`RenormalizedSystem`].
///
/// `rwa_mode` short-circuits all factors to 1 (and downstream f ≡ 1).
pub fn renormalize(
    spectrum: CompositeSpectrum,
    delta: f64,
    rwa_mode: bool,
    spec: &QuadSpec,
) -> Result<RenormalizedSystem, RenormError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(RenormError::Invalid(format!(
            "delta must be finite and > 0, got {delta}"
        )));
    }
    let mut eta_per_bath = Vec::with_capacity(spectrum.components().len());
    if rwa_mode {
        eta_per_bath.resize(spectrum.components().len(), 1.0);
    } else {
        for (i, bath) in spectrum.components().iter().enumerate() {
            let eta_i = solve_eta_scaled(
                bath,
                spectrum.component_scale(i),
                delta,
                spec,
                DEFAULT_FP_TOL,
                DEFAULT_MAX_ITER,
            )?;
            eta_per_bath.push(eta_i);
        }
    }
    let eta = eta_per_bath.iter().product();
    Ok(RenormalizedSystem {
        delta,
        spectrum,
        eta_per_bath,
        eta,
        rwa_mode,
        per_bath_f: false,
    })
}

impl RenormalizedSystem {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn spectrum(&self) -> &CompositeSpectrum {
        &self.spectrum
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn eta_per_bath(&self) -> &[f64] {
        &self.eta_per_bath
    }

    /// Renormalized spacing ηΔ.
    pub fn eta_delta(&self) -> f64 {
        self.eta * self.delta
    }

    pub fn rwa_mode(&self) -> bool {
        self.rwa_mode
    }

    pub fn per_bath_f(&self) -> bool {
        self.per_bath_f
    }

    /// Opt into per-bath dressing factors f_i built from η_i instead of the
    /// global η (sensitivity studies; off by default).
    pub fn with_per_bath_f(mut self, on: bool) -> Self {
        self.per_bath_f = on;
        self
    }

    /// Counter-rotating dressing f(ω) = (2ηΔ/(ω+ηΔ))²; 1 in RWA mode.
    #[inline]
    pub fn f_factor(&self, omega: f64) -> f64 {
        if self.rwa_mode {
            return 1.0;
        }
        let ed = self.eta_delta();
        let r = 2.0 * ed / (omega + ed);
        r * r
    }

    /// Per-bath variant of [`Self::f_factor`] using that bath's own η_i.
    #[inline]
    pub fn f_factor_bath(&self, i: usize, omega: f64) -> f64 {
        if self.rwa_mode {
            return 1.0;
        }
        if !self.per_bath_f {
            return self.f_factor(omega);
        }
        let ed = self.eta_per_bath[i] * self.delta;
        let r = 2.0 * ed / (omega + ed);
        r * r
    }

    /// J(ω)·f(ω), the density entering every transformed-frame formula.
    #[inline]
    pub fn effective_density(&self, omega: f64) -> f64 {
        if self.per_bath_f {
            (0..self.spectrum.components().len())
                .map(|i| self.effective_density_component(i, omega))
                .sum()
        } else {
            self.spectrum.density_total_raw(omega) * self.f_factor(omega)
        }
    }

    /// J_i(ω)·f(ω) for one bath.
    #[inline]
    pub fn effective_density_component(&self, i: usize, omega: f64) -> f64 {
        self.spectrum.density_component_raw(i, omega) * self.f_factor_bath(i, omega)
    }

    /// Closed-form continuation of J(ω)f(ω) to complex ω.
    pub fn effective_density_complex(&self, z: Complex64) -> Complex64 {
        let j = self.spectrum.density_total_complex(z);
        if self.rwa_mode {
            return j;
        }
        let ed = self.eta_delta();
        let r = 2.0 * ed / (z + ed);
        j * r * r
    }

    /// Spectrum feature points (quadrature hints) in the lab frequency.
    pub fn features(&self) -> Vec<Feature> {
        self.spectrum.features()
    }

    /// Effective amplitude coupling sqrt(∫ J f dω); sets pole-search windows
    /// and the short-time validity scale.
    pub fn effective_coupling(&self, spec: &QuadSpec) -> Result<f64, QuadError> {
        let hints = self.features();
        let inner = QuadSpec {
            hints,
            ..spec.clone()
        };
        let v2 =
            quad::integrate_semi_infinite(|w| self.effective_density(w), 0.0, &inner)?.value;
        Ok(v2.max(0.0).sqrt())
    }

    /// Residual |η_i − map(η_i)| of each solved fixed point.
    pub fn fixed_point_residuals(&self, spec: &QuadSpec) -> Result<Vec<f64>, RenormError> {
        if self.rwa_mode {
            return Ok(vec![0.0; self.eta_per_bath.len()]);
        }
        let mut out = Vec::with_capacity(self.eta_per_bath.len());
        for (i, bath) in self.spectrum.components().iter().enumerate() {
            let eta_i = self.eta_per_bath[i];
            let mapped = if bath.is_zero_coupling() {
                1.0
            } else {
                (-2.0 * eta_map_integral(
                    bath,
                    self.spectrum.component_scale(i),
                    eta_i,
                    self.delta,
                    spec,
                )?)
                .exp()
            };
            out.push((eta_i - mapped).abs());
        }
        Ok(out)
    }
}

/// Builds a [`RenormalizedSystem`] from a spectrum template, resolving the
/// cavity anchor.
///
/// Under [`CavityAnchor::Renormalized`] the stored ω_cav is a multiple of ηΔ;
/// the builder iterates ω_cav = (ω_cav/Δ)·ηΔ and the η solve to joint
/// convergence (the back-action of ω_cav on η is O(g²·(1−η)), two or three
/// passes suffice).
#[derive(Debug, Clone)]
pub struct SystemBuilder {
    pub spectrum: CompositeSpectrum,
    pub delta: f64,
    pub rwa_mode: bool,
    pub anchor: CavityAnchor,
    pub per_bath_f: bool,
}

impl SystemBuilder {
    pub fn new(spectrum: CompositeSpectrum, delta: f64) -> Self {
        SystemBuilder {
            spectrum,
            delta,
            rwa_mode: false,
            anchor: CavityAnchor::Absolute,
            per_bath_f: false,
        }
    }

    pub fn rwa_mode(mut self, on: bool) -> Self {
        self.rwa_mode = on;
        self
    }

    pub fn anchor(mut self, anchor: CavityAnchor) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn per_bath_f(mut self, on: bool) -> Self {
        self.per_bath_f = on;
        self
    }

    /// Replace the cavity frequency in the stored template (sweep substitution).
    pub fn set_cavity_frequency(&mut self, omega: f64) {
        if let Some(idx) = self.spectrum.cavity_index() {
            let mut comps = self.spectrum.components().to_vec();
            if let BathModel::Lorentzian { omega_cav, .. } = &mut comps[idx] {
                *omega_cav = omega;
            }
            self.spectrum = CompositeSpectrum::new(comps, self.spectrum.coupling_scale())
                .expect("width unchanged");
        }
    }

    /// Replace the cavity width in the stored template (sweep substitution).
    pub fn set_cavity_width(&mut self, width: f64) {
        if let Some(idx) = self.spectrum.cavity_index() {
            let mut comps = self.spectrum.components().to_vec();
            if let BathModel::Lorentzian { lambda, .. } = &mut comps[idx] {
                *lambda = width;
            }
            self.spectrum = CompositeSpectrum::new(comps, self.spectrum.coupling_scale())
                .expect("frequency unchanged");
        }
    }

    pub fn build(&self, spec: &QuadSpec) -> Result<RenormalizedSystem, RenormError> {
        let sys = match (self.anchor, self.spectrum.cavity_index()) {
            (CavityAnchor::Absolute, _) | (_, None) => {
                renormalize(self.spectrum.clone(), self.delta, self.rwa_mode, spec)?
            }
            (CavityAnchor::Renormalized, Some(idx)) => {
                let target_ratio = match self.spectrum.components()[idx] {
                    BathModel::Lorentzian { omega_cav, .. } => omega_cav / self.delta,
                    _ => unreachable!(),
                };
                let mut eta_guess = 1.0f64;
                let mut sys = None;
                for _ in 0..50 {
                    let mut tpl = self.clone();
                    tpl.set_cavity_frequency(target_ratio * eta_guess * self.delta);
                    let s = renormalize(tpl.spectrum, self.delta, self.rwa_mode, spec)?;
                    let next = s.eta();
                    let done = (next - eta_guess).abs() < 1e-14;
                    eta_guess = next;
                    sys = Some(s);
                    if done {
                        break;
                    }
                }
                sys.expect("at least one pass")
            }
        };
        Ok(sys.with_per_bath_f(self.per_bath_f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn qspec() -> QuadSpec {
        QuadSpec::default()
    }

    fn cavity(g: f64, wc: f64, lam: f64) -> BathModel {
        BathModel::Lorentzian {
            g,
            omega_cav: wc,
            lambda: lam,
        }
    }

    fn low_bath() -> BathModel {
        BathModel::LowFrequency {
            alpha_low: 1e-4,
            omega_low: 0.1,
            delta_ref: 1.0,
        }
    }

    fn ohmic() -> BathModel {
        BathModel::OhmicDrude {
            alpha_ohm: 1e-4,
            omega_ohm: 10.0,
        }
    }

    #[test]
    fn zero_coupling_eta_is_exactly_one() {
        let eta = solve_eta(&cavity(0.0, 1.0, 1e-4), 1.0, &qspec(), 1e-12, 200).unwrap();
        assert_eq!(eta, 1.0);
        let eta = solve_eta(
            &BathModel::OhmicDrude {
                alpha_ohm: 0.0,
                omega_ohm: 10.0,
            },
            1.0,
            &qspec(),
            1e-12,
            200,
        )
        .unwrap();
        assert_eq!(eta, 1.0);
    }

    #[test]
    fn narrow_cavity_matches_closed_form() {
        // narrow peak: exp(−2g²/(ω_cav+Δ)²) = exp(−5e-5)
        let eta = solve_eta(&cavity(1e-2, 1.0, 1e-4), 1.0, &qspec(), 1e-12, 200).unwrap();
        assert_relative_eq!(eta, (-5e-5f64).exp(), max_relative = 2e-7);
        assert_abs_diff_eq!(eta, 0.99995, epsilon = 1e-6);
    }

    // independent dense-Riemann oracle for the fixed-point map
    fn riemann_eta_map(bath: &BathModel, eta: f64) -> f64 {
        let mut acc = 0.0;
        // fine uniform grid on [0, 400]; integrand decays as J/ω²
        let n = 4_000_000usize;
        let h = 400.0 / n as f64;
        for i in 0..n {
            let w = (i as f64 + 0.5) * h;
            let d = w + eta;
            acc += bath.density_raw(w) / (d * d);
        }
        (-2.0 * acc * h).exp()
    }

    #[test]
    fn ohmic_eta_matches_riemann_oracle() {
        let bath = ohmic();
        let eta = solve_eta(&bath, 1.0, &qspec(), 1e-12, 200).unwrap();
        let oracle = riemann_eta_map(&bath, eta);
        assert_relative_eq!(eta, oracle, max_relative = 5e-7);
    }

    #[test]
    fn low_frequency_eta_matches_riemann_oracle() {
        let bath = low_bath();
        let eta = solve_eta(&bath, 1.0, &qspec(), 1e-12, 200).unwrap();
        let oracle = riemann_eta_map(&bath, eta);
        assert_relative_eq!(eta, oracle, max_relative = 5e-7);
    }

    #[test]
    fn fixed_point_residual_below_tolerance() {
        let spectrum =
            CompositeSpectrum::new(vec![cavity(1e-2, 1.0, 1e-4), low_bath()], 1.0).unwrap();
        let sys = renormalize(spectrum, 1.0, false, &qspec()).unwrap();
        for r in sys.fixed_point_residuals(&qspec()).unwrap() {
            assert!(r < 1e-12, "residual {r}");
        }
    }

    #[test]
    fn empty_spectrum_and_zero_couplings_give_unity() {
        let sys = renormalize(CompositeSpectrum::new(vec![], 1.0).unwrap(), 1.0, false, &qspec())
            .unwrap();
        assert_eq!(sys.eta(), 1.0);
        let spectrum = CompositeSpectrum::new(
            vec![
                cavity(0.0, 1.0, 1e-4),
                BathModel::LowFrequency {
                    alpha_low: 0.0,
                    omega_low: 0.1,
                    delta_ref: 1.0,
                },
            ],
            1.0,
        )
        .unwrap();
        let sys = renormalize(spectrum, 1.0, false, &qspec()).unwrap();
        assert_eq!(sys.eta(), 1.0);
    }

    #[test]
    fn two_bath_eta_product_in_expected_range() {
        let spectrum =
            CompositeSpectrum::new(vec![cavity(1e-2, 1.0, 1e-4), low_bath()], 1.0).unwrap();
        let sys = renormalize(spectrum, 1.0, false, &qspec()).unwrap();
        let etas = sys.eta_per_bath();
        assert!(etas.iter().all(|&e| e > 0.999 && e < 1.0));
        assert_relative_eq!(sys.eta(), etas[0] * etas[1], max_relative = 1e-15);
    }

    #[test]
    fn coupling_scale_monotonicity() {
        // scaling the coupling strength up strictly decreases eta
        let mut last = 1.0 + 1e-15;
        for &g in &[1e-3, 3e-3, 1e-2, 3e-2] {
            let eta = solve_eta(&cavity(g, 1.0, 1e-3), 1.0, &qspec(), 1e-13, 200).unwrap();
            assert!(eta < last, "eta({g}) = {eta} not < {last}");
            last = eta;
        }
        let mut last = 1.0 + 1e-15;
        for &alpha in &[1e-5, 1e-4, 1e-3] {
            let eta = solve_eta(
                &BathModel::OhmicDrude {
                    alpha_ohm: alpha,
                    omega_ohm: 10.0,
                },
                1.0,
                &qspec(),
                1e-13,
                200,
            )
            .unwrap();
            assert!(eta < last);
            last = eta;
        }
    }

    #[test]
    fn f_factor_special_points() {
        let spectrum = CompositeSpectrum::new(vec![low_bath()], 1.0).unwrap();
        let sys = renormalize(spectrum, 1.0, false, &qspec()).unwrap();
        let ed = sys.eta_delta();
        assert_relative_eq!(sys.f_factor(ed), 1.0, max_relative = 1e-15);
        assert_relative_eq!(sys.f_factor(0.0), 4.0, max_relative = 1e-15);
        assert!(sys.f_factor(1e9) < 1e-17);
        // strictly decreasing
        let mut prev = sys.f_factor(0.0);
        for i in 1..200 {
            let v = sys.f_factor(i as f64 * 0.05);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn rwa_mode_short_circuits() {
        let spectrum =
            CompositeSpectrum::new(vec![cavity(1e-2, 1.0, 1e-4), ohmic()], 1.0).unwrap();
        let sys = renormalize(spectrum, 1.0, true, &qspec()).unwrap();
        assert_eq!(sys.eta(), 1.0);
        assert_eq!(sys.f_factor(0.37), 1.0);
        assert_relative_eq!(
            sys.effective_density(0.37),
            sys.spectrum().density_total_raw(0.37),
            max_relative = 1e-15
        );
    }

    #[test]
    fn effective_density_is_product_at_special_points() {
        let spectrum =
            CompositeSpectrum::new(vec![cavity(1e-2, 0.99, 1e-4), low_bath()], 1.0).unwrap();
        let sys = renormalize(spectrum, 1.0, false, &qspec()).unwrap();
        let ed = sys.eta_delta();
        assert_relative_eq!(
            sys.effective_density(ed),
            sys.spectrum().density_total_raw(ed),
            max_relative = 1e-14
        );
        // hand-composed product at a generic point
        let w = 0.99;
        let expect = sys.spectrum().density_total_raw(w) * (2.0 * ed / (w + ed)).powi(2);
        assert_relative_eq!(sys.effective_density(w), expect, max_relative = 1e-14);
    }

    #[test]
    fn renormalized_anchor_aligns_cavity_with_eta_delta() {
        let spectrum =
            CompositeSpectrum::new(vec![cavity(1e-2, 1.0, 1e-4), low_bath()], 1.0).unwrap();
        let sys = SystemBuilder::new(spectrum, 1.0)
            .anchor(CavityAnchor::Renormalized)
            .build(&qspec())
            .unwrap();
        let wc = match sys.spectrum().components()[0] {
            BathModel::Lorentzian { omega_cav, .. } => omega_cav,
            _ => unreachable!(),
        };
        assert_relative_eq!(wc, sys.eta_delta(), max_relative = 1e-12);
        // the shift is several linewidths: anchoring matters at Q = 1e4
        assert!((1.0 - sys.eta_delta()) > 5.0 * 1e-4);
    }

    #[test]
    fn per_bath_f_variant_is_close_but_distinct() {
        let spectrum =
            CompositeSpectrum::new(vec![cavity(1e-2, 1.0, 1e-4), low_bath()], 1.0).unwrap();
        let global = renormalize(spectrum.clone(), 1.0, false, &qspec()).unwrap();
        let per = renormalize(spectrum, 1.0, false, &qspec())
            .unwrap()
            .with_per_bath_f(true);
        let w = 0.5;
        let a = global.effective_density(w);
        let b = per.effective_density(w);
        assert_relative_eq!(a, b, max_relative = 1e-2);
        assert!(a != b);
    }
}
