//! Measurement-modulated decay rate, Weisskopf-Wigner baseline, normalized
//! QZE/AZE ratio, per-bath decomposition and 2-D parameter sweeps.
//!
//! The central object is
//!
//! ```text
//! γ(τ) = 2π ∫₀^∞ J(ω) f(ω) F(ω − ηΔ, τ) dω,      γ₀ = 2π J(ηΔ),
//! ```
//!
//! where F is the unit-normalized sinc² kernel produced by projective
//! measurements at interval τ. γ(τ)/γ₀ < 1 marks the Zeno regime,
//! > 1 the anti-Zeno regime; the band [1, 1.05] is reported as NEUTRAL to
//! match the phase-diagram convention (the raw ratio is always carried).

use crate::quad::{self, QuadError, QuadSpec};
use crate::renorm::{RenormError, RenormalizedSystem, SystemBuilder};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum ZenoError {
    #[error("measurement interval must be > 0, got {0}")]
    InvalidTau(f64),
    #[error("degenerate baseline: J(ηΔ) = 0, the normalized rate is undefined")]
    DegenerateBaseline,
    #[error("quadrature failure: {0}")]
    Quadrature(#[from] QuadError),
    #[error("renormalization failure: {0}")]
    Renorm(#[from] RenormError),
    #[error("sweep axes must be nonempty and strictly increasing")]
    InvalidAxis,
}

/// Measurement kernel F(x, τ) = 2 sin²(xτ/2) / (π x² τ), with the x → 0
/// limit τ/2π. Unit-normalized in x.
#[inline]
pub fn kernel_f_raw(x: f64, tau: f64) -> f64 {
    let arg = 0.5 * x * tau;
    if arg.abs() < 1e-8 {
        // quadratic Taylor branch keeps the removable singularity smooth
        tau / (2.0 * PI) * (1.0 - arg * arg / 3.0)
    } else {
        let s = arg.sin();
        2.0 * s * s / (PI * x * x * tau)
    }
}

/// Checked kernel evaluation; τ ≤ 0 is a domain error.
pub fn kernel_f(x: f64, tau: f64) -> Result<f64, ZenoError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(ZenoError::InvalidTau(tau));
    }
    Ok(kernel_f_raw(x, tau))
}

/// QZE/AZE classification of a normalized rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    #[serde(rename = "QZE")]
    Qze,
    #[serde(rename = "NEUTRAL")]
    Neutral,
    #[serde(rename = "AZE")]
    Aze,
}

impl Regime {
    /// Neutral band is [1, 1.05], mirroring the contour-plot convention.
    pub fn classify(ratio: f64) -> Regime {
        if ratio < 1.0 {
            Regime::Qze
        } else if ratio <= 1.05 {
            Regime::Neutral
        } else {
            Regime::Aze
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Qze => "QZE",
            Regime::Neutral => "NEUTRAL",
            Regime::Aze => "AZE",
        }
    }
}

/// One bath's share of the normalized rate: weight w_i = J_i(ηΔ)/J(ηΔ) and
/// partial ratio r_i = ∫J_i f F / J_i(ηΔ). The total obeys ratio = Σ w_i r_i.
#[derive(Debug, Clone, Serialize)]
pub struct BathContribution {
    pub label: &'static str,
    pub weight: f64,
    pub partial_ratio: f64,
    pub partial_gamma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRates {
    pub tau: f64,
    pub gamma_tau: f64,
    pub gamma_0: f64,
    pub ratio: f64,
    pub regime: Regime,
    pub per_bath: Vec<BathContribution>,
}

fn gamma_quad_spec(sys: &RenormalizedSystem, spec: &QuadSpec) -> QuadSpec {
    QuadSpec {
        hints: sys.features(),
        ..spec.clone()
    }
}

/// γ(τ) = 2π ∫₀^∞ J f F dω via sinc²-zero chunking with spectral hints.
pub fn gamma_tau(
    sys: &RenormalizedSystem,
    tau: f64,
    spec: &QuadSpec,
) -> Result<f64, ZenoError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(ZenoError::InvalidTau(tau));
    }
    let ed = sys.eta_delta();
    let q = gamma_quad_spec(sys, spec);
    let r = quad::oscillatory_integrate(
        |w| sys.effective_density(w) * kernel_f_raw(w - ed, tau),
        0.0,
        f64::INFINITY,
        ed,
        2.0 * PI / tau,
        &q,
    )?;
    Ok(2.0 * PI * r.value.max(0.0))
}

/// Per-bath numerator 2π ∫ J_i f F dω.
pub fn gamma_tau_component(
    sys: &RenormalizedSystem,
    i: usize,
    tau: f64,
    spec: &QuadSpec,
) -> Result<f64, ZenoError> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(ZenoError::InvalidTau(tau));
    }
    let ed = sys.eta_delta();
    let hints = sys.spectrum().components()[i].feature_points();
    let q = QuadSpec {
        hints,
        ..spec.clone()
    };
    let r = quad::oscillatory_integrate(
        |w| sys.effective_density_component(i, w) * kernel_f_raw(w - ed, tau),
        0.0,
        f64::INFINITY,
        ed,
        2.0 * PI / tau,
        &q,
    )?;
    Ok(2.0 * PI * r.value.max(0.0))
}

/// Weisskopf-Wigner baseline γ₀ = 2π J(ηΔ). f(ηΔ) = 1, so the effective and
/// bare densities agree at the evaluation point.
pub fn gamma_0(sys: &RenormalizedSystem) -> Result<f64, ZenoError> {
    let ed = sys.eta_delta();
    let j = sys.spectrum().density_total_raw(ed);
    debug_assert!(
        sys.per_bath_f() || (sys.effective_density(ed) - j).abs() <= 1e-12 * j.abs().max(1e-300),
        "f(ηΔ) must be 1"
    );
    if j <= 0.0 {
        return Err(ZenoError::DegenerateBaseline);
    }
    Ok(2.0 * PI * j)
}

/// Full normalized-rate report at one measurement interval.
///
/// `gamma_tau` comes from a single composite quadrature; the per-bath
/// partials are integrated separately, so the decomposition identity
/// ratio = Σ w_i r_i compares two independent quadrature routes.
pub fn normalized_rate(
    sys: &RenormalizedSystem,
    tau: f64,
    spec: &QuadSpec,
) -> Result<DecayRates, ZenoError> {
    let g0 = gamma_0(sys)?;
    let gt = gamma_tau(sys, tau, spec)?;
    let ed = sys.eta_delta();
    let j_total = sys.spectrum().density_total_raw(ed);
    let mut per_bath = Vec::with_capacity(sys.spectrum().components().len());
    for (i, bath) in sys.spectrum().components().iter().enumerate() {
        let j_i = sys.spectrum().density_component_raw(i, ed);
        let g_i = gamma_tau_component(sys, i, tau, spec)?;
        let weight = j_i / j_total;
        let partial_ratio = if j_i > 0.0 {
            g_i / (2.0 * PI * j_i)
        } else {
            0.0
        };
        per_bath.push(BathContribution {
            label: bath.label(),
            weight,
            partial_ratio,
            partial_gamma: g_i,
        });
    }
    let ratio = gt / g0;
    Ok(DecayRates {
        tau,
        gamma_tau: gt,
        gamma_0: g0,
        ratio,
        regime: Regime::classify(ratio),
        per_bath,
    })
}

/// Which cavity parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    CavityFrequency,
    CavityWidth,
}

/// One sweep cell: either a computed rate or an error marker.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum CellResult {
    Ok {
        gamma_tau: f64,
        gamma_0: f64,
        ratio: f64,
        regime: Regime,
    },
    Error {
        message: String,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseDiagram {
    pub tau_axis: Vec<f64>,
    pub x_axis: Vec<f64>,
    pub axis: SweepAxis,
    /// Row-major, τ outer: cells[i_tau * x_axis.len() + j_x].
    pub cells: Vec<CellResult>,
}

impl PhaseDiagram {
    pub fn cell(&self, i_tau: usize, j_x: usize) -> &CellResult {
        &self.cells[i_tau * self.x_axis.len() + j_x]
    }

    pub fn ratio(&self, i_tau: usize, j_x: usize) -> Option<f64> {
        match self.cell(i_tau, j_x) {
            CellResult::Ok { ratio, .. } => Some(*ratio),
            CellResult::Error { .. } => None,
        }
    }
}

fn axis_valid(axis: &[f64]) -> bool {
    !axis.is_empty() && axis.windows(2).all(|w| w[0] < w[1])
}

/// Evaluate the normalized rate over a τ × x grid.
///
/// η is re-solved per cell (the swept parameter changes J). Cells are
/// independent; they are dispatched over `workers` threads and collected in
/// index order, so the grid is identical for any worker count.
pub fn sweep(
    template: &SystemBuilder,
    tau_axis: &[f64],
    x_axis: &[f64],
    axis: SweepAxis,
    spec: &QuadSpec,
    workers: usize,
) -> Result<PhaseDiagram, ZenoError> {
    if !axis_valid(tau_axis) || !axis_valid(x_axis) {
        return Err(ZenoError::InvalidAxis);
    }
    let n_x = x_axis.len();
    let cells_idx: Vec<(usize, usize)> = (0..tau_axis.len())
        .flat_map(|i| (0..n_x).map(move |j| (i, j)))
        .collect();

    let compute = |&(i, j): &(usize, usize)| -> CellResult {
        let tau = tau_axis[i];
        let x = x_axis[j];
        let mut tpl = template.clone();
        match axis {
            SweepAxis::CavityFrequency => tpl.set_cavity_frequency(x),
            SweepAxis::CavityWidth => tpl.set_cavity_width(x),
        }
        let run = || -> Result<CellResult, ZenoError> {
            let sys = tpl.build(spec)?;
            let g0 = gamma_0(&sys)?;
            let gt = gamma_tau(&sys, tau, spec)?;
            let ratio = gt / g0;
            Ok(CellResult::Ok {
                gamma_tau: gt,
                gamma_0: g0,
                ratio,
                regime: Regime::classify(ratio),
            })
        };
        run().unwrap_or_else(|e| CellResult::Error {
            message: e.to_string(),
        })
    };

    let cells: Vec<CellResult> = if workers <= 1 {
        cells_idx.iter().map(compute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| cells_idx.par_iter().map(compute).collect())
    };

    Ok(PhaseDiagram {
        tau_axis: tau_axis.to_vec(),
        x_axis: x_axis.to_vec(),
        axis,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renorm::CavityAnchor;
    use crate::spectra::{BathModel, CompositeSpectrum};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

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

    fn build_anchored(components: Vec<BathModel>) -> RenormalizedSystem {
        SystemBuilder::new(CompositeSpectrum::new(components, 1.0).unwrap(), 1.0)
            .anchor(CavityAnchor::Renormalized)
            .build(&qspec())
            .unwrap()
    }

    #[test]
    fn kernel_special_values() {
        let tau = 2.0;
        assert_relative_eq!(
            kernel_f(0.0, tau).unwrap(),
            tau / (2.0 * PI),
            max_relative = 1e-15
        );
        assert_abs_diff_eq!(
            kernel_f(2.0 * PI / tau, tau).unwrap(),
            0.0,
            epsilon = 1e-30
        );
        assert!(kernel_f(1.0, 0.0).is_err());
        assert!(kernel_f(1.0, -2.0).is_err());
    }

    #[test]
    fn gamma0_resonant_cavity_closed_form() {
        let (g, lam) = (1e-2, 1e-4);
        let sys = build_anchored(vec![cavity(g, 1.0, lam)]);
        assert_relative_eq!(gamma_0(&sys).unwrap(), 2.0 * g * g / lam, max_relative = 1e-9);
    }

    #[test]
    fn gamma0_detuned_ratio_analytic() {
        let lam = 1e-4;
        let res = build_anchored(vec![cavity(1e-2, 1.0, lam)]);
        let det = build_anchored(vec![cavity(1e-2, 0.98, lam)]);
        let got = gamma_0(&det).unwrap() / gamma_0(&res).unwrap();
        let ed = det.eta_delta();
        let expect = lam * lam / ((0.02 * ed).powi(2) + lam * lam);
        assert_relative_eq!(got, expect, max_relative = 1e-6);
    }

    #[test]
    fn gamma0_two_bath_additivity() {
        let sys = build_anchored(vec![cavity(1e-2, 1.0, 1e-4), low_bath()]);
        let ed = sys.eta_delta();
        let (total, per) = sys.spectrum().density(ed).unwrap();
        assert_relative_eq!(
            gamma_0(&sys).unwrap(),
            2.0 * PI * (per[0] + per[1]),
            max_relative = 1e-14
        );
        assert_relative_eq!(total, per[0] + per[1], max_relative = 1e-14);
    }

    #[test]
    fn degenerate_baseline_is_error() {
        // zero-coupling spectrum: J(ηΔ) = 0
        let sys = build_anchored(vec![cavity(0.0, 1.0, 1e-4)]);
        assert!(matches!(gamma_0(&sys), Err(ZenoError::DegenerateBaseline)));
    }

    #[test]
    fn small_tau_linear_in_tau() {
        let sys = build_anchored(vec![ohmic()]);
        let spec = qspec();
        let slope = quad::integrate_semi_infinite(
            |w| sys.effective_density(w),
            0.0,
            &QuadSpec {
                hints: sys.features(),
                ..spec.clone()
            },
        )
        .unwrap()
        .value;
        let tau = 1e-3;
        let g = gamma_tau(&sys, tau, &spec).unwrap();
        assert_relative_eq!(g / tau, slope, max_relative = 1e-4);
    }

    #[test]
    fn long_tau_ohmic_reaches_weisskopf_wigner() {
        let sys = build_anchored(vec![ohmic()]);
        let r = normalized_rate(&sys, 1000.0, &qspec()).unwrap();
        assert!(
            (r.ratio - 1.0).abs() < 0.05,
            "ratio at tau=1e3 is {}",
            r.ratio
        );
    }

    #[test]
    fn table_reference_cell_q1e4_detuned() {
        // two-bath cell at ω_cav = 0.98ηΔ, Q=1e4, τ=5: paper ratio 1.994
        let sys = build_anchored(vec![cavity(1e-2, 0.98, 0.98e-4), low_bath()]);
        let r = normalized_rate(&sys, 5.0, &qspec()).unwrap();
        assert!((r.ratio - 1.994).abs() / 1.994 < 0.02, "ratio {}", r.ratio);
        assert_eq!(r.regime, Regime::Aze);
    }

    #[test]
    fn table_reference_cell_q2e3_near_resonant() {
        // ω_cav = 1.001ηΔ, Q=2e3, τ=5: paper ratio 0.032
        let sys = build_anchored(vec![cavity(1e-2, 1.001, 1.001 * 5e-4), low_bath()]);
        let r = normalized_rate(&sys, 5.0, &qspec()).unwrap();
        assert!((r.ratio - 0.032).abs() < 0.003, "ratio {}", r.ratio);
        assert_eq!(r.regime, Regime::Qze);
    }

    #[test]
    fn decomposition_identity_two_routes() {
        let sys = build_anchored(vec![cavity(1e-2, 0.99, 0.99e-4), low_bath()]);
        let r = normalized_rate(&sys, 5.0, &qspec()).unwrap();
        let w_sum: f64 = r.per_bath.iter().map(|b| b.weight).sum();
        assert_relative_eq!(w_sum, 1.0, max_relative = 1e-12);
        let recomposed: f64 = r
            .per_bath
            .iter()
            .map(|b| b.weight * b.partial_ratio)
            .sum();
        assert_relative_eq!(r.ratio, recomposed, max_relative = 1e-6);
    }

    #[test]
    fn cavity_only_scale_invariance_rwa() {
        // with rwa_mode on, the normalized rate is exactly independent of g
        let mk = |g: f64| {
            SystemBuilder::new(
                CompositeSpectrum::new(vec![cavity(g, 1.0, 1e-3)], 1.0).unwrap(),
                1.0,
            )
            .rwa_mode(true)
            .build(&qspec())
            .unwrap()
        };
        let tau = 2.0;
        let r1 = normalized_rate(&mk(1e-3), tau, &qspec()).unwrap();
        let r2 = normalized_rate(&mk(3e-2), tau, &qspec()).unwrap();
        assert_relative_eq!(r1.ratio, r2.ratio, max_relative = 1e-9);
    }

    #[test]
    fn cavity_only_scale_near_invariance_full() {
        // beyond RWA the residual g-dependence is bounded by the η correction
        let tau = 2.0;
        let mk = |g: f64| build_anchored(vec![cavity(g, 1.0, 1e-3)]);
        let r1 = normalized_rate(&mk(1e-3), tau, &qspec()).unwrap();
        let r2 = normalized_rate(&mk(1e-2), tau, &qspec()).unwrap();
        assert!((r1.ratio - r2.ratio).abs() / r1.ratio < 1e-3);
    }

    #[test]
    fn sweep_degenerate_grid_matches_normalized_rate() {
        let tpl = SystemBuilder::new(
            CompositeSpectrum::new(vec![cavity(1e-2, 1.0, 1e-3)], 1.0).unwrap(),
            1.0,
        )
        .anchor(CavityAnchor::Renormalized);
        let pd = sweep(
            &tpl,
            &[2.0],
            &[1.0],
            SweepAxis::CavityFrequency,
            &qspec(),
            1,
        )
        .unwrap();
        let sys = tpl.build(&qspec()).unwrap();
        let direct = normalized_rate(&sys, 2.0, &qspec()).unwrap();
        match pd.cell(0, 0) {
            CellResult::Ok { ratio, .. } => {
                assert_relative_eq!(*ratio, direct.ratio, max_relative = 1e-12)
            }
            CellResult::Error { message } => panic!("cell errored: {message}"),
        }
    }

    #[test]
    fn sweep_worker_counts_agree_bitwise() {
        let tpl = SystemBuilder::new(
            CompositeSpectrum::new(vec![cavity(1e-2, 1.0, 5e-4)], 1.0).unwrap(),
            1.0,
        )
        .anchor(CavityAnchor::Renormalized);
        let taus = [0.5, 1.0, 2.0];
        let xs = [0.99, 1.0, 1.01];
        let spec = QuadSpec {
            rel_tol: 1e-7,
            ..qspec()
        };
        let a = sweep(&tpl, &taus, &xs, SweepAxis::CavityFrequency, &spec, 1).unwrap();
        let b = sweep(&tpl, &taus, &xs, SweepAxis::CavityFrequency, &spec, 4).unwrap();
        for i in 0..taus.len() {
            for j in 0..xs.len() {
                assert_eq!(a.ratio(i, j), b.ratio(i, j));
            }
        }
    }

    #[test]
    fn sweep_invalid_axis_rejected() {
        let tpl = SystemBuilder::new(
            CompositeSpectrum::new(vec![cavity(1e-2, 1.0, 5e-4)], 1.0).unwrap(),
            1.0,
        );
        assert!(matches!(
            sweep(&tpl, &[], &[1.0], SweepAxis::CavityFrequency, &qspec(), 1),
            Err(ZenoError::InvalidAxis)
        ));
        assert!(matches!(
            sweep(
                &tpl,
                &[1.0, 1.0],
                &[1.0],
                SweepAxis::CavityFrequency,
                &qspec(),
                1
            ),
            Err(ZenoError::InvalidAxis)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn kernel_even_symmetry(x in -50.0f64..50.0, tau in 0.01f64..50.0) {
            let a = kernel_f_raw(x, tau);
            let b = kernel_f_raw(-x, tau);
            prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300));
            prop_assert!(a >= 0.0);
        }
    }
}
