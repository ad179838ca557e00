//! Time-domain evolution in the transformed frame: resolvent self-energy,
//! dressed-state poles, survival amplitude via the spectral function, the
//! periodic-measurement trace and the RWA master-equation reference curve.
//!
//! Frequencies here are rotated-frame offsets x; the lab frequency is
//! x + ηΔ. The resolvent denominator is D(x) = x − R(x) − iΓ(x) with
//!
//! ```text
//! Γ(x) = π J(x+ηΔ) f(x+ηΔ)           (0 when x+ηΔ < 0)
//! R(x) = ℘ ∫₀^∞ J(s)f(s)/(x+ηΔ−s) ds
//! ```
//!
//! The survival amplitude is recovered on the real axis,
//! χ̃(t) = ∫ A(x) e^{ixt} dx with A = Γ/π / [(x−R)² + Γ²], which integrates
//! to 1 (resolvent completeness) — checked, since a bound state outside the
//! bath band would escape this representation.
//!
//! Pole search: real roots of x − R(x) seed a complex Newton iteration on
//! the analytically continued denominator
//! D(z) = z − ∫ Jf/(z+ηΔ−s) ds − 2πi·Jf(z+ηΔ) (upper half plane), whose
//! zeros carry the dressed frequencies (real part), half-widths (imaginary
//! part) and residues 1/D′(z).

use crate::quad::{self, QuadError, QuadSpec};
use crate::renorm::RenormalizedSystem;
use crate::spectra::Feature;
use crate::zeno::ZenoError;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum DynamicsError {
    #[error("quadrature failure: {0}")]
    Quadrature(#[from] QuadError),
    #[error("time must be >= 0, got {0}")]
    InvalidTime(f64),
    #[error("measurement protocol needs tau > 0 and n >= 1")]
    InvalidProtocol,
    #[error("complex Newton did not converge from seed {seed}")]
    PoleRefinement { seed: f64 },
    #[error(transparent)]
    Zeno(#[from] ZenoError),
}

/// Callable pair (R, Γ) over a fixed system and quadrature budget.
pub struct SelfEnergy<'a> {
    sys: &'a RenormalizedSystem,
    spec: QuadSpec,
}

impl<'a> SelfEnergy<'a> {
    pub fn new(sys: &'a RenormalizedSystem, spec: &QuadSpec) -> Self {
        SelfEnergy {
            sys,
            spec: spec.clone(),
        }
    }

    /// Γ(x) = π·J(x+ηΔ)·f(x+ηΔ), zero below the bath edge.
    pub fn gamma_at(&self, x: f64) -> f64 {
        let s = x + self.sys.eta_delta();
        if s < 0.0 {
            0.0
        } else {
            PI * self.sys.effective_density(s)
        }
    }

    /// Level-shift R(x) by principal-value quadrature.
    pub fn shift_at(&self, x: f64) -> Result<f64, DynamicsError> {
        let ed = self.sys.eta_delta();
        let xp = x + ed;
        let jf = |s: f64| self.sys.effective_density(s);
        let hints = self.sys.features();
        let spec = QuadSpec {
            hints: hints.clone(),
            ..self.spec.clone()
        };
        if xp <= 0.0 {
            // no pole on the support
            let cut = largest_feature_edge(&hints).max(1.0);
            let body = quad::integrate(|s| jf(s) / (xp - s), 0.0, cut, &spec)?;
            let tail =
                quad::integrate_semi_infinite(|s| jf(s) / (xp - s), cut, &spec)?;
            return Ok(body.value + tail.value);
        }
        let w_left = (0.5f64).min(0.5 * xp);
        let w_right = 0.5f64;
        let (a, b) = (xp - w_left, xp + w_right);
        // ℘∫ Jf/(xp−s) ds = −℘∫ Jf/(s−xp) ds
        let window = quad::principal_value(&jf, xp, a, b, &spec)?;
        let mut total = -window.value;
        if a > 0.0 {
            total += quad::integrate(|s| jf(s) / (xp - s), 0.0, a, &spec)?.value;
        }
        let cut = largest_feature_edge(&hints).max(b + 1.0);
        total += quad::integrate(|s| jf(s) / (xp - s), b, cut, &spec)?.value;
        total += quad::integrate_semi_infinite(|s| jf(s) / (xp - s), cut, &spec)?.value;
        Ok(total)
    }

    /// Spectral function A(x) = (Γ/π) / [(x−R)² + Γ²].
    pub fn spectral_function(&self, x: f64) -> Result<f64, DynamicsError> {
        let g = self.gamma_at(x);
        if g == 0.0 {
            return Ok(0.0);
        }
        let r = self.shift_at(x)?;
        let d = x - r;
        Ok(g / PI / (d * d + g * g))
    }

    /// Analytic continuation of the resolvent denominator into Im z ≥ 0.
    pub fn denominator_continued(&self, z: Complex64) -> Result<Complex64, DynamicsError> {
        let ed = self.sys.eta_delta();
        let zp = z + ed;
        let hints = {
            let mut h = self.sys.features();
            if zp.re > 0.0 {
                h.push(Feature::new(zp.re, zp.im.abs().max(1e-12)));
            }
            h
        };
        let spec = QuadSpec {
            hints: hints.clone(),
            ..self.spec.clone()
        };
        let sigma = if z.im == 0.0 {
            let r = self.shift_at(z.re)?;
            Complex64::new(r, self.gamma_at(z.re))
        } else {
            let cut = largest_feature_edge(&hints).max(zp.re.abs() + 1.0);
            let re_part = quad::integrate(
                |s| {
                    let den = zp - s;
                    (self.sys.effective_density(s) / den).re
                },
                0.0,
                cut,
                &spec,
            )?
            .value
                + quad::integrate_semi_infinite(
                    |s| {
                        let den = zp - s;
                        (self.sys.effective_density(s) / den).re
                    },
                    cut,
                    &spec,
                )?
                .value;
            let im_part = quad::integrate(
                |s| {
                    let den = zp - s;
                    (self.sys.effective_density(s) / den).im
                },
                0.0,
                cut,
                &spec,
            )?
            .value
                + quad::integrate_semi_infinite(
                    |s| {
                        let den = zp - s;
                        (self.sys.effective_density(s) / den).im
                    },
                    cut,
                    &spec,
                )?
                .value;
            // continuation across the cut picks up the full discontinuity
            Complex64::new(re_part, im_part)
                + Complex64::new(0.0, 2.0 * PI) * self.sys.effective_density_complex(zp)
        };
        Ok(z - sigma)
    }
}

fn largest_feature_edge(hints: &[Feature]) -> f64 {
    hints
        .iter()
        .map(|h| h.position + 30.0 * h.width)
        .fold(0.0, f64::max)
}

/// Dressed-level pole of the resolvent: rotated-frame frequency, half-width,
/// residue weight |Q| with its phase (kept so reconstructions interfere
/// correctly), and a flag for residues outside (0, 1].
#[derive(Debug, Clone, Serialize)]
pub struct Pole {
    pub omega: f64,
    pub width: f64,
    pub residue: f64,
    pub phase: f64,
    pub flagged: bool,
}

impl Pole {
    /// Lab-frame frequency ηΔ + ω of the dressed level.
    pub fn lab_frequency(&self, sys: &RenormalizedSystem) -> f64 {
        sys.eta_delta() + self.omega
    }

    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.residue, self.phase)
    }
}

/// Locate dressed-state poles in a rotated-frame window.
///
/// Real roots of x − R(x) = 0 are bracketed on 200 panels and bisected to
/// 1e-10·Δ, then each seed is refined by complex Newton on the continued
/// denominator (derivative by central difference, step 1e-6·Δ). An empty
/// window yields an empty list; a zero-coupling system yields the free-qubit
/// pole at the origin with unit residue.
pub fn find_poles(
    sys: &RenormalizedSystem,
    window: Option<(f64, f64)>,
    spec: &QuadSpec,
) -> Result<Vec<Pole>, DynamicsError> {
    let g_eff = sys.effective_coupling(spec).map_err(DynamicsError::from)?;
    if g_eff == 0.0 {
        return Ok(vec![Pole {
            omega: 0.0,
            width: 0.0,
            residue: 1.0,
            phase: 0.0,
            flagged: false,
        }]);
    }
    let (lo, hi) = window.unwrap_or((-10.0 * g_eff, 10.0 * g_eff));
    let se = SelfEnergy::new(sys, spec);
    let n_brackets = 200usize;
    let h = (hi - lo) / n_brackets as f64;
    let mut seeds = Vec::new();
    let mut prev_x = lo;
    let mut prev_v = prev_x - se.shift_at(prev_x)?;
    for i in 1..=n_brackets {
        let x = lo + i as f64 * h;
        let v = x - se.shift_at(x)?;
        if prev_v == 0.0 {
            seeds.push(prev_x);
        } else if (prev_v < 0.0) != (v < 0.0) {
            // bisect to 1e-10·Δ
            let (mut a, mut b, mut fa) = (prev_x, x, prev_v);
            while b - a > 1e-10 * sys.delta() {
                let m = 0.5 * (a + b);
                let fm = m - se.shift_at(m)?;
                if (fm < 0.0) == (fa < 0.0) {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            seeds.push(0.5 * (a + b));
        }
        prev_x = x;
        prev_v = v;
    }

    let step = 1e-6 * sys.delta();
    let mut poles: Vec<Pole> = Vec::new();
    for seed in seeds {
        let mut z = Complex64::new(seed, se.gamma_at(seed));
        let mut dprime = Complex64::new(1.0, 0.0);
        let mut converged = false;
        for _ in 0..60 {
            if z.im < 0.0 {
                z = Complex64::new(z.re, 0.0);
            }
            let d0 = se.denominator_continued(z)?;
            let dp = (se.denominator_continued(z + step)?
                - se.denominator_continued(z - step)?)
                / (2.0 * step);
            dprime = dp;
            if dp.norm() == 0.0 {
                break;
            }
            let delta = d0 / dp;
            z -= delta;
            if delta.norm() < 1e-12 * sys.delta().max(z.norm()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(DynamicsError::PoleRefinement { seed });
        }
        let q = Complex64::new(1.0, 0.0) / dprime;
        let residue = q.norm();
        let pole = Pole {
            omega: z.re,
            width: z.im.max(0.0),
            residue,
            phase: q.arg(),
            flagged: !(residue > 0.0 && residue <= 1.0 + 1e-9),
        };
        if !poles
            .iter()
            .any(|p: &Pole| (p.omega - pole.omega).abs() < 1e-8 * sys.delta())
        {
            poles.push(pole);
        }
    }
    poles.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(poles)
}

/// Pole-approximation reconstruction Σ_j Q_j e^{i ω_j t} with complex
/// ω_j = omega + i·width, so each term decays as e^{−width·t}.
pub fn pole_reconstruction(poles: &[Pole], t: f64) -> Complex64 {
    poles
        .iter()
        .map(|p| p.amplitude() * Complex64::new(-p.width * t, p.omega * t).exp())
        .fold(Complex64::new(0.0, 0.0), |a, b| a + b)
}

/// Cached spectral function on a panel quadrature grid; Fourier transforms
/// to any time up to the `t_max` it was built for.
pub struct ResolventGrid {
    nodes: Vec<(f64, f64, f64)>, // (x, weight, A(x))
    norm: f64,
    /// no coupled continuum: the amplitude stays exactly 1
    free: bool,
}

// 30-point Gauss–Legendre nodes on [-1, 1], generated by Newton iteration on
// the Legendre polynomial at first use.
fn gauss_legendre_30() -> &'static [(f64, f64); 30] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[(f64, f64); 30]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = 30usize;
        let mut out = [(0.0f64, 0.0f64); 30];
        for i in 0..n {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                // evaluate P_n and P_n' by recurrence
                let (mut p0, mut p1) = (1.0f64, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            out[i] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

impl ResolventGrid {
    /// Build the grid for a system, resolving pole regions geometrically and
    /// capping panel widths at 30/t_max so the Fourier phase stays within the
    /// rule's reach.
    pub fn build(
        sys: &RenormalizedSystem,
        t_max: f64,
        spec: &QuadSpec,
    ) -> Result<Self, DynamicsError> {
        let se = SelfEnergy::new(sys, spec);
        let ed = sys.eta_delta();
        if sys.effective_coupling(spec)? == 0.0 {
            // decoupled qubit: A degenerates to δ(x)
            return Ok(ResolventGrid {
                nodes: Vec::new(),
                norm: 1.0,
                free: true,
            });
        }
        let poles = find_poles(sys, None, spec)?;

        let mut edges: Vec<f64> = vec![-ed];
        // bath features mapped into the rotated frame
        let mut x_hi: f64 = 3.0 * ed;
        for f in sys.features() {
            for m in [-30.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 30.0] {
                edges.push(f.position - ed + m * f.width);
            }
            x_hi = x_hi.max(f.position + 40.0 * f.width - ed);
        }
        // pole neighborhoods, geometrically graded
        for p in &poles {
            let w0 = p.width.max(1e-9 * sys.delta());
            edges.push(p.omega);
            let mut w = 0.25 * w0;
            while w < 0.3 {
                edges.push(p.omega - w);
                edges.push(p.omega + w);
                w *= 2.0;
            }
        }
        edges.push(0.0);
        edges.push(x_hi);
        edges.retain(|x| x.is_finite() && *x >= -ed && *x <= x_hi);
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * (1.0 + x_hi));

        // cap panel width for Fourier accuracy
        let cap = if t_max > 0.0 {
            (30.0 / t_max).min(0.1 * (1.0 + ed))
        } else {
            0.1 * (1.0 + ed)
        };
        let mut panels: Vec<(f64, f64)> = Vec::new();
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 0.0 {
                continue;
            }
            let n_split = ((b - a) / cap).ceil().max(1.0) as usize;
            let h = (b - a) / n_split as f64;
            for i in 0..n_split {
                panels.push((a + i as f64 * h, a + (i + 1) as f64 * h));
            }
        }

        let gl = gauss_legendre_30();
        let mut nodes = Vec::with_capacity(panels.len() * gl.len());
        for &(a, b) in &panels {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for &(xi, wi) in gl.iter() {
                let x = mid + half * xi;
                let a_val = se.spectral_function(x)?;
                nodes.push((x, half * wi, a_val));
            }
        }

        // extend the tail in geometric panels until its contribution dies
        let mut lo = x_hi;
        let mut width = (0.5 * x_hi).max(1.0);
        for _ in 0..60 {
            let (a, b) = (lo, lo + width);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut panel_sum = 0.0;
            let start = nodes.len();
            for &(xi, wi) in gl.iter() {
                let x = mid + half * xi;
                let a_val = se.spectral_function(x)?;
                nodes.push((x, half * wi, a_val));
                panel_sum += half * wi * a_val;
            }
            lo = b;
            width *= 1.6;
            if panel_sum.abs() < 2e-8 {
                let _ = start;
                break;
            }
        }

        let norm = nodes.iter().map(|&(_, w, a)| w * a).sum();
        Ok(ResolventGrid {
            nodes,
            norm,
            free: false,
        })
    }

    /// ∫ A dω on this grid; 1 within tolerance for a complete resolvent.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// χ̃(t) = ∫ A(x) e^{ixt} dx.
    pub fn amplitude(&self, t: f64) -> Complex64 {
        if self.free {
            return Complex64::new(1.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for &(x, w, a) in &self.nodes {
            let (s, c) = (x * t).sin_cos();
            acc += Complex64::new(c, s) * (w * a);
        }
        acc
    }
}

/// Survival amplitude χ̃(t) at one time, |χ̃(0)| = 1 within the grid budget.
pub fn survival_amplitude(
    sys: &RenormalizedSystem,
    t: f64,
    spec: &QuadSpec,
) -> Result<Complex64, DynamicsError> {
    if t < 0.0 {
        return Err(DynamicsError::InvalidTime(t));
    }
    let grid = ResolventGrid::build(sys, t, spec)?;
    Ok(grid.amplitude(t))
}

/// Time series of excited-state probabilities.
#[derive(Debug, Clone, Serialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub measured: bool,
    pub tau: Option<f64>,
    /// −ln P(nτ)/(nτ) for a measured trace
    pub fitted_rate: f64,
    /// set when τ is outside the short-time validity window τ ≪ 1/g_eff
    pub short_time_warning: bool,
}

/// P(kτ) = |χ̃(τ)|^{2k} for k = 0..n under periodic ideal projections.
pub fn measured_trace(
    sys: &RenormalizedSystem,
    tau: f64,
    n_measurements: usize,
    spec: &QuadSpec,
) -> Result<EvolutionTrace, DynamicsError> {
    if !(tau > 0.0) || n_measurements < 1 {
        return Err(DynamicsError::InvalidProtocol);
    }
    let g_eff = sys.effective_coupling(spec)?;
    let grid = ResolventGrid::build(sys, tau, spec)?;
    let p1 = grid.amplitude(tau).norm_sqr();
    let mut times = Vec::with_capacity(n_measurements + 1);
    let mut probabilities = Vec::with_capacity(n_measurements + 1);
    for k in 0..=n_measurements {
        times.push(k as f64 * tau);
        probabilities.push(p1.powi(k as i32));
    }
    let p_final = probabilities[n_measurements];
    let fitted_rate = if p_final > 0.0 {
        -p_final.ln() / (n_measurements as f64 * tau)
    } else {
        f64::INFINITY
    };
    Ok(EvolutionTrace {
        times,
        probabilities,
        measured: true,
        tau: Some(tau),
        fitted_rate,
        short_time_warning: g_eff > 0.0 && tau >= 0.1 / g_eff,
    })
}

/// Free-evolution trace |χ̃(t)|² on the same time points.
pub fn unmeasured_trace(
    sys: &RenormalizedSystem,
    times: &[f64],
    spec: &QuadSpec,
) -> Result<EvolutionTrace, DynamicsError> {
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let grid = ResolventGrid::build(sys, t_max, spec)?;
    let probabilities: Vec<f64> = times.iter().map(|&t| grid.amplitude(t).norm_sqr()).collect();
    Ok(EvolutionTrace {
        times: times.to_vec(),
        probabilities,
        measured: false,
        tau: None,
        fitted_rate: f64::NAN,
        short_time_warning: false,
    })
}

/// RWA master-equation reference curve cos(gt)·exp[−(κ+γ)t/2].
///
/// Reported raw: the closed form can go negative, it is a reference curve
/// rather than a probability.
pub fn rwa_benchmark(g: f64, kappa: f64, gamma: f64, t: f64) -> f64 {
    (g * t).cos() * (-(kappa + gamma) * t / 2.0).exp()
}
