//! Brute-force validator: discretize the continuum baths into K modes,
//! diagonalize the single-excitation Hamiltonian exactly, and run the
//! periodic-projection protocol with none of the approximations used by
//! [`crate::zeno`] or [`crate::dynamics`].
//!
//! In the rotated frame the Hamiltonian restricted to the single-excitation
//! subspace is the (K+1)×(K+1) arrow matrix
//!
//! ```text
//! [ 0    V₁   V₂  …  ]
//! [ V₁   d₁          ]          d_k = ω_k − ηΔ,  V_k² = J(ω_k) f(ω_k) Δω_k
//! [ V₂        d₂     ]
//! [ …             …  ]
//! ```
//!
//! whose eigenvalues are the roots of the secular function
//! w(μ) = μ − Σ_k V_k²/(μ − d_k), one in each gap between consecutive d_k
//! plus one below and one above the band. Roots are bracketed per gap and
//! polished by bisection + Newton in pole-anchored coordinates, which keeps
//! full precision even when a root sits within 1e-15 of its pole. The
//! excited-state weight of eigenvector j is a_j² = 1/(1 + Σ_k V_k²/(μ_j−d_k)²)
//! and the survival amplitude is χ(t) = Σ_j a_j² e^{−iμ_j t}.

use crate::quad::{self, QuadSpec};
use crate::renorm::RenormalizedSystem;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum OracleError {
    #[error("discretization requires K >= 1 and omega_max > eta*delta")]
    InvalidDiscretization,
    #[error("mode grid must be strictly increasing with matching couplings")]
    InvalidBath,
    #[error("secular root search failed in gap {gap}: {detail}")]
    RootSearch { gap: usize, detail: String },
    #[error("quadrature failure: {0}")]
    Quadrature(#[from] quad::QuadError),
    #[error("measurement protocol needs tau > 0 and n >= 1")]
    InvalidProtocol,
}

/// K sampled bath modes with couplings, plus the renormalized spacing they
/// were built against.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteBath {
    omega: Vec<f64>,
    coupling: Vec<f64>,
    eta_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    Uniform,
    PeakRefined,
}

impl DiscreteBath {
    pub fn new(omega: Vec<f64>, coupling: Vec<f64>, eta_delta: f64) -> Result<Self, OracleError> {
        if omega.is_empty()
            || omega.len() != coupling.len()
            || !omega.windows(2).all(|w| w[0] < w[1])
            || coupling.iter().any(|v| !v.is_finite())
        {
            return Err(OracleError::InvalidBath);
        }
        Ok(DiscreteBath {
            omega,
            coupling,
            eta_delta,
        })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn eta_delta(&self) -> f64 {
        self.eta_delta
    }

    pub fn coupling_weight(&self) -> f64 {
        self.coupling.iter().map(|v| v * v).sum()
    }

    /// Poincaré recurrence time 2π/Δω_min of the discretization; oracle
    /// results are only quotable for evolution times below it.
    pub fn recurrence_time(&self) -> f64 {
        if self.omega.len() < 2 {
            return f64::INFINITY;
        }
        let dmin = self
            .omega
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        2.0 * std::f64::consts::PI / dmin
    }
}

/// Sample the continuum J(ω)f(ω) on [0, omega_max] into K modes.
///
/// `PeakRefined` devotes half the budget to ±20λ around the Lorentzian
/// center, a quarter to the shoulders out to ±1000λ, and the rest to the
/// remaining range; without a Lorentzian it reduces to `Uniform`. Couplings
/// are V_k² = J(ω_k)f(ω_k)·Δω_k with cell widths from half-gaps.
pub fn discretize(
    sys: &RenormalizedSystem,
    omega_max: f64,
    k: usize,
    scheme: Scheme,
    spec: &QuadSpec,
) -> Result<DiscreteBath, OracleError> {
    let ed = sys.eta_delta();
    if k < 1 || !(omega_max > ed) {
        return Err(OracleError::InvalidDiscretization);
    }
    let cavity = sys.spectrum().cavity_index().map(|i| {
        match sys.spectrum().components()[i] {
            crate::spectra::BathModel::Lorentzian {
                omega_cav, lambda, ..
            } => (omega_cav, lambda),
            _ => unreachable!(),
        }
    });

    // single-mode reduction: one mode at the cavity center carrying ∫Jf
    if k == 1 {
        if let Some((wc, _)) = cavity {
            let hints = sys.features();
            let v2 = quad::integrate_semi_infinite(
                |w| sys.effective_density(w),
                0.0,
                &QuadSpec {
                    hints,
                    ..spec.clone()
                },
            )?
            .value;
            return DiscreteBath::new(vec![wc], vec![v2.max(0.0).sqrt()], ed);
        }
    }

    let mut nodes: Vec<f64> = Vec::with_capacity(k);
    match (scheme, cavity) {
        (Scheme::Uniform, _) | (Scheme::PeakRefined, None) => {
            let h = omega_max / k as f64;
            nodes.extend((0..k).map(|i| (i as f64 + 0.5) * h));
        }
        (Scheme::PeakRefined, Some((wc, lam))) => {
            let lo = (wc - 20.0 * lam).max(0.0);
            let hi = (wc + 20.0 * lam).min(omega_max);
            let sh_a = (wc - 1000.0 * lam).max(0.0);
            let sh_b = (wc + 1000.0 * lam).min(omega_max);
            let n_in = k / 2;
            let n_sh = k / 4;
            let n_out = k - n_in - n_sh;
            let h_in = (hi - lo) / n_in as f64;
            nodes.extend((0..n_in).map(|i| lo + (i as f64 + 0.5) * h_in));
            let mut shoulder_segs: Vec<(f64, f64)> = Vec::new();
            if lo > sh_a {
                shoulder_segs.push((sh_a, lo));
            }
            if sh_b > hi {
                shoulder_segs.push((hi, sh_b));
            }
            let sh_total: f64 = shoulder_segs.iter().map(|(a, b)| b - a).sum();
            for (a, b) in &shoulder_segs {
                let m = ((n_sh as f64) * (b - a) / sh_total).round().max(1.0) as usize;
                let h = (b - a) / m as f64;
                nodes.extend((0..m).map(|i| a + (i as f64 + 0.5) * h));
            }
            let mut outer_segs: Vec<(f64, f64)> = Vec::new();
            if sh_a > 0.0 {
                outer_segs.push((0.0, sh_a));
            }
            if sh_b < omega_max {
                outer_segs.push((sh_b, omega_max));
            }
            let out_total: f64 = outer_segs.iter().map(|(a, b)| b - a).sum();
            for (a, b) in &outer_segs {
                let m = ((n_out as f64) * (b - a) / out_total).round().max(1.0) as usize;
                let h = (b - a) / m as f64;
                nodes.extend((0..m).map(|i| a + (i as f64 + 0.5) * h));
            }
            nodes.sort_by(f64::total_cmp);
            nodes.dedup_by(|x, y| (*x - *y).abs() < 1e-15 * omega_max);
        }
    }

    // cell widths from midpoints between nodes; end cells reach the edges
    let n = nodes.len();
    let mut coupling = Vec::with_capacity(n);
    for i in 0..n {
        let left = if i == 0 {
            0.0
        } else {
            0.5 * (nodes[i - 1] + nodes[i])
        };
        let right = if i + 1 == n {
            omega_max
        } else {
            0.5 * (nodes[i] + nodes[i + 1])
        };
        let v2 = sys.effective_density(nodes[i]) * (right - left);
        coupling.push(v2.max(0.0).sqrt());
    }
    DiscreteBath::new(nodes, coupling, ed)
}

/// Eigen-decomposition of the arrow matrix, stored in pole-anchored form.
#[derive(Debug, Clone)]
pub struct ArrowSpectrum {
    /// rotated-frame mode detunings d_k (coupled modes only)
    d: Vec<f64>,
    /// squared couplings of the coupled modes
    v2: Vec<f64>,
    /// original indices of the coupled modes
    kept: Vec<usize>,
    /// eigenvalues, each as (anchor index into `d` or usize::MAX for the
    /// qubit-only case, offset δ from the anchor)
    roots: Vec<(usize, f64)>,
    /// excited-state weights a_j²
    weights: Vec<f64>,
}

fn secular(mu_anchor: usize, delta: f64, d: &[f64], v2: &[f64]) -> f64 {
    // w(μ) = μ − Σ v²/(μ−d), with μ = d[anchor] + δ evaluated gap-wise
    let base = if mu_anchor == usize::MAX {
        0.0
    } else {
        d[mu_anchor]
    };
    let mut s = base + delta;
    for i in 0..d.len() {
        let dd = if mu_anchor == usize::MAX {
            delta - d[i]
        } else {
            (base - d[i]) + delta
        };
        s -= v2[i] / dd;
    }
    s
}

impl ArrowSpectrum {
    /// Solve the secular equation for every eigenvalue.
    pub fn diagonalize(bath: &DiscreteBath) -> Result<Self, OracleError> {
        let mut d = Vec::new();
        let mut v2 = Vec::new();
        let mut kept = Vec::new();
        for (i, (&w, &v)) in bath.omega.iter().zip(&bath.coupling).enumerate() {
            if v != 0.0 {
                d.push(w - bath.eta_delta);
                v2.push(v * v);
                kept.push(i);
            }
        }
        let n = d.len();
        if n == 0 {
            // free qubit: single eigenvalue 0 with full weight
            return Ok(ArrowSpectrum {
                d,
                v2,
                kept,
                roots: vec![(usize::MAX, 0.0)],
                weights: vec![1.0],
            });
        }
        let vsum: f64 = v2.iter().sum();
        let span = vsum.sqrt().max(1e-12);
        let mut roots: Vec<(usize, f64)> = Vec::with_capacity(n + 1);

        // below the band: anchored at d[0], δ < 0
        {
            let f = |delta: f64| secular(0, delta, &d, &v2);
            let mut lo = -(2.0 * span).max(1e-9 * (1.0 + d[0].abs()));
            let mut guard = 0;
            while f(lo) >= 0.0 {
                lo *= 2.0;
                guard += 1;
                if guard > 200 {
                    return Err(OracleError::RootSearch {
                        gap: 0,
                        detail: "no bracket below the band".into(),
                    });
                }
            }
            let mut hi = -1e-3 * lo.abs().min(1.0);
            guard = 0;
            while f(hi) <= 0.0 {
                hi *= 0.25;
                guard += 1;
                if guard > 600 || hi.abs() < 1e-300 {
                    // root indistinguishable from the pole
                    hi = -1e-300;
                    break;
                }
            }
            roots.push((0, bisect_newton(&f, lo, hi)));
        }
        // interior gaps (d[k], d[k+1])
        for kgap in 0..n - 1 {
            let gap = d[kgap + 1] - d[kgap];
            let mid = 0.5 * gap;
            // choose the anchor by the secular sign at mid-gap
            let w_mid = secular(kgap, mid, &d, &v2);
            let (anchor, mut lo, mut hi);
            if w_mid >= 0.0 {
                anchor = kgap; // root in (d_k, mid], δ > 0
                hi = mid;
                lo = 1e-3 * gap;
                let f = |delta: f64| secular(anchor, delta, &d, &v2);
                let mut guard = 0;
                while f(lo) >= 0.0 {
                    lo *= 0.25;
                    guard += 1;
                    if guard > 600 || lo < 1e-300 {
                        lo = 1e-300;
                        break;
                    }
                }
                roots.push((anchor, bisect_newton(&f, lo, hi)));
            } else {
                anchor = kgap + 1; // root in (mid, d_{k+1}), δ < 0
                lo = -mid;
                hi = -1e-3 * gap;
                let f = |delta: f64| secular(anchor, delta, &d, &v2);
                let mut guard = 0;
                while f(hi) <= 0.0 {
                    hi *= 0.25;
                    guard += 1;
                    if guard > 600 || hi.abs() < 1e-300 {
                        hi = -1e-300;
                        break;
                    }
                }
                roots.push((anchor, bisect_newton(&f, lo, hi)));
            }
        }
        // above the band: anchored at d[n−1], δ > 0
        {
            let f = |delta: f64| secular(n - 1, delta, &d, &v2);
            let mut hi = (2.0 * span).max(1e-9 * (1.0 + d[n - 1].abs()));
            let mut guard = 0;
            while f(hi) <= 0.0 {
                hi *= 2.0;
                guard += 1;
                if guard > 200 {
                    return Err(OracleError::RootSearch {
                        gap: n,
                        detail: "no bracket above the band".into(),
                    });
                }
            }
            let mut lo = 1e-3 * hi;
            guard = 0;
            while f(lo) >= 0.0 {
                lo *= 0.25;
                guard += 1;
                if guard > 600 || lo < 1e-300 {
                    lo = 1e-300;
                    break;
                }
            }
            roots.push((n - 1, bisect_newton(&f, lo, hi)));
        }

        let weights = roots
            .iter()
            .map(|&(anchor, delta)| {
                let mut s = 1.0;
                for i in 0..n {
                    let dd = (d[anchor] - d[i]) + delta;
                    s += v2[i] / (dd * dd);
                }
                1.0 / s
            })
            .collect();

        Ok(ArrowSpectrum {
            d,
            v2,
            kept,
            roots,
            weights,
        })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.roots
            .iter()
            .map(|&(a, delta)| if a == usize::MAX { delta } else { self.d[a] + delta })
            .collect()
    }

    /// Σ a_j², which is 1 for an exact decomposition.
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Survival amplitude χ(t) = Σ_j a_j² e^{−iμ_j t}.
    pub fn survival(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&(anchor, delta), &w) in self.roots.iter().zip(&self.weights) {
            let mu = if anchor == usize::MAX {
                delta
            } else {
                self.d[anchor] + delta
            };
            acc += w * Complex64::from_polar(1.0, -mu * t);
        }
        acc
    }

    /// Full state at time t from the initial excited state: the qubit
    /// amplitude and every mode amplitude (zero-coupling modes stay empty).
    pub fn state(&self, t: f64, total_modes: usize) -> StateVector {
        let chi = self.survival(t);
        let mut beta = vec![Complex64::new(0.0, 0.0); total_modes];
        for (&(anchor, delta), &w) in self.roots.iter().zip(&self.weights) {
            let mu = if anchor == usize::MAX {
                delta
            } else {
                self.d[anchor] + delta
            };
            let phase = Complex64::from_polar(1.0, -mu * t);
            for i in 0..self.d.len() {
                let dd = if anchor == usize::MAX {
                    delta - self.d[i]
                } else {
                    (self.d[anchor] - self.d[i]) + delta
                };
                // eigenvector components: a_j along the qubit, a_j·V_k/(μ−d_k) on mode k
                beta[self.kept[i]] += w * (self.v2[i].sqrt() / dd) * phase;
            }
        }
        StateVector { chi, beta }
    }
}

/// Bisection to a coarse bracket, then Newton polish; falls back to pure
/// bisection when Newton leaves the bracket. Operates on the pole-anchored
/// offset δ, so precision is relative to the gap, not to |μ|.
fn bisect_newton<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut flo = f(lo);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm >= 0.0) == (flo >= 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    // Newton with numeric derivative, constrained to the bracket
    let mut x = 0.5 * (lo + hi);
    for _ in 0..8 {
        let h = 1e-7 * x.abs().max(1e-12 * (hi - lo).abs()).max(1e-300);
        let fx = f(x);
        let d = (f(x + h) - f(x - h)) / (2.0 * h);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - fx / d;
        if next <= lo || next >= hi || !next.is_finite() {
            break;
        }
        if (next - x).abs() <= 1e-16 * x.abs() {
            x = next;
            break;
        }
        x = next;
    }
    x
}

/// Single-excitation amplitudes: the excited-qubit amplitude χ and one β_k
/// per bath mode.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub chi: Complex64,
    pub beta: Vec<Complex64>,
}

impl StateVector {
    pub fn norm_sq(&self) -> f64 {
        self.chi.norm_sqr() + self.beta.iter().map(|b| b.norm_sqr()).sum::<f64>()
    }
}

/// Exact evolution of the initial excited state to time t.
pub fn evolve_exact(bath: &DiscreteBath, t: f64) -> Result<StateVector, OracleError> {
    let eig = ArrowSpectrum::diagonalize(bath)?;
    Ok(eig.state(t, bath.len()))
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasuredEvolution {
    /// per-measurement survival p = |χ(τ)|² (identical across steps: the
    /// projection restores the initial state up to a global phase)
    pub step_survival: Vec<f64>,
    /// cumulative survival Π p after each measurement
    pub cumulative: Vec<f64>,
    /// final survival after n measurements
    pub survival: f64,
    /// −ln(survival)/(nτ)
    pub gamma_est: f64,
    pub recurrence_time: f64,
    /// nτ < recurrence time
    pub guard_ok: bool,
}

/// Periodic ideal projections: evolve τ, record p = |χ|², project back onto
/// the initial state (χ ← χ/|χ|, β ← 0), repeat n times.
pub fn measured_evolution(
    bath: &DiscreteBath,
    tau: f64,
    n: usize,
) -> Result<MeasuredEvolution, OracleError> {
    if !(tau > 0.0) || n < 1 {
        return Err(OracleError::InvalidProtocol);
    }
    let eig = ArrowSpectrum::diagonalize(bath)?;
    let p = eig.survival(tau).norm_sqr();
    let step_survival = vec![p; n];
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 1.0f64;
    for _ in 0..n {
        acc *= p;
        cumulative.push(acc);
    }
    let survival = acc;
    let gamma_est = if survival > 0.0 {
        -survival.ln() / (n as f64 * tau)
    } else {
        f64::INFINITY
    };
    let recurrence_time = bath.recurrence_time();
    Ok(MeasuredEvolution {
        step_survival,
        cumulative,
        survival,
        gamma_est,
        recurrence_time,
        guard_ok: (n as f64) * tau < recurrence_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renorm::{CavityAnchor, SystemBuilder};
    use crate::spectra::{BathModel, CompositeSpectrum};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn qspec() -> QuadSpec {
        QuadSpec::default()
    }

    fn two_level(v: f64, detuning: f64) -> DiscreteBath {
        DiscreteBath::new(vec![1.0 + detuning], vec![v], 1.0).unwrap()
    }

    #[test]
    fn single_mode_resonant_rabi() {
        let v = 0.02;
        let bath = two_level(v, 0.0);
        for &t in &[0.0, 3.0, 17.0, 80.0] {
            let s = evolve_exact(&bath, t).unwrap();
            assert_relative_eq!(
                s.chi.norm_sqr(),
                (v * t).cos().powi(2),
                max_relative = 1e-10,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(s.norm_sq(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_mode_detuned_rabi() {
        // |χ|² = 1 − (V²/Ω²) sin²(Ωt), Ω = sqrt(V² + δ²/4)
        let (v, det) = (0.02, 0.05);
        let bath = two_level(v, det);
        let omega = (v * v + det * det / 4.0).sqrt();
        for &t in &[1.0, 7.0, 33.0] {
            let s = evolve_exact(&bath, t).unwrap();
            let expect = 1.0 - (v * v / (omega * omega)) * (omega * t).sin().powi(2);
            assert_relative_eq!(s.chi.norm_sqr(), expect, max_relative = 1e-10);
        }
    }

    #[test]
    fn initial_state_is_excited() {
        let bath = two_level(0.02, 0.1);
        let s = evolve_exact(&bath, 0.0).unwrap();
        assert_relative_eq!(s.chi.re, 1.0, max_relative = 1e-12);
        assert_abs_diff_eq!(s.chi.im, 0.0, epsilon = 1e-14);
    }

    // dense Jacobi eigensolver, test-only independent oracle
    fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = a.len();
        let mut v = vec![vec![0.0; n]; n];
        for (i, row) in v.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for _sweep in 0..200 {
            let mut off = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    off += a[i][j] * a[i][j];
                }
            }
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k][p];
                        let vkq = v[k][q];
                        v[k][p] = c * vkp - s * vkq;
                        v[k][q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let evals = (0..n).map(|i| a[i][i]).collect();
        (evals, v)
    }

    #[test]
    fn secular_solver_matches_dense_jacobi() {
        // pseudo-irregular small bath
        let k = 24;
        let mut omega = Vec::new();
        let mut coupling = Vec::new();
        let mut x = 0.11f64;
        for i in 0..k {
            x = (x * 97.31).fract();
            omega.push(0.05 + i as f64 * 0.08 + 0.02 * x);
            coupling.push(1e-3 + 5e-3 * ((i as f64 * 1.7).sin().abs()));
        }
        let bath = DiscreteBath::new(omega.clone(), coupling.clone(), 1.0).unwrap();
        let eig = ArrowSpectrum::diagonalize(&bath).unwrap();

        let n = k + 1;
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..k {
            h[0][i + 1] = coupling[i];
            h[i + 1][0] = coupling[i];
            h[i + 1][i + 1] = omega[i] - 1.0;
        }
        let (mut evals, vecs) = jacobi_eigen(h);
        let mut weights: Vec<(f64, f64)> = evals
            .iter()
            .enumerate()
            .map(|(j, &e)| (e, vecs[0][j] * vecs[0][j]))
            .collect();
        weights.sort_by(|a, b| a.0.total_cmp(&b.0));
        evals.sort_by(f64::total_cmp);

        let mine = eig.eigenvalues();
        assert_eq!(mine.len(), n);
        for (a, b) in mine.iter().zip(&evals) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        for (w, (_, wj)) in eig.weights.iter().zip(&weights) {
            assert_abs_diff_eq!(w, wj, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(eig.weight_sum(), 1.0, epsilon = 1e-12);
    }

    fn table_like_system() -> RenormalizedSystem {
        let spectrum = CompositeSpectrum::new(
            vec![BathModel::Lorentzian {
                g: 1e-2,
                omega_cav: 1.0,
                lambda: 5e-3,
            }],
            1.0,
        )
        .unwrap();
        SystemBuilder::new(spectrum, 1.0)
            .anchor(CavityAnchor::Renormalized)
            .build(&qspec())
            .unwrap()
    }

    #[test]
    fn discretized_weight_matches_quadrature() {
        let sys = table_like_system();
        let bath = discretize(&sys, 2.5, 4000, Scheme::Uniform, &qspec()).unwrap();
        let hints = sys.features();
        let exact = quad::integrate(
            |w| sys.effective_density(w),
            0.0,
            2.5,
            &QuadSpec {
                hints,
                ..qspec()
            },
        )
        .unwrap()
        .value;
        assert_relative_eq!(bath.coupling_weight(), exact, max_relative = 1e-3);
    }

    #[test]
    fn refinement_halves_discretization_error() {
        let sys = table_like_system();
        let hints = sys.features();
        let exact = quad::integrate(
            |w| sys.effective_density(w),
            0.0,
            2.5,
            &QuadSpec {
                hints,
                ..qspec()
            },
        )
        .unwrap()
        .value;
        let mut errs = Vec::new();
        for k in [500usize, 1000, 2000, 4000] {
            let bath = discretize(&sys, 2.5, k, Scheme::PeakRefined, &qspec()).unwrap();
            errs.push((bath.coupling_weight() - exact).abs());
        }
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "errors not decreasing: {errs:?}");
        }
    }

    #[test]
    fn zero_coupling_survival_is_one() {
        let sys = SystemBuilder::new(
            CompositeSpectrum::new(
                vec![BathModel::Lorentzian {
                    g: 0.0,
                    omega_cav: 1.0,
                    lambda: 1e-3,
                }],
                1.0,
            )
            .unwrap(),
            1.0,
        )
        .build(&qspec())
        .unwrap();
        let bath = discretize(&sys, 2.0, 64, Scheme::Uniform, &qspec()).unwrap();
        let run = measured_evolution(&bath, 5.0, 10).unwrap();
        assert_eq!(run.survival, 1.0);
        assert_eq!(run.gamma_est, 0.0);
    }

    #[test]
    fn single_measurement_equals_evolve_exact() {
        let sys = table_like_system();
        let bath = discretize(&sys, 2.5, 800, Scheme::PeakRefined, &qspec()).unwrap();
        let tau = 3.0;
        let run = measured_evolution(&bath, tau, 1).unwrap();
        let s = evolve_exact(&bath, tau).unwrap();
        assert_relative_eq!(run.survival, s.chi.norm_sqr(), max_relative = 1e-12);
    }

    #[test]
    fn projection_never_increases_cumulative_survival() {
        let sys = table_like_system();
        let bath = discretize(&sys, 2.5, 400, Scheme::PeakRefined, &qspec()).unwrap();
        let run = measured_evolution(&bath, 2.0, 12).unwrap();
        for w in run.cumulative.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn unitarity_preserved() {
        let sys = table_like_system();
        let bath = discretize(&sys, 2.5, 600, Scheme::PeakRefined, &qspec()).unwrap();
        for &t in &[0.5, 5.0, 40.0] {
            let s = evolve_exact(&bath, t).unwrap();
            assert_abs_diff_eq!(s.norm_sq(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn recurrence_guard_flags_long_protocols() {
        let bath = DiscreteBath::new(
            (0..50).map(|i| 0.1 + i as f64 * 0.1).collect(),
            vec![1e-3; 50],
            1.0,
        )
        .unwrap();
        let rec = bath.recurrence_time();
        assert_relative_eq!(rec, 2.0 * std::f64::consts::PI / 0.1, max_relative = 1e-10);
        let ok = measured_evolution(&bath, rec / 100.0, 10).unwrap();
        assert!(ok.guard_ok);
        let bad = measured_evolution(&bath, rec / 4.0, 10).unwrap();
        assert!(!bad.guard_ok);
    }
}
