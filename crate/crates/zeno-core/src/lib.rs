//! Measurement-modulated decay of a qubit coupled to a lossy cavity and an
//! intrinsic bath, beyond the rotating-wave approximation.
//!
//! The crate is organized around the pipeline
//!
//! 1. [`spectra`] — the bath spectral densities J_i(ω) and their composite,
//! 2. [`quad`] — adaptive quadrature for narrow peaks, semi-infinite tails,
//!    oscillatory sinc² kernels and Cauchy principal values,
//! 3. [`renorm`] — the self-consistent renormalization factors η_i produced by
//!    the unitary transformation that absorbs the counter-rotating couplings,
//! 4. [`zeno`] — the measurement-modulated decay rate γ(τ), the
//!    Weisskopf-Wigner baseline γ₀, the normalized QZE/AZE ratio and 2-D
//!    parameter sweeps,
//! 5. [`dynamics`] — resolvent self-energy, dressed-state poles, survival
//!    amplitude and measured decay traces,
//! 6. [`oracle`] — a brute-force validator that discretizes the baths and
//!    diagonalizes the single-excitation Hamiltonian exactly.
//!
//! All energies are dimensionless in units of a user-chosen reference (the
//! bare qubit spacing Δ by default); times are in units of the inverse.

pub mod dynamics;
pub mod oracle;
pub mod quad;
pub mod renorm;
pub mod spectra;
pub mod zeno;

pub use quad::{QuadError, QuadResult, QuadSpec};
pub use renorm::{CavityAnchor, RenormError, RenormalizedSystem, SystemBuilder};
pub use spectra::{BathModel, CompositeSpectrum, Feature, SpectraError};
pub use zeno::{DecayRates, PhaseDiagram, Regime, SweepAxis};
