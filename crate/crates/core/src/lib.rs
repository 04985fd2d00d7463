//! Siegert states of 2D periodic dielectric structures.
//!
//! This crate computes resonance poles (Siegert states) of dielectric gratings
//! that are periodic in `x` with period 1 and confined in `z`. The scattering
//! problem for the out-of-plane field component is recast as a Lippmann-Schwinger
//! integral equation over the structure cross-section,
//!
//! ```text
//! E = E_inc + Ĥ(κ)[E],    (Ĥ(κ)[E])(r) = ∫ (ε(r') − 1) H(κ; r − r') E(r') dr'
//! ```
//!
//! where `κ = k²` is the spectral parameter and `H` the quasi-periodic Green's
//! kernel. Siegert states are the poles `κ_n = k²_n − iΓ_n` of the generalized
//! resolvent `[1 − Ĥ(κ)]⁻¹`; `Γ_n ≥ 0` is the resonance width. The crate provides
//!
//! * the branch/threshold bookkeeping the cut κ-plane requires ([`channels`]),
//! * kernel evaluation with a singularity-split for on-axis points ([`green`]),
//! * structure geometry and high-order quadrature ([`structures`], [`quad`]),
//! * the discretized operator and its spectral tooling ([`operator`]),
//! * pole search, refinement and mode post-processing ([`solver`]),
//! * plane-wave scattering and resonance fits ([`scattering`]),
//! * pole continuation in the inter-array coupling, locating bound states in
//!   the continuum ([`continuation`]),
//! * wave-packet decay laws driven by a single pole ([`wavepacket`]).
//!
//! Lengths are measured in units of the period; κ carries units 1/length².

pub mod channels;
pub mod green;
pub mod hankel;
pub mod linalg;
pub mod operator;
pub mod quad;
pub mod scattering;
pub mod solver;
pub mod structures;
pub mod continuation;
pub mod wavepacket;

/// Complex scalar used throughout.
pub type C = num_complex::Complex<f64>;

pub use channels::{branch_sqrt, SpectralPoint};
pub use structures::StructureSpec;
