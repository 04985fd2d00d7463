//! Quasi-periodic Helmholtz kernel H(κ; x, z) on the unit-period lattice.
//!
//! H is the kernel of the scattering integral operator: the field radiated to
//! (x, z) by a line of phased point sources at (x + j, 0), j ∈ ℤ, with Bloch
//! phase e^{i j kₓ} and free-space factor (iκ/4)H₀⁽¹⁾(√κ · r).  Two equivalent
//! representations are implemented and cross-checked:
//!
//! * a **spectral sum** over diffraction channels,
//!   H = (iκ/2) Σₘ e^{i x kₘ + i|z| βₘ} / βₘ with kₘ = kₓ + 2πm,
//!   geometrically convergent for |z| > 0 (module [`spectral`]), and
//! * a **direct image sum** over lattice copies of H₀⁽¹⁾ (module [`direct`]),
//!   absolutely convergent when Im √κ > 0 and used as the independent oracle.
//!
//! Neither representation behaves near the source line: the spectral series
//! stalls as |z| → 0 and the image sum hides the logarithmic singularity.
//! Module [`split`] evaluates H there by subtracting an asymptotic model of
//! the closed-channel terms whose lattice sum is a polylogarithm, leaving a
//! rapidly convergent correction; it also produces the smooth kernel part
//! S(κ; Δ) = H(κ; Δ) + (κ/2π) J₀(√κ d) ln d, d = |Δ|, which is what a
//! singularity-subtracted quadrature rule needs on the diagonal (the ln d
//! moment is integrated separately).

mod direct;
mod spectral;
mod split;

pub use direct::green_direct;

use crate::channels::{bsqrt, SpectralPoint};
use crate::C;

/// Below this |z| the spectral sum is handed over to the split evaluator.
const Z_SPLIT: f64 = 0.05;

/// β-values are precomputed for |m| ≤ M_CACHE; larger |m| fall back to bsqrt.
const M_CACHE: i32 = 512;

/// Hard ceiling on one-sided spectral terms before giving up.
const M_TERMS_BUDGET: i32 = 20_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GreenError {
    /// Kernel or Hankel function evaluated at a source point.
    #[error("kernel evaluated at a lattice source point")]
    DomainError,
    /// The spectral sum could not reach the requested tolerance. Happens for
    /// |z| extremely small (the series decays like e^{-2π m |z|}) and always
    /// on the axis itself, where convergence is only conditional.
    #[error("spectral sum reached {terms} terms with est_error {est:.3e} > tol {tol:.3e}")]
    SlowConvergence { tol: f64, est: f64, terms: usize },
    /// κ coincides exactly with the diffraction threshold k²ₓ,ₘ; the channel-m
    /// term is infinite there (βₘ = 0).
    #[error("kappa lies exactly on the diffraction threshold of channel m={0}")]
    BranchPoint(i32),
    /// For real κ ≥ 0 the image sum is only conditionally convergent; the
    /// caller must opt into series acceleration.
    #[error("image sum does not converge for real kappa without acceleration")]
    TailDivergence,
}

/// Truncated-sum result with an a-posteriori tail bound.
#[derive(Debug, Clone, Copy)]
pub struct KernelEval {
    pub value: C,
    pub terms_used: usize,
    /// Upper estimate of the truncation error: first neglected term divided
    /// by (1 − ratio) of the observed geometric decay.
    pub est_error: f64,
}

/// Per-(κ, kₓ) working set: branch square roots of all channels likely to be
/// touched, so repeated kernel evaluations (quadrature assembly, field maps)
/// do not recompute them pair by pair.
#[derive(Debug, Clone)]
pub struct KernelCache {
    pub p: SpectralPoint,
    /// √κ on the physical branch.
    pub k: C,
    /// βₘ for m ∈ [−M_CACHE, M_CACHE], indexed by m + M_CACHE.
    betas: Vec<C>,
    /// Smallest |m| for which the split model is in its asymptotic regime.
    m0: i32,
}

impl KernelCache {
    pub fn new(p: SpectralPoint) -> Result<Self, GreenError> {
        let k = bsqrt(p.kappa);
        let mut betas = Vec::with_capacity((2 * M_CACHE + 1) as usize);
        for m in -M_CACHE..=M_CACHE {
            let b = p.beta(m);
            if b.norm_sqr() == 0.0 {
                return Err(GreenError::BranchPoint(m));
            }
            betas.push(b);
        }
        // Model regime: q = 2π m₀ − |kx| with q² ≥ 4|κ| keeps |κ/q²| ≤ 1/4.
        let a = p.kx.abs();
        let need = (a + 2.0 * p.kappa.norm().sqrt()) / (2.0 * std::f64::consts::PI);
        let m0 = (need.ceil() as i32 + 1).max(2);
        Ok(KernelCache { p, k, betas, m0 })
    }

    #[inline]
    pub(crate) fn beta(&self, m: i32) -> C {
        if m.abs() <= M_CACHE {
            self.betas[(m + M_CACHE) as usize]
        } else {
            self.p.beta(m)
        }
    }

    #[inline]
    pub(crate) fn m0(&self) -> i32 {
        self.m0
    }

    /// Reduce x to the fundamental period (−1/2, 1/2]; the discarded integer
    /// part returns as the exact Bloch phase of the kernel.
    #[inline]
    fn reduce(&self, x: f64) -> (f64, C) {
        let n = x.round();
        if n == 0.0 {
            return (x, C::new(1.0, 0.0));
        }
        let phase = C::new(0.0, self.p.kx * n).exp();
        (x - n, phase)
    }

    /// Spectral-sum evaluation; see [`green_spectral`] for the contract.
    pub fn spectral(&self, x: f64, z: f64, tol: f64) -> Result<KernelEval, GreenError> {
        spectral::sum(self, x, z, tol)
    }

    /// Term-wise differentiated spectral sum (∂ₓH, ∂_zH); requires z ≠ 0.
    pub fn gradient(&self, x: f64, z: f64, tol: f64) -> Result<(C, C), GreenError> {
        spectral::gradient(self, x, z, tol)
    }

    /// Full kernel H at arbitrary (x, z) off the source line, choosing the
    /// spectral or split representation by |z|.
    pub fn full(&self, x: f64, z: f64) -> Result<C, GreenError> {
        let (xr, phase) = self.reduce(x);
        let s = z.abs();
        if s >= Z_SPLIT {
            // Comfortably off-axis: plain spectral sum.
            let ev = self.spectral(xr, s, 1e-13 * (1.0 + self.p.kappa.norm()))?;
            return Ok(phase * ev.value);
        }
        if xr == 0.0 && s == 0.0 {
            return Err(GreenError::DomainError);
        }
        let parts = split::eval(self, xr, s)?;
        parts.h.map(|h| phase * h).ok_or(GreenError::DomainError)
    }

    /// Smooth kernel part S(κ; Δ) = H + (κ/2π) J₀(√κ d) ln d at a separation
    /// Δ = (dx, dz) between points of the same period cell. Finite at Δ = 0.
    pub fn smooth(&self, dx: f64, dz: f64) -> Result<C, GreenError> {
        let s = dz.abs();
        let d = dx.hypot(dz);
        if dx.abs() <= 0.5 && s < Z_SPLIT {
            let parts = split::eval(self, dx, s)?;
            return Ok(parts.smooth);
        }
        // Far from the self-image the regrouping is numerically harmless:
        // evaluate H directly and add the (finite) log term back.
        let h = self.full(dx, dz)?;
        let j0 = crate::hankel::j0_complex(self.k * d);
        let kq = self.p.kappa / (2.0 * std::f64::consts::PI);
        Ok(h + kq * j0 * d.ln())
    }
}

/// Partial spectral sum of the quasi-periodic kernel with symmetric adaptive
/// truncation: channels are added in pairs ±m until the geometric tail bound
/// drops below `tol` (an absolute bound on the truncation error).
///
/// Errors: [`GreenError::BranchPoint`] if κ sits exactly on a diffraction
/// threshold, [`GreenError::SlowConvergence`] if the tolerance is unreachable
/// within the term budget — in particular for z = 0, where the series is only
/// conditionally convergent.
pub fn green_spectral(p: &SpectralPoint, x: f64, z: f64, tol: f64) -> Result<KernelEval, GreenError> {
    KernelCache::new(*p)?.spectral(x, z, tol)
}

/// Term-wise differentiated spectral sum, (∂ₓH, ∂_zH).
///
/// Requires z ≠ 0: the differentiated series has no decay at all on the axis
/// (the ∂_z factor iβₘ cancels the 1/βₘ), so z = 0 is a domain error.
pub fn green_gradient(p: &SpectralPoint, x: f64, z: f64, tol: f64) -> Result<(C, C), GreenError> {
    KernelCache::new(*p)?.gradient(x, z, tol)
}
