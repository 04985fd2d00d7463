//! Direct lattice-image sum: the kernel as a phased row of free-space line
//! sources, H = (iκ/4) Σ_j e^{i j kₓ} H₀⁽¹⁾(√κ · |r − j eₓ|).
//!
//! This is the representation the spectral sum is derived from, so it serves
//! as the independent oracle. It converges absolutely when Im √κ > 0 (each
//! image is damped by e^{−Im√κ·|j|}); for real κ ≥ 0 the images only decay
//! like |j|^{−1/2} and the sum is conditionally convergent — callers must opt
//! into Wynn ε-acceleration of the symmetric partial sums, which is intended
//! for test/oracle use rather than production evaluation.

use super::GreenError;
use crate::channels::{bsqrt, SpectralPoint};
use crate::hankel::hankel_h1_0;
use crate::C;

/// Truncated image sum over |j| ≤ m_images.
///
/// `accelerate` applies the ε-algorithm to the symmetric partial sums and is
/// required when κ is real and non-negative (√κ real ⇒ no image damping).
pub fn green_direct(
    p: &SpectralPoint,
    x: f64,
    z: f64,
    m_images: usize,
    accelerate: bool,
) -> Result<C, GreenError> {
    let k = bsqrt(p.kappa);
    if k.im <= 0.0 && !accelerate {
        return Err(GreenError::TailDivergence);
    }
    let coef = C::new(0.0, 0.25) * p.kappa;
    let image = |j: i64| -> Result<C, GreenError> {
        let d = (x - j as f64).hypot(z);
        let h = hankel_h1_0(k * d).map_err(|_| GreenError::DomainError)?;
        Ok(C::new(0.0, p.kx * j as f64).exp() * h)
    };
    if !accelerate {
        let mut acc = image(0)?;
        for j in 1..=m_images as i64 {
            acc += image(j)? + image(-j)?;
        }
        return Ok(coef * acc);
    }
    // symmetric partial sums S_J, then Wynn ε
    let mut partials = Vec::with_capacity(m_images + 1);
    let mut acc = image(0)?;
    partials.push(acc);
    for j in 1..=m_images as i64 {
        acc += image(j)? + image(-j)?;
        partials.push(acc);
    }
    Ok(coef * epsilon_accelerate(&partials))
}

/// Wynn's ε-algorithm: returns the deepest stable even-column entry.
///
/// The recurrence ε_{k+1}^{(j)} = ε_{k−1}^{(j+1)} + 1/(ε_k^{(j+1)} − ε_k^{(j)})
/// is run over the whole triangle; columns with vanishing differences stop the
/// descent early (the transform has converged to working precision there).
pub(crate) fn epsilon_accelerate(s: &[C]) -> C {
    if s.len() < 3 {
        return *s.last().expect("at least one partial sum");
    }
    let mut prev: Vec<C> = vec![C::new(0.0, 0.0); s.len() + 1]; // ε_{-1}
    let mut curr: Vec<C> = s.to_vec(); // ε_0
    let mut best = *s.last().unwrap();
    let scale = s.iter().map(|v| v.norm()).fold(0.0f64, f64::max).max(1e-300);
    for k in 1..s.len() {
        let mut next = Vec::with_capacity(curr.len() - 1);
        for j in 0..curr.len() - 1 {
            let diff = curr[j + 1] - curr[j];
            if diff.norm() < 1e-290 * scale {
                // column converged; deeper entries would divide by ~0
                return if k % 2 == 1 { curr[j] } else { best };
            }
            next.push(prev[j + 1] + diff.inv());
        }
        if k % 2 == 0 {
            best = *next.last().unwrap();
        }
        prev = curr;
        curr = next;
        if curr.len() < 2 {
            break;
        }
    }
    best
}
