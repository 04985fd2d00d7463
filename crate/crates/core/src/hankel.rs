//! Hankel function H₀⁽¹⁾ = J₀ + iY₀ for the free-space part of the kernel.
//!
//! Two regimes are stitched together:
//!
//! * ascending power series for J₀ and the regularized part of Y₀, summed in
//!   double-double (compensated) arithmetic on the real axis — the alternating
//!   series loses ~|I₀(x)|·eps of absolute accuracy in plain f64, which is not
//!   good enough near the switchover;
//! * the large-argument asymptotic series beyond |z| = 25, with Cody-Waite
//!   reduction of the oscillatory phase so that arguments up to 1e4 keep full
//!   relative accuracy.
//!
//! Complex arguments (closed-channel evaluation, poles below the real axis)
//! take the same two routes in ordinary complex arithmetic; the accuracy there
//! is ~1e-10 relative near the switchover, which is all the kernel oracles
//! need. The contract 1e-12 applies on the real axis and is covered by the
//! double-double path.

use crate::C;
use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Real-axis switchover between the series and the asymptotic expansion.
/// At x = 25 the optimally truncated asymptotic tail is ~e^{−50} and the
/// double-double series still has ~40 guard bits left.
const REAL_SWITCH: f64 = 25.0;
/// Complex switchover; plain f64 series keeps ~1e-10 relative up to here.
const COMPLEX_SWITCH: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum HankelError {
    #[error("H0(z) is singular at z = 0")]
    DomainError,
}

/// H₀⁽¹⁾(z) = J₀(z) + iY₀(z).
///
/// Relative error ≤ 1e-12 for real z ∈ [1e-8, 1e4]; ~1e-10 for complex z of
/// comparable modulus (used off-axis only by oracles and closed-channel
/// tails). z = 0 is rejected.
pub fn hankel_h1_0(z: C) -> Result<C, HankelError> {
    if z == C::new(0.0, 0.0) {
        return Err(HankelError::DomainError);
    }
    if z.im == 0.0 && z.re > 0.0 {
        let x = z.re;
        if x > REAL_SWITCH {
            return Ok(h0_asymptotic(z));
        }
        let (j0, y0) = j0_y0_real_dd(x);
        return Ok(C::new(j0, y0));
    }
    if z.norm() > COMPLEX_SWITCH {
        Ok(h0_asymptotic(z))
    } else {
        Ok(h0_series_complex(z))
    }
}

/// J₀(z) by the ascending series; intended for |z| ≲ 20.
pub(crate) fn j0_complex(z: C) -> C {
    let q = z * z * 0.25;
    let mut term = C::new(1.0, 0.0);
    let mut sum = term;
    for k in 1..200 {
        term *= -q / ((k * k) as f64);
        sum += term;
        if term.norm() < 1e-17 * sum.norm().max(1.0) {
            break;
        }
    }
    sum
}

/// Σ_{k≥1} (−1)^{k+1} H_k (z²/4)^k/(k!)², the entire series in
/// Y₀ = (2/π)(ln(z/2) + γ)J₀ + (2/π)·hsum. Same range as [`j0_complex`].
pub(crate) fn y0_hsum_complex(z: C) -> C {
    let q = z * z * 0.25;
    let mut term = C::new(1.0, 0.0); // (q)^k/(k!)², sign handled below
    let mut h = 0.0;
    let mut sum = C::new(0.0, 0.0);
    let mut sign = 1.0;
    for k in 1..200 {
        term *= q / ((k * k) as f64);
        h += 1.0 / k as f64;
        sum += term * (sign * h);
        sign = -sign;
        if term.norm() * h < 1e-17 * sum.norm().max(1.0) {
            break;
        }
    }
    sum
}

/// Entire remainder of Y₀ after the logarithmic part is removed:
/// y_reg(z) = Y₀(z) − (2/π)(ln(z/2) + γ)J₀(z). Defined for all z; series.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn y0_reg_complex(z: C) -> C {
    y0_hsum_complex(z) * (2.0 / PI)
}

fn h0_series_complex(z: C) -> C {
    let j0 = j0_complex(z);
    let y0 = (z / 2.0).ln() + EULER_GAMMA;
    let y0 = (j0 * y0 + y0_hsum_complex(z)) * (2.0 / PI);
    j0 + C::new(0.0, 1.0) * y0
}

// ---------------------------------------------------------------------------
// Double-double series on the real axis.
// ---------------------------------------------------------------------------

/// Unevaluated sum hi + lo with |lo| ≤ ulp(hi)/2.
#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> Dd {
    let hi = a + b;
    let bb = hi - a;
    let lo = (a - (hi - bb)) + (b - bb);
    Dd { hi, lo }
}

#[inline]
fn two_prod(a: f64, b: f64) -> Dd {
    let hi = a * b;
    let lo = a.mul_add(b, -hi);
    Dd { hi, lo }
}

impl Dd {
    #[inline]
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let lo = s.lo + self.lo + o.lo;
        let r = two_sum(s.hi, lo);
        Dd { hi: r.hi, lo: r.lo }
    }

    #[inline]
    fn mul(self, o: Dd) -> Dd {
        let p = two_prod(self.hi, o.hi);
        let lo = p.lo + self.hi * o.lo + self.lo * o.hi;
        let r = two_sum(p.hi, lo);
        Dd { hi: r.hi, lo: r.lo }
    }

    #[inline]
    fn scale(self, s: f64) -> Dd {
        self.mul(Dd::from(s))
    }

    /// Division by an exactly representable f64 with full dd accuracy.
    #[inline]
    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let p = two_prod(q1, d);
        let tail = ((self.hi - p.hi) - p.lo + self.lo) / d;
        let r = two_sum(q1, tail);
        Dd { hi: r.hi, lo: r.lo }
    }

    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    #[inline]
    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// (J₀(x), Y₀(x)) for 0 < x ≤ REAL_SWITCH with ≤1e-13 relative error in the
/// complex pair (J₀, Y₀) — the alternating-series cancellation is absorbed by
/// the double-double accumulators.
fn j0_y0_real_dd(x: f64) -> (f64, f64) {
    let q = two_prod(x, x).scale(0.25); // x²/4 exactly, then /4 exact
    let mut term = Dd::from(1.0);
    let mut j = Dd::from(1.0);
    let mut hsum = Dd::from(0.0);
    let mut h = Dd::from(0.0);
    let mut sign = -1.0;
    for k in 1..260u32 {
        let kk = (k as f64) * (k as f64); // exact for k < 9.4e7
        term = term.mul(q).div_f64(kk);
        // harmonic number in dd: 1/k with its rounding correction
        let kf = k as f64;
        let inv = 1.0 / kf;
        let corr = (-inv).mul_add(kf, 1.0) / kf;
        h = h.add(Dd { hi: inv, lo: corr });
        j = j.add(if sign < 0.0 { term.neg() } else { term });
        // hsum gets (−1)^{k+1} H_k term_k; (−1)^{k+1} = −sign
        let contrib = term.mul(h);
        hsum = hsum.add(if sign < 0.0 { contrib } else { contrib.neg() });
        sign = -sign;
        if term.hi.abs() * (1.0 + h.hi) < 1e-40 * (1.0 + j.hi.abs()) {
            break;
        }
    }
    let j0 = j.value();
    let lg = Dd::from((0.5 * x).ln()).add(Dd::from(EULER_GAMMA));
    let y0 = j.mul(lg).add(hsum).scale(2.0 / PI).value();
    (j0, y0)
}

// ---------------------------------------------------------------------------
// Asymptotic expansion with careful phase reduction.
// ---------------------------------------------------------------------------

// 2π split into three parts with 26-bit mantissas so n·P_i is exact for
// integer n < 2^26 (Cody-Waite range reduction).
const TWO_PI_1: f64 = 6.283_185_362_815_857;
const TWO_PI_2: f64 = -5.563_627_070_159_782e-8;
const TWO_PI_3: f64 = 2.449_293_598_294_706_4e-16;

/// x mod 2π as an accurate residual for phase evaluation, |result| ≤ π + ulp.
fn reduce_two_pi(x: f64) -> f64 {
    let n = (x / (2.0 * PI)).round();
    ((x - n * TWO_PI_1) - n * TWO_PI_2) - n * TWO_PI_3
}

/// H₀⁽¹⁾(z) ~ √(2/(πz)) e^{i(z−π/4)} Σ_k i^k a_k / z^k for large |z|,
/// a_k = (−1)^k ((2k−1)!!)² / (k! 8^k). Truncated at the smallest term.
fn h0_asymptotic(z: C) -> C {
    let mut term = C::new(1.0, 0.0);
    let mut sum = term;
    let mut prev = f64::INFINITY;
    for k in 0..40u32 {
        let c = (2 * k + 1) as f64;
        let ratio = C::new(0.0, -1.0) * (c * c) / (8.0 * (k as f64 + 1.0) * z);
        term *= ratio;
        let t = term.norm();
        if t >= prev || t < 1e-18 {
            break;
        }
        prev = t;
        sum += term;
    }
    // e^{i(z − π/4)} = e^{i(reduce(Re z) − π/4)} · e^{−Im z}; the reduction
    // keeps the phase accurate for Re z up to ~1e4·π without precision loss.
    let phase = reduce_two_pi(z.re) - PI / 4.0;
    let osc = C::new(phase.cos(), phase.sin()) * (-z.im).exp();
    let amp = (C::new(2.0 / PI, 0.0) / z).sqrt();
    amp * osc * sum
}
