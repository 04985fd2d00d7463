//! Near-axis kernel evaluation by polylogarithm regularization.
//!
//! The spectral series stalls as |z| → 0 because the evanescent channels only
//! decay like e^{−2π|m||z|}.  But for large |m| each term approaches an
//! elementary model: with q = |kₘ| and γₘ = −iβₘ = √(q² − κ),
//! e^{−sγ}/γ ≈ e^{−sq} · Σ_{p=1..5} G_p(s, κ)/q^p, the G_p read off the
//! expansions of √(q²−κ) and its reciprocal.  Re-expanded around 2πm instead
//! of q = 2πm ± kₓ (binomial weights E_p), the model's lattice sum telescopes
//! into polylogarithms Li_p(u±) at u± = e^{2π(±ix − s)}, which are evaluated
//! by their expansion around u = 1.  What remains — exact minus model for
//! moderate m — converges like m^{−6} even on the axis.
//!
//! The same pieces assemble the smooth kernel part
//! S(κ; Δ) = H + (κ/2π) J₀(√κ d) ln d: the Li₁ terms carry the kernel's
//! logarithm, ln(1 − u±) = ln d + (analytic), so S follows by regrouping
//! rather than by numerically cancelling ln d.

use super::{spectral, GreenError, KernelCache};
use crate::hankel::j0_complex;
use crate::C;
use std::f64::consts::PI;

/// Hard cap on the exact-minus-model correction sweep.  The m^{−6} decay of
/// the corrections makes the tail beyond 600 invisible at f64 precision for
/// |κ| well past the intended operating range.
const M_CAP: i32 = 600;

pub(super) struct SplitParts {
    /// Full kernel H; `None` when d = 0 (the kernel itself diverges there).
    pub h: Option<C>,
    /// Smooth part S(κ; Δ), finite for every separation including zero.
    pub smooth: C,
}

/// ζ(m) for m = 5, 4, …, −62 (index i ↔ m = 5 − i).  The m = 1 slot is never
/// read: the j = n−1 term of the Li expansion is the logarithmic one and is
/// handled separately.  Negative even arguments are exact zeros.
#[rustfmt::skip]
const ZETA_TABLE: [f64; 68] = [
    1.0369277551433699263,
    1.0823232337111381915,
    1.2020569031595942854,
    1.6449340668482264365,
    f64::NAN,
    -0.5,
    -0.083333333333333333333,
    0.0,
    0.0083333333333333333333,
    0.0,
    -0.003968253968253968254,
    0.0,
    0.0041666666666666666667,
    0.0,
    -0.0075757575757575757576,
    0.0,
    0.021092796092796092796,
    0.0,
    -0.083333333333333333333,
    0.0,
    0.44325980392156862745,
    0.0,
    -3.0539543302701197438,
    0.0,
    26.456212121212121212,
    0.0,
    -281.46014492753623188,
    0.0,
    3607.510546398046398,
    0.0,
    -54827.583333333333333,
    0.0,
    974936.82385057471264,
    0.0,
    -20052695.796688078946,
    0.0,
    472384867.72162990196,
    0.0,
    -12635724795.916666667,
    0.0,
    380879311252.45368812,
    0.0,
    -12850850499305.083333,
    0.0,
    482414483548501.70372,
    0.0,
    -20040310656516252.738,
    0.0,
    916774360319533077.57,
    0.0,
    -45979888343656503490.0,
    0.0,
    2.5180471921451095697e21,
    0.0,
    -1.5001733492153928734e23,
    0.0,
    9.6899578874635940656e24,
    0.0,
    -6.7645882379292820991e26,
    0.0,
    5.089065946866228969e28,
    0.0,
    -4.1147288792557978698e30,
    0.0,
    3.566658209537555611e32,
    0.0,
    -3.3066089876577576726e34,
    0.0,
];

#[inline]
fn zeta_int(m: i32) -> f64 {
    ZETA_TABLE[(5 - m) as usize]
}

/// (e^w − 1)/w, stable near w = 0; equals 1 there.
fn em1(w: C) -> C {
    if w.norm() > 0.1 {
        return (w.exp() - 1.0) / w;
    }
    // Σ_{k≥0} w^k/(k+1)!  — 12 terms give < 1e-19 at |w| = 0.1
    let mut acc = C::new(0.0, 0.0);
    let mut t = C::new(1.0, 0.0);
    for k in 1..=13 {
        acc += t;
        t = t * w / (k as f64 + 1.0);
    }
    acc
}

/// Li_n(e^w) for n = 2..=5 and |w| < 2π via the expansion around w = 0:
/// the j = n−1 term carries w^{n−1}(H_{n−1} − ln(−w))/(n−1)!, all others are
/// ζ(n−j) w^j/j!.  At w = 0 this is exactly ζ(n).
fn li_exp(n: i32, w: C) -> C {
    debug_assert!((2..=5).contains(&n));
    if w.norm_sqr() == 0.0 {
        return C::new(zeta_int(n), 0.0);
    }
    const HARMONIC: [f64; 5] = [0.0, 1.0, 1.5, 11.0 / 6.0, 25.0 / 12.0];
    let ln_mw = (-w).ln();
    let mut acc = C::new(0.0, 0.0);
    let mut wj = C::new(1.0, 0.0); // w^j / j!
    let mut settled = 0;
    for j in 0..=(62 + n) {
        let t = if j == n - 1 {
            wj * (HARMONIC[(n - 1) as usize] - ln_mw)
        } else {
            zeta_int(n - j) * wj
        };
        acc += t;
        if j > n + 2 {
            if t.norm() < 1e-17 * acc.norm().max(1e-30) {
                settled += 1;
                if settled >= 2 {
                    break;
                }
            } else {
                settled = 0;
            }
        }
        wj = wj * w / (j as f64 + 1.0);
    }
    acc
}

/// Coefficients of the large-q model e^{−sγ}/γ = e^{−sq} Σ G_p/q^p.
fn gcoef(s: f64, w: C) -> [C; 5] {
    let w2 = w * w;
    let w3 = w2 * w;
    let w4 = w2 * w2;
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s2 * s2;
    [
        C::new(1.0, 0.0),
        0.5 * s * w,
        0.5 * w + s2 * w2 / 8.0,
        0.375 * s * w2 + s3 * w3 / 48.0,
        0.375 * w2 + s2 * w3 / 8.0 + s4 * w4 / 384.0,
    ]
}

/// Re-expansion of Σ G_p/(2πm + a)^p as Σ E_p/(2πm)^p, to the same order.
fn ecoef(g: &[C; 5], a: f64) -> [C; 5] {
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a2 * a2;
    [
        g[0],
        g[1] - a * g[0],
        g[2] - 2.0 * a * g[1] + a2 * g[0],
        g[3] - 3.0 * a * g[2] + 3.0 * a2 * g[1] - a3 * g[0],
        g[4] - 4.0 * a * g[3] + 6.0 * a2 * g[2] - 4.0 * a3 * g[1] + a4 * g[0],
    ]
}

/// Evaluate H (for d > 0) and S at reduced separation |x| ≤ 1/2, s = |z| ≥ 0.
/// Valid while √(x² + s²) < 1, i.e. for any point handed over by the |z|
/// threshold in the caller.
pub(super) fn eval(c: &KernelCache, x: f64, s: f64) -> Result<SplitParts, GreenError> {
    debug_assert!(x.abs() <= 0.5 + 1e-12 && s >= 0.0);
    let kappa = c.p.kappa;
    let a = c.p.kx;
    let m0 = c.m0();
    let d = x.hypot(s);
    let two_pi = 2.0 * PI;

    // exact channel window |m| < m0 (contains every open channel)
    let mut acc = spectral::term(c, x, s, 0)?;
    for m in 1..m0 {
        acc += spectral::term(c, x, s, m)?;
        acc += spectral::term(c, x, s, -m)?;
    }

    let w_plus = C::new(-two_pi * s, two_pi * x);
    let w_minus = C::new(-two_pi * s, -two_pi * x);
    let u_plus = w_plus.exp();
    let u_minus = w_minus.exp();
    let a_plus = C::new(-s * a, x * a).exp();
    let a_minus = C::new(s * a, x * a).exp();
    let g = gcoef(s, kappa);
    let ep = ecoef(&g, a);
    let em = ecoef(&g, -a);

    // one pass m = 1, 2, …: below m0 accumulate the partial sums that must be
    // excised from the Li tails; from m0 on, exact-minus-model corrections
    let mut ps_p = [C::new(0.0, 0.0); 5];
    let mut ps_m = [C::new(0.0, 0.0); 5];
    let mut upow = C::new(1.0, 0.0);
    let mut umow = C::new(1.0, 0.0);
    let half_kappa = 0.5 * kappa;
    let thresh = 1e-16 * (1.0 + kappa.norm());
    let mut streak = 0;
    for m in 1..=M_CAP {
        upow *= u_plus;
        umow *= u_minus;
        if m < m0 {
            let mf = m as f64;
            let mut inv = 1.0 / mf;
            for p in 0..5 {
                ps_p[p] += upow * inv;
                ps_m[p] += umow * inv;
                inv /= mf;
            }
            continue;
        }
        let qm = two_pi * m as f64;
        let mut sp = C::new(0.0, 0.0);
        let mut sm = C::new(0.0, 0.0);
        let mut inv = 1.0 / qm;
        for p in 0..5 {
            sp += ep[p] * inv;
            sm += em[p] * inv;
            inv /= qm;
        }
        let corr = (spectral::term(c, x, s, m)? - half_kappa * a_plus * upow * sp)
            + (spectral::term(c, x, s, -m)? - half_kappa * a_minus * umow * sm);
        acc += corr;
        if corr.norm() < thresh {
            streak += 1;
            if streak >= 2 {
                break;
            }
        } else {
            streak = 0;
        }
    }

    // polylogarithm tails for p = 2..5 (model summed over all m ≥ m0)
    let mut scale = 1.0 / (two_pi * two_pi);
    for p in 2..=5 {
        let idx = (p - 1) as usize;
        acc += half_kappa
            * scale
            * (a_plus * ep[idx] * (li_exp(p, w_plus) - ps_p[idx])
                + a_minus * em[idx] * (li_exp(p, w_minus) - ps_m[idx]));
        scale /= two_pi;
    }

    // p = 1: the tail that carries the logarithm.
    //   Li₁(u±) = −ln(1 − u±) = −[ln 2π + ln d ∓ iθ + ln em1(w±)],
    // θ the polar angle of (s, x).  H takes it verbatim; S regroups the ln d
    // against +(κ/2π) J₀ ln d so that d = 0 stays finite.
    let kq4 = kappa / (4.0 * PI);
    let lem_p = em1(w_plus).ln();
    let lem_m = em1(w_minus).ln();
    let ln_2pi = two_pi.ln();

    let h = if d > 0.0 {
        let theta = x.atan2(s);
        let li1_p = -(C::new(ln_2pi + d.ln(), -theta) + lem_p);
        let li1_m = -(C::new(ln_2pi + d.ln(), theta) + lem_m);
        Some(acc + kq4 * (a_plus * (li1_p - ps_p[0]) + a_minus * (li1_m - ps_m[0])))
    } else {
        None
    };

    let mut smooth = acc
        - kq4
            * ((a_plus + a_minus) * ln_2pi
                + a_plus * (lem_p + ps_p[0])
                + a_minus * (lem_m + ps_m[0]));
    if d > 0.0 {
        let theta = x.atan2(s);
        let j0 = j0_complex(c.k * d);
        smooth += kappa / two_pi * d.ln() * (j0 - 0.5 * (a_plus + a_minus));
        smooth += kq4 * C::new(0.0, theta) * (a_plus - a_minus);
    }

    Ok(SplitParts { h, smooth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::SpectralPoint;
    use approx::assert_relative_eq;

    #[test]
    fn model_reproduces_exact_channel_terms_to_sixth_order() {
        // e^{−sγ}/γ vs e^{−sq} Σ G_p/q^p: halving 1/q must shrink the defect
        // by roughly 2⁶ (modulo the e^{−sq} prefactor, which we divide out)
        let s = 0.02;
        let w = C::new(9.0, 2.0);
        let g = gcoef(s, w);
        let defect = |q: f64| -> f64 {
            let gamma = (C::new(q * q, 0.0) - w).sqrt();
            let exact = (-s * gamma).exp() / gamma;
            let mut model = C::new(0.0, 0.0);
            let mut inv = 1.0 / q;
            for p in 0..5 {
                model += g[p] * inv;
                inv /= q;
            }
            model *= (-s * q).exp();
            ((exact - model) / (-s * q).exp()).norm()
        };
        let d30 = defect(30.0);
        let d60 = defect(60.0);
        assert!(d30 < 1e-7, "model too crude at q=30: {d30:.3e}");
        assert!(d60 < d30 / 40.0, "not sixth order: {d30:.3e} -> {d60:.3e}");
    }

    #[test]
    fn binomial_recentering_matches_direct_model() {
        // Σ E_p/(2πm)^p must equal Σ G_p/q^p with q = 2πm + a, up to the same
        // 1/q⁶ order
        let s = 0.01;
        let w = C::new(4.0, 1.0);
        let a = 0.4;
        let g = gcoef(s, w);
        let e = ecoef(&g, a);
        let m = 20.0;
        let base = 2.0 * PI * m;
        let q = base + a;
        let mut lhs = C::new(0.0, 0.0);
        let mut rhs = C::new(0.0, 0.0);
        let mut ib = 1.0 / base;
        let mut iq = 1.0 / q;
        for p in 0..5 {
            lhs += e[p] * ib;
            rhs += g[p] * iq;
            ib /= base;
            iq /= q;
        }
        assert!((lhs - rhs).norm() < rhs.norm() * 1e-9, "defect {:.3e}", (lhs - rhs).norm());
    }

    #[test]
    fn li_matches_brute_force_series_inside_the_disk() {
        let w = C::new(-0.7, 1.1);
        let u = w.exp();
        for n in 2..=5 {
            let mut brute = C::new(0.0, 0.0);
            let mut up = C::new(1.0, 0.0);
            for m in 1..=400 {
                up *= u;
                brute += up / (m as f64).powi(n);
            }
            let got = li_exp(n, w);
            assert_relative_eq!(got.re, brute.re, max_relative = 1e-13);
            assert_relative_eq!(got.im, brute.im, max_relative = 1e-13);
        }
    }

    #[test]
    fn li_at_one_is_zeta() {
        assert_relative_eq!(li_exp(2, C::new(0.0, 0.0)).re, 1.6449340668482264, max_relative = 1e-15);
        assert_relative_eq!(li_exp(5, C::new(0.0, 0.0)).re, 1.0369277551433699, max_relative = 1e-15);
    }

    #[test]
    fn dilogarithm_reflection_identity_near_one() {
        // Li₂(u) + Li₂(1−u) = π²/6 − ln u ln(1−u), probed where u is close to
        // 1 and 1−u close to 0 — exactly the regime the kernel uses
        let u = C::new(0.98, 0.01);
        let one_minus_u = C::new(1.0, 0.0) - u;
        let lhs = li_exp(2, u.ln()) + li_exp(2, one_minus_u.ln());
        let rhs = C::new(PI * PI / 6.0, 0.0) - u.ln() * one_minus_u.ln();
        assert!((lhs - rhs).norm() < 1e-13, "{lhs} vs {rhs}");
    }

    /// Frozen 50-digit image-sum evaluations (J = 700 damped lattice images):
    /// (Re κ, Im κ, kₓ, x, z, Re H, Im H).
    #[rustfmt::skip]
    const IMAGE_SUM_TABLE: [(f64, f64, f64, f64, f64, f64, f64); 7] = [
        (2.3, 0.7, 0.4, 0.13, 0.002, -0.051352741501185773693, 0.79771390207761572471),
        (2.3, 0.7, 0.4, 0.13, 0.0, -0.051308498555050404062, 0.79773136037919107772),
        (2.3, 0.7, 0.4, 0.0, 0.01, 0.91724247359032121053, 1.1107126744709861109),
        (2.3, 0.7, 0.4, 0.49, 0.003, -0.50432220698392785122, 0.6220823887546340723),
        (2.3, 0.7, 0.4, 0.0001, 0.0, 2.603052691632111646, 1.623889662848897612),
        (2.3, 0.7, 0.4, 0.0, 0.0001, 2.603079266051570137, 1.6239096799886951157),
        (40.0, 2.0, -1.1, 0.31, 0.004, -8.6373485671245138772, -1.3122950180526969394),
    ];

    #[test]
    fn near_axis_kernel_matches_frozen_image_sums() {
        for &(kre, kim, kx, x, z, hre, him) in &IMAGE_SUM_TABLE {
            let p = SpectralPoint { kappa: C::new(kre, kim), kx };
            let c = KernelCache::new(p).unwrap();
            let got = eval(&c, x, z).unwrap().h.unwrap();
            let want = C::new(hre, him);
            assert!(
                (got - want).norm() <= 5e-12 * want.norm(),
                "H({kre}+{kim}i; {x}, {z}) = {got} want {want}"
            );
        }
    }

    /// S(κ; 0, 0) references: iκ/4 − (κ/2π)(ln(√κ/2) + γ) + lattice part,
    /// evaluated at 50 digits: (Re κ, Im κ, kₓ, Re S, Im S).
    #[rustfmt::skip]
    const S_AT_ZERO_TABLE: [(f64, f64, f64, f64, f64); 3] = [
        (2.3, 0.7, 0.4, -0.7684244715050431535, 0.59779986166864628781),
        (40.0, 2.0, -1.1, -11.969458099880795642, 8.5095088007475779992),
        (1.0, 0.5, 0.3, -0.40589103872815977146, 0.39274737396429323881),
    ];

    #[test]
    fn smooth_part_at_zero_matches_frozen_reference() {
        for &(kre, kim, kx, sre, sim) in &S_AT_ZERO_TABLE {
            let p = SpectralPoint { kappa: C::new(kre, kim), kx };
            let c = KernelCache::new(p).unwrap();
            let parts = eval(&c, 0.0, 0.0).unwrap();
            assert!(parts.h.is_none());
            let want = C::new(sre, sim);
            assert!(
                (parts.smooth - want).norm() <= 5e-12 * want.norm(),
                "S(0,0) at kappa {kre}+{kim}i = {} want {want}", parts.smooth
            );
        }
    }

    #[test]
    fn split_and_spectral_sums_agree_where_both_converge() {
        let points = [
            (C::new(2.3, 0.7), 0.4),
            (C::new(40.0, 2.0), -1.1),
            (C::new(7.3, 0.0), 0.0),
        ];
        for (kappa, kx) in points {
            let c = KernelCache::new(SpectralPoint { kappa, kx }).unwrap();
            for x in [0.0, 0.2, -0.5] {
                for s in [0.05, 0.12, 0.3] {
                    let via_split = eval(&c, x, s).unwrap().h.unwrap();
                    let via_spectral = c.spectral(x, s, 1e-14).unwrap().value;
                    assert!(
                        (via_split - via_spectral).norm() <= 1e-10 * via_spectral.norm().max(1e-3),
                        "kappa={kappa}, x={x}, s={s}: {via_split} vs {via_spectral}"
                    );
                }
            }
        }
    }

    #[test]
    fn smooth_part_has_the_claimed_log_split() {
        // S − H must equal (κ/2π) J₀(√κ d) ln d wherever both are defined
        let p = SpectralPoint { kappa: C::new(2.3, 0.7), kx: 0.4 };
        let c = KernelCache::new(p).unwrap();
        for (x, s) in [(0.2, 0.01), (0.01, 0.0), (0.0, 0.033), (-0.4, 0.04)] {
            let parts = eval(&c, x, s).unwrap();
            let d = x.hypot(s);
            let want = c.p.kappa / (2.0 * PI) * j0_complex(c.k * d) * d.ln();
            let got = parts.smooth - parts.h.unwrap();
            assert!((got - want).norm() < 1e-12 * (1.0 + want.norm()), "at ({x}, {s})");
        }
    }
}
