//! Branch convention, diffraction thresholds and channel bookkeeping.
//!
//! Everything downstream lives on one fixed branch of the square root: the cut
//! of the logarithm is placed on the negative imaginary axis, so
//!
//! ```text
//! √w = exp(½ log w),   log w = ln|w| + i·arg w,   −π/2 < arg w < 3π/2.
//! ```
//!
//! With this choice `Im √w ≥ 0` for every real `w`, which makes closed
//! diffraction channels evanescent and puts all resonance poles on the lower
//! half of the physical sheet. The spectral plane is cut vertically downward
//! from every diffraction threshold `k²ₓ,ₘ = (kₓ + 2πm)²`; the thresholds,
//! ordered by magnitude, partition the real axis into intervals `I_l` on which
//! exactly `l` channels are open.

use num_complex::Complex;
use std::f64::consts::PI;

use crate::C;

/// A point κ in the cut spectral plane together with the Bloch wavenumber kₓ.
///
/// κ = k² has units 1/length² (the period is the unit of length). Invariant:
/// κ must stay off the vertical cuts {k²ₓ,ₘ − is, s ≥ 0}; use [`in_cut_plane`]
/// to enforce a safety margin before feeding a point into kernel evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub kappa: C,
    pub kx: f64,
}

impl SpectralPoint {
    pub fn new(kappa: C, kx: f64) -> Self {
        Self { kappa, kx }
    }

    /// k_{x,m} = kₓ + 2πm.
    #[inline]
    pub fn kxm(&self, m: i32) -> f64 {
        self.kx + 2.0 * PI * m as f64
    }

    /// β_m = √(κ − k²ₓ,ₘ) on the fixed branch (z-wavenumber of channel m).
    #[inline]
    pub fn beta(&self, m: i32) -> C {
        let kxm = self.kxm(m);
        bsqrt(self.kappa - kxm * kxm)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    /// Argument sits exactly on the branch cut (negative imaginary axis).
    #[error("branch cut point: {0} lies on the negative imaginary axis")]
    CutPoint(C),
}

/// √w on the branch with arg w ∈ (−π/2, 3π/2).
///
/// Returns 0 for w = 0 and an error for w strictly on the open negative
/// imaginary axis (the branch cut). For real w the result satisfies
/// `Im √w ≥ 0`, strictly so for w < 0.
pub fn branch_sqrt(w: C) -> Result<C, ChannelError> {
    if w.re == 0.0 && w.im < 0.0 {
        return Err(ChannelError::CutPoint(w));
    }
    Ok(bsqrt(w))
}

/// Unchecked interior version of [`branch_sqrt`]; callers guarantee the
/// argument is off the cut (points exactly on it get the limit from re > 0).
#[inline]
pub(crate) fn bsqrt(w: C) -> C {
    if w.im == 0.0 {
        // Exact on the real axis, and immune to the sign of a zero imaginary
        // part (the principal sqrt would send (-1, -0.0) to the wrong sheet).
        return if w.re >= 0.0 {
            Complex::new(w.re.sqrt(), 0.0)
        } else {
            Complex::new(0.0, (-w.re).sqrt())
        };
    }
    let z = w.sqrt(); // principal: arg z ∈ (−π/2, π/2)
    if w.re < 0.0 && w.im < 0.0 {
        // Third quadrant: our branch continues through the second quadrant,
        // arg w ∈ (π, 3π/2), i.e. the opposite sign of the principal root.
        -z
    } else {
        z
    }
}

/// Diffraction thresholds k²ₓ,ₘ = (kₓ + 2πm)² for m ∈ {−M..M}.
pub fn diffraction_thresholds(kx: f64, m_max: u32) -> Vec<(i32, f64)> {
    let mm = m_max as i32;
    (-mm..=mm)
        .map(|m| {
            let kxm = kx + 2.0 * PI * m as f64;
            (m, kxm * kxm)
        })
        .collect()
}

/// kₓ reduced to (−π, π] (the argument of e^{ikₓ}).
pub fn wrap_kx(kx: f64) -> f64 {
    let mut a = kx.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// One rung of the threshold ladder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    /// Channel index m whose threshold this is (κ*ₘ = (2π|m| + sgn(m)|[kₓ]|)²).
    pub m: i32,
    pub kappa: f64,
}

/// Ladder of thresholds and the interval decomposition of the real κ-axis.
///
/// `intervals[l]` is I_l; I_0 = (−∞, κ*₀) lies below the continuum. Fused
/// thresholds (kₓ ≡ 0 or π mod 2π) produce empty intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTable {
    pub kx: f64,
    pub thresholds: Vec<Threshold>,
    /// Half-open intervals (lo, hi); I_0 has lo = −∞.
    pub intervals: Vec<(f64, f64)>,
    pub open_set: Vec<i32>,
    pub closed_set: Vec<i32>,
}

/// Threshold ladder κ*₀ ≤ κ*₋₁ ≤ κ*₁ ≤ κ*₋₂ ≤ … for the given kₓ.
///
/// The ladder depends on kₓ only through [kₓ] ∈ (−π, π]. `count` thresholds
/// are produced in ladder order together with the intervals I_0..I_{count−1};
/// the open/closed sets are left empty (they belong to a specific κ, see
/// [`classify_channels`]).
pub fn threshold_ladder(kx: f64, count: u32) -> ChannelTable {
    let b = wrap_kx(kx).abs();
    // Ladder index order 0, −1, +1, −2, +2, …
    let order = (0..count).map(|j| {
        let half = j.div_ceil(2) as i32;
        if j % 2 == 1 {
            -half
        } else {
            half
        }
    });
    let thresholds: Vec<Threshold> = order
        .map(|m| {
            let v = 2.0 * PI * m.abs() as f64 + if m >= 0 { b } else { -b };
            Threshold { m, kappa: v * v }
        })
        .collect();
    let mut intervals = Vec::with_capacity(thresholds.len());
    intervals.push((f64::NEG_INFINITY, thresholds[0].kappa));
    for w in thresholds.windows(2) {
        intervals.push((w[0].kappa, w[1].kappa));
    }
    ChannelTable {
        kx,
        thresholds,
        intervals,
        open_set: Vec::new(),
        closed_set: Vec::new(),
    }
}

/// Open/closed channel split at κ: open_set = {m : Re κ ≥ k²ₓ,ₘ}, |m| ≤ M.
pub fn classify_channels(p: SpectralPoint, m_max: u32) -> (Vec<i32>, Vec<i32>) {
    let mut open = Vec::new();
    let mut closed = Vec::new();
    for (m, thr) in diffraction_thresholds(p.kx, m_max) {
        if p.kappa.re >= thr {
            open.push(m);
        } else {
            closed.push(m);
        }
    }
    (open, closed)
}

impl ChannelTable {
    /// Full table at a spectral point: ladder, intervals and channel split.
    pub fn at(p: SpectralPoint, m_max: u32, ladder_count: u32) -> Self {
        let mut t = threshold_ladder(p.kx, ladder_count);
        let (open, closed) = classify_channels(p, m_max);
        t.open_set = open;
        t.closed_set = closed;
        t
    }
}

/// True iff κ keeps a horizontal safety `margin` from every cut with |m| ≤ M
/// (points in the open upper half-plane are always accepted).
pub fn in_cut_plane(p: SpectralPoint, m_max: u32, margin: f64) -> bool {
    if p.kappa.im > 0.0 {
        return true;
    }
    diffraction_thresholds(p.kx, m_max)
        .iter()
        .all(|&(_, thr)| (p.kappa.re - thr).abs() > margin)
}

/// Truncation window so the fastest-growing neglected channel is evanescent
/// beyond recovery: |Im √(κ − k²ₓ,ₘ)| · dist ≥ 35 for all excluded m.
///
/// 35 ≈ −ln(eps²)/2 puts the neglected amplitudes below double precision.
pub fn default_m_window(kappa: C, kx: f64, min_evanescent_distance: f64) -> u32 {
    let d = min_evanescent_distance.max(1e-3);
    let target = 35.0 / d;
    // Im √(κ − k²ₓ,ₘ) ≈ |kₓ,ₘ| for large |m|; solve |kₓ| + 2πM ≥ target + |κ|^{1/2}.
    let reach = target + kappa.norm().sqrt();
    let m = ((reach - kx.abs()) / (2.0 * PI)).ceil();
    (m.max(1.0)) as u32 + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn branch_sqrt_axis_values() {
        assert_eq!(branch_sqrt(c(4.0, 0.0)).unwrap(), c(2.0, 0.0));
        assert_eq!(branch_sqrt(c(-1.0, 0.0)).unwrap(), c(0.0, 1.0));
        let s = branch_sqrt(c(0.0, 2.0)).unwrap();
        assert_relative_eq!(s.re, 1.0, max_relative = 1e-15);
        assert_relative_eq!(s.im, 1.0, max_relative = 1e-15);
        assert_eq!(branch_sqrt(C::new(0.0, 0.0)).unwrap(), C::new(0.0, 0.0));
        assert!(branch_sqrt(c(0.0, -3.0)).is_err());
        // Signed zero must not flip the sheet.
        assert_eq!(branch_sqrt(c(-4.0, -0.0)).unwrap(), c(0.0, 2.0));
    }

    #[test]
    fn branch_sqrt_third_quadrant_continues_upward() {
        // Just to the right of the cut (arg slightly below 3π/2): the root must
        // sit near arg 3π/4, i.e. in the upper-left quadrant.
        let s = branch_sqrt(c(-1e-3, -1.0)).unwrap();
        assert!(s.re < 0.0 && s.im > 0.0, "{s}");
        // And just to the left of the cut: arg slightly above −π/2 ⇒ root near
        // arg −π/4, lower-right quadrant. The branch jumps across the cut.
        let s2 = branch_sqrt(c(1e-3, -1.0)).unwrap();
        assert!(s2.re > 0.0 && s2.im < 0.0, "{s2}");
    }

    #[test]
    fn thresholds_kx0() {
        let t = diffraction_thresholds(0.0, 1);
        let pi2 = 4.0 * PI * PI;
        assert_eq!(t[0], (-1, pi2));
        assert_eq!(t[1], (0, 0.0));
        assert_eq!(t[2], (1, pi2));
    }

    #[test]
    fn thresholds_kx_half() {
        let t = diffraction_thresholds(0.5, 1);
        assert_relative_eq!(t[0].1, (0.5 - 2.0 * PI).powi(2), max_relative = 1e-15);
        assert_relative_eq!(t[0].1, 33.445_232_297, max_relative = 1e-9);
        assert_relative_eq!(t[1].1, 0.25, max_relative = 1e-15);
        assert_relative_eq!(t[2].1, 46.011_602_911, max_relative = 1e-9);
        let t = diffraction_thresholds(PI, 0);
        assert_relative_eq!(t[0].1, PI * PI, max_relative = 1e-15);
    }

    #[test]
    fn ladder_kx0_has_fused_thresholds_and_empty_interval() {
        let t = threshold_ladder(0.0, 3);
        let pi2 = 4.0 * PI * PI;
        assert_eq!(t.thresholds[0].kappa, 0.0);
        assert_eq!(t.thresholds[1].kappa, pi2);
        assert_eq!(t.thresholds[2].kappa, pi2);
        assert_eq!(t.intervals[2], (pi2, pi2)); // I_2 empty
        assert_eq!(t.intervals[0].0, f64::NEG_INFINITY);
    }

    #[test]
    fn ladder_kx1_nonempty_and_periodic_in_kx() {
        let t = threshold_ladder(1.0, 3);
        assert_relative_eq!(t.thresholds[0].kappa, 1.0);
        assert_relative_eq!(t.thresholds[1].kappa, (2.0 * PI - 1.0).powi(2));
        assert_relative_eq!(t.thresholds[2].kappa, (2.0 * PI + 1.0).powi(2));
        assert!(t.intervals.iter().all(|(a, b)| a < b));
        let t2 = threshold_ladder(2.0 * PI + 1.0, 3);
        for (a, b) in t.thresholds.iter().zip(&t2.thresholds) {
            assert_relative_eq!(a.kappa, b.kappa, max_relative = 1e-12);
        }
    }

    #[test]
    fn classify_examples() {
        let (o, c_) = classify_channels(SpectralPoint::new(c(20.0, 0.0), 0.0), 2);
        assert_eq!(o, vec![0]);
        assert_eq!(c_, vec![-2, -1, 1, 2]);
        let (o, c_) = classify_channels(SpectralPoint::new(c(50.0, 0.0), 0.0), 2);
        assert_eq!(o, vec![-1, 0, 1]);
        assert_eq!(c_, vec![-2, 2]);
        let (o, _) = classify_channels(SpectralPoint::new(c(-5.0, 0.0), 0.0), 1);
        assert!(o.is_empty());
    }

    #[test]
    fn closed_channels_are_evanescent() {
        let p = SpectralPoint::new(c(20.0, 0.0), 0.3);
        let (_, closed) = classify_channels(p, 4);
        for m in closed {
            assert!(p.beta(m).im > 0.0, "channel {m} not evanescent");
        }
    }

    #[test]
    fn cut_plane_examples() {
        assert!(in_cut_plane(SpectralPoint::new(c(1.0, 0.0), 0.3), 2, 0.0));
        assert!(!in_cut_plane(
            SpectralPoint::new(c(0.09, -0.5), 0.3),
            2,
            0.0
        ));
        assert!(in_cut_plane(SpectralPoint::new(c(0.09, 0.5), 0.3), 2, 0.0));
    }

    #[test]
    fn open_channel_count_matches_ladder_interval() {
        // In I_l exactly l channels are open (l = 0, 1, 2).
        for kx in [0.7, 1.9] {
            let t = threshold_ladder(kx, 4);
            for l in 0..3usize {
                let (lo, hi) = t.intervals[l];
                if lo >= hi {
                    continue;
                }
                let mid = if lo.is_finite() {
                    0.5 * (lo + hi)
                } else {
                    hi - 1.0
                };
                let (open, _) = classify_channels(SpectralPoint::new(c(mid, 0.0), kx), 6);
                assert_eq!(open.len(), l, "kx={kx} l={l} mid={mid}");
            }
        }
    }

    #[test]
    fn ladder_matches_thresholds_as_multiset() {
        for kx in [0.0, 0.4, 1.0, PI] {
            let mut a: Vec<f64> = threshold_ladder(kx, 5)
                .thresholds
                .iter()
                .map(|t| t.kappa)
                .collect();
            let mut b: Vec<f64> = diffraction_thresholds(kx, 2).iter().map(|t| t.1).collect();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            for (x, y) in a.iter().zip(&b) {
                assert_relative_eq!(x, y, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn branch_sqrt_squares_back(re in -100.0f64..100.0, im in -100.0f64..100.0) {
            prop_assume!(!(re == 0.0 && im <= 0.0));
            let w = c(re, im);
            let s = branch_sqrt(w).unwrap();
            let back = s * s;
            prop_assert!((back - w).norm() <= 1e-13 * w.norm().max(1.0));
        }

        #[test]
        fn branch_sqrt_real_axis_signs(x in -1e6f64..1e6) {
            let s = branch_sqrt(c(x, 0.0)).unwrap();
            if x > 0.0 {
                prop_assert!(s.re > 0.0 && s.im == 0.0);
            } else if x < 0.0 {
                prop_assert!(s.re == 0.0 && s.im > 0.0);
            }
        }

        #[test]
        fn ladder_is_sorted(kx in -10.0f64..10.0, count in 1u32..9) {
            let t = threshold_ladder(kx, count);
            for w in t.thresholds.windows(2) {
                prop_assert!(w[0].kappa <= w[1].kappa + 1e-12);
            }
        }
    }
}
