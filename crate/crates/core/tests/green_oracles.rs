//! Cross-representation checks of the quasi-periodic kernel: the spectral
//! channel sum against the direct lattice-image sum, finite-difference
//! analyticity and Helmholtz probes, and evanescent decay below the continuum.

use siegert_core::green::{green_direct, green_gradient, green_spectral};
use siegert_core::{branch_sqrt, SpectralPoint, C};

/// Tiny deterministic LCG so the "random" probe grid is reproducible.
struct Lcg(u64);

impl Lcg {
    fn next_f64(&mut self) -> f64 {
        // Numerical Recipes LCG constants; top 53 bits as mantissa
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
    fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

#[test]
fn spectral_equals_direct_on_fifty_random_points() {
    let mut rng = Lcg(0x5eed_cafe_f00d_0001);
    for trial in 0..50 {
        let kappa = C::new(rng.in_range(0.3, 9.0), rng.in_range(0.1, 1.0));
        let kx = rng.in_range(-std::f64::consts::PI, std::f64::consts::PI);
        let p = SpectralPoint { kappa, kx };
        let x = rng.in_range(-0.5, 0.5);
        let z_mag = rng.in_range(0.05, 1.2);
        let z = if rng.next_f64() < 0.5 { z_mag } else { -z_mag };
        let spectral = green_spectral(&p, x, z, 1e-11).unwrap().value;
        // enough images that e^{-Im k * M} is far below the comparison level
        let m_images = (40.0 / branch_sqrt(kappa).unwrap().im).ceil() as usize;
        let direct = green_direct(&p, x, z, m_images, false).unwrap();
        let rel = (spectral - direct).norm() / direct.norm();
        assert!(
            rel <= 1e-8,
            "trial {trial}: kappa={kappa}, kx={kx}, ({x}, {z}): rel {rel:.2e}"
        );
    }
}

#[test]
fn spec_point_agrees_with_frozen_image_sum() {
    // 50-digit image-sum value at the documented comparison point
    let p = SpectralPoint { kappa: C::new(1.0, 0.5), kx: 0.3 };
    let want = C::new(-0.37632592711350777759, 0.2621508674718484724);
    let spectral = green_spectral(&p, 0.2, 0.7, 1e-12).unwrap().value;
    let direct = green_direct(&p, 0.2, 0.7, 400, false).unwrap();
    assert!((spectral - want).norm() <= 1e-11 * want.norm());
    // the image route inherits the looser complex-argument Hankel accuracy
    assert!((direct - want).norm() <= 1e-8 * want.norm());
}

#[test]
fn accelerated_image_sum_handles_real_kappa() {
    // on the continuum the image tail only decays like |j|^{-1/2}; Wynn's
    // epsilon algorithm on the symmetric partials must still reach the
    // spectral value
    let p = SpectralPoint { kappa: C::new(2.0, 0.0), kx: 0.3 };
    let spectral = green_spectral(&p, 0.2, 0.7, 1e-12).unwrap().value;
    let accel = green_direct(&p, 0.2, 0.7, 60, true).unwrap();
    let rel = (accel - spectral).norm() / spectral.norm();
    assert!(rel <= 1e-7, "accelerated image sum off by {rel:.2e}");
}

#[test]
fn kernel_is_analytic_in_kappa() {
    // Cauchy-Riemann residual by central differences in Re κ and Im κ
    let kx = 0.3;
    let (x, z) = (0.2, 0.7);
    let h = 1e-5;
    for kappa0 in [C::new(1.0, 0.5), C::new(3.7, 0.4), C::new(0.6, 0.9)] {
        let eval = |k: C| {
            green_spectral(&SpectralPoint { kappa: k, kx }, x, z, 1e-13).unwrap().value
        };
        let dre = (eval(kappa0 + C::new(h, 0.0)) - eval(kappa0 - C::new(h, 0.0))) / (2.0 * h);
        let dim = (eval(kappa0 + C::new(0.0, h)) - eval(kappa0 - C::new(0.0, h))) / (2.0 * h);
        let residual = (dre - dim / C::new(0.0, 1.0)).norm();
        assert!(residual <= 1e-6, "CR residual {residual:.2e} at {kappa0}");
    }
}

#[test]
fn kernel_decays_evanescently_below_the_continuum() {
    // κ real and below every threshold: all channels closed, the kernel must
    // decay at least as fast as the slowest channel, |H| ≤ C e^{-|z| γ_min}
    let p = SpectralPoint { kappa: C::new(-1.5, 0.0), kx: 0.4 };
    let gamma_min = (-p.beta(0) * C::new(0.0, 1.0)).re; // Im beta_0
    assert!(gamma_min > 0.0);
    let h2 = green_spectral(&p, 0.2, 2.0, 1e-14).unwrap().value.norm();
    for z in [4.0, 8.0] {
        let hz = green_spectral(&p, 0.2, z, 1e-16).unwrap().value.norm();
        let bound = h2 * (-(z - 2.0) * gamma_min).exp();
        assert!(
            hz <= bound * 1.0001,
            "|H({z})| = {hz:.3e} exceeds evanescent bound {bound:.3e}"
        );
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let p = SpectralPoint { kappa: C::new(1.0, 0.5), kx: 0.3 };
    let (x, z) = (0.2, 0.7);
    let step = 1e-4;
    let (gx, gz) = green_gradient(&p, x, z, 1e-12).unwrap();
    let f = |x: f64, z: f64| green_spectral(&p, x, z, 1e-13).unwrap().value;
    let fd_x = (f(x + step, z) - f(x - step, z)) / (2.0 * step);
    let fd_z = (f(x, z + step) - f(x, z - step)) / (2.0 * step);
    assert!((gx - fd_x).norm() <= 1e-6, "∂x mismatch {:.2e}", (gx - fd_x).norm());
    assert!((gz - fd_z).norm() <= 1e-6, "∂z mismatch {:.2e}", (gz - fd_z).norm());
}

#[test]
fn gradient_z_component_is_odd_in_z() {
    let p = SpectralPoint { kappa: C::new(1.0, 0.5), kx: 0.3 };
    let (gx_up, gz_up) = green_gradient(&p, 0.2, 0.7, 1e-12).unwrap();
    let (gx_dn, gz_dn) = green_gradient(&p, 0.2, -0.7, 1e-12).unwrap();
    assert_eq!(gx_up, gx_dn);
    assert_eq!(gz_up, -gz_dn);
}

#[test]
fn kernel_solves_the_helmholtz_equation_away_from_sources() {
    // (∂²x + ∂²z + κ) H = 0 by second differences; the probe tolerance tracks
    // the O(step²) truncation of the stencil
    let p = SpectralPoint { kappa: C::new(1.0, 0.5), kx: 0.3 };
    let (x, z) = (0.2, 0.7);
    let step = 1e-3;
    let f = |x: f64, z: f64| green_spectral(&p, x, z, 1e-13).unwrap().value;
    let center = f(x, z);
    let lap = (f(x + step, z) + f(x - step, z) + f(x, z + step) + f(x, z - step)
        - 4.0 * center)
        / (step * step);
    let residual = (lap + p.kappa * center).norm() / center.norm();
    assert!(residual <= 1e-4, "Helmholtz residual {residual:.2e}");
}
