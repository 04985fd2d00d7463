//! Quadrature weights for the logarithmically singular kernel part.
//!
//! The quasi-periodic kernel splits as H(κ; Δ) = S(κ; Δ) − (κ/2π)·J₀(k d)·ln d
//! with S analytic for |Δx| ≤ 1/2 near the origin. Integrating the smooth
//! part with the plain product rule is spectrally accurate, but the log term
//! needs its own weights: for every target node i of an inclusion we build
//! weights λ^{(i)}_j such that
//!
//! Σ_j λ^{(i)}_j g(r_j) ≈ ∫_S ln|r_i − r'| g(r') dA'
//!
//! for smooth g (downstream, g = J₀(k d)·E). The construction is moment
//! matching: starting from the naive weights λ⁰_j = w_j·ln d_ij (with the
//! undefined diagonal entry set to zero), the weights are corrected by the
//! minimal weighted-norm update enforcing exactness on a polynomial basis
//! {φ_k}: λ = λ⁰ + D V (VᵀD V)⁻¹(m(i) − Vᵀλ⁰), where V_{jk} = φ_k(r_j),
//! D = diag(w), and m_k(i) = ∫ ln|r_i − r'| φ_k dA' are the exact log-moments.
//! The update is exact on span{φ_k}; the remaining error is the kernel-weight
//! error of the best degree-p approximant of g, which decays factorially for
//! analytic g.
//!
//! For a disk the moments are in closed form. With a Zernike basis
//! φ = R_n^m(ρ/R)·e^{imθ} in local polar coordinates, each radial monomial
//! ρ^{m+2t}e^{imθ} has log-potential (matching the interior Poisson solution
//! Δu = 2πφ against the decaying exterior harmonic continuation):
//!
//! m = 0:  u = π ρ^{2t+2}/(2(t+1)²) + π R^{2t+2}(ln R − 1/(2t+2))/(t+1),
//! m ≥ 1:  u = π/(2(t+1)(m+t+1))·\[ρ^{m+2t+2} − (m+t+1)/m·R^{2t+2} ρ^m\]·e^{imθ},
//!
//! valid for ρ ≤ R. The Zernike combination keeps the basis Gram matrix
//! well conditioned where raw monomials would lose half the mantissa by
//! degree 12. For rectangles the same scheme runs with scaled monomials and
//! moments computed numerically by a singularity-centered polar rule (the
//! ρ·ln ρ integrand is tamed by a ρ = ρ_max τ² substitution).

use nalgebra::{DMatrix, DVector};

use crate::structures::Shape;

/// Log-kernel quadrature weights for one inclusion: `lam[t][j]` multiplies
/// g(r_j) in the approximation of ∫ ln|r_t − r'| g dA' (indices local to the
/// inclusion's node group).
#[derive(Debug, Clone)]
pub(crate) struct GroupLogWeights {
    pub lam: Vec<Vec<f64>>,
}

/// Largest polynomial degree whose basis fits comfortably under the node
/// count (we keep at least half the nodes as free parameters), capped at 14.
fn pick_degree(n_nodes: usize) -> usize {
    let mut p = 0;
    while (p + 2) * (p + 3) / 2 <= n_nodes / 2 && p < 14 {
        p += 1;
    }
    p
}

/// Basis descriptor: Zernike (n, m, sin?) for disks, monomial powers (a, b)
/// for rectangles.
enum Basis {
    Zernike { terms: Vec<(u32, u32, bool)>, radius: f64 },
    Monomial { terms: Vec<(u32, u32)>, half: [f64; 2] },
}

impl Basis {
    fn len(&self) -> usize {
        match self {
            Basis::Zernike { terms, .. } => terms.len(),
            Basis::Monomial { terms, .. } => terms.len(),
        }
    }

    /// Evaluate every basis function at a point given in inclusion-local
    /// coordinates (already translated by the center).
    fn eval(&self, out: &mut [f64], x: f64, z: f64) {
        match self {
            Basis::Zernike { terms, radius } => {
                let rho = x.hypot(z) / radius;
                let th = z.atan2(x);
                for (slot, &(n, m, odd)) in out.iter_mut().zip(terms) {
                    let r = zernike_radial(n, m, rho);
                    let ang = if odd {
                        (m as f64 * th).sin()
                    } else {
                        (m as f64 * th).cos()
                    };
                    *slot = r * ang;
                }
            }
            Basis::Monomial { terms, half } => {
                let u = x / half[0];
                let v = z / half[1];
                for (slot, &(a, b)) in out.iter_mut().zip(terms) {
                    *slot = u.powi(a as i32) * v.powi(b as i32);
                }
            }
        }
    }
}

/// Zernike radial polynomial R_n^m(x) (n ≥ m, n ≡ m mod 2) by its explicit
/// factorial sum; the coefficients are exact integers well inside f64 range
/// for n ≤ 14.
fn zernike_radial(n: u32, m: u32, x: f64) -> f64 {
    let half_sum = ((n + m) / 2) as i64;
    let half_diff = ((n - m) / 2) as i64;
    let mut acc = 0.0;
    for s in 0..=half_diff {
        let c = factorial(n as i64 - s) / (factorial(s) * factorial(half_sum - s) * factorial(half_diff - s));
        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * c * x.powi((n as i64 - 2 * s) as i32);
    }
    acc
}

fn factorial(k: i64) -> f64 {
    (1..=k).map(|v| v as f64).product::<f64>().max(1.0)
}

/// Closed-form log-potential of the Zernike source R_n^m(ρ'/R)·trig(mθ') over
/// the disk of radius R, evaluated at an interior point in local coordinates.
fn zernike_log_moment(radius: f64, n: u32, m: u32, odd: bool, x: f64, z: f64) -> f64 {
    let rho = x.hypot(z);
    let th = z.atan2(x);
    let half_sum = ((n + m) / 2) as i64;
    let half_diff = ((n - m) / 2) as i64;
    let mut radial = 0.0;
    for s in 0..=half_diff {
        let c = factorial(n as i64 - s) / (factorial(s) * factorial(half_sum - s) * factorial(half_diff - s));
        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
        // The monomial (ρ'/R)^{n−2s} e^{imθ'} = R^{−(n−2s)} ρ'^{m+2t} e^{imθ'}
        // with t = (n − 2s − m)/2.
        let e = n as i64 - 2 * s;
        let t = ((e - m as i64) / 2) as f64;
        let mf = m as f64;
        let mono = if m == 0 {
            std::f64::consts::PI
                * (rho.powi(e as i32 + 2) / (2.0 * (t + 1.0) * (t + 1.0))
                    + radius.powi(e as i32 + 2) / (t + 1.0)
                        * (radius.ln() - 1.0 / (2.0 * t + 2.0)))
        } else {
            std::f64::consts::PI / (2.0 * (t + 1.0) * (mf + t + 1.0))
                * (rho.powi(e as i32 + 2)
                    - (mf + t + 1.0) / mf * radius.powi(2 * t as i32 + 2) * rho.powi(m as i32))
        };
        radial += sign * c * radius.powi(-(e as i32)) * mono;
    }
    let ang = if odd {
        (m as f64 * th).sin()
    } else {
        (m as f64 * th).cos()
    };
    radial * ang
}

/// Numerical log-potential ∫_shape ln|p − r'| φ(r') dA' for an interior
/// target, by polar quadrature centered at the target. The radial direction
/// uses ρ = ρ_max·τ² so the ρ ln ρ endpoint behaviour integrates cleanly;
/// the angular direction is split at the rectangle's corner directions
/// (where ρ_max kinks) and each arc carries a dyadically graded sub-mesh
/// toward both of its ends: for a target a distance d from an edge, ρ_max
/// steepens like d/sin(θ − θ_∥) with the blow-up direction θ_∥ (parallel to
/// that edge) just past the corner cut, and a fixed-order angular rule
/// stalls near 1e−4 for nodes hugging a corner. On the graded mesh every
/// piece sits at least its own width away from θ_∥, so a modest Gauss rule
/// per piece is uniformly accurate in d. Accuracy ~1e−11 absolute.
fn numeric_log_moments(
    shape: &Shape,
    center: [f64; 2],
    px: f64,
    pz: f64,
    basis: &Basis,
    out: &mut [f64],
) {
    use crate::quad::gauss_legendre;
    out.iter_mut().for_each(|v| *v = 0.0);
    let (tt, wt) = gauss_legendre(10);
    let (tr, wr) = gauss_legendre(40);
    // Local coordinates of the target relative to the inclusion center.
    let qx = px - center[0];
    let qz = pz - center[1];
    // Angular panel boundaries.
    let mut cuts: Vec<f64> = match *shape {
        Shape::Disk { .. } => (0..=8)
            .map(|k| -std::f64::consts::PI + k as f64 * std::f64::consts::PI / 4.0)
            .collect(),
        Shape::Rect { half_size, .. } => {
            let mut c: Vec<f64> = [
                (half_size[1] - qz).atan2(half_size[0] - qx),
                (half_size[1] - qz).atan2(-half_size[0] - qx),
                (-half_size[1] - qz).atan2(-half_size[0] - qx),
                (-half_size[1] - qz).atan2(half_size[0] - qx),
            ]
            .into_iter()
            .collect();
            c.sort_by(f64::total_cmp);
            c.push(c[0] + 2.0 * std::f64::consts::PI);
            c
        }
    };
    // Defensive: strictly increasing panels.
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    // Graded mesh: halving pieces from each arc's midpoint toward its ends.
    // The innermost stub (width ≈ arc·2⁻³⁴) is integrated too, so nothing is
    // dropped; 34 levels reach well below any angular feature a legal node
    // set can produce.
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    for panel in cuts.windows(2) {
        let (t0, t1) = (panel[0], panel[1]);
        if t1 - t0 < 1e-14 {
            continue;
        }
        let w = 0.5 * (t1 - t0);
        let mut hi = t0 + w;
        for l in 1..34 {
            let lo = t0 + w * 0.5f64.powi(l);
            pieces.push((lo, hi));
            hi = lo;
        }
        pieces.push((t0, hi));
        let mut lo = t0 + w;
        for l in 1..34 {
            let hi = t1 - w * 0.5f64.powi(l);
            pieces.push((lo, hi));
            lo = hi;
        }
        pieces.push((lo, t1));
    }
    let rho_max = |th: f64| -> f64 {
        let (ce, se) = (th.cos(), th.sin());
        match *shape {
            Shape::Disk { radius, .. } => {
                let qe = qx * ce + qz * se;
                let disc = radius * radius - (qx * qx + qz * qz) + qe * qe;
                -qe + disc.max(0.0).sqrt()
            }
            Shape::Rect { half_size, .. } => {
                let mut t = f64::INFINITY;
                if ce > 1e-300 {
                    t = t.min((half_size[0] - qx) / ce);
                } else if ce < -1e-300 {
                    t = t.min((-half_size[0] - qx) / ce);
                }
                if se > 1e-300 {
                    t = t.min((half_size[1] - qz) / se);
                } else if se < -1e-300 {
                    t = t.min((-half_size[1] - qz) / se);
                }
                t
            }
        }
    };
    let mut phi = vec![0.0; basis.len()];
    for &(t0, t1) in &pieces {
        for (ti, twi) in tt.iter().zip(&wt) {
            let th = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * ti;
            let wth = 0.5 * (t1 - t0) * twi;
            let rm = rho_max(th);
            if rm <= 0.0 {
                continue;
            }
            let (ce, se) = (th.cos(), th.sin());
            for (ri, rwi) in tr.iter().zip(&wr) {
                let tau = 0.5 * (ri + 1.0);
                let rho = rm * tau * tau;
                if rho == 0.0 {
                    continue;
                }
                let jac = rm * tau; // dρ = 2 ρ_max τ dτ, and dτ carries ½ from the GL map
                let w = wth * rwi * jac * rho * rho.ln();
                basis.eval(&mut phi, qx + rho * ce, qz + rho * se);
                for (o, p) in out.iter_mut().zip(&phi) {
                    *o += w * p;
                }
            }
        }
    }
}

/// Build the log-kernel weights for one inclusion group.
///
/// `nodes`/`weights` are the group's slice of the quadrature rule; node
/// coordinates are global, the shape carries its placed center.
pub(crate) fn build(shape: &Shape, nodes: &[[f64; 2]], weights: &[f64]) -> GroupLogWeights {
    let n = nodes.len();
    let center = match *shape {
        Shape::Disk { center, .. } => center,
        Shape::Rect { center, .. } => center,
    };
    let degree = pick_degree(n);
    let basis = match *shape {
        Shape::Disk { radius, .. } => {
            let mut terms = Vec::new();
            for deg in 0..=degree as u32 {
                let mut m = deg;
                loop {
                    terms.push((deg, m, false));
                    if m > 0 {
                        terms.push((deg, m, true));
                    }
                    if m < 2 {
                        break;
                    }
                    m -= 2;
                }
            }
            Basis::Zernike { terms, radius }
        }
        Shape::Rect { half_size, .. } => {
            let mut terms = Vec::new();
            for deg in 0..=degree as u32 {
                for a in 0..=deg {
                    terms.push((a, deg - a));
                }
            }
            Basis::Monomial {
                terms,
                half: half_size,
            }
        }
    };
    let k = basis.len();
    // V[jk] = φ_k(r_j) and the weighted Gram G = VᵀDV.
    let mut v = DMatrix::<f64>::zeros(n, k);
    let mut phi = vec![0.0; k];
    for (j, node) in nodes.iter().enumerate() {
        basis.eval(&mut phi, node[0] - center[0], node[1] - center[1]);
        for (kk, &p) in phi.iter().enumerate() {
            v[(j, kk)] = p;
        }
    }
    let dv = {
        let mut dv = v.clone();
        for (j, &w) in weights.iter().enumerate() {
            for kk in 0..k {
                dv[(j, kk)] *= w;
            }
        }
        dv
    };
    let gram = v.transpose() * &dv;
    // SPD by construction (positive weights, independent basis); a failure
    // here means the basis degree outran what the node set can resolve.
    let chol = gram
        .cholesky()
        .unwrap_or_else(|| panic!("log-weight Gram factorization failed (n = {n}, k = {k})"));
    let mut lam = Vec::with_capacity(n);
    let mut moments = vec![0.0; k];
    for (t, target) in nodes.iter().enumerate() {
        // Naive weights and their moment defect.
        let mut l0 = vec![0.0; n];
        for (j, node) in nodes.iter().enumerate() {
            if j != t {
                let d = (target[0] - node[0]).hypot(target[1] - node[1]);
                l0[j] = weights[j] * d.ln();
            }
        }
        match &basis {
            Basis::Zernike { terms, radius } => {
                for (kk, &(nn, mm, odd)) in terms.iter().enumerate() {
                    moments[kk] = zernike_log_moment(
                        *radius,
                        nn,
                        mm,
                        odd,
                        target[0] - center[0],
                        target[1] - center[1],
                    );
                }
            }
            Basis::Monomial { .. } => {
                numeric_log_moments(shape, center, target[0], target[1], &basis, &mut moments);
            }
        }
        let l0v = DVector::from_column_slice(&l0);
        let defect = DVector::from_column_slice(&moments) - v.transpose() * &l0v;
        let coeff = chol.solve(&defect);
        let corr = &dv * coeff;
        let row: Vec<f64> = (0..n).map(|j| l0[j] + corr[j]).collect();
        lam.push(row);
    }
    GroupLogWeights { lam }
}
