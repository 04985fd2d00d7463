//! Nyström discretization of the Lippmann–Schwinger operator and its
//! eigen-analysis near eigenvalue 1.
//!
//! The scattering problem E = E_inc + Ĥ(κ)[E] lives on the structure support,
//! with (Ĥ(κ)[E])(r) = ∫ (ε(r') − 1) H(κ; r − r') E(r') dA'. On the
//! quadrature rule {r_j, w_j} the operator becomes the dense matrix
//!
//! A\[i\]\[j\] = (ε_j − 1) · H(κ; r_i − r_j) · w_j,
//!
//! except within an inclusion, where the kernel's −(κ/2π)·J₀(k d)·ln d
//! singularity is integrated by the moment-matched log weights of
//! [`logweights`]: the same-inclusion entry is
//! (ε − 1)·(w_j·S(κ; Δij) − (κ/2π)·λ^{(i)}_j·J₀(k d_ij)) with S the analytic
//! kernel remainder. Distinct inclusions never touch, so cross entries use
//! the plain kernel. ε is piecewise constant per inclusion, and overlapping
//! inclusions contribute additively — the matrix carries each group's own
//! (ε − 1), which is the exact discretization of the sum of integrals.
//!
//! Siegert states appear where Ĥ(κ) has eigenvalue 1. The tooling here
//! exposes that eigenvalue three ways, which the solver cross-checks:
//! directly (Schur + inverse iteration), through the Riesz projection
//! P = (2πi)⁻¹∮(z − A)⁻¹dz on a circle around 1, and through the
//! perturbation-theoretic Rayleigh quotient λ₀ = ⟨E, Ĥ[P E]⟩/⟨E, P E⟩, whose
//! κ-derivative feeds the pole Newton iteration and the residue calculus.
//! Inner products conjugate the first argument and carry the quadrature
//! weights: ⟨f, g⟩ = Σ w_i f̄_i g_i.

mod logweights;

use rayon::prelude::*;

use crate::channels::{branch_sqrt, in_cut_plane, SpectralPoint};
use crate::green::{GreenError, KernelCache};
use crate::hankel::j0_complex;
use crate::linalg::{self, CMat, CVec, LinalgError, LuFactors};
use crate::structures::{QuadratureDomain, StructureError, StructureSpec};
use crate::C;

/// Errors from assembly and spectral analysis.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("kernel evaluation failed: {0}")]
    Kernel(#[from] GreenError),
    #[error("spectral point too close to a branch cut")]
    OutsideCutPlane,
    #[error("dimension mismatch: operator is {expected}, vector is {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("resolvent nearly singular (smallest singular value {sigma_min:.3e}) — near a pole")]
    NearSingular { sigma_min: f64 },
    #[error("no eigenvalue inside the disk around 1")]
    NoneInDisk,
    #[error("{count} eigenvalues inside the disk around 1 (simple pole assumed)")]
    MultipleInDisk { count: usize },
    #[error("an eigenvalue lies on the Riesz contour")]
    ContourHitsEigenvalue,
    #[error("projection denominator vanishes (degenerate reference field)")]
    DegenerateProjection,
    #[error(transparent)]
    Eigen(#[from] LinalgError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Geometry-dependent, κ-independent assembly data: quadrature rule plus the
/// per-inclusion log-kernel weights. Build once per (structure, h, order) and
/// reuse across every spectral point.
pub struct AssemblyPlan {
    pub structure: StructureSpec,
    pub h: f64,
    pub order: usize,
    pub quad: QuadratureDomain,
    /// Node index → group index.
    group_of: Vec<usize>,
    log_weights: Vec<logweights::GroupLogWeights>,
}

impl AssemblyPlan {
    pub fn new(s: &StructureSpec, h: f64, order: usize) -> Result<Self, OperatorError> {
        s.validate()?;
        let quad = s.build_quadrature(h, order)?;
        let mut group_of = vec![0usize; quad.len()];
        let mut log_weights = Vec::with_capacity(quad.groups.len());
        for (gi, g) in quad.groups.iter().enumerate() {
            for j in g.range.clone() {
                group_of[j] = gi;
            }
            log_weights.push(logweights::build(
                &g.shape,
                &quad.nodes[g.range.clone()],
                &quad.weights[g.range.clone()],
            ));
        }
        Ok(AssemblyPlan {
            structure: s.clone(),
            h,
            order,
            quad,
            group_of,
            log_weights,
        })
    }
}

/// The assembled dense operator at one spectral point.
pub struct OperatorMatrix {
    pub point: SpectralPoint,
    pub h: f64,
    pub a: CMat,
    /// Quadrature weights, for the weighted inner products.
    pub weights: Vec<f64>,
    /// Frobenius norm of A — the discrete Hilbert–Schmidt norm.
    pub hs_norm: f64,
}

/// Weighted inner product ⟨f, g⟩ = Σ w_i f̄_i g_i (first argument
/// conjugated). Fixed summation order keeps results reproducible.
pub fn dotw(weights: &[f64], f: &CVec, g: &CVec) -> C {
    let mut acc = C::new(0.0, 0.0);
    for ((w, fv), gv) in weights.iter().zip(f.iter()).zip(g.iter()) {
        acc += w * fv.conj() * gv;
    }
    acc
}

/// Weighted L² norm.
pub fn normw(weights: &[f64], f: &CVec) -> f64 {
    weights
        .iter()
        .zip(f.iter())
        .map(|(w, v)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Assemble A(κ) on the plan's quadrature rule.
pub fn assemble(plan: &AssemblyPlan, p: SpectralPoint) -> Result<OperatorMatrix, OperatorError> {
    if !in_cut_plane(p, 64, 1e-9) {
        return Err(OperatorError::OutsideCutPlane);
    }
    let cache = KernelCache::new(p)?;
    let k = branch_sqrt(p.kappa).map_err(|_| OperatorError::OutsideCutPlane)?;
    let log_factor = p.kappa / (2.0 * std::f64::consts::PI);
    let n = plan.quad.len();
    let nodes = &plan.quad.nodes;
    let mut data = vec![C::new(0.0, 0.0); n * n];
    // Column-parallel: nalgebra stores column-major, so column j is the
    // contiguous chunk j·n..(j+1)·n. Entries are pure functions of (i, j) —
    // the result is byte-identical for every thread count.
    data.par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(j, col)| -> Result<(), OperatorError> {
            let gj = plan.group_of[j];
            let group = &plan.quad.groups[gj];
            let eps_m1 = C::new(group.eps - 1.0, 0.0);
            if eps_m1.re == 0.0 {
                return Ok(());
            }
            let wj = plan.quad.weights[j];
            let nj = nodes[j];
            let j_local = j - group.range.start;
            for (i, slot) in col.iter_mut().enumerate() {
                let dx = nodes[i][0] - nj[0];
                let dz = nodes[i][1] - nj[1];
                let v = if plan.group_of[i] == gj {
                    let s = cache.smooth(dx, dz)?;
                    let d = dx.hypot(dz);
                    let lam = plan.log_weights[gj].lam[i - group.range.start][j_local];
                    s * wj - log_factor * lam * j0_complex(k * d)
                } else {
                    cache.full(dx, dz)? * wj
                };
                *slot = eps_m1 * v;
            }
            Ok(())
        })?;
    let a = CMat::from_vec(n, n, data);
    let hs_norm = linalg::fro_norm(&a);
    Ok(OperatorMatrix {
        point: p,
        h: plan.h,
        a,
        weights: plan.quad.weights.clone(),
        hs_norm,
    })
}

/// Eigenvalue of A near 1 with right/left eigenvectors and the spectral gap.
pub struct EigenPairNearOne {
    pub lambda0: C,
    pub right: CVec,
    pub left: CVec,
    /// Distance from λ₀ to the nearest other eigenvalue.
    pub gap: f64,
}

/// Riesz spectral projection onto the eigenspace inside |λ − 1| = delta.
pub struct RieszProjection {
    pub p: CMat,
    pub delta: f64,
    pub rank_estimate: usize,
    pub trace: C,
}

impl OperatorMatrix {
    pub fn len(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.a.nrows() == 0
    }

    /// A·field.
    pub fn apply(&self, field: &CVec) -> Result<CVec, OperatorError> {
        if field.len() != self.a.ncols() {
            return Err(OperatorError::DimensionMismatch {
                expected: self.a.ncols(),
                got: field.len(),
            });
        }
        Ok(&self.a * field)
    }

    /// Solve (I − A)·E = rhs with one step of iterative refinement. Residual
    /// above `tol`·‖rhs‖ reports [`OperatorError::NearSingular`] with the
    /// smallest singular value of I − A.
    pub fn resolvent_solve(&self, rhs: &CVec, tol: f64) -> Result<CVec, OperatorError> {
        if rhs.len() != self.a.ncols() {
            return Err(OperatorError::DimensionMismatch {
                expected: self.a.ncols(),
                got: rhs.len(),
            });
        }
        let m = self.one_minus_a();
        let lu = LuFactors::new(m.clone());
        let near = |sigma: Option<f64>| OperatorError::NearSingular {
            sigma_min: sigma.unwrap_or(0.0),
        };
        let mut x = lu.solve(rhs).ok_or_else(|| near(Some(0.0)))?;
        // One refinement pass recovers the digits a mildly ill-conditioned
        // factorization leaves behind.
        let r = rhs - &m * &x;
        if let Some(dx) = lu.solve(&r) {
            x += dx;
        }
        let resid = (&m * &x - rhs).norm();
        if resid <= tol * rhs.norm().max(f64::MIN_POSITIVE) {
            Ok(x)
        } else {
            Err(near(Some(linalg::smallest_singular(&m))))
        }
    }

    /// Smallest singular value of I − A: the pole-proximity indicator used by
    /// the grid scan.
    pub fn singularity_indicator(&self) -> f64 {
        linalg::smallest_singular(&self.one_minus_a())
    }

    fn one_minus_a(&self) -> CMat {
        let n = self.a.nrows();
        let mut m = -self.a.clone();
        for i in 0..n {
            m[(i, i)] += C::new(1.0, 0.0);
        }
        m
    }

    /// The unique eigenvalue of A with |λ − 1| ≤ delta, its eigenvectors and
    /// the gap to the rest of the spectrum.
    pub fn eigen_near_one(&self, delta: f64) -> Result<EigenPairNearOne, OperatorError> {
        let one = C::new(1.0, 0.0);
        let eig = linalg::eigenvalues(&self.a)?;
        let inside: Vec<C> = eig.iter().copied().filter(|l| (l - one).norm() <= delta).collect();
        match inside.len() {
            0 => return Err(OperatorError::NoneInDisk),
            1 => {}
            count => return Err(OperatorError::MultipleInDisk { count }),
        }
        let lambda0 = inside[0];
        let gap = eig
            .iter()
            .map(|l| (l - lambda0).norm())
            .filter(|d| *d > 1e-14 * lambda0.norm().max(1.0))
            .fold(f64::INFINITY, f64::min);
        let (l_r, right) = linalg::right_eigenvector(&self.a, lambda0, 1e-12)?;
        let (_, left) = linalg::left_eigenvector(&self.a, lambda0, 1e-12)?;
        Ok(EigenPairNearOne {
            lambda0: l_r,
            right,
            left,
            gap,
        })
    }

    /// Riesz projection P = (2πi)⁻¹ ∮_{|z−1|=δ} (z − A)⁻¹ dz by the
    /// trapezoidal rule (exponentially convergent for this analytic
    /// integrand).
    pub fn riesz_projection(
        &self,
        delta: f64,
        n_quad: usize,
    ) -> Result<RieszProjection, OperatorError> {
        let one = C::new(1.0, 0.0);
        // An eigenvalue on (or numerically on) the contour breaks the
        // quadrature: check before paying for the resolvent evaluations.
        let eig = linalg::eigenvalues(&self.a)?;
        if eig
            .iter()
            .any(|l| ((l - one).norm() - delta).abs() <= 1e-8 * delta)
        {
            return Err(OperatorError::ContourHitsEigenvalue);
        }
        let n = self.a.nrows();
        let mut p = CMat::zeros(n, n);
        for kq in 0..n_quad {
            let phi = 2.0 * std::f64::consts::PI * kq as f64 / n_quad as f64;
            let e = C::new(0.0, phi).exp();
            let z = one + delta * e;
            let mut m = -self.a.clone();
            for i in 0..n {
                m[(i, i)] += z;
            }
            let inv = nalgebra::linalg::LU::new(m)
                .try_inverse()
                .ok_or(OperatorError::ContourHitsEigenvalue)?;
            // ∮ f(z) dz ≈ Σ f(z_k)·iδe^{iφ_k}·(2π/n); the 1/(2πi) cancels
            // everything but δ e^{iφ_k}/n.
            p += inv * (e * delta / n_quad as f64);
        }
        let trace: C = (0..n).map(|i| p[(i, i)]).sum();
        let rank_estimate = trace.re.round().max(0.0) as usize;
        Ok(RieszProjection {
            p,
            delta,
            rank_estimate,
            trace,
        })
    }

    /// Perturbed-eigenvalue formula λ₀ = ⟨E, Ĥ[P E]⟩ / ⟨E, P E⟩ with the
    /// weighted inner product. Continuous in (h, κ) near a simple pole and
    /// equal to the direct eigenvalue when both exist.
    pub fn lambda0_formula(
        &self,
        proj: &RieszProjection,
        e_ref: &CVec,
    ) -> Result<C, OperatorError> {
        if e_ref.len() != self.a.ncols() {
            return Err(OperatorError::DimensionMismatch {
                expected: self.a.ncols(),
                got: e_ref.len(),
            });
        }
        let pe = &proj.p * e_ref;
        let den = dotw(&self.weights, e_ref, &pe);
        let scale = normw(&self.weights, e_ref) * normw(&self.weights, &pe);
        if den.norm() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(OperatorError::DegenerateProjection);
        }
        let ape = &self.a * &pe;
        Ok(dotw(&self.weights, e_ref, &ape) / den)
    }
}
