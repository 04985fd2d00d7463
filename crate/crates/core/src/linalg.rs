//! Dense complex linear algebra for the discretized integral operator.
//!
//! The Nyström matrices are dense, non-Hermitian and of moderate size
//! (N ≤ 4000), so everything here is direct: LU factorization for resolvent
//! solves, complex Schur for full spectra, shifted inverse iteration for
//! individual eigenvectors, and a power iteration on the inverse Gram
//! operator for smallest singular values. The LU factors are kept explicitly
//! so that adjoint systems Mᴴx = b can be solved from the same factorization
//! — the σ_min iteration applies (M M ᴴ)⁻¹ repeatedly and would otherwise pay
//! a second factorization.
//!
//! Conventions: a right eigenpair satisfies A v = λ v; a left eigenvector is
//! a vector w with Aᴴ w = conj(λ) w, i.e. wᴴ A = λ wᴴ. For a simple
//! eigenvalue the left/right vectors of *different* eigenvalues are
//! biorthogonal, which the spectral projections downstream rely on.

use nalgebra::{DMatrix, DVector, Dyn};

use crate::C;

/// Dense complex matrix.
pub type CMat = DMatrix<C>;
/// Dense complex (column) vector.
pub type CVec = DVector<C>;

/// Errors from the dense solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    /// The matrix is singular to working precision.
    #[error("matrix is singular to working precision")]
    Singular,
    /// The QR/Schur iteration failed to converge.
    #[error("Schur iteration did not converge")]
    SchurFailed,
    /// Inverse iteration failed to reach the residual target.
    #[error("eigenvector iteration stalled (residual {residual:.3e})")]
    NoConvergence { residual: f64 },
}

/// LU factorization with explicit factors, supporting solves with M and Mᴴ.
pub struct LuFactors {
    lu: nalgebra::linalg::LU<C, Dyn, Dyn>,
    l: CMat,
    u: CMat,
}

impl LuFactors {
    pub fn new(m: CMat) -> Self {
        let lu = nalgebra::linalg::LU::new(m);
        let l = lu.l();
        let u = lu.u();
        LuFactors { lu, l, u }
    }

    /// Solve M x = b. `None` when U has an (exactly or numerically) zero pivot.
    pub fn solve(&self, b: &CVec) -> Option<CVec> {
        self.lu.solve(b)
    }

    /// Solve Mᴴ x = b from the same factorization: with P M = L U this is
    /// Uᴴ (Lᴴ (P x)) = b, two triangular adjoint solves and an inverse
    /// permutation.
    pub fn solve_adjoint(&self, b: &CVec) -> Option<CVec> {
        let a = self.u.ad_solve_upper_triangular(b)?;
        let mut c = self.l.ad_solve_lower_triangular(&a)?;
        self.lu.p().inv_permute_rows(&mut c);
        Some(c)
    }

    /// Determinant of M.
    pub fn det(&self) -> C {
        self.lu.determinant()
    }
}

/// Frobenius norm (the discrete Hilbert–Schmidt norm of a kernel matrix).
pub fn fro_norm(m: &CMat) -> f64 {
    m.norm()
}

/// All eigenvalues of a complex matrix, from the triangular factor of its
/// Schur decomposition. Order is as produced by the QR iteration.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C>, LinalgError> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    // Exactly triangular input (the vacuum operator assembles to the zero
    // matrix, for one) stalls the QR deflation test, whose relative
    // threshold can never fire on all-zero rows. It also needs no work.
    if (0..n).all(|j| (j + 1..n).all(|i| m[(i, j)] == C::new(0.0, 0.0))) {
        return Ok((0..n).map(|i| m[(i, i)]).collect());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, 200 * n + 1000)
        .ok_or(LinalgError::SchurFailed)?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Deterministic pseudo-random start vector for iterative methods.
fn seed_vector(n: usize, mut state: u64) -> CVec {
    CVec::from_fn(n, |_, _| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let re = ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let im = ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
        C::new(re, im)
    })
}

/// Right eigenvector of A for the eigenvalue near `lambda`, by shifted
/// inverse iteration. Returns the (unit-norm) vector and the refined
/// Rayleigh-quotient eigenvalue. The residual target is `tol`·‖A‖_F.
pub fn right_eigenvector(a: &CMat, lambda: C, tol: f64) -> Result<(C, CVec), LinalgError> {
    inverse_iteration(a, lambda, tol, false)
}

/// Left eigenvector: Aᴴ w = conj(λ) w. Same contract as
/// [`right_eigenvector`]; the returned eigenvalue is λ itself (not its
/// conjugate).
pub fn left_eigenvector(a: &CMat, lambda: C, tol: f64) -> Result<(C, CVec), LinalgError> {
    inverse_iteration(a, lambda, tol, true)
}

fn inverse_iteration(
    a: &CMat,
    lambda: C,
    tol: f64,
    left: bool,
) -> Result<(C, CVec), LinalgError> {
    let n = a.nrows();
    let scale = fro_norm(a).max(f64::MIN_POSITIVE);
    let mut shift = lambda;
    let mut v = seed_vector(n, 0x00c0_ffee_1234_5678);
    v /= C::new(v.norm(), 0.0);
    let mut best: Option<(f64, C, CVec)> = None;
    // The factorization of A − shift·I is reused across sweeps; only when the
    // Rayleigh quotient has moved appreciably do we re-factor (one Rayleigh
    // restart is enough in practice — the Schur value we are handed is
    // already accurate).
    'restart: for _ in 0..3 {
        let shifted = if left {
            let mut m = a.adjoint();
            for i in 0..n {
                m[(i, i)] -= shift.conj();
            }
            m
        } else {
            let mut m = a.clone();
            for i in 0..n {
                m[(i, i)] -= shift;
            }
            m
        };
        let lu = LuFactors::new(shifted);
        for _ in 0..25 {
            let w = match lu.solve(&v) {
                Some(w) => w,
                None => {
                    // Exactly singular shift: nudge off the eigenvalue.
                    shift += C::new(1e-13 * scale, 1e-13 * scale);
                    continue 'restart;
                }
            };
            let norm = w.norm();
            if !norm.is_finite() || norm == 0.0 {
                shift += C::new(1e-13 * scale, 1e-13 * scale);
                continue 'restart;
            }
            v = w / C::new(norm, 0.0);
            // Rayleigh quotient and residual against the *original* matrix.
            let (ray, resid) = if left {
                let av = a.ad_mul(&v);
                let ray = v.dotc(&av).conj();
                let r = (&av - &v * ray.conj()).norm();
                (ray, r)
            } else {
                let av = a * &v;
                let ray = v.dotc(&av);
                let r = (&av - &v * ray).norm();
                (ray, r)
            };
            if best.as_ref().is_none_or(|(b, _, _)| resid < *b) {
                best = Some((resid, ray, v.clone()));
            }
            if resid <= tol * scale {
                return Ok((ray, v));
            }
        }
        // Rayleigh restart.
        if let Some((_, ray, _)) = &best {
            shift = *ray;
        }
    }
    let (residual, ray, v) = best.ok_or(LinalgError::Singular)?;
    if residual <= 10.0 * tol * scale {
        Ok((ray, v))
    } else {
        Err(LinalgError::NoConvergence { residual })
    }
}

/// Smallest singular value of M, via power iteration on (M Mᴴ)⁻¹ using one
/// LU factorization. Returns 0 for a numerically singular matrix.
pub fn smallest_singular(m: &CMat) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let lu = LuFactors::new(m.clone());
    let mut x = seed_vector(n, 0x9e37_79b9_7f4a_7c15);
    x /= C::new(x.norm(), 0.0);
    let mut mu = 0.0f64;
    for it in 0..40 {
        // y = M⁻ᴴ x, z = M⁻¹ y  ⇒  z = (M Mᴴ)⁻¹ x.
        let y = match lu.solve_adjoint(&x) {
            Some(y) => y,
            None => return 0.0,
        };
        let z = match lu.solve(&y) {
            Some(z) => z,
            None => return 0.0,
        };
        let nz = z.norm();
        if !nz.is_finite() {
            return 0.0;
        }
        if nz == 0.0 {
            return f64::INFINITY;
        }
        let mu_new = nz;
        let x_new = z / C::new(nz, 0.0);
        if it > 3 && (mu_new - mu).abs() <= 1e-6 * mu_new {
            return 1.0 / mu_new.sqrt();
        }
        mu = mu_new;
        x = x_new;
    }
    1.0 / mu.sqrt()
}
