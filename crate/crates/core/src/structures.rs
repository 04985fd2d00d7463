//! Periodic dielectric geometry and its quadrature.
//!
//! A structure is a period-1 arrangement of dielectric inclusions (disks and
//! axis-aligned rectangles) in the `(x, z)` plane, infinite and periodic in
//! `x`, confined in `z`. The dielectric function is built additively from
//! "bumps": ε(x, z) = 1 + Σ_j (ε_j − 1)·𝟙_{S_j}(x, z), which keeps ε ≥ 1,
//! makes overlapping inclusions well defined, and mirrors how the scattering
//! integral operator sees the structure — as a sum of integrals over the
//! individual supports.
//!
//! Two arrays can be coupled: a structure with `Coupling::DoubleArray` places
//! the first sub-array shifted to `z + h` and the second to `z − h`, with the
//! half-distance `h` confined to an open interval `J₀ = (h_lo, h_hi)` over
//! which the union of all supports stays bounded in `z`. The coupled
//! dielectric function is
//!
//! ε(h; x, z) = 1 + (ε₁(x, z − h) − 1) + (ε₂(x, z + h) − 1),
//!
//! so moving `h` slides the two arrays apart symmetrically; at `h = 0` (when
//! `J₀` contains it) the arrays overlap and their bumps add.
//!
//! Quadrature: each disk gets a tensor Gauss–Legendre rule in the variables
//! (ρ², θ) — the area element is dA = ½ dρ² dθ, so constants are integrated
//! exactly and the weights of a disk sum to πr² to machine precision. The
//! angular direction carries 3× the radial node count: plane-wave moments
//! ∫ e^{ikx} dA of the rule must be accurate to ~1e−12 for kr ≤ 5, and the
//! Gauss–Legendre rule on the (non-periodically-exploited) angle is the
//! accuracy bottleneck — 3n angular nodes clear the requirement with orders
//! of magnitude to spare, n angular nodes do not. Rectangles get a plain
//! order×order tensor rule. Node counts grow as O(order²) per inclusion.
//!
//! Nodes keep the natural coordinates of their inclusion (no per-node mod-1
//! wrapping): all within-inclusion distances are then exact, which the
//! singular-diagonal corrections of the integral operator rely on. For the
//! benchmark geometries (centers at x₀ = 0.5, radii ≤ 0.3) all nodes lie
//! strictly inside the box D = [0,1] × [z₋, z₊].

use serde::{Deserialize, Serialize};

use crate::quad::gauss_legendre;

/// Geometric primitive of an inclusion, in the coordinates of its own array
/// (before any coupling shift in z).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// Disk of radius `radius` centered at `center = [x₀, z₀]`.
    Disk { center: [f64; 2], radius: f64 },
    /// Axis-aligned rectangle centered at `center`, half-widths
    /// `half_size = [a, b]` (extent `x₀ ± a`, `z₀ ± b`).
    Rect { center: [f64; 2], half_size: [f64; 2] },
}

impl Shape {
    /// Signed membership test against the periodic images in x: the x-offset
    /// is reduced to [−1/2, 1/2] before the test (shapes are required to fit
    /// within one period, see [`StructureSpec::validate`]).
    fn contains(&self, x: f64, z: f64) -> bool {
        match *self {
            Shape::Disk { center, radius } => {
                let dx = per_dist(x - center[0]);
                let dz = z - center[1];
                dx * dx + dz * dz <= radius * radius
            }
            Shape::Rect { center, half_size } => {
                let dx = per_dist(x - center[0]);
                let dz = z - center[1];
                dx.abs() <= half_size[0] && dz.abs() <= half_size[1]
            }
        }
    }

    /// z-extent (min, max) of the shape in its own array coordinates.
    fn z_extent(&self) -> (f64, f64) {
        match *self {
            Shape::Disk { center, radius } => (center[1] - radius, center[1] + radius),
            Shape::Rect { center, half_size } => (center[1] - half_size[1], center[1] + half_size[1]),
        }
    }

    /// Area of the shape.
    pub fn area(&self) -> f64 {
        match *self {
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Rect { half_size, .. } => 4.0 * half_size[0] * half_size[1],
        }
    }

    /// Shape translated by `dz` in z.
    fn shifted_z(&self, dz: f64) -> Shape {
        match *self {
            Shape::Disk { center, radius } => Shape::Disk {
                center: [center[0], center[1] + dz],
                radius,
            },
            Shape::Rect { center, half_size } => Shape::Rect {
                center: [center[0], center[1] + dz],
                half_size,
            },
        }
    }

    /// Mirror image under z → −z.
    fn z_mirrored(&self) -> Shape {
        match *self {
            Shape::Disk { center, radius } => Shape::Disk {
                center: [center[0], -center[1]],
                radius,
            },
            Shape::Rect { center, half_size } => Shape::Rect {
                center: [center[0], -center[1]],
                half_size,
            },
        }
    }
}

/// Offset reduced to the symmetric period interval [−1/2, 1/2].
#[inline]
fn per_dist(dx: f64) -> f64 {
    dx - dx.round()
}

/// One homogeneous inclusion: a shape filled with relative permittivity
/// `eps ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    #[serde(flatten)]
    pub shape: Shape,
    pub eps: f64,
}

/// Inter-array coupling mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coupling {
    /// A single array; the structure is h-independent.
    None,
    /// Two arrays: `first` shifted to z + h, `second` to z − h.
    DoubleArray {
        first: Vec<Inclusion>,
        second: Vec<Inclusion>,
    },
}

/// Periodic dielectric structure with an optional coupling parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    /// Inclusions of the uncoupled structure; used when `coupling` is `None`.
    #[serde(default)]
    pub inclusions: Vec<Inclusion>,
    /// Coupling mode; `DoubleArray` carries its own two inclusion lists.
    #[serde(default = "default_coupling")]
    pub coupling: Coupling,
    /// Open interval J₀ of admissible coupling values. Unbounded for single
    /// arrays (where h is ignored); must be finite for double arrays so that
    /// the union of supports over h ∈ J₀ stays bounded.
    #[serde(default = "default_h_range")]
    pub h_range: (f64, f64),
}

fn default_coupling() -> Coupling {
    Coupling::None
}

fn default_h_range() -> (f64, f64) {
    (f64::NEG_INFINITY, f64::INFINITY)
}

/// Errors from geometry construction and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StructureError {
    /// The coupling parameter lies outside the open interval J₀.
    #[error("coupling parameter h = {h} outside the admissible interval ({lo}, {hi})")]
    OutOfRange { h: f64, lo: f64, hi: f64 },
    /// The structure violates a geometric or material constraint.
    #[error("invalid structure: {0}")]
    Invalid(String),
}

/// The box D = [0,1] × [z₋, z₊] enclosing every support the structure can
/// produce as h ranges over J₀, with 10% padding in the z-extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportBox {
    pub z_lo: f64,
    pub z_hi: f64,
    /// Set when the structure has no inclusions (empty support: ε ≡ 1).
    pub degenerate: bool,
}

/// Contiguous slice of quadrature nodes belonging to one placed inclusion.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGroup {
    /// Index range into the node/weight arrays.
    pub range: std::ops::Range<usize>,
    /// Permittivity of the inclusion; the operator kernel carries the factor
    /// (eps − 1) per group.
    pub eps: f64,
    /// The inclusion's shape at its final position (coupling shift applied).
    pub shape: Shape,
}

/// Quadrature rule over the structure support at a fixed coupling value.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDomain {
    /// Enclosing box in z (the x-extent is always one period, [0, 1]).
    pub z_box: (f64, f64),
    /// Node positions (x, z), grouped per inclusion.
    pub nodes: Vec<[f64; 2]>,
    /// Positive weights; a group's weights sum to its shape's area.
    pub weights: Vec<f64>,
    /// Per-inclusion grouping, in the order the arrays were laid out.
    pub groups: Vec<NodeGroup>,
}

impl QuadratureDomain {
    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Total area of the support (sum of all weights).
    pub fn total_area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// ε − 1 for a node, via its group.
    pub fn eps_minus_one(&self, node: usize) -> f64 {
        for g in &self.groups {
            if g.range.contains(&node) {
                return g.eps - 1.0;
            }
        }
        0.0
    }
}

impl StructureSpec {
    /// Single array of inclusions; any h is accepted and ignored.
    pub fn single(inclusions: Vec<Inclusion>) -> Result<Self, StructureError> {
        let s = StructureSpec {
            inclusions,
            coupling: Coupling::None,
            h_range: default_h_range(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Two coupled arrays with half-distance h restricted to the open
    /// interval `h_range`.
    pub fn double_array(
        first: Vec<Inclusion>,
        second: Vec<Inclusion>,
        h_range: (f64, f64),
    ) -> Result<Self, StructureError> {
        let s = StructureSpec {
            inclusions: Vec::new(),
            coupling: Coupling::DoubleArray { first, second },
            h_range,
        };
        s.validate()?;
        Ok(s)
    }

    /// A mirror-symmetric pair of identical arrays — the configuration whose
    /// branches can carry bound states in the continuum at kx = 0.
    pub fn symmetric_pair(
        array: Vec<Inclusion>,
        h_range: (f64, f64),
    ) -> Result<Self, StructureError> {
        let mirrored = array
            .iter()
            .map(|inc| Inclusion {
                shape: inc.shape.z_mirrored(),
                eps: inc.eps,
            })
            .collect();
        Self::double_array(array, mirrored, h_range)
    }

    /// Check material and geometric invariants: ε ≥ 1 everywhere, positive
    /// shape dimensions, shapes no wider than the period, finite J₀ for
    /// coupled arrays.
    pub fn validate(&self) -> Result<(), StructureError> {
        let check = |inc: &Inclusion| -> Result<(), StructureError> {
            if !(inc.eps >= 1.0) || !inc.eps.is_finite() {
                return Err(StructureError::Invalid(format!(
                    "inclusion permittivity {} must be finite and ≥ 1",
                    inc.eps
                )));
            }
            let (w, label) = match inc.shape {
                Shape::Disk { radius, .. } => (2.0 * radius, "disk diameter"),
                Shape::Rect { half_size, .. } => (2.0 * half_size[0], "rectangle width"),
            };
            if !(w > 0.0) {
                return Err(StructureError::Invalid(format!("{label} must be positive")));
            }
            if w >= 1.0 {
                return Err(StructureError::Invalid(format!(
                    "{label} {w} does not fit within one period"
                )));
            }
            if let Shape::Rect { half_size, .. } = inc.shape {
                if !(half_size[1] > 0.0) {
                    return Err(StructureError::Invalid(
                        "rectangle height must be positive".into(),
                    ));
                }
            }
            Ok(())
        };
        for inc in &self.inclusions {
            check(inc)?;
        }
        if let Coupling::DoubleArray { first, second } = &self.coupling {
            for inc in first.iter().chain(second) {
                check(inc)?;
            }
            let (lo, hi) = self.h_range;
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(StructureError::Invalid(format!(
                    "coupled arrays need a finite open interval of couplings, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    /// Whether h lies in the open interval J₀.
    pub fn h_admissible(&self, h: f64) -> bool {
        self.h_range.0 < h && h < self.h_range.1
    }

    fn require_h(&self, h: f64) -> Result<(), StructureError> {
        if self.h_admissible(h) {
            Ok(())
        } else {
            Err(StructureError::OutOfRange {
                h,
                lo: self.h_range.0,
                hi: self.h_range.1,
            })
        }
    }

    /// The arrays making up the structure at coupling h, as (z-shift, slice)
    /// pairs.
    fn arrays(&self, h: f64) -> Vec<(f64, &[Inclusion])> {
        match &self.coupling {
            Coupling::None => vec![(0.0, self.inclusions.as_slice())],
            Coupling::DoubleArray { first, second } => {
                vec![(h, first.as_slice()), (-h, second.as_slice())]
            }
        }
    }

    /// Dielectric function ε(h; x, z). Periodic in x with period exactly 1;
    /// overlapping inclusions contribute additively in ε − 1.
    pub fn eval_epsilon(&self, h: f64, x: f64, z: f64) -> Result<f64, StructureError> {
        self.require_h(h)?;
        let mut eps = 1.0;
        for (shift, incs) in self.arrays(h) {
            for inc in incs {
                if inc.shape.contains(x, z - shift) {
                    eps += inc.eps - 1.0;
                }
            }
        }
        Ok(eps)
    }

    /// Enclosing box of all supports over h ∈ J₀, padded by 10% of the total
    /// z-extent (5% per side).
    pub fn support_box(&self) -> SupportBox {
        let mut z_lo = f64::INFINITY;
        let mut z_hi = f64::NEG_INFINITY;
        let mut any = false;
        match &self.coupling {
            Coupling::None => {
                for inc in &self.inclusions {
                    let (a, b) = inc.shape.z_extent();
                    z_lo = z_lo.min(a);
                    z_hi = z_hi.max(b);
                    any = true;
                }
            }
            Coupling::DoubleArray { first, second } => {
                let (h_lo, h_hi) = self.h_range;
                for inc in first {
                    let (a, b) = inc.shape.z_extent();
                    z_lo = z_lo.min(a + h_lo);
                    z_hi = z_hi.max(b + h_hi);
                    any = true;
                }
                for inc in second {
                    let (a, b) = inc.shape.z_extent();
                    z_lo = z_lo.min(a - h_hi);
                    z_hi = z_hi.max(b - h_lo);
                    any = true;
                }
            }
        }
        if !any {
            return SupportBox {
                z_lo: 0.0,
                z_hi: 0.0,
                degenerate: true,
            };
        }
        let pad = 0.05 * (z_hi - z_lo);
        SupportBox {
            z_lo: z_lo - pad,
            z_hi: z_hi + pad,
            degenerate: false,
        }
    }

    /// Quadrature rule over the support at coupling h.
    ///
    /// Disks get the polar tensor rule (order radial × 3·order angular nodes
    /// in (ρ², θ)); rectangles an order×order tensor Gauss–Legendre rule.
    /// Group weights sum to the exact shape areas.
    pub fn build_quadrature(
        &self,
        h: f64,
        order: usize,
    ) -> Result<QuadratureDomain, StructureError> {
        self.require_h(h)?;
        if order < 1 {
            return Err(StructureError::Invalid("quadrature order must be ≥ 1".into()));
        }
        let sb = self.support_box();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut groups = Vec::new();
        for (shift, incs) in self.arrays(h) {
            for inc in incs {
                let start = nodes.len();
                let placed = inc.shape.shifted_z(shift);
                match placed {
                    Shape::Disk { center, radius } => {
                        disk_rule(center, radius, order, &mut nodes, &mut weights);
                    }
                    Shape::Rect { center, half_size } => {
                        rect_rule(center, half_size, order, &mut nodes, &mut weights);
                    }
                }
                groups.push(NodeGroup {
                    range: start..nodes.len(),
                    eps: inc.eps,
                    shape: placed,
                });
            }
        }
        Ok(QuadratureDomain {
            z_box: (sb.z_lo, sb.z_hi),
            nodes,
            weights,
            groups,
        })
    }
}

/// Tensor Gauss–Legendre rule on a disk in the variables (u, θ) = (ρ², θ):
/// dA = ½ du dθ, u ∈ [0, r²], θ ∈ [0, 2π]. `order` radial × `3·order`
/// angular points.
fn disk_rule(
    center: [f64; 2],
    radius: f64,
    order: usize,
    nodes: &mut Vec<[f64; 2]>,
    weights: &mut Vec<f64>,
) {
    let (tu, wu) = gauss_legendre(order);
    let (tt, wt) = gauss_legendre(3 * order);
    let r2 = radius * radius;
    for (ui, uw) in tu.iter().zip(&wu) {
        let u = 0.5 * (ui + 1.0) * r2;
        let rho = u.sqrt();
        let uw = 0.5 * r2 * uw;
        for (ti, tw) in tt.iter().zip(&wt) {
            let th = std::f64::consts::PI * (ti + 1.0);
            let tw = std::f64::consts::PI * tw;
            nodes.push([center[0] + rho * th.cos(), center[1] + rho * th.sin()]);
            weights.push(0.5 * uw * tw);
        }
    }
}

/// Tensor Gauss–Legendre rule on an axis-aligned rectangle, order × order.
fn rect_rule(
    center: [f64; 2],
    half_size: [f64; 2],
    order: usize,
    nodes: &mut Vec<[f64; 2]>,
    weights: &mut Vec<f64>,
) {
    let (t, w) = gauss_legendre(order);
    for (xi, xw) in t.iter().zip(&w) {
        let x = center[0] + half_size[0] * xi;
        for (zi, zw) in t.iter().zip(&w) {
            let z = center[1] + half_size[1] * zi;
            nodes.push([x, z]);
            weights.push(half_size[0] * half_size[1] * xw * zw);
        }
    }
}

/// Convenience constructor for a disk inclusion.
pub fn disk(x0: f64, z0: f64, radius: f64, eps: f64) -> Inclusion {
    Inclusion {
        shape: Shape::Disk {
            center: [x0, z0],
            radius,
        },
        eps,
    }
}

/// Convenience constructor for a rectangle inclusion.
pub fn rect(x0: f64, z0: f64, half_w: f64, half_h: f64, eps: f64) -> Inclusion {
    Inclusion {
        shape: Shape::Rect {
            center: [x0, z0],
            half_size: [half_w, half_h],
        },
        eps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Two disks of radius 0.25, ε = 2, centered at (0.5, 0) in each array —
    /// under coupling h they sit at (0.5, ±h).
    fn twin_disks(h_range: (f64, f64)) -> StructureSpec {
        StructureSpec::symmetric_pair(vec![disk(0.5, 0.0, 0.25, 2.0)], h_range).unwrap()
    }

    #[test]
    fn double_array_pointwise_values() {
        let s = twin_disks((-0.5, 1.5));
        // h = 1: disk centers at z = ±1.
        assert_eq!(s.eval_epsilon(1.0, 0.5, 1.0).unwrap(), 2.0);
        assert_eq!(s.eval_epsilon(1.0, 0.5, 0.0).unwrap(), 1.0);
        // h = 0: both arrays overlap; bumps add to 1 + 1 + 1.
        assert_eq!(s.eval_epsilon(0.0, 0.5, 0.0).unwrap(), 3.0);
    }

    #[test]
    fn out_of_range_coupling_is_rejected() {
        let s = twin_disks((0.5, 2.0));
        assert!(matches!(
            s.eval_epsilon(2.5, 0.5, 0.0),
            Err(StructureError::OutOfRange { .. })
        ));
        // The interval is open: endpoints are excluded.
        assert!(matches!(
            s.eval_epsilon(0.5, 0.5, 0.0),
            Err(StructureError::OutOfRange { .. })
        ));
        assert!(s.eval_epsilon(1.0, 0.5, 0.0).is_ok());
    }

    #[test]
    fn empty_structure_is_vacuum_and_degenerate() {
        let s = StructureSpec::single(vec![]).unwrap();
        assert_eq!(s.eval_epsilon(0.3, 0.1, -2.0).unwrap(), 1.0);
        let b = s.support_box();
        assert!(b.degenerate);
        assert_eq!((b.z_lo, b.z_hi), (0.0, 0.0));
    }

    #[test]
    fn validation_rejects_bad_materials_and_shapes() {
        assert!(StructureSpec::single(vec![disk(0.5, 0.0, 0.25, 0.9)]).is_err());
        assert!(StructureSpec::single(vec![disk(0.5, 0.0, -0.1, 2.0)]).is_err());
        assert!(StructureSpec::single(vec![disk(0.5, 0.0, 0.5, 2.0)]).is_err());
        // Coupled arrays must come with a finite coupling interval.
        assert!(StructureSpec::double_array(
            vec![disk(0.5, 0.0, 0.25, 2.0)],
            vec![disk(0.5, 0.0, 0.25, 2.0)],
            (0.5, f64::INFINITY),
        )
        .is_err());
    }

    #[test]
    fn support_box_single_array() {
        let s = StructureSpec::single(vec![disk(0.5, 0.0, 0.3, 2.0)]).unwrap();
        let b = s.support_box();
        assert!(!b.degenerate);
        // 10% padding on the extent 0.6: box reaches ±0.33.
        assert!(b.z_lo <= -0.33 + 1e-15 && b.z_hi >= 0.33 - 1e-15);
        assert_relative_eq!(b.z_lo, -0.33, max_relative = 1e-14);
    }

    #[test]
    fn support_box_double_array_covers_whole_coupling_interval() {
        let s = twin_disks((0.5, 2.0));
        let b = s.support_box();
        // Extreme excursion: |z| up to 2 + 0.25 before padding.
        assert!(b.z_lo <= -2.25 && b.z_hi >= 2.25);
        assert!(b.z_lo >= -2.5 && b.z_hi <= 2.5, "padding should stay moderate");
    }

    #[test]
    fn disk_weights_sum_to_exact_area() {
        let s = StructureSpec::single(vec![disk(0.5, 0.0, 0.25, 2.0)]).unwrap();
        for order in [1usize, 4, 10, 16] {
            let q = s.build_quadrature(0.0, order).unwrap();
            let area = std::f64::consts::PI * 0.0625;
            assert_relative_eq!(q.total_area(), area, max_relative = 1e-12);
            assert_eq!(q.len(), 3 * order * order);
            assert!(q.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn disk_rule_integrates_linear_moment_exactly() {
        // ∫_disk (1 + x) dA = πr²(1 + x₀).
        let s = StructureSpec::single(vec![disk(0.4, -0.2, 0.25, 3.0)]).unwrap();
        let q = s.build_quadrature(0.0, 10).unwrap();
        let quad: f64 = q
            .nodes
            .iter()
            .zip(&q.weights)
            .map(|(n, w)| w * (1.0 + n[0]))
            .sum();
        let exact = std::f64::consts::PI * 0.0625 * 1.4;
        assert_relative_eq!(quad, exact, max_relative = 1e-12);
    }

    #[test]
    fn disk_rule_plane_wave_moments() {
        // ∫_disk e^{ikx} dA = 2πr J₁(kr)/k · e^{ikx₀}, tested at kr = 2 and
        // kr = 5 with order 12.
        let r = 0.25;
        let x0 = 0.5;
        let s = StructureSpec::single(vec![disk(x0, 0.0, r, 2.0)]).unwrap();
        let q = s.build_quadrature(0.0, 12).unwrap();
        let j1 = [(2.0, 0.5767248077568733872), (5.0, -0.3275791375914652220)];
        for (kr, j1kr) in j1 {
            let k = kr / r;
            let quad: C = q
                .nodes
                .iter()
                .zip(&q.weights)
                .map(|(n, w)| C::new(0.0, k * n[0]).exp() * *w)
                .sum();
            let exact =
                C::new(0.0, k * x0).exp() * (2.0 * std::f64::consts::PI * r * j1kr / k);
            assert!(
                (quad - exact).norm() <= 1e-10,
                "kr = {kr}: error {:.3e}",
                (quad - exact).norm()
            );
        }
    }

    #[test]
    fn rect_rule_area_and_plane_wave() {
        let s = StructureSpec::single(vec![rect(0.5, 0.1, 0.2, 0.15, 2.0)]).unwrap();
        let q = s.build_quadrature(0.0, 12).unwrap();
        assert_relative_eq!(q.total_area(), 4.0 * 0.2 * 0.15, max_relative = 1e-14);
        // ∫ e^{ikx} dA = e^{ikx₀}·(2 sin(ka)/k)·(2b) over [x₀±a]×[z₀±b].
        let k = 7.0;
        let quad: C = q
            .nodes
            .iter()
            .zip(&q.weights)
            .map(|(n, w)| C::new(0.0, k * n[0]).exp() * *w)
            .sum();
        let exact = C::new(0.0, k * 0.5).exp() * (2.0 * (k * 0.2).sin() / k) * 0.3;
        assert!((quad - exact).norm() < 1e-12);
    }

    #[test]
    fn double_array_quadrature_groups_and_positions() {
        let s = twin_disks((0.5, 2.0));
        let q = s.build_quadrature(0.8, 6).unwrap();
        assert_eq!(q.groups.len(), 2);
        // Total weight = two disk areas.
        assert_relative_eq!(
            q.total_area(),
            2.0 * std::f64::consts::PI * 0.0625,
            max_relative = 1e-12
        );
        // First group sits around z = +0.8, second around z = −0.8.
        let mean_z = |g: &NodeGroup| -> f64 {
            let zs: f64 = q.nodes[g.range.clone()].iter().map(|n| n[1]).sum();
            zs / g.range.len() as f64
        };
        assert!((mean_z(&q.groups[0]) - 0.8).abs() < 1e-12);
        assert!((mean_z(&q.groups[1]) + 0.8).abs() < 1e-12);
        // All nodes inside the box, eps bookkeeping intact.
        for (i, n) in q.nodes.iter().enumerate() {
            assert!(n[1] > q.z_box.0 && n[1] < q.z_box.1);
            assert!(n[0] > 0.0 && n[0] < 1.0);
            assert_eq!(q.eps_minus_one(i), 1.0);
        }
        // Node count: 3·order² per disk.
        assert_eq!(q.len(), 2 * 3 * 36);
    }

    proptest! {
        #[test]
        fn epsilon_at_least_one_and_periodic(
            x in -3.0..3.0f64,
            z in -3.0..3.0f64,
            h in 0.51..1.99f64,
        ) {
            let s = twin_disks((0.5, 2.0));
            let e = s.eval_epsilon(h, x, z).unwrap();
            prop_assert!(e >= 1.0);
            let e1 = s.eval_epsilon(h, x + 1.0, z).unwrap();
            prop_assert_eq!(e, e1);
        }

        #[test]
        fn symmetric_pair_is_z_symmetric(
            x in 0.0..1.0f64,
            z in -3.0..3.0f64,
            h in 0.51..1.99f64,
        ) {
            let s = twin_disks((0.5, 2.0));
            let up = s.eval_epsilon(h, x, z).unwrap();
            let dn = s.eval_epsilon(h, x, -z).unwrap();
            prop_assert_eq!(up, dn);
        }
    }
}
