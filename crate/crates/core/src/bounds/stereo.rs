//! Bounds on stereographic-plane squares.

use super::{AngleRange, Branch, DomainKind, DotRange, MEMBERSHIP_TOL};
use crate::geometry::{angle_between_precise, stereo_to_sphere, StereoPoint, UnitVec3};

/// Spherical cap enclosing the preimage of a stereographic square.
///
/// The four vertices of the square lie on its circumscribed circle, and so do
/// their preimages on the sphere. The cap axis is the normal of the plane
/// through them, `(v1 - v2) x (v1 - v3)`, oriented towards the preimage of the
/// square centre. Returns `(axis, radius)` with the radius in radians.
///
/// A zero-size square yields the centre preimage and radius 0.
///
/// # Panics
/// If the branch is not a stereographic square.
pub fn ste_circle_patch(b: &Branch) -> (UnitVec3, f64) {
    assert_eq!(b.kind, DomainKind::SteSquare, "circle patch needs a stereographic square");
    let centre = b.center_preimage();
    if b.half_extent[0] == 0.0 || b.half_extent[1] == 0.0 {
        return (centre, 0.0);
    }
    let (x0, x1) = b.interval(0);
    let (y0, y1) = b.interval(1);
    let verts = [
        stereo_to_sphere(StereoPoint::new(x0, y0)),
        stereo_to_sphere(StereoPoint::new(x1, y0)),
        stereo_to_sphere(StereoPoint::new(x1, y1)),
        stereo_to_sphere(StereoPoint::new(x0, y1)),
    ];
    let v1 = verts[0].to_vector();
    let cross = (v1 - verts[1].to_vector()).cross(&(v1 - verts[2].to_vector()));
    let norm = cross.norm();
    assert!(norm > 0.0, "vertices of a non-degenerate square are not collinear");
    let axis = UnitVec3::new_unchecked(cross.x / norm, cross.y / norm, cross.z / norm);
    let axis = if axis.dot(&centre) < axis.dot(&verts[0]) {
        -axis
    } else {
        axis
    };
    let radius = verts
        .iter()
        .map(|v| angle_between_precise(&axis, v))
        .fold(0.0, f64::max);
    (axis, radius)
}

/// Exact range of angles between `n` and the preimage of a stereographic square.
///
/// # Panics
/// If the branch is not a stereographic square.
pub fn ste_square_range(b: &Branch, n: &UnitVec3) -> AngleRange {
    assert_eq!(b.kind, DomainKind::SteSquare, "square range needs a stereographic square");
    SquareEdges::new(b).dot_range(n).to_angles()
}

/// `n . v(k)` for the inverse stereographic map `v(k)`.
#[inline]
fn dot_at(a: f64, b: f64, c: f64, k1: f64, k2: f64) -> f64 {
    2.0 * (a * k1 + b * k2 + c) / (1.0 + k1 * k1 + k2 * k2) - c
}

/// Real roots of `qa x^2 + 2 qb x + qc = 0`, stable against cancellation.
///
/// A vanishing leading coefficient leaves the linear root.
#[inline]
pub(crate) fn stationary_roots(qa: f64, qb: f64, qc: f64) -> [Option<f64>; 2] {
    if qa == 0.0 {
        return if qb != 0.0 {
            [Some(-qc / (2.0 * qb)), None]
        } else {
            [None, None]
        };
    }
    let disc = qb * qb - qa * qc;
    if disc < 0.0 {
        return [None, None];
    }
    let q = -(qb + qb.signum() * disc.sqrt());
    if q == 0.0 {
        return [Some(0.0), None];
    }
    [Some(q / qa), Some(qc / q)]
}

/// Square geometry shared by all normals evaluated against one branch.
pub(crate) struct SquareEdges {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl SquareEdges {
    pub(crate) fn new(b: &Branch) -> Self {
        let (x0, x1) = b.interval(0);
        let (y0, y1) = b.interval(1);
        Self { x0, x1, y0, y1 }
    }

    fn inside(&self, k1: f64, k2: f64) -> bool {
        k1 >= self.x0 - MEMBERSHIP_TOL
            && k1 <= self.x1 + MEMBERSHIP_TOL
            && k2 >= self.y0 - MEMBERSHIP_TOL
            && k2 <= self.y1 + MEMBERSHIP_TOL
    }

    /// Min and max of `n . v` over the closed square.
    #[inline]
    pub(crate) fn dot_range(&self, n: &UnitVec3) -> DotRange {
        let (a, b, c) = (n.x(), n.y(), n.z());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut visit = |w: f64| {
            lo = lo.min(w);
            hi = hi.max(w);
        };
        for (k1, k2) in [
            (self.x0, self.y0),
            (self.x1, self.y0),
            (self.x1, self.y1),
            (self.x0, self.y1),
        ] {
            visit(dot_at(a, b, c, k1, k2));
        }
        // Edges with k2 = t fixed: a k1^2 + 2 (b t + c) k1 - a (1 + t^2) = 0.
        for t in [self.y0, self.y1] {
            for k1 in stationary_roots(a, b * t + c, -a * (1.0 + t * t)).into_iter().flatten() {
                if k1 > self.x0 && k1 < self.x1 {
                    visit(dot_at(a, b, c, k1, t));
                }
            }
        }
        // Edges with k1 = s fixed: b k2^2 + 2 (a s + c) k2 - b (1 + s^2) = 0.
        for s in [self.x0, self.x1] {
            for k2 in stationary_roots(b, a * s + c, -b * (1.0 + s * s)).into_iter().flatten() {
                if k2 > self.y0 && k2 < self.y1 {
                    visit(dot_at(a, b, c, s, k2));
                }
            }
        }
        // Interior extremes only occur at the preimages of n (max) and -n (min).
        if c > -1.0 + 1e-12 && self.inside(a / (1.0 + c), b / (1.0 + c)) {
            hi = 1.0;
        }
        if c < 1.0 - 1e-12 && self.inside(-a / (1.0 - c), -b / (1.0 - c)) {
            lo = -1.0;
        }
        DotRange {
            lo: lo.max(-1.0),
            hi: hi.min(1.0),
        }
    }
}
