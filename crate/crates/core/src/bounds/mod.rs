//! Lower/upper inlier-count bounds over a branch of a search domain.
//!
//! Two generic constructions are used:
//!
//! * [`bounds_general2`] needs a centre direction `v_c` and an uncertainty
//!   angle `psi` such that every direction of the branch is within `psi` of
//!   `v_c`; the inlier windows are widened by `psi`.
//! * [`bounds_general1`] needs, per normal, the exact range of angles between
//!   the normal and the branch; a normal counts towards the upper bound if some
//!   angle of that range falls inside an inlier window.
//!
//! The lower bound is always the inlier count at the branch centre preimage.

mod branch;
mod scs;
mod stereo;

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

pub use branch::{domain_preimage, Branch, DomainKind, Strategy};
pub use scs::scs_range;
pub use stereo::{ste_circle_patch, ste_square_range};

use crate::geometry::UnitVec3;
use crate::objective::{count_two_windows, Problem};

/// Extra angle added to uncertainty radii so that rounding in the centre
/// construction never makes an upper bound unsound.
pub const PSI_SLACK: f64 = 1e-9;

/// Widening applied to exact dot-product ranges before the upper-bound test.
pub const DOT_SLACK: f64 = 1e-12;

/// Closed-box membership tolerance in domain units.
pub(crate) const MEMBERSHIP_TOL: f64 = 1e-12;

/// Inlier-count bounds of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsPair {
    pub lower: usize,
    pub upper: usize,
    /// Direction whose inlier count is `lower`.
    pub center_preimage: UnitVec3,
    /// Uncertainty angle of the branch when the bound is built from one.
    pub uncertainty: Option<f64>,
}

/// Extremal angles between one normal and all directions of a branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleRange {
    pub phi_min: f64,
    pub phi_max: f64,
}

impl AngleRange {
    pub fn new(phi_min: f64, phi_max: f64) -> Self {
        debug_assert!(phi_min <= phi_max);
        Self { phi_min, phi_max }
    }

    /// Whether some angle of the range is within `tau` of 0, pi/2 or pi.
    pub fn admits_inlier(&self, tau: f64) -> bool {
        self.phi_min <= tau
            || self.phi_max >= PI - tau
            || (self.phi_min - tau <= FRAC_PI_2 && FRAC_PI_2 <= self.phi_max + tau)
    }
}

/// Range of `n . v` over a branch; the cosine-domain twin of [`AngleRange`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DotRange {
    pub lo: f64,
    pub hi: f64,
}

impl DotRange {
    pub(crate) fn to_angles(self) -> AngleRange {
        AngleRange::new(self.hi.clamp(-1.0, 1.0).acos(), self.lo.clamp(-1.0, 1.0).acos())
    }

    /// [`AngleRange::admits_inlier`] without inverse cosines.
    #[inline]
    pub(crate) fn admits_inlier(&self, cos_tau: f64, sin_tau: f64) -> bool {
        let lo = self.lo - DOT_SLACK;
        let hi = self.hi + DOT_SLACK;
        hi >= cos_tau || lo <= -cos_tau || (hi >= -sin_tau && lo <= sin_tau)
    }
}

/// Uncertainty angle of an angle-axis cube with half side `half_side`.
pub fn psi_rot(half_side: f64) -> f64 {
    3f64.sqrt() * half_side
}

/// Uncertainty angle of an exponential-map square with half side `half_side`.
pub fn psi_exp(half_side: f64) -> f64 {
    SQRT_2 * half_side
}

/// Bounds from a centre direction and an uncertainty angle.
///
/// The widened threshold `tau + psi` is clamped at `pi/2`, where both windows
/// cover everything and the upper bound is `N`.
pub fn bounds_general2(p: &Problem, v_c: &UnitVec3, psi: f64) -> BoundsPair {
    debug_assert!(psi >= 0.0);
    let widened = p.tau() + psi;
    let (lower, upper) = if widened >= FRAC_PI_2 {
        (p.count_inliers(v_c), p.len())
    } else {
        let (s, c) = widened.sin_cos();
        count_two_windows(p, v_c, (p.cos_tau(), p.sin_tau()), (c, s))
    };
    BoundsPair {
        lower,
        upper,
        center_preimage: *v_c,
        uncertainty: Some(psi),
    }
}

/// Bounds from per-normal angle ranges; `ranges[j]` belongs to normal `j`.
///
/// # Panics
/// If `ranges.len()` differs from the number of normals.
pub fn bounds_general1(p: &Problem, v_c: &UnitVec3, ranges: &[AngleRange]) -> BoundsPair {
    assert_eq!(ranges.len(), p.len(), "one angle range per normal");
    let tau = p.tau();
    BoundsPair {
        lower: p.count_inliers(v_c),
        upper: ranges.iter().filter(|r| r.admits_inlier(tau)).count(),
        center_preimage: *v_c,
        uncertainty: None,
    }
}

fn general1_with(p: &Problem, v_c: &UnitVec3, range_of: impl Fn(&UnitVec3) -> DotRange) -> BoundsPair {
    let (cos_tau, sin_tau) = (p.cos_tau(), p.sin_tau());
    let upper = p
        .normals()
        .filter(|n| range_of(n).admits_inlier(cos_tau, sin_tau))
        .count();
    BoundsPair {
        lower: p.count_inliers(v_c),
        upper,
        center_preimage: *v_c,
        uncertainty: None,
    }
}

/// Bounds of `b` under `strategy`.
///
/// # Panics
/// If the branch domain does not belong to the strategy.
pub fn evaluate_bounds(p: &Problem, b: &Branch, strategy: Strategy) -> BoundsPair {
    assert_eq!(
        b.kind,
        strategy.domain(),
        "strategy {strategy} cannot bound a {:?} branch",
        b.kind
    );
    if let Some((v_c, psi)) = enclosing_cap(b, strategy) {
        return bounds_general2(p, &v_c, psi);
    }
    match strategy {
        Strategy::SteSquare => {
            let edges = stereo::SquareEdges::new(b);
            general1_with(p, &b.center_preimage(), |n| edges.dot_range(n))
        }
        Strategy::Scs => {
            let edges = scs::RectEdges::new(b);
            general1_with(p, &b.center_preimage(), |n| edges.dot_range(n))
        }
        Strategy::Rot | Strategy::Exp | Strategy::SteCircle => unreachable!("cap strategies return above"),
    }
}

/// Cap `(centre, radius)` containing every direction of the branch, for the
/// strategies whose bounds are built from one. The radius includes
/// [`PSI_SLACK`].
fn enclosing_cap(b: &Branch, strategy: Strategy) -> Option<(UnitVec3, f64)> {
    let with_slack = |psi: f64| if psi > 0.0 { psi + PSI_SLACK } else { 0.0 };
    match strategy {
        Strategy::Rot => Some((b.center_preimage(), with_slack(psi_rot(b.max_half_extent())))),
        Strategy::Exp => Some((b.center_preimage(), with_slack(psi_exp(b.max_half_extent())))),
        Strategy::SteCircle => {
            let (v_c, psi) = ste_circle_patch(b);
            Some((v_c, with_slack(psi)))
        }
        Strategy::SteSquare | Strategy::Scs => None,
    }
}
