//! Bounds on azimuth/elevation rectangles.
//!
//! On a constant-elevation edge `n . v = cos(e) r cos(h1 - alpha) + c sin(e)`
//! with `r = |(a, b)|`, `alpha = atan2(b, a)`; on a constant-azimuth edge
//! `n . v = m cos(h2) + c sin(h2)` with `m = a cos(z) + b sin(z)`. Both are
//! sinusoids, so their stationary points are closed-form.

use std::f64::consts::{PI, TAU};

use super::{AngleRange, Branch, DomainKind, DotRange, MEMBERSHIP_TOL};
use crate::geometry::UnitVec3;

/// Exact range of angles between `n` and the preimage of an azimuth/elevation
/// rectangle.
///
/// # Panics
/// If the branch is not an azimuth/elevation rectangle.
pub fn scs_range(b: &Branch, n: &UnitVec3) -> AngleRange {
    assert_eq!(b.kind, DomainKind::ScsRect, "scs range needs an azimuth/elevation rectangle");
    RectEdges::new(b).dot_range(n).to_angles()
}

/// Whether azimuth `x` lies in `[lo, hi]` modulo `2 pi`.
fn azimuth_in(x: f64, lo: f64, hi: f64) -> bool {
    [-TAU, 0.0, TAU]
        .iter()
        .any(|shift| x + shift >= lo - MEMBERSHIP_TOL && x + shift <= hi + MEMBERSHIP_TOL)
}

pub(crate) struct RectEdges {
    az0: f64,
    az1: f64,
    el0: f64,
    el1: f64,
    // (cos, sin) of the edge coordinates
    cs_az0: (f64, f64),
    cs_az1: (f64, f64),
    cs_el0: (f64, f64),
    cs_el1: (f64, f64),
}

impl RectEdges {
    pub(crate) fn new(b: &Branch) -> Self {
        let (az0, az1) = b.interval(0);
        let (el0, el1) = b.interval(1);
        let cs = |x: f64| {
            let (s, c) = x.sin_cos();
            (c, s)
        };
        Self {
            az0,
            az1,
            el0,
            el1,
            cs_az0: cs(az0),
            cs_az1: cs(az1),
            cs_el0: cs(el0),
            cs_el1: cs(el1),
        }
    }

    fn contains_direction(&self, a: f64, b: f64, c: f64) -> bool {
        let r = a.hypot(b);
        let el = c.atan2(r);
        if el < self.el0 - MEMBERSHIP_TOL || el > self.el1 + MEMBERSHIP_TOL {
            return false;
        }
        // At the pole every azimuth represents the same direction.
        r == 0.0 || azimuth_in(b.atan2(a), self.az0, self.az1)
    }

    #[inline]
    pub(crate) fn dot_range(&self, n: &UnitVec3) -> DotRange {
        let (a, b, c) = (n.x(), n.y(), n.z());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut visit = |w: f64| {
            lo = lo.min(w);
            hi = hi.max(w);
        };

        // Corners, and the constant-azimuth edges.
        for &(ca, sa) in &[self.cs_az0, self.cs_az1] {
            let m = a * ca + b * sa;
            for &(ce, se) in &[self.cs_el0, self.cs_el1] {
                visit(m * ce + c * se);
            }
            let amp = m.hypot(c);
            let beta = c.atan2(m);
            for (k, sign) in [(-1.0, -1.0), (0.0, 1.0), (1.0, -1.0)] {
                let el = beta + k * PI;
                if el > self.el0 && el < self.el1 {
                    visit(sign * amp);
                }
            }
        }

        // Constant-elevation edges: extremes at alpha + k pi.
        let r = a.hypot(b);
        if r > 0.0 {
            let alpha = b.atan2(a);
            for &(ce, se) in &[self.cs_el0, self.cs_el1] {
                for k in -2..=2 {
                    let az = alpha + k as f64 * PI;
                    if az > self.az0 && az < self.az1 {
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        visit(ce * r * sign + c * se);
                    }
                }
            }
        }

        if self.contains_direction(a, b, c) {
            hi = 1.0;
        }
        if self.contains_direction(-a, -b, -c) {
            lo = -1.0;
        }
        DotRange {
            lo: lo.max(-1.0),
            hi: hi.min(1.0),
        }
    }
}
