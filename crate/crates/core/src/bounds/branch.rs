use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    exp_to_sphere, rotate_pole, scs_to_sphere, stereo_to_sphere, AxisAngle, DiskPoint, SphCoord,
    StereoPoint, UnitVec3,
};

/// Parametrized search domain a [`Branch`] lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainKind {
    /// Exponential-map square of side `pi` centred at the origin.
    ExpSquare,
    /// Stereographic square of side 2 centred at the origin.
    SteSquare,
    /// Azimuth/elevation rectangle `[-pi, pi] x [0, pi/2]`.
    ScsRect,
    /// Angle-axis cube of side `2 pi`.
    RotCube,
}

impl DomainKind {
    pub fn dims(self) -> usize {
        match self {
            DomainKind::RotCube => 3,
            _ => 2,
        }
    }
}

/// Bound family used by the solver. Each one searches its own domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Rotation search over SO(3) with the `sqrt(3) sigma` uncertainty angle.
    Rot,
    /// Exponential-map square with the `sqrt(2) sigma` uncertainty angle.
    Exp,
    /// Stereographic square relaxed to its circumscribed circle.
    SteCircle,
    /// Stereographic square with exact per-normal angle ranges.
    SteSquare,
    /// Azimuth/elevation rectangle with exact per-normal angle ranges.
    Scs,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Rot,
        Strategy::Exp,
        Strategy::SteCircle,
        Strategy::SteSquare,
        Strategy::Scs,
    ];

    pub fn domain(self) -> DomainKind {
        match self {
            Strategy::Rot => DomainKind::RotCube,
            Strategy::Exp => DomainKind::ExpSquare,
            Strategy::SteCircle | Strategy::SteSquare => DomainKind::SteSquare,
            Strategy::Scs => DomainKind::ScsRect,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Rot => "rot",
            Strategy::Exp => "exp",
            Strategy::SteCircle => "ste-circle",
            Strategy::SteSquare => "ste-square",
            Strategy::Scs => "scs",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}` (expected rot, exp, ste-circle, ste-square or scs)"))
    }
}

/// Axis-aligned box of a parametrized domain.
///
/// Only the first [`DomainKind::dims`] axes are used; the rest are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub kind: DomainKind,
    pub center: [f64; 3],
    pub half_extent: [f64; 3],
    pub depth: u32,
}

impl Branch {
    /// Whole search domain for `kind`.
    pub fn root(kind: DomainKind) -> Self {
        let (center, half_extent) = match kind {
            DomainKind::ExpSquare => ([0.0; 3], [FRAC_PI_2, FRAC_PI_2, 0.0]),
            DomainKind::SteSquare => ([0.0; 3], [1.0, 1.0, 0.0]),
            DomainKind::ScsRect => ([0.0, FRAC_PI_4, 0.0], [PI, FRAC_PI_4, 0.0]),
            DomainKind::RotCube => ([0.0; 3], [PI; 3]),
        };
        Self {
            kind,
            center,
            half_extent,
            depth: 0,
        }
    }

    /// Branch with the given centre and half extents.
    ///
    /// # Panics
    /// If a used axis has a negative or non-finite extent or centre.
    pub fn new(kind: DomainKind, center: [f64; 3], half_extent: [f64; 3]) -> Self {
        let dims = kind.dims();
        let mut c = [0.0; 3];
        let mut h = [0.0; 3];
        for axis in 0..dims {
            assert!(center[axis].is_finite(), "branch centre must be finite");
            assert!(
                half_extent[axis].is_finite() && half_extent[axis] >= 0.0,
                "branch half extent must be finite and non-negative"
            );
            c[axis] = center[axis];
            h[axis] = half_extent[axis];
        }
        Self {
            kind,
            center: c,
            half_extent: h,
            depth: 0,
        }
    }

    /// 2D square/rectangle convenience constructor.
    pub fn square(kind: DomainKind, center: [f64; 2], half: [f64; 2]) -> Self {
        Self::new(kind, [center[0], center[1], 0.0], [half[0], half[1], 0.0])
    }

    pub fn dims(&self) -> usize {
        self.kind.dims()
    }

    /// Largest half extent over the used axes.
    pub fn max_half_extent(&self) -> f64 {
        self.half_extent[..self.dims()].iter().copied().fold(0.0, f64::max)
    }

    pub fn min_half_extent(&self) -> f64 {
        self.half_extent[..self.dims()]
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Lower and upper corner coordinate along `axis`.
    pub fn interval(&self, axis: usize) -> (f64, f64) {
        (
            self.center[axis] - self.half_extent[axis],
            self.center[axis] + self.half_extent[axis],
        )
    }

    /// Splits every used axis at the centre: 4 children in 2D, 8 in 3D.
    ///
    /// Children are ordered by a binary counter over the axes, low half first.
    pub fn subdivide(&self) -> Vec<Branch> {
        let dims = self.dims();
        let half: [f64; 3] = std::array::from_fn(|a| {
            if a < dims {
                self.half_extent[a] * 0.5
            } else {
                0.0
            }
        });
        (0..1usize << dims)
            .map(|mask| {
                let center = std::array::from_fn(|a| {
                    if a >= dims {
                        0.0
                    } else if mask >> a & 1 == 0 {
                        self.center[a] - half[a]
                    } else {
                        self.center[a] + half[a]
                    }
                });
                Branch {
                    kind: self.kind,
                    center,
                    half_extent: half,
                    depth: self.depth + 1,
                }
            })
            .collect()
    }

    /// Whether a domain point lies in the closed box.
    pub fn contains(&self, point: [f64; 3]) -> bool {
        (0..self.dims()).all(|a| (point[a] - self.center[a]).abs() <= self.half_extent[a])
    }

    /// Domain point at local coordinates `u` in `[-1, 1]^dims`.
    pub fn local_point(&self, u: [f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| {
            if a < self.dims() {
                self.center[a] + u[a] * self.half_extent[a]
            } else {
                0.0
            }
        })
    }

    /// Direction on the sphere represented by a domain point.
    pub fn preimage(&self, point: [f64; 3]) -> UnitVec3 {
        domain_preimage(self.kind, point)
    }

    pub fn center_preimage(&self) -> UnitVec3 {
        self.preimage(self.center)
    }
}

/// Maps a point of the `kind` domain to the sphere.
pub fn domain_preimage(kind: DomainKind, p: [f64; 3]) -> UnitVec3 {
    match kind {
        DomainKind::ExpSquare => exp_to_sphere(DiskPoint::new(p[0], p[1])),
        DomainKind::SteSquare => stereo_to_sphere(StereoPoint::new(p[0], p[1])),
        DomainKind::ScsRect => scs_to_sphere(SphCoord::new(p[0], p[1])),
        DomainKind::RotCube => rotate_pole(&AxisAngle::new(p[0], p[1], p[2])),
    }
}
