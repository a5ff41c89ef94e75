//! Full-frame estimation: the vertical first, then horizontal frames by
//! clustering the azimuths of the perpendicular normals.

use std::f64::consts::PI;

use nalgebra::Matrix3;
use serde::Serialize;

use crate::geometry::UnitVec3;
use crate::objective::{InlierClass, Problem};
use crate::solver::{solve, EstimateResult, SolveError, SolverConfig};

/// Direction of a horizontal normal modulo `pi`, in `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct HorizontalAngle(f64);

impl HorizontalAngle {
    /// Reduces `alpha` modulo `pi`.
    pub fn new(alpha: f64) -> Self {
        let a = alpha.rem_euclid(PI);
        // rem_euclid can round up to exactly pi
        Self(if a >= PI { 0.0 } else { a })
    }

    pub fn alpha(self) -> f64 {
        self.0
    }
}

/// Vertical plus horizontal frames, the horizontals ordered by support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtlantaFrames {
    pub vertical: UnitVec3,
    pub horizontals: Vec<UnitVec3>,
    pub support: Vec<usize>,
    /// Inlier count of the vertical.
    pub vertical_inliers: usize,
    pub certified: bool,
    pub iterations: u64,
}

/// Orthonormal basis `(e1, e2)` of the plane orthogonal to `v`, with
/// `e2 = v x e1`.
pub fn horizontal_basis(v: &UnitVec3) -> (UnitVec3, UnitVec3) {
    let a = if v.x().abs() > 0.9 { UnitVec3::e2() } else { UnitVec3::e1() };
    let e1 = UnitVec3::from_vector(&(a.to_vector() - v.to_vector() * a.dot(v)))
        .expect("reference axis is not parallel to v");
    let e2 = UnitVec3::from_vector(&v.cross(&e1)).expect("v and e1 are orthonormal");
    (e1, e2)
}

/// Horizontal direction at angle `alpha` in the basis of [`horizontal_basis`].
pub fn horizontal_direction(v: &UnitVec3, alpha: f64) -> UnitVec3 {
    let (e1, e2) = horizontal_basis(v);
    let (s, c) = alpha.sin_cos();
    UnitVec3::from_vector(&(e1.to_vector() * c + e2.to_vector() * s)).expect("unit combination")
}

/// Angles of the normals that are perpendicular to `v`; all others are dropped.
pub fn project_horizontal(p: &Problem, v: &UnitVec3) -> Vec<HorizontalAngle> {
    let (e1, e2) = horizontal_basis(v);
    (0..p.len())
        .filter(|&j| p.classify(j, v) == InlierClass::Perpendicular)
        .map(|j| {
            let n = p.normal(j);
            // the v component is orthogonal to e1 and e2, so it drops out here
            HorizontalAngle::new(n.dot(&e2).atan2(n.dot(&e1)))
        })
        .collect()
}

/// Distance between two angles on the circle of circumference `pi`.
pub fn angle_distance_mod_pi(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// Circular mean of angles taken modulo `pi`.
fn mean_mod_pi(angles: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = angles.fold((0.0, 0.0), |(s, c), a| {
        let (sa, ca) = (2.0 * a).sin_cos();
        (s + sa, c + ca)
    });
    HorizontalAngle::new(0.5 * f64::atan2(s, c)).alpha()
}

/// Largest arc of width `2 tau` on the circle of circumference `pi`.
///
/// `sorted` must be sorted ascending in `[0, pi)`. Returns the start index and
/// the member count; ties go to the leftmost start.
fn best_window(sorted: &[f64], tau: f64) -> (usize, usize) {
    let n = sorted.len();
    let width = 2.0 * tau;
    let at = |i: usize| if i < n { sorted[i] } else { sorted[i - n] + PI };
    let mut best = (0, 0);
    let mut end = 0;
    for start in 0..n {
        end = end.max(start);
        while end + 1 < start + n && at(end + 1) - at(start) <= width {
            end += 1;
        }
        let count = end - start + 1;
        if count > best.1 {
            best = (start, count);
        }
    }
    best
}

/// Repeatedly extracts the most populated width-`2 tau` arc.
///
/// Each extracted cluster reports the circular mean of its members and its
/// size. Members are removed, and so is every remaining angle within `2 tau`
/// of the extracted centre, which keeps the centres more than `2 tau` apart.
/// Extraction stops once the best arc has fewer than `min_support` members.
pub fn angular_consensus_sweep(
    angles: &[HorizontalAngle],
    tau: f64,
    min_support: usize,
) -> Vec<(HorizontalAngle, usize)> {
    let mut remaining: Vec<f64> = angles.iter().map(|a| a.alpha()).collect();
    remaining.sort_by(f64::total_cmp);
    let mut clusters = Vec::new();
    while !remaining.is_empty() {
        let (start, count) = best_window(&remaining, tau);
        if count < min_support.max(1) {
            break;
        }
        let n = remaining.len();
        let members = (start..start + count).map(|i| i % n);
        let centre = mean_mod_pi(members.clone().map(|i| remaining[i]));
        let mut keep = vec![true; n];
        for i in members {
            keep[i] = false;
        }
        let mut k = keep.iter();
        remaining.retain(|&a| *k.next().expect("same length") && angle_distance_mod_pi(a, centre) > 2.0 * tau);
        clusters.push((HorizontalAngle::new(centre), count));
    }
    clusters
}

/// `max(5, ceil(1%))` of the projected angles.
pub fn default_min_support(n_angles: usize) -> usize {
    n_angles.div_ceil(100).max(5)
}

/// Vertical by branch-and-bound, then horizontals from the perpendicular
/// normals. `min_support` defaults to [`default_min_support`].
pub fn estimate_atlanta(
    p: &Problem,
    cfg: &SolverConfig,
    min_support: Option<usize>,
) -> Result<AtlantaFrames, SolveError> {
    let est = solve(p, cfg).certified_or_err()?;
    Ok(frames_around(p, &est, min_support))
}

/// Horizontal frame extraction around an already estimated vertical.
pub fn frames_around(p: &Problem, est: &EstimateResult, min_support: Option<usize>) -> AtlantaFrames {
    let vertical = est.vertical;
    let angles = project_horizontal(p, &vertical);
    let min_support = min_support.unwrap_or_else(|| default_min_support(angles.len()));
    let mut clusters = angular_consensus_sweep(&angles, p.tau(), min_support);
    // Stable: equal supports stay in extraction order.
    clusters.sort_by_key(|c| std::cmp::Reverse(c.1));
    AtlantaFrames {
        vertical,
        horizontals: clusters
            .iter()
            .map(|(a, _)| horizontal_direction(&vertical, a.alpha()))
            .collect(),
        support: clusters.iter().map(|c| c.1).collect(),
        vertical_inliers: est.inlier_count,
        certified: est.certified,
        iterations: est.iterations,
    }
}

/// Angle between two axes, ignoring sign, in degrees.
pub fn error_vertical(v_gt: &UnitVec3, v_est: &UnitVec3) -> f64 {
    v_gt.cross(v_est).norm().atan2(v_gt.dot(v_est).abs()).to_degrees()
}

/// Mean over the estimated columns of the angle to the nearest ground-truth
/// axis (up to sign), in degrees.
pub fn error_manhattan(r_gt: &Matrix3<f64>, r_est: &Matrix3<f64>) -> f64 {
    let m = (r_gt.transpose() * r_est).abs();
    let total: f64 = (0..3)
        .map(|j| m.column(j).max().clamp(0.0, 1.0).acos().to_degrees())
        .sum();
    total / 3.0
}

/// `[h1, h2, vertical]` as columns, for [`error_manhattan`].
///
/// Returns `None` with fewer than two horizontals.
pub fn manhattan_matrix(frames: &AtlantaFrames) -> Option<Matrix3<f64>> {
    let [h1, h2] = [frames.horizontals.first()?, frames.horizontals.get(1)?];
    Some(Matrix3::from_columns(&[h1.to_vector(), h2.to_vector(), frames.vertical.to_vector()]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn deg(a: f64) -> HorizontalAngle {
        HorizontalAngle::new(a.to_radians())
    }

    #[test]
    fn projection_examples() {
        let p = Problem::new(
            &[UnitVec3::e1(), -UnitVec3::e1(), UnitVec3::e2(), UnitVec3::e3()],
            0.05,
        )
        .unwrap();
        let angles: Vec<f64> = project_horizontal(&p, &UnitVec3::e3()).iter().map(|a| a.alpha()).collect();
        assert_eq!(angles.len(), 3);
        assert!(angles[0].abs() < 1e-15 && angles[1].abs() < 1e-15);
        assert!((angles[2] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn angle_reduction_stays_below_pi() {
        assert_eq!(HorizontalAngle::new(PI).alpha(), 0.0);
        assert_eq!(HorizontalAngle::new(-1e-300).alpha(), 0.0);
        assert!((HorizontalAngle::new(-0.5).alpha() - (PI - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn two_obvious_pairs() {
        let angles = [deg(0.0), deg(1.0), deg(90.0), deg(91.0)];
        let c = angular_consensus_sweep(&angles, 2f64.to_radians(), 2);
        assert_eq!(c.len(), 2);
        let mut centres: Vec<f64> = c.iter().map(|(a, _)| a.alpha().to_degrees()).collect();
        centres.sort_by(f64::total_cmp);
        assert!((centres[0] - 0.5).abs() < 1e-9 && (centres[1] - 90.5).abs() < 1e-9);
        assert!(c.iter().all(|&(_, s)| s == 2));
    }

    #[test]
    fn cluster_across_the_wrap() {
        let angles = [deg(179.5), deg(0.5), deg(0.2), deg(60.0)];
        let c = angular_consensus_sweep(&angles, 1f64.to_radians(), 2);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].1, 3);
        // (-0.5 + 0.5 + 0.2) / 3 degrees, up to the third-order circular-mean correction
        assert!(angle_distance_mod_pi(c[0].0.alpha(), (0.2f64 / 3.0).to_radians()) < 1e-6);
    }

    #[test]
    fn sparse_input_yields_nothing() {
        assert!(angular_consensus_sweep(&[deg(10.0)], 0.02, 2).is_empty());
        assert!(angular_consensus_sweep(&[], 0.02, 1).is_empty());
    }

    #[test]
    fn min_support_default() {
        assert_eq!(default_min_support(0), 5);
        assert_eq!(default_min_support(499), 5);
        assert_eq!(default_min_support(501), 6);
    }

    #[test]
    fn vertical_error_examples() {
        let v = UnitVec3::new(0.2, 0.3, 0.9).unwrap();
        assert_eq!(error_vertical(&v, &v), 0.0);
        assert_eq!(error_vertical(&v, &-v), 0.0);
        assert!((error_vertical(&UnitVec3::e1(), &UnitVec3::e3()) - 90.0).abs() < 1e-12);
    }

    #[test]
    fn manhattan_error_ignores_order_and_sign() {
        let r = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 1.1).into_inner();
        assert!(error_manhattan(&r, &r) < 1e-6);
        let permuted = Matrix3::from_columns(&[-r.column(2), r.column(0).into_owned(), -r.column(1)]);
        assert!(error_manhattan(&r, &permuted) < 1e-6);
    }

    #[test]
    fn manhattan_error_matches_per_axis_angles() {
        let r = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 1.1).into_inner();
        let d = nalgebra::Rotation3::from_euler_angles(0.01, 0.02, -0.015).into_inner();
        let est = r * d;
        let mut expected = 0.0;
        for j in 0..3 {
            let c = UnitVec3::from_vector(&est.column(j).into_owned()).unwrap();
            let nearest = (0..3)
                .map(|i| error_vertical(&UnitVec3::from_vector(&r.column(i).into_owned()).unwrap(), &c))
                .fold(f64::INFINITY, f64::min);
            expected += nearest / 3.0;
        }
        assert!((error_manhattan(&r, &est) - expected).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn errors_ignore_sign_flips(x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.1f64..1.0) {
            let v = UnitVec3::new(x, y, z).unwrap();
            let w = UnitVec3::new(0.3, -0.1, 0.8).unwrap();
            prop_assert_eq!(error_vertical(&w, &v), error_vertical(&w, &-v));
        }

        #[test]
        fn reconstructed_horizontals_are_orthogonal(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, alpha in 0.0f64..PI) {
            prop_assume!(x * x + y * y + z * z > 1e-3);
            let v = UnitVec3::new(x, y, z).unwrap();
            let h = horizontal_direction(&v, alpha);
            prop_assert!(h.dot(&v).abs() <= 1e-9);
            prop_assert!((h.to_vector().norm() - 1.0).abs() <= 1e-12);
        }
    }
}
