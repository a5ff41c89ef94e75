//! Inlier-count objective over candidate vertical directions.
//!
//! A normal `n` is an inlier of a candidate vertical `v` when it is parallel
//! (`|n . v| >= cos tau`) or perpendicular (`|n . v| <= sin tau`) to it.

use std::f64::consts::FRAC_PI_4;

use thiserror::Error;

use crate::geometry::UnitVec3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("at least one normal is required")]
    Empty,
    #[error("inlier threshold {0} rad must lie in (0, pi/4)")]
    Threshold(f64),
}

/// Normals plus inlier threshold.
///
/// Normals are stored as three coordinate arrays so that counting is a single
/// streaming pass.
#[derive(Debug, Clone)]
pub struct Problem {
    xs: Vec<f64>,
    ys: Vec<f64>,
    zs: Vec<f64>,
    tau: f64,
    cos_tau: f64,
    sin_tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InlierClass {
    ParallelPlus,
    ParallelMinus,
    Perpendicular,
    Outlier,
}

impl InlierClass {
    pub fn is_inlier(self) -> bool {
        self != InlierClass::Outlier
    }
}

impl Problem {
    /// `tau` is in radians and must satisfy `0 < tau < pi/4`; at `pi/4` the
    /// parallel and perpendicular windows meet and every normal is an inlier.
    pub fn new(normals: &[UnitVec3], tau: f64) -> Result<Self, ProblemError> {
        if normals.is_empty() {
            return Err(ProblemError::Empty);
        }
        if !(tau > 0.0 && tau < FRAC_PI_4) {
            return Err(ProblemError::Threshold(tau));
        }
        let (sin_tau, cos_tau) = tau.sin_cos();
        Ok(Self {
            xs: normals.iter().map(UnitVec3::x).collect(),
            ys: normals.iter().map(UnitVec3::y).collect(),
            zs: normals.iter().map(UnitVec3::z).collect(),
            tau,
            cos_tau,
            sin_tau,
        })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn cos_tau(&self) -> f64 {
        self.cos_tau
    }

    pub fn sin_tau(&self) -> f64 {
        self.sin_tau
    }

    pub fn normal(&self, j: usize) -> UnitVec3 {
        UnitVec3::new_unchecked(self.xs[j], self.ys[j], self.zs[j])
    }

    pub fn normals(&self) -> impl ExactSizeIterator<Item = UnitVec3> + '_ {
        (0..self.len()).map(|j| self.normal(j))
    }

    /// Coordinate arrays `(xs, ys, zs)`.
    pub fn columns(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.xs, &self.ys, &self.zs)
    }

    /// Class of normal `j` against candidate `v`, from the signed dot product.
    ///
    /// # Panics
    /// If `j` is out of range.
    pub fn classify(&self, j: usize, v: &UnitVec3) -> InlierClass {
        let dot = self.xs[j] * v.x() + self.ys[j] * v.y() + self.zs[j] * v.z();
        if dot >= self.cos_tau {
            InlierClass::ParallelPlus
        } else if dot <= -self.cos_tau {
            InlierClass::ParallelMinus
        } else if dot.abs() <= self.sin_tau {
            InlierClass::Perpendicular
        } else {
            InlierClass::Outlier
        }
    }

    /// Number of inliers of `v`.
    pub fn count_inliers(&self, v: &UnitVec3) -> usize {
        count_windows(self, v, self.cos_tau, self.sin_tau)
    }
}

/// Counts normals with `|n . v| >= cos_hi` or `|n . v| <= sin_hi`.
#[inline]
fn count_windows(p: &Problem, v: &UnitVec3, cos_hi: f64, sin_hi: f64) -> usize {
    let (vx, vy, vz) = (v.x(), v.y(), v.z());
    let mut count = 0usize;
    for ((x, y), z) in p.xs.iter().zip(&p.ys).zip(&p.zs) {
        let a = (x * vx + y * vy + z * vz).abs();
        count += ((a >= cos_hi) | (a <= sin_hi)) as usize;
    }
    count
}

/// [`count_windows`] for two window pairs in one pass; the first pair is
/// usually the plain threshold and the second a widened one.
#[inline]
pub(crate) fn count_two_windows(p: &Problem, v: &UnitVec3, inner: (f64, f64), outer: (f64, f64)) -> (usize, usize) {
    let (vx, vy, vz) = (v.x(), v.y(), v.z());
    let (mut a_count, mut b_count) = (0usize, 0usize);
    for ((x, y), z) in p.xs.iter().zip(&p.ys).zip(&p.zs) {
        let a = (x * vx + y * vy + z * vz).abs();
        a_count += ((a >= inner.0) | (a <= inner.1)) as usize;
        b_count += ((a >= outer.0) | (a <= outer.1)) as usize;
    }
    (a_count, b_count)
}

/// Free-function form of [`Problem::classify`].
pub fn classify(p: &Problem, j: usize, v: &UnitVec3) -> InlierClass {
    p.classify(j, v)
}

/// Free-function form of [`Problem::count_inliers`].
pub fn count_inliers(p: &Problem, v: &UnitVec3) -> usize {
    p.count_inliers(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_between;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    fn u(x: f64, y: f64, z: f64) -> UnitVec3 {
        UnitVec3::new(x, y, z).unwrap()
    }

    #[test]
    fn rejects_bad_configuration() {
        assert_eq!(Problem::new(&[], 0.1).unwrap_err(), ProblemError::Empty);
        let n = [UnitVec3::e3()];
        assert!(Problem::new(&n, 0.0).is_err());
        assert!(Problem::new(&n, FRAC_PI_4).is_err());
        assert!(Problem::new(&n, f64::NAN).is_err());
        assert!(Problem::new(&n, FRAC_PI_4 - 1e-9).is_ok());
    }

    #[test]
    fn classify_examples() {
        let p = Problem::new(&[UnitVec3::e3(), UnitVec3::e1(), u(1.0, 1.0, 1.0), -UnitVec3::e3()], deg(2.0))
            .unwrap();
        let v = UnitVec3::e3();
        assert_eq!(p.classify(0, &v), InlierClass::ParallelPlus);
        assert_eq!(p.classify(1, &v), InlierClass::Perpendicular);
        assert_eq!(p.classify(2, &v), InlierClass::Outlier);
        assert_eq!(p.classify(3, &v), InlierClass::ParallelMinus);
    }

    #[test]
    fn count_examples() {
        let p = Problem::new(&[UnitVec3::e3(), UnitVec3::e1(), u(1.0, 1.0, 1.0)], deg(5.0)).unwrap();
        assert_eq!(p.count_inliers(&UnitVec3::e3()), 2);
        let q = Problem::new(&[u(0.2, 0.3, 0.9)], deg(1.0)).unwrap();
        assert_eq!(q.count_inliers(&u(0.2, 0.3, 0.9)), 1);
    }

    fn angle_class(v: &UnitVec3, n: &UnitVec3, tau: f64) -> InlierClass {
        let phi = angle_between(v, n);
        if phi <= tau {
            InlierClass::ParallelPlus
        } else if phi >= PI - tau {
            InlierClass::ParallelMinus
        } else if (phi - FRAC_PI_2).abs() <= tau {
            InlierClass::Perpendicular
        } else {
            InlierClass::Outlier
        }
    }

    fn unit() -> impl Strategy<Value = UnitVec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter_map("degenerate", |(x, y, z)| UnitVec3::new(x, y, z).ok())
    }

    proptest! {
        #[test]
        fn antipodal_symmetry(normals in prop::collection::vec(unit(), 1..40), v in unit(), tau in 1e-3f64..0.78) {
            let p = Problem::new(&normals, tau).unwrap();
            prop_assert_eq!(p.count_inliers(&v), p.count_inliers(&-v));
        }

        #[test]
        fn monotone_in_tau(normals in prop::collection::vec(unit(), 1..40), v in unit(), t1 in 1e-3f64..0.78, t2 in 1e-3f64..0.78) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = Problem::new(&normals, lo).unwrap().count_inliers(&v);
            let b = Problem::new(&normals, hi).unwrap().count_inliers(&v);
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn angle_and_dot_forms_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let rand_unit = |rng: &mut rand_chacha::ChaCha8Rng| loop {
            let x: f64 = rng.random_range(-1.0..1.0);
            let y: f64 = rng.random_range(-1.0..1.0);
            let z: f64 = rng.random_range(-1.0..1.0);
            if let Ok(u) = UnitVec3::new(x, y, z) {
                return u;
            }
        };
        for _ in 0..100_000 {
            let v = rand_unit(&mut rng);
            let n = rand_unit(&mut rng);
            let tau = rng.random_range(1e-6..FRAC_PI_4 - 1e-6);
            let p = Problem::new(&[n], tau).unwrap();
            assert_eq!(p.classify(0, &v), angle_class(&v, &n, tau));
        }
    }
}
