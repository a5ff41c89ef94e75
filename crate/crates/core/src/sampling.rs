//! Deterministic direction grids.

use crate::geometry::UnitVec3;

/// `n` quasi-uniform directions on the upper hemisphere (Fibonacci lattice).
///
/// Point `i` sits at height `(i + 1/2) / n` and azimuth `i` times the golden
/// angle, so every band of equal height holds an equal share of the points.
pub fn fibonacci_hemisphere(n: usize) -> Vec<UnitVec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let (s, c) = (i as f64 * golden).sin_cos();
            UnitVec3::new(r * c, r * s, z).expect("lattice point has unit norm")
        })
        .collect()
}
