//! Synthetic Atlanta and Manhattan scenes with additive noise and outliers.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::atlanta::horizontal_direction;
use crate::geometry::UnitVec3;

/// Smallest threshold handed out by [`tau_for_kappa`], in degrees.
pub const TAU_FLOOR_DEG: f64 = 0.1;

/// Scene layout of the inlier normals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum World {
    /// Every horizontal inlier gets its own uniformly random azimuth.
    AtlantaContinuous,
    /// Horizontal inliers lie on `walls` fixed azimuths.
    AtlantaWalls { walls: usize },
    /// Three mutually orthogonal frames.
    Manhattan,
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            World::AtlantaContinuous => f.write_str("atlanta"),
            World::AtlantaWalls { walls } => write!(f, "atlanta:{walls}"),
            World::Manhattan => f.write_str("manhattan"),
        }
    }
}

impl FromStr for World {
    type Err = String;

    /// Accepts `atlanta`, `atlanta:<walls>` and `manhattan`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "atlanta" => Ok(World::AtlantaContinuous),
            "manhattan" => Ok(World::Manhattan),
            _ => {
                let walls = s
                    .strip_prefix("atlanta:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| format!("unknown world `{s}` (expected atlanta, atlanta:<walls> or manhattan)"))?;
                Ok(World::AtlantaWalls { walls })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_total: usize,
    /// Outlier proportion in `[0, 1)`.
    pub outlier_ratio: f64,
    /// Noise amplitude: each component of the perturbation is uniform in
    /// `[-kappa, kappa]`.
    pub noise_amplitude: f64,
    /// Share of the inliers parallel to the vertical.
    pub vertical_fraction: f64,
    pub world: World,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(n_total: usize, outlier_ratio: f64, noise_amplitude: f64, world: World, seed: u64) -> Self {
        Self {
            n_total,
            outlier_ratio,
            noise_amplitude,
            vertical_fraction: 0.2,
            world,
            seed,
        }
    }

    /// `(vertical, horizontal, outlier)` counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let inliers = (self.n_total as f64 * (1.0 - self.outlier_ratio)).round() as usize;
        let inliers = inliers.min(self.n_total);
        let vertical = (inliers as f64 * self.vertical_fraction).round() as usize;
        (vertical, inliers - vertical, self.n_total - inliers)
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n_total == 0 {
            return Err(SynthError::Invalid("n_total must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.outlier_ratio) {
            return Err(SynthError::Invalid(format!(
                "outlier ratio {} must lie in [0, 1)",
                self.outlier_ratio
            )));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return Err(SynthError::Invalid(format!(
                "noise amplitude {} must be finite and non-negative",
                self.noise_amplitude
            )));
        }
        if !(0.0..=1.0).contains(&self.vertical_fraction) {
            return Err(SynthError::Invalid(format!(
                "vertical fraction {} must lie in [0, 1]",
                self.vertical_fraction
            )));
        }
        if self.world == (World::AtlantaWalls { walls: 0 }) {
            return Err(SynthError::Invalid("an Atlanta world needs at least one wall".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    Invalid(String),
}

/// Generation intent of one normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "class", content = "frame")]
pub enum NormalLabel {
    Vertical,
    /// Horizontal inlier, with its wall index when the walls are fixed.
    Horizontal(Option<usize>),
    Outlier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthInstance {
    pub normals: Vec<UnitVec3>,
    /// Ground-truth vertical with `v3 >= 0`.
    pub v_gt: UnitVec3,
    /// Manhattan ground truth; the third column is `v_gt`.
    pub r_gt: Option<Matrix3<f64>>,
    pub labels: Vec<NormalLabel>,
    /// Azimuths of the fixed walls in the basis of
    /// [`crate::atlanta::horizontal_basis`] of `v_gt`.
    pub wall_azimuths: Vec<f64>,
    pub recommended_tau: f64,
}

impl SynthInstance {
    /// Ground-truth horizontal frame directions (fixed walls or Manhattan).
    pub fn horizontal_frames(&self) -> Vec<UnitVec3> {
        match self.r_gt {
            Some(r) => (0..2)
                .map(|j| UnitVec3::from_vector(&r.column(j).into_owned()).expect("rotation column"))
                .collect(),
            None => self
                .wall_azimuths
                .iter()
                .map(|&a| horizontal_direction(&self.v_gt, a))
                .collect(),
        }
    }

    pub fn outlier_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == NormalLabel::Outlier).count()
    }
}

/// `arctan(kappa)`, floored at [`TAU_FLOOR_DEG`] so that noiseless data still
/// gets a usable threshold.
pub fn tau_for_kappa(kappa: f64) -> f64 {
    kappa.atan().max(TAU_FLOOR_DEG.to_radians())
}

/// Uniform direction from a normalized standard Gaussian triple.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> UnitVec3 {
    loop {
        let g: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
        if let Ok(v) = UnitVec3::new(g[0], g[1], g[2]) {
            return v;
        }
    }
}

/// Uniform rotation from a normalized standard Gaussian quadruple.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let q = Quaternion::new(g[0], g[1], g[2], g[3]);
        if q.norm() > 1e-9 {
            return UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner();
        }
    }
}

fn perturb<R: Rng + ?Sized>(rng: &mut R, n: UnitVec3, kappa: f64) -> UnitVec3 {
    if kappa == 0.0 {
        return n;
    }
    let e: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
    UnitVec3::new(n.x() + kappa * e[0], n.y() + kappa * e[1], n.z() + kappa * e[2])
        .unwrap_or(n)
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R, n: UnitVec3) -> UnitVec3 {
    if rng.random_bool(0.5) {
        n
    } else {
        -n
    }
}

/// `walls` azimuths in `[0, pi)`, uniform subject to a circular spacing of at
/// least `pi / (4 walls)`.
fn wall_azimuths<R: Rng + ?Sized>(rng: &mut R, walls: usize) -> Vec<f64> {
    let spacing = PI / (4.0 * walls as f64);
    let free = PI - walls as f64 * spacing;
    let mut gaps: Vec<f64> = (0..walls).map(|_| rng.random_range(0.0..free)).collect();
    gaps.sort_by(f64::total_cmp);
    let offset = rng.random_range(0.0..PI);
    gaps.iter()
        .enumerate()
        .map(|(i, g)| (offset + g + i as f64 * spacing).rem_euclid(PI))
        .collect()
}

/// Draws one instance; bit-reproducible for a fixed seed.
pub fn generate(cfg: &SynthConfig) -> Result<SynthInstance, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let kappa = cfg.noise_amplitude;
    let (n_vertical, n_horizontal, n_outlier) = cfg.counts();

    let (v_gt, r_gt) = match cfg.world {
        World::Manhattan => {
            let r = random_rotation(&mut rng);
            let v = UnitVec3::from_vector(&r.column(2).into_owned()).expect("rotation column");
            if v.z() < 0.0 {
                // keep a right-handed frame while moving the vertical up
                let flipped = Matrix3::from_columns(&[-r.column(0), r.column(1).into_owned(), -r.column(2)]);
                (-v, Some(flipped))
            } else {
                (v, Some(r))
            }
        }
        _ => (random_unit(&mut rng).upper(), None),
    };
    let walls = match cfg.world {
        World::AtlantaWalls { walls } => wall_azimuths(&mut rng, walls),
        _ => Vec::new(),
    };

    let mut items: Vec<(UnitVec3, NormalLabel)> = Vec::with_capacity(cfg.n_total);
    for _ in 0..n_vertical {
        let n = random_sign(&mut rng, v_gt);
        items.push((perturb(&mut rng, n, kappa), NormalLabel::Vertical));
    }
    for _ in 0..n_horizontal {
        let (h, label) = match (cfg.world, r_gt) {
            (World::Manhattan, Some(r)) => {
                let j = rng.random_range(0..2);
                let h = UnitVec3::from_vector(&r.column(j).into_owned()).expect("rotation column");
                (h, NormalLabel::Horizontal(Some(j)))
            }
            (World::AtlantaWalls { .. }, _) => {
                let j = rng.random_range(0..walls.len());
                (horizontal_direction(&v_gt, walls[j]), NormalLabel::Horizontal(Some(j)))
            }
            _ => {
                let a = rng.random_range(0.0..PI);
                (horizontal_direction(&v_gt, a), NormalLabel::Horizontal(None))
            }
        };
        let n = random_sign(&mut rng, h);
        items.push((perturb(&mut rng, n, kappa), label));
    }
    for _ in 0..n_outlier {
        items.push((random_unit(&mut rng), NormalLabel::Outlier));
    }
    items.shuffle(&mut rng);

    let (normals, labels) = items.into_iter().unzip();
    Ok(SynthInstance {
        normals,
        v_gt,
        r_gt,
        labels,
        wall_azimuths: walls,
        recommended_tau: tau_for_kappa(kappa),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlanta::angle_distance_mod_pi;
    use crate::objective::Problem;

    #[test]
    fn outlier_count_rounds() {
        let inst = generate(&SynthConfig::new(500, 0.4, 0.01, World::AtlantaContinuous, 1)).unwrap();
        assert_eq!(inst.normals.len(), 500);
        assert_eq!(inst.outlier_count(), 200);
        let vertical = inst.labels.iter().filter(|l| **l == NormalLabel::Vertical).count();
        assert_eq!(vertical, 60);
    }

    #[test]
    fn noiseless_inliers_are_exact() {
        for world in [World::AtlantaContinuous, World::AtlantaWalls { walls: 3 }, World::Manhattan] {
            let inst = generate(&SynthConfig::new(100, 0.0, 0.0, world, 9)).unwrap();
            let p = Problem::new(&inst.normals, 1e-9).unwrap();
            assert_eq!(p.count_inliers(&inst.v_gt), 100, "{world}");
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let cfg = SynthConfig::new(300, 0.3, 0.02, World::Manhattan, 77);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 78, ..cfg };
        assert_ne!(generate(&other).unwrap().normals, generate(&cfg).unwrap().normals);
    }

    #[test]
    fn manhattan_truth_is_a_rotation() {
        let inst = generate(&SynthConfig::new(50, 0.2, 0.0, World::Manhattan, 5)).unwrap();
        let r = inst.r_gt.unwrap();
        assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
        assert!(inst.v_gt.z() >= 0.0);
        assert!((r.column(2) - inst.v_gt.to_vector()).norm() < 1e-15);
    }

    #[test]
    fn walls_are_spaced() {
        for seed in 0..50 {
            let inst = generate(&SynthConfig::new(10, 0.0, 0.0, World::AtlantaWalls { walls: 6 }, seed)).unwrap();
            let w = &inst.wall_azimuths;
            assert_eq!(w.len(), 6);
            for i in 0..w.len() {
                assert!((0.0..PI).contains(&w[i]));
                for j in 0..i {
                    assert!(angle_distance_mod_pi(w[i], w[j]) >= PI / 24.0 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn floor_applies_only_to_tiny_kappa() {
        assert_eq!(tau_for_kappa(0.0), 0.1f64.to_radians());
        assert_eq!(tau_for_kappa(0.01), 0.01f64.atan());
    }

    #[test]
    fn invalid_configs() {
        let ok = SynthConfig::new(10, 0.1, 0.01, World::AtlantaContinuous, 0);
        assert!(generate(&SynthConfig { n_total: 0, ..ok.clone() }).is_err());
        assert!(generate(&SynthConfig { outlier_ratio: 1.0, ..ok.clone() }).is_err());
        assert!(generate(&SynthConfig { noise_amplitude: -0.1, ..ok.clone() }).is_err());
        assert!(generate(&SynthConfig { world: World::AtlantaWalls { walls: 0 }, ..ok }).is_err());
    }

    #[test]
    fn world_names_round_trip() {
        for w in [World::AtlantaContinuous, World::AtlantaWalls { walls: 4 }, World::Manhattan] {
            assert_eq!(w.to_string().parse::<World>().unwrap(), w);
        }
        assert!("atlanta:x".parse::<World>().is_err());
    }
}
