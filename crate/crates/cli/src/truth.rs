//! Ground-truth sidecar written next to synthetic instances.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use atlanta_core::synth::{NormalLabel, TAU_FLOOR_DEG};
use atlanta_core::{SynthConfig, SynthInstance, UnitVec3};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub n_total: usize,
    pub outlier_ratio: f64,
    pub noise_amplitude: f64,
    pub vertical_fraction: f64,
    /// `atlanta`, `atlanta:<walls>` or `manhattan`.
    pub world: String,
    pub seed: u64,
    pub v_gt: UnitVec3,
    /// Manhattan rotation, row by row; its third column is `v_gt`.
    pub r_gt: Option<[[f64; 3]; 3]>,
    pub wall_azimuths: Vec<f64>,
    /// Threshold in radians.
    pub recommended_tau: f64,
    pub recommended_tau_deg: f64,
    /// Whether `recommended_tau` was raised to the noiseless floor.
    pub tau_floored: bool,
    pub labels: Vec<NormalLabel>,
    /// Zero-based data rows generated as outliers.
    pub outlier_rows: Vec<usize>,
}

impl Truth {
    pub fn new(cfg: &SynthConfig, inst: &SynthInstance) -> Self {
        Self {
            n_total: cfg.n_total,
            outlier_ratio: cfg.outlier_ratio,
            noise_amplitude: cfg.noise_amplitude,
            vertical_fraction: cfg.vertical_fraction,
            world: cfg.world.to_string(),
            seed: cfg.seed,
            v_gt: inst.v_gt,
            r_gt: inst.r_gt.map(|r| std::array::from_fn(|i| std::array::from_fn(|j| r[(i, j)]))),
            wall_azimuths: inst.wall_azimuths.clone(),
            recommended_tau: inst.recommended_tau,
            recommended_tau_deg: inst.recommended_tau.to_degrees(),
            tau_floored: cfg.noise_amplitude.atan() < TAU_FLOOR_DEG.to_radians(),
            labels: inst.labels.clone(),
            outlier_rows: inst
                .labels
                .iter()
                .enumerate()
                .filter(|(_, l)| **l == NormalLabel::Outlier)
                .map(|(i, _)| i)
                .collect(),
        }
    }

    pub fn rotation(&self) -> Option<Matrix3<f64>> {
        self.r_gt.map(|rows| Matrix3::from_fn(|i, j| rows[i][j]))
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
    }

    /// Reads the sidecar of `data` if there is one.
    pub fn find(data: &Path) -> anyhow::Result<Option<Self>> {
        let path = sidecar_path(data);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
        let truth = serde_json::from_str(&text).with_context(|| format!("malformed sidecar {}", path.display()))?;
        Ok(Some(truth))
    }
}

/// `scene.csv` -> `scene.truth.json`.
pub fn sidecar_path(data: &Path) -> PathBuf {
    data.with_extension("truth.json")
}
