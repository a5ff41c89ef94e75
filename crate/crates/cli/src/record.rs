//! Per-run result rows shared by `estimate` and `bench`.

use std::fmt;
use std::str::FromStr;

use anyhow::Context;
use atlanta_core::atlanta::{frames_around, manhattan_matrix};
use atlanta_core::{
    error_manhattan, error_vertical, ransac_vertical, solve, EstimateResult, Problem, RansacConfig,
    SolverConfig, Strategy, UnitVec3,
};
use nalgebra::Matrix3;
use serde::Serialize;

/// A vertical estimator: one of the branch-and-bound strategies or RANSAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bnb(Strategy),
    Ransac,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bnb(s) => s.name(),
            Method::Ransac => "ransac",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ransac" {
            return Ok(Method::Ransac);
        }
        s.parse::<Strategy>().map(Method::Bnb).map_err(|_| {
            format!("unknown method `{s}` (expected rot, exp, ste-circle, ste-square, scs or ransac)")
        })
    }
}

/// Solver knobs that apply to a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub max_iterations: u64,
    pub cull_rotation_ball: bool,
    /// Outlier ratio assumed by RANSAC when sizing its iteration count.
    pub ransac_rho: f64,
    pub seed: u64,
}

pub fn run_method(p: &Problem, method: Method, settings: &RunSettings) -> anyhow::Result<EstimateResult> {
    match method {
        Method::Bnb(strategy) => {
            let cfg = SolverConfig {
                max_iterations: settings.max_iterations,
                cull_rotation_ball: settings.cull_rotation_ball,
                ..SolverConfig::new(strategy)
            };
            Ok(solve(p, &cfg))
        }
        Method::Ransac => {
            let cfg = RansacConfig::new(settings.ransac_rho, settings.seed);
            ransac_vertical(p, &cfg).context("RANSAC failed")
        }
    }
}

/// Whether a run finished normally: certified for branch-and-bound, always
/// for RANSAC.
pub fn completed(method: Method, r: &EstimateResult) -> bool {
    method == Method::Ransac || r.certified
}

/// One row of every results table. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub method: String,
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    pub trial: u32,
    pub error_deg: Option<f64>,
    pub error_m_deg: Option<f64>,
    pub inliers: usize,
    pub iterations: u64,
    pub runtime_ms: f64,
    pub certified: bool,
    pub gap: usize,
}

impl ResultRecord {
    pub const FIELDS: [&'static str; 11] = [
        "method",
        "kappa",
        "rho",
        "trial",
        "error_deg",
        "error_m_deg",
        "inliers",
        "iterations",
        "runtime_ms",
        "certified",
        "gap",
    ];

    pub fn new(method: Method, r: &EstimateResult) -> Self {
        Self {
            method: method.name().to_string(),
            kappa: None,
            rho: None,
            trial: 0,
            error_deg: None,
            error_m_deg: None,
            inliers: r.inlier_count,
            iterations: r.iterations,
            runtime_ms: r.elapsed * 1e3,
            certified: r.certified,
            gap: r.gap,
        }
    }

    /// Fills the error columns from ground truth. The Manhattan error stays
    /// empty when fewer than two horizontal frames are found.
    pub fn score(&mut self, p: &Problem, r: &EstimateResult, v_gt: &UnitVec3, r_gt: Option<&Matrix3<f64>>) {
        self.error_deg = Some(error_vertical(v_gt, &r.vertical));
        if let Some(r_gt) = r_gt {
            let frames = frames_around(p, r, None);
            self.error_m_deg = manhattan_matrix(&frames).map(|m| error_manhattan(r_gt, &m));
        }
    }
}

/// [`ResultRecord`] followed by the estimated vertical, as printed by
/// `estimate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub method: String,
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    pub trial: u32,
    pub error_deg: Option<f64>,
    pub error_m_deg: Option<f64>,
    pub inliers: usize,
    pub iterations: u64,
    pub runtime_ms: f64,
    pub certified: bool,
    pub gap: usize,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
}

impl EstimateRow {
    pub fn new(record: ResultRecord, vertical: &UnitVec3) -> Self {
        let [vx, vy, vz] = vertical.to_array();
        Self {
            method: record.method,
            kappa: record.kappa,
            rho: record.rho,
            trial: record.trial,
            error_deg: record.error_deg,
            error_m_deg: record.error_m_deg,
            inliers: record.inliers,
            iterations: record.iterations,
            runtime_ms: record.runtime_ms,
            certified: record.certified,
            gap: record.gap,
            vx,
            vy,
            vz,
        }
    }
}
