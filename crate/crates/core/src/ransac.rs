//! Two-sample RANSAC baseline for the vertical direction.
//!
//! Each iteration draws two distinct normals and scores three candidates: both
//! normals (each may be parallel to the vertical) and their cross product (the
//! vertical when both are horizontal).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::UnitVec3;
use crate::objective::Problem;
use crate::solver::EstimateResult;

/// Largest accepted outlier proportion; beyond it the iteration count explodes.
pub const MAX_RHO: f64 = 0.999;

/// Cross products shorter than this are treated as a parallel pair.
const MIN_CROSS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    /// Probability of drawing at least one all-inlier pair.
    pub zeta: f64,
    /// Assumed outlier proportion.
    pub rho: f64,
    pub seed: u64,
}

impl RansacConfig {
    pub fn new(rho: f64, seed: u64) -> Self {
        Self { zeta: 0.99, rho, seed }
    }

    /// Number of iterations, `ceil(ln(1 - zeta) / ln(1 - (1 - rho)^2))`.
    ///
    /// `rho = 0` gives 1.
    pub fn omega(&self) -> Result<u64, RansacError> {
        self.validate()?;
        if self.rho == 0.0 {
            return Ok(1);
        }
        let inlier_pair = (1.0 - self.rho) * (1.0 - self.rho);
        let omega = ((1.0 - self.zeta).ln() / (-inlier_pair).ln_1p()).ceil();
        Ok(omega.max(1.0) as u64)
    }

    fn validate(&self) -> Result<(), RansacError> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(RansacError::Confidence(self.zeta));
        }
        if !(0.0..=MAX_RHO).contains(&self.rho) {
            return Err(RansacError::OutlierRatio(self.rho));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RansacError {
    #[error("confidence {0} must lie in (0, 1)")]
    Confidence(f64),
    #[error("outlier ratio {0} must lie in [0, 0.999]")]
    OutlierRatio(f64),
    #[error("RANSAC needs at least two normals, got {0}")]
    TooFewNormals(usize),
    /// Every sampled pair was parallel; the result is the best single normal.
    #[error("every sampled pair was parallel")]
    AllDegenerate(Box<EstimateResult>),
}

impl RansacError {
    /// Result carried by [`RansacError::AllDegenerate`], if any.
    pub fn into_estimate(self) -> Option<EstimateResult> {
        match self {
            RansacError::AllDegenerate(r) => Some(*r),
            _ => None,
        }
    }
}

struct Trial {
    score: usize,
    candidate: UnitVec3,
    degenerate: bool,
}

fn run_iteration(p: &Problem, seed: u64, iteration: u64) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration);
    let n = p.len();
    let ia = rng.random_range(0..n);
    let mut ib = rng.random_range(0..n - 1);
    if ib >= ia {
        ib += 1;
    }
    let (na, nb) = (p.normal(ia), p.normal(ib));
    let cross = na.cross(&nb);
    let norm = cross.norm();
    let degenerate = norm < MIN_CROSS;

    let mut best = Trial {
        score: p.count_inliers(&na),
        candidate: na,
        degenerate,
    };
    let mut consider = |v: UnitVec3| {
        let score = p.count_inliers(&v);
        if score > best.score {
            best.score = score;
            best.candidate = v;
        }
    };
    consider(nb);
    if !degenerate {
        consider(UnitVec3::from_vector(&(cross / norm)).expect("normalized cross product"));
    }
    best
}

/// Best of `omega` random two-sample hypotheses; never certified.
///
/// Iteration `i` draws from its own ChaCha stream, so the result does not
/// depend on the rayon schedule. Ties go to the earliest iteration.
pub fn ransac_vertical(p: &Problem, cfg: &RansacConfig) -> Result<EstimateResult, RansacError> {
    let omega = cfg.omega()?;
    if p.len() < 2 {
        return Err(RansacError::TooFewNormals(p.len()));
    }
    let start = Instant::now();
    let seed = cfg.seed;
    let (_, best, all_degenerate) = (0..omega)
        .into_par_iter()
        .map(|i| {
            let t = run_iteration(p, seed, i);
            let degenerate = t.degenerate;
            (i, t, degenerate)
        })
        .reduce_with(|a, b| {
            let all_degenerate = a.2 && b.2;
            let keep_a = a.1.score > b.1.score || (a.1.score == b.1.score && a.0 < b.0);
            let (i, t, _) = if keep_a { a } else { b };
            (i, t, all_degenerate)
        })
        .expect("omega >= 1");

    let vertical = best.candidate.upper();
    let result = EstimateResult {
        inlier_count: best.score,
        vertical,
        gap: p.len() - best.score,
        iterations: omega,
        elapsed: start.elapsed().as_secs_f64(),
        certified: false,
    };
    if all_degenerate {
        Err(RansacError::AllDegenerate(Box::new(result)))
    } else {
        Ok(result)
    }
}
