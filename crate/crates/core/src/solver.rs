//! Best-first branch-and-bound over one of the [`Strategy`] domains.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bounds::{evaluate_bounds, Branch, BoundsPair, DomainKind, Strategy};
use crate::geometry::UnitVec3;
use crate::objective::Problem;

/// Queue length above which an improved incumbent triggers a sweep of
/// dominated entries.
const COMPACT_LEN: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub strategy: Strategy,
    /// Maximum number of branch expansions.
    pub max_iterations: u64,
    /// Branches this small (on every axis) are set aside unexpanded; their
    /// upper bounds still count towards the gap.
    pub min_half_extent: f64,
    /// Stop once `U_global - L_global < gap_target`.
    pub gap_target: usize,
    /// Evaluate the children of an expanded branch on the rayon pool.
    pub parallel: bool,
    /// Drop rotation cubes lying entirely outside the ball of radius `pi`.
    /// Off by default: the rotation domain is searched as the full cube.
    pub cull_rotation_ball: bool,
}

impl SolverConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            max_iterations: 1_000_000,
            min_half_extent: 1e-9,
            gap_target: 1,
            parallel: false,
            cull_rotation_ball: false,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::new(Strategy::Exp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    /// Best direction found, with `v3 >= 0`.
    pub vertical: UnitVec3,
    pub inlier_count: usize,
    /// `U_global - L_global` at termination.
    pub gap: usize,
    pub iterations: u64,
    /// Wall time in seconds.
    pub elapsed: f64,
    /// Whether the gap closed below the target.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("search stopped before certification (gap {}, {} iterations)", .0.gap, .0.iterations)]
    Unterminated(Box<EstimateResult>),
}

impl EstimateResult {
    /// Turns an uncertified result into [`SolveError::Unterminated`].
    pub fn certified_or_err(self) -> Result<Self, SolveError> {
        if self.certified {
            Ok(self)
        } else {
            Err(SolveError::Unterminated(Box::new(self)))
        }
    }
}

/// Bookkeeping of one search, for checking the certificate after the fact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverTrace {
    /// `(L_global, U_global)` before each expansion.
    pub history: Vec<(usize, usize)>,
    /// Largest upper bound among discarded branches, if any were discarded.
    pub max_pruned_upper: Option<usize>,
    /// Largest upper bound among branches still queued or retired as too
    /// small at termination.
    pub max_remaining_upper: Option<usize>,
}

/// Queued branch. Kept small because the rotation domain can queue tens of
/// millions of them; the half extent follows from the depth.
struct Node {
    center: [f64; 3],
    depth: u32,
    upper: u32,
    lower: u32,
    seq: u64,
}

impl Node {
    fn new(branch: &Branch, bounds: &BoundsPair, seq: u64) -> Self {
        Self {
            center: branch.center,
            depth: branch.depth,
            upper: bounds.upper as u32,
            lower: bounds.lower as u32,
            seq,
        }
    }

    fn key(&self) -> (u32, u32, std::cmp::Reverse<u64>) {
        (self.upper, self.lower, std::cmp::Reverse(self.seq))
    }

    fn branch(&self, root: &Branch) -> Branch {
        let scale = 0.5f64.powi(self.depth as i32);
        Branch {
            kind: root.kind,
            center: self.center,
            half_extent: root.half_extent.map(|h| h * scale),
            depth: self.depth,
        }
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap on upper bound, then lower bound, then earliest insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Whether an angle-axis cube lies entirely outside the ball of radius `pi`.
///
/// Every rotation has an angle-axis vector of norm at most `pi`, so such a
/// cube only repeats rotations found elsewhere.
fn redundant_rotation(b: &Branch) -> bool {
    if b.kind != DomainKind::RotCube {
        return false;
    }
    let gap_sq: f64 = (0..3)
        .map(|a| {
            let d = (b.center[a].abs() - b.half_extent[a]).max(0.0);
            d * d
        })
        .sum();
    gap_sq > PI * PI
}

/// Children of `b`; see [`Branch::subdivide`].
pub fn subdivide(b: &Branch) -> Vec<Branch> {
    b.subdivide()
}

/// Maximizes the inlier count over the strategy's domain.
///
/// Never fails: when a limit stops the search early the result carries
/// `certified = false` and the remaining gap.
pub fn solve(p: &Problem, cfg: &SolverConfig) -> EstimateResult {
    run(p, cfg, None)
}

/// [`solve`] that also records a [`SolverTrace`].
pub fn solve_traced(p: &Problem, cfg: &SolverConfig) -> (EstimateResult, SolverTrace) {
    let mut trace = SolverTrace::default();
    let result = run(p, cfg, Some(&mut trace));
    (result, trace)
}

fn run(p: &Problem, cfg: &SolverConfig, mut trace: Option<&mut SolverTrace>) -> EstimateResult {
    assert!(cfg.gap_target >= 1, "gap_target must be at least 1");
    assert!(cfg.max_iterations >= 1, "max_iterations must be at least 1");
    assert!(p.len() <= u32::MAX as usize, "too many normals");
    let start = Instant::now();
    let strategy = cfg.strategy;

    let root = Branch::root(strategy.domain());
    let root_bounds = evaluate_bounds(p, &root, strategy);
    let mut best_lower = root_bounds.lower;
    let mut incumbent = root_bounds.center_preimage;
    let mut seq = 0u64;
    let mut heap = BinaryHeap::new();
    heap.push(Node::new(&root, &root_bounds, seq));

    let note_pruned = |trace: &mut Option<&mut SolverTrace>, upper: usize| {
        if let Some(t) = trace.as_deref_mut() {
            t.max_pruned_upper = Some(t.max_pruned_upper.map_or(upper, |m| m.max(upper)));
        }
    };

    // Largest upper bound among branches too small to subdivide. They stay
    // in the certificate but are not expanded again.
    let mut retired_upper: Option<usize> = None;
    let mut iterations = 0u64;
    let (certified, gap) = loop {
        // Drop entries made obsolete by a later incumbent.
        while heap.peek().is_some_and(|n| (n.upper as usize) < best_lower + cfg.gap_target) {
            let node = heap.pop().expect("peeked");
            note_pruned(&mut trace, node.upper as usize);
        }
        let queue_upper = heap.peek().map(|n| n.upper as usize);
        let Some(upper) = queue_upper.max(retired_upper) else {
            break (true, 0);
        };
        if let Some(t) = trace.as_deref_mut() {
            t.history.push((best_lower, upper));
        }
        let gap = upper.saturating_sub(best_lower);
        if gap < cfg.gap_target {
            break (true, gap);
        }
        let Some(top) = heap.peek() else {
            break (false, gap);
        };
        if iterations >= cfg.max_iterations {
            break (false, gap);
        }
        let top_branch = top.branch(&root);
        if top_branch.max_half_extent() <= cfg.min_half_extent {
            let node = heap.pop().expect("peeked");
            retired_upper = retired_upper.max(Some(node.upper as usize));
            continue;
        }

        heap.pop();
        iterations += 1;
        let children = top_branch.subdivide();
        let evaluated: Vec<BoundsPair> = if cfg.parallel {
            children
                .par_iter()
                .map(|c| evaluate_bounds(p, c, strategy))
                .collect()
        } else {
            children
                .iter()
                .map(|c| evaluate_bounds(p, c, strategy))
                .collect()
        };
        let mut improved = false;
        for (branch, bounds) in children.into_iter().zip(evaluated) {
            if cfg.cull_rotation_ball && redundant_rotation(&branch) {
                continue;
            }
            if bounds.lower > best_lower {
                best_lower = bounds.lower;
                incumbent = bounds.center_preimage;
                improved = true;
            }
            // Such a branch cannot beat the incumbent by the gap target.
            if bounds.upper < best_lower + cfg.gap_target {
                note_pruned(&mut trace, bounds.upper);
                continue;
            }
            seq += 1;
            heap.push(Node::new(&branch, &bounds, seq));
        }
        if improved && heap.len() >= COMPACT_LEN {
            heap.retain(|n| {
                let keep = (n.upper as usize) >= best_lower + cfg.gap_target;
                if !keep {
                    note_pruned(&mut trace, n.upper as usize);
                }
                keep
            });
        }
    };

    if let Some(t) = trace {
        t.max_remaining_upper = heap.iter().map(|n| n.upper as usize).max().max(retired_upper);
    }

    let vertical = incumbent.upper();
    EstimateResult {
        inlier_count: p.count_inliers(&vertical),
        vertical,
        gap,
        iterations,
        elapsed: start.elapsed().as_secs_f64(),
        certified,
    }
}
