//! Globally optimal vertical-direction estimation for Atlanta-world scenes.
//!
//! Given unit surface normals, the vertical direction is the unit vector that
//! maximizes the number of normals parallel or perpendicular to it (within a
//! threshold `tau`). [`solver::solve`] finds it by branch-and-bound and
//! certifies the maximum; five interchangeable bound strategies are provided
//! in [`bounds`].

pub mod atlanta;
pub mod bounds;
pub mod geometry;
pub mod io;
pub mod objective;
pub mod ransac;
pub mod sampling;
pub mod solver;
pub mod synth;

pub use bounds::{evaluate_bounds, AngleRange, Branch, BoundsPair, DomainKind, Strategy};
pub use geometry::UnitVec3;
pub use objective::{count_inliers, InlierClass, Problem};
pub use solver::{solve, EstimateResult, SolveError, SolverConfig};
pub use atlanta::{estimate_atlanta, error_manhattan, error_vertical, AtlantaFrames};
pub use ransac::{ransac_vertical, RansacConfig, RansacError};
pub use synth::{generate, SynthConfig, SynthInstance, World};
