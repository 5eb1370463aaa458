//! Verification laboratory for continuous solutions of the scalar balance law
//! `u_t + f(u)_x = g` with bounded source and C² (possibly non-convex) flux.
//!
//! The crate builds characteristic curves two independent ways (ODE tracing and
//! a dependency-triangle piecewise-affine construction), assembles monotone
//! Lagrangian parameterizations, extracts Lagrangian/universal source samples,
//! evaluates weak-form and entropy residuals against supplied test functions,
//! and runs the strip-wise monotone BV approximation with its uniform error
//! certificate.  Everything is deterministic: low-discrepancy sequences replace
//! random sampling so reports are reproducible.

pub mod bv;
pub mod characteristics;
pub mod domain;
pub mod error;
pub mod eulerian;
pub mod exec;
pub mod field;
pub mod flux;
pub mod lagrangian;
pub mod quad;
pub mod report;
pub mod sample;
pub mod scenario;

pub use domain::Rect;
pub use error::{Error, Result};
pub use field::{ModulusEstimate, SolutionField, Source, SpaceTimeFn};
pub use flux::{ConvexityClassification, FluxModel, RegionLabel};
