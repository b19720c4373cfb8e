//! Pareto sets of strongly convex multiobjective problems.
//!
//! A strongly convex mapping `f: ℝⁿ → ℝᵐ` has, for every weight `w` in the
//! standard simplex, a unique minimizer `x*(w)` of `Σ w_i f_i`, and these
//! minimizers sweep out the whole Pareto set. This crate computes that map on
//! simplex grids, exports it, and checks numerically whether it is a
//! face-preserving diffeomorphism: corank of `df` along the Pareto set, the
//! fold criterion, injectivity, and behaviour under linear perturbations.
//!
//! Module map:
//! - [`problem`]: objective families, JSON format, strong-convexity sampling
//! - [`solver`]: damped Newton scalarization and the derivative of `x*`
//! - [`atlas`]: barycentric grids and the face-stratified Pareto atlas
//! - [`diagnostics`]: rank/corank, fold criterion, certificates
//! - [`perturb`]: linear perturbations, genericity and stability experiments
//! - [`apps`]: location, phenotypic divergence and ridge-path pipelines

pub mod apps;
pub mod atlas;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod perturb;
pub mod problem;
pub mod solver;

pub use error::{Error, Result};
pub use problem::{build_problem, FamilySpec, MultiObjective, ObjectiveProblem};
pub use solver::{scalarize, ParetoPoint, SolverConfig, Weight};
