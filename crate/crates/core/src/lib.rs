//! Relative-type inexact proximal augmented Lagrangian method for convex
//! programs with linear equalities and convex inequalities, plus the
//! diagnostics needed to watch its convergence guarantees play out.

pub mod aug_lagrangian;
#[cfg(feature = "cli")]
pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod inner;
pub mod oracles;
pub mod problem;
pub mod problem_file;
pub mod solver;

pub use aug_lagrangian::Multipliers;
pub use error::{Error, Result};
pub use problem::{ConvexProgram, Matrix, Vector};
pub use solver::{run, run_with, CriterionKind, SigmaSchedule, SolverParams, Status, TauSchedule};
