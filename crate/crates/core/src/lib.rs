//! Dictionary learning with `‖α/λ‖_p^q` sparsity penalties, and the
//! sample-complexity bound that controls how far the empirical coding cost
//! `F_X(D)` can drift from its expectation uniformly over unit-norm
//! dictionaries.
//!
//! | module            | contents                                              |
//! |-------------------|-------------------------------------------------------|
//! | [`model`]         | penalties, dictionaries, signal sets, norm inequalities |
//! | [`sparse_coding`] | per-signal solver, grid oracle, batch objective        |
//! | [`learning`]      | alternating minimization over codes and atoms          |
//! | [`bounds`]        | Lipschitz constants, covering numbers, the bound η     |
//! | [`experiments`]   | Monte Carlo gap sweeps and rate fits                   |
//! | [`io`]            | CSV matrix files                                       |

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod io;
pub mod learning;
pub mod model;
pub mod seeding;
pub mod sparse_coding;

pub use bounds::{BoundInputs, BoundReport};
pub use error::{Error, Result};
pub use experiments::{DistributionSpec, ExperimentConfig, GapCurve};
pub use learning::{LearnConfig, LearnTrace};
pub use model::{CoeffMatrix, Dictionary, Penalty, SignalSet};
pub use sparse_coding::{CodingResult, SolverConfig};
