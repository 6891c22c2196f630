//! Cautious optimizers: sign-alignment masks on top of momentum methods,
//! the continuous Hamiltonian descent systems behind them, numerical checks
//! of their descent guarantees, and an experiment harness.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod masks;
pub mod optimizers;
pub mod problems;
pub mod verify;
pub mod vector;

pub use error::{Error, Result};
pub use masks::{apply_mask, MaskOutcome, MaskRule};
pub use optimizers::{OptimizerConfig, OptimizerState, Trajectory};
pub use problems::{make_problem, Objective, ProblemSpec};
