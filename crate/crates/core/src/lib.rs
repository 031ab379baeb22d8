//! Markov logic inference by decomposition into specialized tasks.
//!
//! A program is parsed, grounded and split by the compiler into tasks
//! (coreference, classification, chain labeling, generic MaxSAT). The master
//! solves tasks independently and reconciles their shared atoms with
//! Lagrange multipliers.

pub mod compiler;
pub mod error;
pub mod logic;
pub mod master;
pub mod parser;
pub mod relational;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Program = parser::MlnProgram<f64>;
pub type GroundDb = logic::GroundDatabase<f64>;
