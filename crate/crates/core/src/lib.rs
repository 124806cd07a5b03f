//! Stable nonparametric dynamical systems learned from demonstrations.
//!
//! A noise-free Gaussian-process state-space model reproduces the recorded
//! transitions exactly; a control Lyapunov function learned from the same
//! pairs certifies decrease along them; and a minimum-norm virtual control
//! restores decrease wherever the nominal model would violate it.

pub mod bench;
pub mod clf;
pub mod config;
pub mod error;
pub mod export;
pub mod gp;
pub mod gpssm;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod optim;
pub mod pipeline;
pub mod stabilizer;
pub mod synthetic;
pub mod trajectory;

pub use error::{Error, Result};
