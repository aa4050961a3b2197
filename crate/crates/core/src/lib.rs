//! Memory-wall-aware parallel speedup modeling.
//!
//! The variable-delay model extends Amdahl's law with two effects that a constant
//! data-access delay cannot express: memory requests saturate once enough cores
//! compete for the memory system, and the relative cost of a memory instruction
//! grows with the ratio between processor and memory frequency. For a core count
//! `p` and frequency ratio `phi`:
//!
//! ```text
//! rho  = 1 + k * phi
//! mu_p = min(m1 + m2 / p, 1)
//! S_p  = ((1 - mu_1) + rho * mu_1)
//!        / max(((1 - mu_p) + rho * mu_p) * ((1 - f) + f / p), rho * mu_p)
//! ```
//!
//! The crate provides the model itself ([`model`]), a coupled simulated annealing
//! optimizer used to fit it ([`csa`]), kernel ridge and regression tree baselines
//! ([`ml`]), the evaluation protocols ([`harness`]) and measurement/report I/O
//! ([`io`]).
//!
//! ```
//! use memwall::model::{proposed_speedup, Config, ModelParams};
//!
//! let params = ModelParams::new(0.99, 1.0, 0.1, 0.0).unwrap();
//! let s = proposed_speedup(&params, Config::new(16, 3.0).unwrap()).unwrap();
//! assert!((s - 3.25).abs() < 1e-12);
//! ```

#![forbid(unsafe_code)]

pub mod csa;
pub mod error;
pub mod harness;
pub mod io;
pub mod ml;
pub mod model;
mod seed;

pub use error::{Error, Result};
