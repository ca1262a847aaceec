//! Machine-learning pulse design for single-qubit state preparation under
//! non-Markovian bosonic noise.

pub mod config;
pub mod drl;
pub mod dynamics;
pub mod encoding;
pub mod env;
pub mod error;
pub mod io;
pub mod neural;
pub mod rollout;
pub mod sl;
pub mod taskset;

pub use error::{Error, Result};
