//! Reduced transition matrices of brickwork circuits: influence matrices,
//! dual-unitary reductions, entropy bounds, replica averages and decay rates.

pub mod circuit;
pub mod decay_rates;
pub mod entropy_bounds;
pub mod error;
pub mod gates;
pub mod influence;
pub mod numkernel;
pub mod replica_average;
pub mod rtm_compress;

pub use error::{Error, ErrorKind, Result};
