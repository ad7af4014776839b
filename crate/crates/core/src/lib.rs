pub mod cli;
pub mod conditions;
pub mod config;
pub mod error;
pub mod kernels;
pub mod laplace_lift;
pub mod quad;
pub mod resolvent;
pub mod shift_lift;
pub mod sim;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
