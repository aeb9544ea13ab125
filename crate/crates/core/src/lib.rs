//! Exact recovery for the LP relaxation of Euclidean k-median.

pub mod certificate;
pub mod error;
pub mod experiments;
pub mod gfunction;
pub mod instance;
pub mod io;
pub mod lp;
pub mod measures;
pub mod numerics;

pub use error::{Error, Result};
