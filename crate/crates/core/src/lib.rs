//! Fire-sale contagion simulation and dual monotone networks that learn an
//! inverse demand function from observed shocks and equilibrium prices.

pub mod autodiff;
pub mod config;
pub mod contagion;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod idf;
pub mod net;
pub mod pipeline;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
