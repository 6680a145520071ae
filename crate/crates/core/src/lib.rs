//! Coherent feedback control of linear quantum stochastic systems.
//!
//! Physical parameters are turned into quadrature state-space models, closed
//! with a plant, scored by LQG and H-infinity indices, and searched either by a
//! genetic algorithm over physical parameters or through a lifted
//! rank-constrained LMI formulation.

pub mod closedloop;
pub mod error;
pub mod exec;
pub mod ga;
pub mod io;
pub mod lmi;
pub mod model;
pub mod numerics;
pub mod performance;
pub mod registry;

pub use error::{Error, Result};
