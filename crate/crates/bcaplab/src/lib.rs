//! Numerical laboratory for branching capacity, Brownian-snake capacity and
//! the discrete-to-continuum comparison between them.

pub mod bcap;
pub mod brw_mc;
pub mod error;
pub mod field;
pub mod lattice;
pub mod offspring;
pub mod point;
pub mod quad;
pub mod riesz;
pub mod rng;
pub mod scaling_limit;
pub mod sets;
pub mod snake;
pub mod symmetry;

pub use error::{Error, Result};
