//! Test problems, experiment setups and the table drivers.

mod experiments;
mod nonunique;
mod problems;
mod tables;

pub use experiments::*;
pub use nonunique::*;
pub use problems::*;
pub use tables::*;
