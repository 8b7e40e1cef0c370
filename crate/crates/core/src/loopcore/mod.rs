//! Truncated twisted matrix loops and the group model they live in.

pub mod json;
mod mloop;
mod model;

pub use mloop::{MatrixLoop, Parity, TwistCheck};
pub use model::{GroupModel, Involution, RealForm};
