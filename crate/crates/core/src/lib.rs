//! Numerical loop-group toolkit for the generalized DPW method.

pub mod basepoint;
pub mod error;
pub mod factor;
pub mod fd;
pub mod grid;
pub mod linalg;
pub mod loopcore;
pub mod oracle;
pub mod pipeline;
pub mod potential;

pub use error::{DpwError, Result};
