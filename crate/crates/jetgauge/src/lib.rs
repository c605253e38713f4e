//! Jets of bisections of the gauge groupoid and their action on jets of
//! sections of associated bundles, with numerical verification tooling.

pub mod bundles;
pub mod connections;
pub mod error;
pub mod groupoids;
pub mod harness;
pub mod lie;
pub mod prolongation;
pub mod sampling;
pub mod taylor;

pub use error::{Error, Result};
