#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod applications;
pub mod error;
pub mod estimators;
pub mod interpolants;
pub mod io;
pub mod matrix;
pub mod ortho;

pub use error::{Error, Result};
