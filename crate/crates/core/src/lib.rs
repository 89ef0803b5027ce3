#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x >= lo)` also rejects NaN

pub mod cli;
pub mod crossfit;
pub mod data;
pub mod error;
pub mod estimators;
pub mod learners;
pub mod matrix;
pub mod sensitivity;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
