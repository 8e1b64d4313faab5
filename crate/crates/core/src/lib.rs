//! Density-driven reconfiguration planning for constrained-code schemes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bermodel;
pub mod curvefit;
pub mod error;
pub mod evaluate;
pub mod fixtures;
pub mod kkt;
pub mod lp;
pub mod offline;
pub mod online;
pub mod poly;

pub use error::{Error, Result};
