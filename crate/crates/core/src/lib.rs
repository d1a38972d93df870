//! Holomorphic maps into orthogonal Grassmannians and the totally geodesic
//! foliations they induce.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analyzer;
pub mod builder;
pub mod error;
pub mod fstruct;
pub mod linalg;
pub mod ograss;
pub mod poly;
pub mod scenarios;

pub use error::{Error, Result};
